//! Gauss–Jacobi quadrature and orthonormal Jacobi polynomials for the
//! probability measure proportional to `(1-x)^alpha (1+x)^beta` on `[-1, 1]`.
//!
//! Nodes come from the Golub–Welsch eigenproblem, are polished by Newton
//! steps on the degree-`Q` polynomial, and weights are recomputed from the
//! Christoffel function so they sum to one to rounding.

use nalgebra::DMatrix;

use crate::error::{Error, Result};

/// Three-term recurrence of the orthonormal polynomials:
/// `sb[k+1] P_{k+1} = (x - a[k]) P_k - sb[k] P_{k-1}`, with `P_0 = 1`.
#[derive(Debug, Clone)]
pub struct JacobiRecurrence {
    pub alpha: f64,
    pub beta: f64,
    a: Vec<f64>,
    sb: Vec<f64>,
}

impl JacobiRecurrence {
    pub fn new(alpha: f64, beta: f64, degree: usize) -> Result<Self> {
        if !(alpha > -1.0 && beta > -1.0) {
            return Err(Error::Quadrature(format!("alpha = {alpha}, beta = {beta} must exceed -1")));
        }
        let ab = alpha + beta;
        let mut a = Vec::with_capacity(degree + 1);
        let mut sb = Vec::with_capacity(degree + 2);
        sb.push(0.0);
        for k in 0..=degree {
            let kf = k as f64;
            let ak = if k == 0 {
                (beta - alpha) / (ab + 2.0)
            } else {
                (beta * beta - alpha * alpha) / ((2.0 * kf + ab) * (2.0 * kf + ab + 2.0))
            };
            a.push(ak);
            let k1 = kf + 1.0;
            let bk = if k == 0 {
                4.0 * (1.0 + alpha) * (1.0 + beta) / ((2.0 + ab).powi(2) * (3.0 + ab))
            } else {
                let t = 2.0 * k1 + ab;
                4.0 * k1 * (k1 + alpha) * (k1 + beta) * (k1 + ab) / (t * t * (t + 1.0) * (t - 1.0))
            };
            sb.push(bk.sqrt());
        }
        Ok(Self { alpha, beta, a, sb })
    }

    pub fn degree(&self) -> usize {
        self.a.len() - 1
    }

    /// `P_0(x), ..., P_deg(x)` written into `out`.
    pub fn eval_into(&self, x: f64, out: &mut [f64]) {
        let deg = out.len();
        if deg == 0 {
            return;
        }
        out[0] = 1.0;
        if deg == 1 {
            return;
        }
        out[1] = (x - self.a[0]) / self.sb[1];
        for k in 1..deg - 1 {
            out[k + 1] = ((x - self.a[k]) * out[k] - self.sb[k] * out[k - 1]) / self.sb[k + 1];
        }
    }

    pub fn eval(&self, x: f64, count: usize) -> Vec<f64> {
        let mut v = vec![0.0; count];
        self.eval_into(x, &mut v);
        v
    }

    /// `P_deg(x)` and its derivative.
    fn value_and_derivative(&self, x: f64, deg: usize) -> (f64, f64) {
        let (mut p0, mut p1) = (0.0, 1.0);
        let (mut d0, mut d1) = (0.0, 0.0);
        for k in 0..deg {
            let p2 = ((x - self.a[k]) * p1 - self.sb[k] * p0) / self.sb[k + 1];
            let d2 = ((x - self.a[k]) * d1 + p1 - self.sb[k] * d0) / self.sb[k + 1];
            p0 = p1;
            p1 = p2;
            d0 = d1;
            d1 = d2;
        }
        (p1, d1)
    }

    /// Sum of `sum_{j<k} P_j(x) c_j` by forward recurrence.
    pub fn series(&self, coeffs: &[f64], x: f64) -> f64 {
        let mut acc = 0.0;
        let (mut p0, mut p1) = (0.0, 1.0);
        for (k, &c) in coeffs.iter().enumerate() {
            acc += c * p1;
            if k + 1 < coeffs.len() {
                let p2 = ((x - self.a[k]) * p1 - self.sb[k] * p0) / self.sb[k + 1];
                p0 = p1;
                p1 = p2;
            }
        }
        acc
    }
}

#[derive(Debug, Clone)]
pub struct GaussRule {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl GaussRule {
    /// `q`-point rule for the normalized Jacobi weight.
    pub fn jacobi(q: usize, alpha: f64, beta: f64) -> Result<Self> {
        if q == 0 {
            return Err(Error::Quadrature("rule needs at least one node".into()));
        }
        let rec = JacobiRecurrence::new(alpha, beta, q)?;
        let mut jm = DMatrix::<f64>::zeros(q, q);
        for k in 0..q {
            jm[(k, k)] = rec.a[k];
            if k + 1 < q {
                jm[(k, k + 1)] = rec.sb[k + 1];
                jm[(k + 1, k)] = rec.sb[k + 1];
            }
        }
        let mut nodes: Vec<f64> = jm.symmetric_eigenvalues().iter().copied().collect();
        nodes.sort_by(f64::total_cmp);
        for x in nodes.iter_mut() {
            for _ in 0..3 {
                let (p, d) = rec.value_and_derivative(*x, q);
                if d == 0.0 || !d.is_finite() {
                    break;
                }
                let step = p / d;
                if !step.is_finite() || step.abs() > 1e-6 {
                    break;
                }
                *x -= step;
            }
        }
        let mut vals = vec![0.0; q];
        let mut weights = Vec::with_capacity(q);
        for &x in &nodes {
            rec.eval_into(x, &mut vals);
            let ss: f64 = vals.iter().map(|v| v * v).sum();
            weights.push(1.0 / ss);
        }
        let total: f64 = weights.iter().sum();
        if !total.is_finite() || (total - 1.0).abs() > 1e-10 {
            return Err(Error::Quadrature(format!(
                "weights sum to {total} for q = {q}, alpha = {alpha}, beta = {beta}"
            )));
        }
        if nodes.windows(2).any(|w| !(w[0] < w[1])) || nodes.iter().any(|x| !(x.abs() < 1.0)) {
            return Err(Error::Quadrature(format!("nodes not distinct inside (-1, 1) for q = {q}")));
        }
        Ok(Self { nodes, weights })
    }

    pub fn integrate(&self, f: impl Fn(f64) -> f64) -> f64 {
        self.nodes.iter().zip(&self.weights).map(|(&x, &w)| w * f(x)).sum()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::constants::ln_gamma;

    fn beta_moment(alpha: f64, beta: f64, k: i32) -> f64 {
        // E[(1+x)^k] for the normalized weight
        let ln = (k as f64) * 2f64.ln() + ln_gamma(beta + 1.0 + k as f64) + ln_gamma(alpha + beta + 2.0)
            - ln_gamma(beta + 1.0)
            - ln_gamma(alpha + beta + 2.0 + k as f64);
        ln.exp()
    }

    #[test]
    fn exact_moments() {
        for (a, b) in [(0.0, 0.0), (-0.5, 1.0), (0.5, 0.5), (3.0, 3.0), (-0.5, 0.5), (14.0, 14.0)] {
            let rule = GaussRule::jacobi(12, a, b).unwrap();
            for k in 0..=23 {
                let got = rule.integrate(|x| (1.0 + x).powi(k));
                let want = beta_moment(a, b, k);
                assert!(((got - want) / want).abs() < 1e-12, "a={a} b={b} k={k}: {got} vs {want}");
            }
        }
    }

    #[test]
    fn legendre_nodes_known() {
        let rule = GaussRule::jacobi(2, 0.0, 0.0).unwrap();
        let x = 1.0 / 3f64.sqrt();
        assert!((rule.nodes[0] + x).abs() < 1e-15 && (rule.nodes[1] - x).abs() < 1e-15);
        assert!((rule.weights[0] - 0.5).abs() < 1e-15);
    }

    #[test]
    fn orthonormality_large_rule() {
        for (a, b) in [(0.5, 0.5), (29.0, 29.0), (-0.5, 1.0)] {
            let q = 200;
            let rule = GaussRule::jacobi(q, a, b).unwrap();
            let total: f64 = rule.weights.iter().sum();
            assert!((total - 1.0).abs() < 1e-13);
            let rec = JacobiRecurrence::new(a, b, q).unwrap();
            let vals: Vec<Vec<f64>> = rule.nodes.iter().map(|&x| rec.eval(x, q)).collect();
            for i in (0..q).step_by(13) {
                for j in (0..q).step_by(17) {
                    let g: f64 = (0..q).map(|m| rule.weights[m] * vals[m][i] * vals[m][j]).sum();
                    let want = if i == j { 1.0 } else { 0.0 };
                    assert!((g - want).abs() < 1e-10, "a={a} i={i} j={j} g={g}");
                }
            }
        }
    }

    #[test]
    fn series_matches_explicit_sum() {
        let rec = JacobiRecurrence::new(1.0, 1.0, 10).unwrap();
        let c = [0.3, -1.0, 0.25, 2.0, 0.0, 1e-3];
        for x in [-0.9, -0.1, 0.4, 0.99] {
            let v = rec.eval(x, c.len());
            let direct: f64 = v.iter().zip(&c).map(|(a, b)| a * b).sum();
            assert!((rec.series(&c, x) - direct).abs() < 1e-14);
        }
    }

    #[test]
    fn rejects_bad_parameters() {
        assert!(GaussRule::jacobi(0, 0.0, 0.0).is_err());
        assert!(GaussRule::jacobi(4, -1.0, 0.0).is_err());
    }
}
