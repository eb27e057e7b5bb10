//! Zonal functions on `S^n`: Gauss–Jacobi nodes for the reduced surface
//! measure, orthonormal zonal harmonics `G_l`, the spectral operators `P_2s`
//! and `E_s`, a kernel-quadrature oracle for `P_2s`, deficits and the
//! stereographic lift of radial profiles on `R^n`.
//!
//! Integrals are taken against the uniform probability measure on the
//! sphere. A zonal function `f(xi . e)` is stored by its values at the
//! `Q` nodes. The `Q`-point transform onto `G_0..G_{Q-1}` is exact, so
//! coefficients beyond the cutoff `L` are kept for interpolation while the
//! spectral operators act on degrees `0..=L`.

use std::ops::{Add, Mul, Sub};
use std::sync::{Arc, OnceLock};

use rayon::prelude::*;
use serde::Serialize;

use crate::constants::{funk_hecke_table, ln_gamma, ln_sphere_area, ProblemParams};
use crate::error::{Error, Result};
use crate::quadrature::{GaussRule, JacobiRecurrence};

/// Default quadrature size for a cutoff `l`.
pub fn default_quadrature(l: usize) -> usize {
    (4 * l).max(128)
}

#[derive(Debug)]
pub struct SphereContext {
    pub params: ProblemParams,
    /// Spectral cutoff `L`.
    pub l: usize,
    /// Number of quadrature nodes `Q`.
    pub q: usize,
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
    /// `basis[i * q + k] = G_k(t_i)` for `k < q`.
    basis: Vec<f64>,
    /// `A(0..=L)`.
    multipliers: Vec<f64>,
    rec: JacobiRecurrence,
    refined: OnceLock<Result<Refined>>,
}

#[derive(Debug)]
struct Refined {
    rule: GaussRule,
}

impl SphereContext {
    pub fn new(params: ProblemParams, l: usize, q: usize) -> Result<Arc<Self>> {
        if q < l + 1 {
            return Err(Error::domain(format!("Q = {q} must be at least L + 1 = {}", l + 1)));
        }
        let half = (params.nf() - 2.0) / 2.0;
        let rule = GaussRule::jacobi(q, half, half)?;
        let rec = JacobiRecurrence::new(half, half, q)?;
        let mut basis = vec![0.0; q * q];
        basis.par_chunks_mut(q).zip(rule.nodes.par_iter()).for_each(|(row, &t)| rec.eval_into(t, row));
        if basis.iter().any(|v| !v.is_finite()) {
            return Err(Error::Quadrature(format!("zonal basis overflow at n = {}, Q = {q}", params.n)));
        }
        Ok(Arc::new(Self {
            params,
            l,
            q,
            nodes: rule.nodes,
            weights: rule.weights,
            basis,
            multipliers: funk_hecke_table(&params, l),
            rec,
            refined: OnceLock::new(),
        }))
    }

    /// Context with `Q = max(4L, 128)`.
    pub fn with_cutoff(params: ProblemParams, l: usize) -> Result<Arc<Self>> {
        Self::new(params, l, default_quadrature(l))
    }

    /// Context whose cutoff is the full discrete spectrum, `L = Q - 1`.
    pub fn full(params: ProblemParams, q: usize) -> Result<Arc<Self>> {
        Self::new(params, q - 1, q)
    }

    pub fn basis_value(&self, i: usize, k: usize) -> f64 {
        self.basis[i * self.q + k]
    }

    /// `A(l)` for `l <= L`.
    pub fn multiplier(&self, l: usize) -> f64 {
        self.multipliers[l]
    }

    pub fn multipliers(&self) -> &[f64] {
        &self.multipliers
    }

    /// `G_k(t)` for `k < count` at an arbitrary point.
    pub fn harmonics_at(&self, t: f64, count: usize) -> Vec<f64> {
        self.rec.eval(t, count)
    }

    /// Gram matrix entry `sum_i w_i G_j(t_i) G_k(t_i)`.
    pub fn gram(&self, j: usize, k: usize) -> f64 {
        (0..self.q).map(|i| self.weights[i] * self.basis_value(i, j) * self.basis_value(i, k)).sum()
    }

    fn refined(&self) -> Result<&Refined> {
        self.refined
            .get_or_init(|| {
                let half = (self.params.nf() - 2.0) / 2.0;
                let rule = GaussRule::jacobi(2 * self.q, half, half)?;
                Ok(Refined { rule })
            })
            .as_ref()
            .map_err(|e| Error::Quadrature(e.to_string()))
    }
}

#[derive(Debug, Clone)]
pub struct ZonalFunction {
    ctx: Arc<SphereContext>,
    values: Vec<f64>,
    /// Full discrete transform, length `Q`, computed on first use.
    spectrum: OnceLock<Vec<f64>>,
}

impl ZonalFunction {
    pub fn from_nodal(ctx: &Arc<SphereContext>, values: Vec<f64>) -> Result<Self> {
        if values.len() != ctx.q {
            return Err(Error::domain(format!("expected {} nodal values, got {}", ctx.q, values.len())));
        }
        Ok(Self { ctx: Arc::clone(ctx), values, spectrum: OnceLock::new() })
    }

    pub fn from_fn(ctx: &Arc<SphereContext>, f: impl Fn(f64) -> f64) -> Self {
        let values = ctx.nodes.iter().map(|&t| f(t)).collect();
        Self { ctx: Arc::clone(ctx), values, spectrum: OnceLock::new() }
    }

    pub fn constant(ctx: &Arc<SphereContext>, c: f64) -> Self {
        Self::from_fn(ctx, |_| c)
    }

    /// `sum_l a_l G_l` for `l <= L`.
    pub fn synthesize(ctx: &Arc<SphereContext>, coeffs: &[f64]) -> Result<Self> {
        if coeffs.len() > ctx.l + 1 {
            return Err(Error::Cutoff { degree: coeffs.len() - 1, cutoff: ctx.l });
        }
        Ok(Self::synthesize_unchecked(ctx, coeffs))
    }

    fn synthesize_unchecked(ctx: &Arc<SphereContext>, coeffs: &[f64]) -> Self {
        let q = ctx.q;
        let values = (0..q)
            .map(|i| {
                let row = &ctx.basis[i * q..i * q + coeffs.len()];
                row.iter().zip(coeffs).map(|(g, a)| g * a).sum()
            })
            .collect();
        let mut spectrum = vec![0.0; q];
        spectrum[..coeffs.len()].copy_from_slice(coeffs);
        let cell = OnceLock::new();
        let _ = cell.set(spectrum);
        Self { ctx: Arc::clone(ctx), values, spectrum: cell }
    }

    /// The orthonormal zonal harmonic `G_l`.
    pub fn harmonic(ctx: &Arc<SphereContext>, l: usize) -> Result<Self> {
        let mut c = vec![0.0; l + 1];
        c[l] = 1.0;
        Self::synthesize(ctx, &c)
    }

    pub fn context(&self) -> &Arc<SphereContext> {
        &self.ctx
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    fn spectrum(&self) -> &[f64] {
        self.spectrum.get_or_init(|| {
            let q = self.ctx.q;
            let mut out = vec![0.0; q];
            for (i, (&w, &f)) in self.ctx.weights.iter().zip(&self.values).enumerate() {
                let wf = w * f;
                if wf == 0.0 {
                    continue;
                }
                for (o, g) in out.iter_mut().zip(&self.ctx.basis[i * q..(i + 1) * q]) {
                    *o += wf * g;
                }
            }
            out
        })
    }

    /// `a_l = sum_i w_i f(t_i) G_l(t_i)` for `l <= L`.
    pub fn coefficients(&self) -> &[f64] {
        &self.spectrum()[..=self.ctx.l]
    }

    /// `a_l` for any `l < Q`.
    pub fn coefficient(&self, l: usize) -> Result<f64> {
        if l > self.ctx.l {
            return Err(Error::Cutoff { degree: l, cutoff: self.ctx.l });
        }
        Ok(self.spectrum()[l])
    }

    /// `||f||_2^2 - sum_{l<=L} a_l^2`: energy above the cutoff.
    pub fn truncation_energy(&self) -> f64 {
        let tail: f64 = self.spectrum()[self.ctx.l + 1..].iter().map(|a| a * a).sum();
        tail
    }

    /// Band-limited part, degrees `0..=L`.
    pub fn truncated(&self) -> Self {
        Self::synthesize_unchecked(&self.ctx, self.coefficients())
    }

    /// Value of the degree-`(Q-1)` interpolant at `t`.
    pub fn eval(&self, t: f64) -> f64 {
        self.ctx.rec.series(self.spectrum(), t)
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Self {
        Self::from_nodal(&self.ctx, self.values.iter().map(|&v| f(v)).collect()).expect("same length")
    }

    pub fn zip_map(&self, other: &Self, f: impl Fn(f64, f64) -> f64) -> Self {
        debug_assert!(Arc::ptr_eq(&self.ctx, &other.ctx) || self.ctx.q == other.ctx.q);
        let v = self.values.iter().zip(&other.values).map(|(&a, &b)| f(a, b)).collect();
        Self::from_nodal(&self.ctx, v).expect("same length")
    }

    pub fn integrate(&self) -> f64 {
        self.ctx.weights.iter().zip(&self.values).map(|(w, v)| w * v).sum()
    }

    /// `int f g`.
    pub fn dot(&self, other: &Self) -> f64 {
        self.ctx.weights.iter().zip(&self.values).zip(&other.values).map(|((w, a), b)| w * a * b).sum()
    }

    pub fn lp_norm(&self, p: f64) -> f64 {
        lp_norm_with(&self.ctx.weights, &self.values, p)
    }

    /// `||f||_p` on the `2Q` rule using the band-limited interpolant.
    pub fn lp_norm_refined(&self, p: f64) -> Result<f64> {
        let refined = self.ctx.refined()?;
        let coeffs = self.coefficients();
        let vals: Vec<f64> = refined.rule.nodes.par_iter().map(|&t| self.ctx.rec.series(coeffs, t)).collect();
        Ok(lp_norm_with(&refined.rule.weights, &vals, p))
    }

    pub fn min(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max(&self) -> f64 {
        self.values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    fn multiply(&self, factor: impl Fn(usize) -> f64) -> Self {
        let c: Vec<f64> = self.coefficients().iter().enumerate().map(|(l, a)| a * factor(l)).collect();
        Self::synthesize_unchecked(&self.ctx, &c)
    }

    /// `P_2s f`, acting as `a_l -> A(l) a_l` on degrees `<= L`.
    pub fn apply_p2s(&self) -> Self {
        self.multiply(|l| self.ctx.multipliers[l])
    }

    /// `E_s f`, the inverse multiplier `a_l -> a_l / A(l)`.
    pub fn apply_es(&self) -> Self {
        self.multiply(|l| 1.0 / self.ctx.multipliers[l])
    }

    /// `<P_2s f, g>` computed spectrally.
    pub fn p2s_form(&self, other: &Self) -> f64 {
        spectral_form(self.coefficients(), other.coefficients(), &self.ctx.multipliers, false)
    }

    /// `<E_s f, g>` computed spectrally.
    pub fn es_form(&self, other: &Self) -> f64 {
        spectral_form(self.coefficients(), other.coefficients(), &self.ctx.multipliers, true)
    }
}

fn spectral_form(a: &[f64], b: &[f64], mult: &[f64], inverse: bool) -> f64 {
    a.iter()
        .zip(b)
        .zip(mult)
        .map(|((x, y), m)| if inverse { x * y / m } else { x * y * m })
        .sum()
}

fn lp_norm_with(weights: &[f64], values: &[f64], p: f64) -> f64 {
    let scale = values.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    if scale == 0.0 || !scale.is_finite() {
        return scale;
    }
    let s: f64 = weights.iter().zip(values).map(|(w, v)| w * (v.abs() / scale).powf(p)).sum();
    scale * s.powf(1.0 / p)
}

impl Add for &ZonalFunction {
    type Output = ZonalFunction;
    fn add(self, rhs: Self) -> ZonalFunction {
        self.zip_map(rhs, |a, b| a + b)
    }
}

impl Sub for &ZonalFunction {
    type Output = ZonalFunction;
    fn sub(self, rhs: Self) -> ZonalFunction {
        self.zip_map(rhs, |a, b| a - b)
    }
}

impl Mul<f64> for &ZonalFunction {
    type Output = ZonalFunction;
    fn mul(self, rhs: f64) -> ZonalFunction {
        self.map(|a| a * rhs)
    }
}

/// Normalizing constant of the kernel `|xi - eta|^{-(n-2s)}` against the
/// probability measure, `|S^n| Gamma((n+2s)/2) / (2^{2s} pi^{n/2} Gamma(s))`.
pub fn kernel_constant(params: &ProblemParams) -> f64 {
    let (n, s) = (params.nf(), params.s);
    (ln_sphere_area(params.n) + ln_gamma((n + 2.0 * s) / 2.0)
        - 2.0 * s * 2f64.ln()
        - (n / 2.0) * std::f64::consts::PI.ln()
        - ln_gamma(s))
    .exp()
}

/// `int |xi - eta|^{-(n-2s)} d sigma(eta)` over the probability measure,
/// evaluated from the Beta integral in `x = xi . eta`.
pub fn kernel_mass(params: &ProblemParams) -> f64 {
    let (n, s) = (params.nf(), params.s);
    let ln2 = 2f64.ln();
    let ln_beta = |a: f64, b: f64| ln_gamma(a) + ln_gamma(b) - ln_gamma(a + b);
    let ln = -(n - 2.0 * s) / 2.0 * ln2 + (s + n / 2.0 - 1.0) * ln2 + ln_beta(s, n / 2.0)
        - (n - 1.0) * ln2
        - ln_beta(n / 2.0, n / 2.0);
    ln.exp()
}

/// Sizes of the two inner rules of the kernel oracle.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct OracleRule {
    /// Nodes in `x = xi . eta` with the kernel folded into the weight.
    pub radial: usize,
    /// Nodes in the azimuthal cosine on `S^{n-1}`.
    pub azimuthal: usize,
}

impl OracleRule {
    pub fn for_degree(d: usize) -> Self {
        let m = d / 2 + 16;
        Self { radial: m, azimuthal: m }
    }
}

/// `P_2s f` at the nodes by direct integration against the kernel.
///
/// For `xi . e = t`, write `eta = x xi + sqrt(1-x^2) zeta` with
/// `u = eta . e = x t + sqrt(1-x^2) sqrt(1-t^2) v`. The kernel and the
/// density of `x` combine into the Jacobi weight `(1-x)^{s-1}(1+x)^{(n-2)/2}`;
/// `v` has density proportional to `(1-v^2)^{(n-3)/2}`. The constant mode
/// `f(t)` is subtracted inside the integral and restored with the exact mass.
pub fn kernel_p2s_oracle(f: &ZonalFunction, rule: Option<OracleRule>) -> Result<ZonalFunction> {
    let ctx = f.context();
    let params = ctx.params;
    let spec = f.spectrum();
    let scale = spec.iter().fold(0.0f64, |m, a| m.max(a.abs()));
    let degree = spec.iter().rposition(|a| a.abs() > 1e-15 * scale).unwrap_or(0);
    let coeffs = &spec[..=degree];
    let rule = rule.unwrap_or_else(|| OracleRule::for_degree(degree));
    let n = params.nf();
    let xr = GaussRule::jacobi(rule.radial, params.s - 1.0, (n - 2.0) / 2.0)?;
    let vr = GaussRule::jacobi(rule.azimuthal, (n - 3.0) / 2.0, (n - 3.0) / 2.0)?;
    let mass = kernel_constant(&params) * kernel_mass(&params);
    let rec = &ctx.rec;
    let values: Vec<f64> = ctx
        .nodes
        .par_iter()
        .map(|&t| {
            let ft = rec.series(coeffs, t);
            let st = (1.0 - t * t).max(0.0).sqrt();
            let mut acc = 0.0;
            for (&x, &wx) in xr.nodes.iter().zip(&xr.weights) {
                let sx = (1.0 - x * x).max(0.0).sqrt();
                let mut inner = 0.0;
                for (&v, &wv) in vr.nodes.iter().zip(&vr.weights) {
                    let u = (x * t + sx * st * v).clamp(-1.0, 1.0);
                    inner += wv * (rec.series(coeffs, u) - ft);
                }
                acc += wx * inner;
            }
            mass * (acc + ft)
        })
        .collect();
    ZonalFunction::from_nodal(ctx, values)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Side {
    Hls,
    Sobolev,
}

#[derive(Debug, Clone, Serialize)]
pub struct DeficitReport {
    pub side: Side,
    /// `||g||_p^2` (HLS) or `||u||_q^2` (Sobolev).
    pub lp_norm_sq: f64,
    /// `<P_2s g, g>` (HLS) or `<E_s u, u>` (Sobolev).
    pub quadratic_form: f64,
    pub deficit: f64,
    /// The squared norm recomputed on the doubled rule.
    pub refined_lp_norm_sq: Option<f64>,
    /// Energy above the spectral cutoff.
    pub truncation: f64,
}

/// `||g||_p^2 - <P_2s g, g>`.
pub fn hls_deficit(g: &ZonalFunction) -> DeficitReport {
    let p = g.context().params.p;
    let norm = g.lp_norm(p).powi(2);
    let form = g.p2s_form(g);
    DeficitReport {
        side: Side::Hls,
        lp_norm_sq: norm,
        quadratic_form: form,
        deficit: norm - form,
        refined_lp_norm_sq: g.lp_norm_refined(p).ok().map(|v| v * v),
        truncation: g.truncation_energy(),
    }
}

/// `<E_s u, u> - ||u||_q^2`.
pub fn sobolev_deficit(u: &ZonalFunction) -> DeficitReport {
    let q = u.context().params.q;
    let norm = u.lp_norm(q).powi(2);
    let form = u.es_form(u);
    DeficitReport {
        side: Side::Sobolev,
        lp_norm_sq: norm,
        quadratic_form: form,
        deficit: form - norm,
        refined_lp_norm_sq: u.lp_norm_refined(q).ok().map(|v| v * v),
        truncation: u.truncation_energy(),
    }
}

/// `rho` of the point of `R^n` whose image has height `t`.
pub fn radius_of_height(t: f64) -> f64 {
    ((1.0 + t) / (1.0 - t)).sqrt()
}

pub fn height_of_radius(rho: f64) -> f64 {
    let r2 = rho * rho;
    (r2 - 1.0) / (r2 + 1.0)
}

/// Conformal weight `((1 + rho^2)/2)^{n/p}`.
pub fn conformal_weight(n: usize, p: f64, rho: f64) -> f64 {
    (n as f64 / p * ((1.0 + rho * rho) / 2.0).ln()).exp()
}

/// `F(t) = ((1+rho^2)/2)^{n/p} f(rho)` at the nodes, so that
/// `int_{R^n} |f|^p dx = |S^n| int |F|^p d sigma`.
pub fn stereographic_lift(ctx: &Arc<SphereContext>, profile: impl Fn(f64) -> f64, p: f64) -> Result<ZonalFunction> {
    let n = ctx.params.n;
    let values: Vec<f64> = ctx
        .nodes
        .iter()
        .map(|&t| {
            let rho = radius_of_height(t);
            conformal_weight(n, p, rho) * profile(rho)
        })
        .collect();
    if let Some(i) = values.iter().position(|v| !v.is_finite()) {
        return Err(Error::Quadrature(format!(
            "lifted profile not finite at rho = {:.6e}; decay too slow for the exponent",
            radius_of_height(ctx.nodes[i])
        )));
    }
    let total: f64 = ctx.weights.iter().zip(&values).map(|(w, v)| w * v.abs().powf(p)).sum();
    let last = ctx.q - 1;
    let edge = ctx.weights[last] * values[last].abs().powf(p);
    if total > 0.0 && edge > 1e-3 * total {
        return Err(Error::Quadrature(format!(
            "lifted profile carries {:.3e} of its mass on the outermost node; decay too slow",
            edge / total
        )));
    }
    ZonalFunction::from_nodal(ctx, values)
}

/// Radial profile `f(rho)` recovered from a lifted function.
pub fn stereographic_inverse(f: &ZonalFunction, p: f64, rho: f64) -> f64 {
    let n = f.context().params.n;
    f.eval(height_of_radius(rho)) / conformal_weight(n, p, rho)
}

/// `(rho_i, f(rho_i))` at the radii of the nodes.
pub fn stereographic_inverse_nodes(f: &ZonalFunction, p: f64) -> Vec<(f64, f64)> {
    let n = f.context().params.n;
    f.context()
        .nodes
        .iter()
        .zip(f.values())
        .map(|(&t, &v)| {
            let rho = radius_of_height(t);
            (rho, v / conformal_weight(n, p, rho))
        })
        .collect()
}
