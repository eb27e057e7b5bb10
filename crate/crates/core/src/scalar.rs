//! Pointwise inequalities for `(1+r)^p - 1 - p r` used by the certificate,
//! the construction of their constants, and brute-force grid certification.

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};

/// Parameters of the three-way split of `r` and of the tail estimate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SplitParams {
    pub gamma: f64,
    #[serde(rename = "M")]
    pub m: f64,
    pub p0: f64,
    pub eps: f64,
    #[serde(rename = "N")]
    pub n: u64,
}

impl SplitParams {
    pub fn new(gamma: f64, m: f64, p0: f64, eps: f64, n: u64) -> Result<Self> {
        if !(gamma > 0.0) {
            return Err(Error::domain(format!("gamma = {gamma} must be positive")));
        }
        if !(m >= 2.0 * gamma) {
            return Err(Error::domain(format!("M = {m} must be at least 2 gamma = {}", 2.0 * gamma)));
        }
        if !(p0 > 1.0 && p0 < 2.0) {
            return Err(Error::domain(format!("p0 = {p0} must lie in (1, 2)")));
        }
        if !(eps > 0.0) {
            return Err(Error::domain(format!("eps = {eps} must be positive")));
        }
        if !((n as f64) > n_floor_bar(p0)) {
            return Err(Error::domain(format!(
                "N = {n} must exceed p0/(2(p0-1)) = {}",
                n_floor_bar(p0)
            )));
        }
        Ok(Self { gamma, m, p0, eps, n })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ScalarConstants {
    pub c1_mn: f64,
    pub c1_n: f64,
    pub c2_mn: f64,
    pub c3_mn: f64,
    pub c_m: f64,
    pub c_mn: f64,
    pub c_qest: f64,
    /// Size of the `p`-grid used to make `C2` and `C3` uniform in `p`.
    pub p_grid: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ViolationReport {
    pub grid: String,
    pub points: usize,
    pub count: usize,
    pub worst_residual: f64,
    pub worst_r: f64,
    pub worst_p: f64,
    pub tolerance: f64,
}

impl ViolationReport {
    pub fn certified(&self) -> bool {
        self.count == 0
    }
}

/// Grid over `(p, r)` for brute-force certification.
#[derive(Debug, Clone, PartialEq)]
pub struct CertGrid {
    pub p_values: Vec<f64>,
    pub r_values: Vec<f64>,
    pub tolerance: f64,
}

impl CertGrid {
    /// `p_count` values on `[p_lo, p_hi]` and `points` values of `r` on
    /// `[-1, r_max]`: uniform on `[-1, 1]`, log-spaced above, plus `extra`.
    pub fn new(p_lo: f64, p_hi: f64, p_count: usize, r_max: f64, points: usize, extra: &[f64]) -> Self {
        let p_values = linspace(p_lo, p_hi, p_count.max(1));
        let mut r_values = Vec::with_capacity(points + extra.len() * 3);
        if r_max > 1.0 {
            let lin = points / 2;
            let log = points - lin;
            r_values.extend(linspace(-1.0, 1.0, lin.max(2)));
            let (a, b) = (0f64, r_max.ln());
            for i in 1..log {
                r_values.push((a + (b - a) * i as f64 / log as f64).exp());
            }
            r_values.push(r_max);
        } else {
            r_values.extend(linspace(-1.0, r_max, points.max(2)));
        }
        for &x in extra {
            if x >= -1.0 && x <= r_max {
                r_values.push(x);
                let h = 1e-9 * x.abs().max(1.0);
                r_values.extend([x - h, x + h].into_iter().filter(|&y| y >= -1.0 && y <= r_max));
            }
        }
        r_values.sort_by(f64::total_cmp);
        r_values.dedup();
        Self { p_values, r_values, tolerance: 1e-10 }
    }

    pub fn describe(&self) -> String {
        format!(
            "p in [{}, {}] x {} values; r in [{}, {}] x {} values",
            self.p_values.first().unwrap_or(&f64::NAN),
            self.p_values.last().unwrap_or(&f64::NAN),
            self.p_values.len(),
            self.r_values.first().unwrap_or(&f64::NAN),
            self.r_values.last().unwrap_or(&f64::NAN),
            self.r_values.len()
        )
    }
}

pub(crate) fn linspace(a: f64, b: f64, k: usize) -> Vec<f64> {
    if k == 1 {
        return vec![b];
    }
    (0..k).map(|i| a + (b - a) * i as f64 / (k - 1) as f64).collect()
}

/// `r1 = min(r, gamma)`, `r2 = min((r-gamma)+, M-gamma)`, `r3 = (r-M)+`.
pub fn split_scalar(r: f64, gamma: f64, m: f64) -> Result<(f64, f64, f64)> {
    if !(r >= -1.0) {
        return Err(Error::domain(format!("r = {r} is below -1")));
    }
    if !(gamma > 0.0 && gamma < m) {
        return Err(Error::domain(format!("need 0 < gamma < M, got gamma = {gamma}, M = {m}")));
    }
    Ok(split_unchecked(r, gamma, m))
}

#[inline]
pub(crate) fn split_unchecked(r: f64, gamma: f64, m: f64) -> (f64, f64, f64) {
    let r1 = r.min(gamma);
    let r2 = (r - gamma).max(0.0).min(m - gamma);
    let r3 = (r - m).max(0.0);
    (r1, r2, r3)
}

/// Double-double accumulator so that residuals that vanish identically at
/// `p = 2` are not swamped by rounding of terms of size `r^2`.
#[derive(Debug, Clone, Copy, Default)]
struct Dd {
    hi: f64,
    lo: f64,
}

impl Dd {
    fn add(self, x: f64) -> Self {
        let s = self.hi + x;
        let bb = s - self.hi;
        let err = (self.hi - (s - bb)) + (x - bb);
        let lo = self.lo + err;
        let hi = s + lo;
        Self { hi, lo: lo - (hi - s) }
    }

    fn add_dd(self, o: Dd) -> Self {
        self.add(o.hi).add(o.lo)
    }

    fn prod(a: f64, b: f64) -> Self {
        let hi = a * b;
        Self { hi, lo: a.mul_add(b, -hi) }
    }

    fn scale(self, c: f64) -> Self {
        Dd::prod(self.hi, c).add(self.lo * c)
    }

    fn neg(self) -> Self {
        Self { hi: -self.hi, lo: -self.lo }
    }

    fn value(self) -> f64 {
        self.hi + self.lo
    }
}

/// `x^p`, exact in double-double when `p = 2`.
fn pow_dd(x: f64, p: f64) -> Dd {
    if p == 2.0 {
        Dd::prod(x, x)
    } else {
        Dd { hi: x.powf(p), lo: 0.0 }
    }
}

/// `(1+r)^p - 1 - p r` in double-double.
fn excess_dd(p: f64, r: f64) -> Dd {
    if p == 2.0 {
        return Dd::prod(r, r);
    }
    if p == 1.0 {
        return Dd::default();
    }
    if r == -1.0 {
        return Dd { hi: p - 1.0, lo: 0.0 };
    }
    // expm1(p ln1p r) is accurate near r = 0; the p r term is exact in dd.
    Dd { hi: (p * r.ln_1p()).exp_m1(), lo: 0.0 }.add_dd(Dd::prod(p, r).neg())
}

/// `(1+r)^p - 1 - p r`, accurate near `r = 0` and exact at `p = 2`.
pub fn excess(p: f64, r: f64) -> f64 {
    excess_dd(p, r).value()
}

/// `(1+r)^p - 1 - p r - p(p-1) r^2 / 2 + (2-p) (r+)^3`; nonnegative for `p` in `[1,2]`.
pub fn cubic_bound_residual(p: f64, r: f64) -> Result<f64> {
    if !(1.0..=2.0).contains(&p) {
        return Err(Error::domain(format!("p = {p} must lie in [1, 2]")));
    }
    if !(r >= -1.0) {
        return Err(Error::domain(format!("r = {r} is below -1")));
    }
    let theta = 2.0 - p;
    let rp = r.max(0.0);
    let v = excess_dd(p, r)
        .add_dd(Dd::prod(r, r).scale(-0.5 * p * (p - 1.0)))
        .add_dd(Dd::prod(rp, rp).scale(rp).scale(theta));
    Ok(v.value())
}

fn n_floor_bar(p0: f64) -> f64 {
    p0 / (2.0 * (p0 - 1.0))
}

/// Smallest integer strictly above `p0/(2(p0-1))`.
pub fn n_floor(p0: f64) -> u64 {
    n_floor_bar(p0).floor() as u64 + 1
}

fn c3_at(m: f64, p0: f64, p: f64, n: f64) -> f64 {
    let l = n.ln();
    let k = n.powf(2.0 - p0) * l;
    (1.0 + m) / n * (1.0 + 2.0 * k) + (1.0 + m).powi(2) / (n * n) * ((p + 1.0) / 2.0 + k)
}

/// `C_M`: the least constant with `C3(N) <= C_M N^{1-p0} ln N` for every
/// `N` in the sweep `[floor, 2^30]`.
pub fn tail_constant(p0: f64, m: f64) -> Result<f64> {
    let floor = n_floor(p0);
    let mut best = 0.0f64;
    let mut argmax = floor;
    let mut eval = |n: u64| {
        let nf = n as f64;
        let ratio = c3_at(m, p0, 2.0, nf) / (nf.powf(1.0 - p0) * nf.ln());
        if ratio > best {
            best = ratio;
            argmax = n;
        }
    };
    let dense_end = floor + 10_000;
    for n in floor..=dense_end {
        eval(n);
    }
    let mut n = dense_end as f64;
    while n < (1u64 << 30) as f64 {
        n *= 1.01;
        eval(n as u64);
    }
    if !best.is_finite() || argmax > dense_end {
        return Err(Error::Numerical(format!(
            "no finite C_M: supremum of C3/(N^(1-p0) ln N) not attained in the sweep (argmax N = {argmax})"
        )));
    }
    Ok(best)
}

pub const P_GRID: usize = 64;

pub fn build_constants(sp: &SplitParams) -> Result<ScalarConstants> {
    let m = sp.m;
    let nf = sp.n as f64;
    let c1_mn = (1.0 + m + nf).powi(2) * (1.0 + m + nf).ln();
    let c1_n = nf * nf * nf.ln();
    let ps = linspace(sp.p0, 2.0, P_GRID);
    let c2_mn = ps.iter().map(|&p| nf.powf(p - 3.0) * (1.0 + m).powi(3)).fold(f64::MIN, f64::max);
    let c3_mn = ps.iter().map(|&p| c3_at(m, sp.p0, p, nf)).fold(f64::MIN, f64::max);
    let c_m = tail_constant(sp.p0, m)?;
    let c_mn = (c1_mn + c1_n).max(c2_mn).max(8.5 * m.powi(3)) / (m * m);
    let c_qest = 5.0 * c_mn + 8.0 / sp.gamma;
    Ok(ScalarConstants { c1_mn, c1_n, c2_mn, c3_mn, c_m, c_mn, c_qest, p_grid: P_GRID })
}

/// Smallest `N > p0/(2(p0-1))` with `C_M N^{1-p0} ln N <= eps`.
pub fn select_n(p0: f64, m: f64, eps: f64) -> Result<u64> {
    if !(p0 > 1.0 && p0 < 2.0) {
        return Err(Error::domain(format!("p0 = {p0} must lie in (1, 2)")));
    }
    if !(eps > 0.0) {
        return Err(Error::domain(format!("eps = {eps} must be positive")));
    }
    let c_m = tail_constant(p0, m)?;
    let ok = |n: u64| {
        let nf = n as f64;
        c_m * nf.powf(1.0 - p0) * nf.ln() <= eps
    };
    const CAP: u64 = 1 << 30;
    let floor = n_floor(p0);
    // N^{1-p0} ln N increases up to e^{1/(p0-1)} and decreases after.
    let peak = (1.0 / (p0 - 1.0)).exp().ceil() as u64 + 1;
    for n in floor..=peak.max(floor) {
        if ok(n) {
            return Ok(n);
        }
    }
    let mut hi = peak.max(floor);
    while !ok(hi) {
        if hi >= CAP {
            return Err(Error::Numerical(format!("eps = {eps} unattainable for N <= 2^30")));
        }
        hi = (hi * 2).min(CAP);
    }
    let mut lo = hi / 2;
    while hi - lo > 1 {
        let mid = lo + (hi - lo) / 2;
        if ok(mid) {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(hi)
}

/// The three-term tail coefficient `C_M N^{1-p0} ln N`.
pub fn tail_coefficient(sp: &SplitParams, c: &ScalarConstants) -> f64 {
    let nf = sp.n as f64;
    c.c_m * nf.powf(1.0 - sp.p0) * nf.ln()
}

/// LHS - RHS of the split inequality with the `C_{M,N}` corrections.
pub fn proposition1_residual(p: f64, r: f64, sp: &SplitParams, c: &ScalarConstants) -> f64 {
    let theta = 2.0 - p;
    let (r1, r2, r3) = split_unchecked(r, sp.gamma, sp.m);
    let tail = tail_coefficient(sp, c);
    let r12 = Dd::default().add(r1).add(r2);
    let mut rhs = Dd::prod(r12.hi, r12.hi)
        .add(2.0 * r12.hi * r12.lo)
        .scale(0.5 * p * (p - 1.0))
        .add_dd(r12.scale(2.0 * r3))
        .add_dd(pow_dd(r3, p).scale(1.0 - tail * theta));
    if r <= sp.m {
        rhs = rhs
            .add_dd(Dd::prod(r1, r1).scale(-(2.0 / 3.0) * sp.gamma * theta))
            .add_dd(Dd::prod(r2, r2).scale(-c.c_mn * theta));
    } else {
        rhs = rhs.add(-c.c_mn * theta * sp.m * sp.m);
    }
    excess_dd(p, r).add_dd(rhs.neg()).value()
}

/// LHS - RHS of the quadratic estimate with constant `C_qest`.
pub fn qestimate_residual(p: f64, r: f64, sp: &SplitParams, c: &ScalarConstants) -> f64 {
    let theta = 2.0 - p;
    let (r1, r2, r3) = split_unchecked(r, sp.gamma, sp.m);
    let a = 0.5 * p * (p - 1.0);
    let r12 = Dd::default().add(r1).add(r2);
    let rhs = Dd::prod(r1, r1)
        .scale(a - 2.0 * sp.gamma * theta)
        .add_dd(Dd::prod(r2, r2).scale(a - c.c_qest * theta))
        .add_dd(Dd::prod(r1, r2).scale(2.0))
        .add_dd(r12.scale(2.0 * r3))
        .add_dd(pow_dd(r3, p).scale(1.0 - sp.eps * theta));
    excess_dd(p, r).add_dd(rhs.neg()).value()
}

/// Evaluates `residual` on every grid point and counts values below `-tolerance`.
pub fn certify<F>(grid: &CertGrid, residual: F) -> ViolationReport
where
    F: Fn(f64, f64) -> f64 + Sync,
{
    let tol = grid.tolerance;
    let (count, worst) = grid
        .p_values
        .par_iter()
        .map(|&p| {
            let mut count = 0usize;
            let mut worst = (f64::INFINITY, f64::NAN, p);
            for &r in &grid.r_values {
                let v = residual(p, r);
                if !(v >= -tol) {
                    count += 1;
                }
                if v < worst.0 || v.is_nan() {
                    worst = (v, r, p);
                }
            }
            (count, worst)
        })
        .reduce(
            || (0, (f64::INFINITY, f64::NAN, f64::NAN)),
            |a, b| (a.0 + b.0, if b.1 .0 < a.1 .0 || b.1 .0.is_nan() { b.1 } else { a.1 }),
        );
    ViolationReport {
        grid: grid.describe(),
        points: grid.p_values.len() * grid.r_values.len(),
        count,
        worst_residual: worst.0,
        worst_r: worst.1,
        worst_p: worst.2,
        tolerance: tol,
    }
}

pub fn certify_cubic_bound(grid: &CertGrid) -> ViolationReport {
    certify(grid, |p, r| cubic_bound_residual(p, r).unwrap_or(f64::NAN))
}

pub fn certify_proposition1(sp: &SplitParams, c: &ScalarConstants, grid: &CertGrid) -> ViolationReport {
    certify(grid, |p, r| proposition1_residual(p, r, sp, c))
}

pub fn certify_qestimate(sp: &SplitParams, c: &ScalarConstants, grid: &CertGrid) -> ViolationReport {
    certify(grid, |p, r| qestimate_residual(p, r, sp, c))
}

/// Split corners where the inequalities are tightest.
pub fn corner_points(sp: &SplitParams) -> Vec<f64> {
    vec![0.0, sp.gamma, sp.m, sp.m + sp.n as f64]
}

/// Location of the minimum of `p/t - 2 t^{1-p}`.
pub fn h_minimizer(p: f64) -> f64 {
    (p / (2.0 * (p - 1.0))).powf(1.0 / (2.0 - p))
}

/// Location of the minimum of `p(p-1)/(2t^2) - t^{-p}`.
pub fn g_minimizer(p: f64) -> f64 {
    (p - 1.0).powf(1.0 / (2.0 - p))
}

/// Largest `h_minimizer(p)` over `p` in `[p0, 2)`, sampled.
pub fn h_minimizer_sup(p0: f64) -> f64 {
    linspace(p0, 2.0 - 1e-6, 2001).into_iter().map(h_minimizer).fold(f64::MIN, f64::max)
}
