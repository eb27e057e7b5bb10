//! Local stability near the constant function: admissible perturbations,
//! the three-way split of `r`, the division of the deficit of `1 + r` into a
//! coercive term plus `I1 + I2 + I3`, and the constants that make each
//! piece nonnegative.

use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::constants::{thresholds, Delta2Exponent, ProblemParams, ThresholdSet};
use crate::error::{Error, Result};
use crate::scalar::{build_constants, select_n, split_unchecked, SplitParams};
use crate::sphere::{hls_deficit, SphereContext, ZonalFunction};

#[derive(Debug, Clone, Serialize)]
pub struct CertificateParams {
    pub eps1: f64,
    pub eps2: f64,
    pub vartheta: f64,
    pub sigma0: f64,
    pub gamma: f64,
    #[serde(rename = "M")]
    pub m: f64,
    pub p0: f64,
    /// Cutoff of the tail estimate behind `c_qest`.
    pub n_tail: u64,
    pub c_qest: f64,
    /// Coercive constant assembled from the proof; not stated explicitly.
    pub c_coercive: f64,
    pub selection: KSelection,
    pub thresholds: ThresholdSet,
}

impl CertificateParams {
    /// `eps1 = 1/16`, `eps2 = 1/8`, `vartheta = 1/2`, `sigma0 = 1/8`.
    pub fn defaults(params: &ProblemParams) -> Result<Self> {
        Self::new(params, 1.0 / 16.0, 1.0 / 8.0)
    }

    pub fn new(params: &ProblemParams, eps1: f64, eps2: f64) -> Result<Self> {
        if !(params.nf() > 14.0 * params.s) {
            return Err(Error::domain(format!("need n > 14 s, got n = {}, s = {}", params.n, params.s)));
        }
        let (vartheta, sigma0, p0) = (0.5, SIGMA0, 1.75);
        let (sp, c_qest, selection) = certificate_selection(params.s, eps1, eps2)?;
        let thresholds = thresholds(params, eps1, eps2, selection.k0, selection.n0, Delta2Exponent::Instance)?;
        let c_coercive = coercive_constant(params.p, vartheta, eps1, eps2, c_qest);
        Ok(Self {
            eps1,
            eps2,
            vartheta,
            sigma0,
            gamma: sp.gamma,
            m: sp.m,
            p0,
            n_tail: sp.n,
            c_qest,
            c_coercive,
            selection,
            thresholds,
        })
    }
}

pub const SIGMA0: f64 = 0.125;

/// Split parameters, `c_qest` and the `(K0, n0)` selection for `gamma = eps1/2`,
/// `M = max(1, 2 gamma)`, `p0 = 7/4` and tail parameter `eps2`.
pub fn certificate_selection(s: f64, eps1: f64, eps2: f64) -> Result<(SplitParams, f64, KSelection)> {
    let p0 = 1.75;
    let gamma = eps1 / 2.0;
    let m = (2.0 * gamma).max(1.0);
    let n_tail = select_n(p0, m, eps2)?;
    let sp = SplitParams::new(gamma, m, p0, eps2, n_tail)?;
    let c_qest = build_constants(&sp)?.c_qest;
    Ok((sp, c_qest, select_k_n0(s, c_qest, SIGMA0)?))
}

/// `(2/p) vartheta min(eps1, C, eps2) / 3`: the coercive term bounds each
/// `||r_i||_p^2` from below, and `||r||_p^2 <= 3 sum ||r_i||_p^2`.
pub fn coercive_constant(p: f64, vartheta: f64, eps1: f64, eps2: f64, c_qest: f64) -> f64 {
    (2.0 / p) * vartheta * eps1.min(eps2).min(c_qest) / 3.0
}

pub struct Split {
    pub r1: ZonalFunction,
    pub r2: ZonalFunction,
    pub r3: ZonalFunction,
}

pub fn split(r: &ZonalFunction, gamma: f64, m: f64) -> Split {
    let parts: Vec<(f64, f64, f64)> = r.values().iter().map(|&v| split_unchecked(v, gamma, m)).collect();
    let ctx = r.context();
    let pick = |f: fn(&(f64, f64, f64)) -> f64| {
        ZonalFunction::from_nodal(ctx, parts.iter().map(f).collect()).expect("same length")
    };
    Split { r1: pick(|x| x.0), r2: pick(|x| x.1), r3: pick(|x| x.2) }
}

/// `sum_i <P r_i, r_i> + 2 int (r1 r2 + r2 r3 + r1 r3) - <P r, r>`.
pub fn split_lemma_residual(r: &ZonalFunction, gamma: f64, m: f64) -> f64 {
    let Split { r1, r2, r3 } = split(r, gamma, m);
    let diag = r1.p2s_form(&r1) + r2.p2s_form(&r2) + r3.p2s_form(&r3);
    let cross = 2.0 * (r1.dot(&r2) + r2.dot(&r3) + r1.dot(&r3));
    diag + cross - r.p2s_form(r)
}

#[derive(Debug, Clone, Serialize)]
pub struct Admissibility {
    pub min_value: f64,
    pub mean: f64,
    pub degree_one: f64,
    pub lp_norm_sq: f64,
    pub delta0: Option<f64>,
    pub failures: Vec<String>,
}

impl Admissibility {
    pub fn admissible(&self) -> bool {
        self.failures.is_empty()
    }
}

/// Checks `r >= -1`, zero mean, no degree-one part and, when given,
/// `||r||_p^2 <= delta0`.
pub fn verify_admissibility(r: &ZonalFunction, delta0: Option<f64>) -> Admissibility {
    let p = r.context().params.p;
    let scale = r.lp_norm(2.0).max(1.0);
    let tol = 1e-10 * scale;
    let mut failures = Vec::new();
    let min_value = r.min();
    let c = r.coefficients();
    let (mean, degree_one) = (c[0], c.get(1).copied().unwrap_or(0.0));
    let lp_norm_sq = r.lp_norm(p).powi(2);
    if min_value < -1.0 {
        failures.push(format!("r falls to {min_value:.6e} below -1"));
    }
    if mean.abs() > tol {
        failures.push(format!("mean {mean:.3e} is not zero"));
    }
    if degree_one.abs() > tol {
        failures.push(format!("degree-one coefficient {degree_one:.3e} is not zero"));
    }
    if let Some(d) = delta0 {
        if !(lp_norm_sq <= d) {
            failures.push(format!("||r||_p^2 = {lp_norm_sq:.6e} exceeds delta0 = {d:.6e}"));
        }
    }
    Admissibility { min_value, mean, degree_one, lp_norm_sq, delta0, failures }
}

#[derive(Debug, Clone, Serialize)]
pub struct DeficitBreakdown {
    #[serde(rename = "I1")]
    pub i1: f64,
    #[serde(rename = "I2")]
    pub i2: f64,
    #[serde(rename = "I3")]
    pub i3: f64,
    pub coercive: f64,
    pub total_lower_bound: f64,
    pub deficit: f64,
    /// `||r1||^2 - (mean^2 + degree-one^2 + ||r1~||^2)`.
    pub r1_spectral_residual: f64,
}

impl DeficitBreakdown {
    pub fn slack(&self) -> f64 {
        self.deficit - self.total_lower_bound
    }
}

pub fn deficit_breakdown(r: &ZonalFunction, cp: &CertificateParams) -> Result<DeficitBreakdown> {
    let adm = verify_admissibility(r, None);
    if !adm.admissible() {
        return Err(Error::domain(format!("inadmissible r: {}", adm.failures.join("; "))));
    }
    let ctx = r.context();
    let params = ctx.params;
    let (p, theta) = (params.p, params.theta);
    let (e1, e2, vt, s0, c) = (cp.eps1, cp.eps2, cp.vartheta, cp.sigma0, cp.c_qest);
    let Split { r1, r2, r3 } = split(r, cp.gamma, cp.m);
    let r1_sq = r1.dot(&r1);
    let r2_sq = r2.dot(&r2);
    let r3_p = r3.lp_norm(p).powf(p);

    let c1 = r1.coefficients();
    let higher: f64 = c1[2.min(c1.len())..].iter().map(|a| a * a).sum::<f64>() + r1.truncation_energy();
    let r1_spectral_residual = r1_sq - (c1[0] * c1[0] + c1.get(1).map_or(0.0, |a| a * a) + higher);

    let i1 = (p - 1.0 - (2.0 / p) * e1 * (1.0 + vt) * theta) * r1_sq - r1.p2s_form(&r1) + s0 * theta * (r2_sq + r3_p);
    let i2 = (p - 1.0 - (2.0 / p) * c * (1.0 + vt) * theta - s0 * theta) * r2_sq - r2.p2s_form(&r2);
    let i3 = ((2.0 / p) * (1.0 - e2 * (1.0 + vt) * theta) - s0 * theta) * r3_p - r3.p2s_form(&r3);
    let coercive = (2.0 / p) * vt * theta * (e1 * r1_sq + c * r2_sq + e2 * r3_p);
    let one_plus = r.map(|v| 1.0 + v);
    let deficit = hls_deficit(&one_plus).deficit;
    Ok(DeficitBreakdown {
        i1,
        i2,
        i3,
        coercive,
        total_lower_bound: coercive + i1 + i2 + i3,
        deficit,
        r1_spectral_residual,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct KSelection {
    #[serde(rename = "K0")]
    pub k0: u64,
    pub n0: u64,
    /// `1 + (12/7) C + sigma0`.
    pub b: f64,
    /// The condition re-checked at `n0, 2 n0, 4 n0`.
    pub recheck: bool,
}

/// `(2/3)(2K/(n+2K)) >= (4s/(n+2s)) B`.
pub fn k_condition(s: f64, b: f64, k: f64, n: f64) -> bool {
    (2.0 / 3.0) * (2.0 * k / (n + 2.0 * k)) >= 4.0 * s / (n + 2.0 * s) * b
}

/// Smallest `n` satisfying the condition for a given `K`, if any.
fn min_n_for(s: f64, b: f64, k: f64) -> Option<f64> {
    // n (4K - 12 s B) >= 24 s B K - 8 s K
    let lead = 4.0 * k - 12.0 * s * b;
    if lead <= 0.0 {
        return None;
    }
    let mut n = ((24.0 * s * b * k - 8.0 * s * k) / lead).ceil().max(1.0);
    while !k_condition(s, b, k, n) {
        n += 1.0;
    }
    Some(n)
}

/// Cap on `K0` and `n0`.
pub const SELECTION_CAP: f64 = 1e18;

/// `(K0, n0)` minimizing `K0 + n0` subject to the condition.
pub fn select_k_n0(s: f64, c_qest: f64, sigma0: f64) -> Result<KSelection> {
    let b = 1.0 + 12.0 / 7.0 * c_qest + sigma0;
    let k_min = (3.0 * s * b).floor() + 1.0;
    // K + n(K) is unimodal in K
    let cost = |k: f64| min_n_for(s, b, k).map(|n| k + n);
    let (mut lo, mut hi) = (k_min, k_min.max(1.0) * 64.0);
    if hi > SELECTION_CAP {
        return Err(Error::Overflow(format!("K sweep exceeds {SELECTION_CAP:e}")));
    }
    while hi - lo > 2.0 {
        let m1 = (lo + (hi - lo) / 3.0).floor();
        let m2 = (hi - (hi - lo) / 3.0).ceil();
        match (cost(m1), cost(m2)) {
            (Some(a), Some(b2)) if a <= b2 => hi = m2,
            (Some(_), Some(_)) => lo = m1,
            _ => lo = m1 + 1.0,
        }
    }
    let mut best: Option<(f64, f64)> = None;
    for k in (lo as u64).saturating_sub(2)..=(hi as u64 + 2) {
        let kf = k as f64;
        if let Some(n) = min_n_for(s, b, kf) {
            if best.is_none_or(|(bk, bn)| kf + n < bk + bn) {
                best = Some((kf, n));
            }
        }
    }
    let (k0, n0) = best.ok_or_else(|| Error::Numerical("no K satisfies the selection condition".into()))?;
    if n0 > SELECTION_CAP {
        return Err(Error::Overflow(format!("n0 = {n0:e} exceeds {SELECTION_CAP:e}")));
    }
    let recheck = [1.0, 2.0, 4.0].iter().all(|f| k_condition(s, b, k0, f * n0));
    Ok(KSelection { k0: k0 as u64, n0: n0 as u64, b, recheck })
}

/// `(2/p)(1 - eps2 (1+vartheta) theta) - sigma0 theta - (1 + s/(2n))`.
pub fn i3_coefficient_margin(params: &ProblemParams, eps2: f64, vartheta: f64, sigma0: f64) -> f64 {
    let (p, theta) = (params.p, params.theta);
    (2.0 / p) * (1.0 - eps2 * (1.0 + vartheta) * theta) - sigma0 * theta - (1.0 + params.s / (2.0 * params.nf()))
}

/// `(p - 1)^{l/2} - ||G_l||_p` for `p >= 2`.
pub fn duke_bound_check(ctx: &Arc<SphereContext>, l: usize, p: f64) -> Result<f64> {
    if p < 2.0 {
        return Err(Error::domain(format!("exponent {p} must be at least 2")));
    }
    let g = ZonalFunction::harmonic(ctx, l)?;
    Ok((p - 1.0).powf(l as f64 / 2.0) - g.lp_norm(p))
}

/// `3^{K/2} gamma^{-p/4} delta0^{p/8} ||r2||_2 - ||Pi_K r2||_2`, with
/// `delta0 = ||r||_p^2` unless given.
pub fn projection_bound_check(r: &ZonalFunction, k: usize, gamma: f64, m: f64, delta0: Option<f64>) -> f64 {
    let p = r.context().params.p;
    let delta0 = delta0.unwrap_or_else(|| r.lp_norm(p).powi(2));
    let r2 = split(r, gamma, m).r2;
    let c = r2.coefficients();
    let low: f64 = c[..k.min(c.len())].iter().map(|a| a * a).sum::<f64>().sqrt();
    let bound = 3f64.powf(k as f64 / 2.0) * gamma.powf(-p / 4.0) * delta0.powf(p / 8.0) * r2.lp_norm(2.0);
    bound - low
}

/// `deficit(1 + r) / ||r||_p^2`.
pub fn local_stability_ratio(r: &ZonalFunction) -> Result<f64> {
    let p = r.context().params.p;
    let norm = r.lp_norm(p).powi(2);
    if !(norm > 0.0) {
        return Err(Error::domain("r has zero norm"));
    }
    Ok(hls_deficit(&r.map(|v| 1.0 + v)).deficit / norm)
}

/// Random `r` with spectrum on degrees `2..=degree`, `r >= -1` and
/// `||r||_p^2 = target`. Coefficients are uniform in the pole-normalized
/// basis `G_l / G_l(1)`.
pub fn random_admissible(ctx: &Arc<SphereContext>, rng: &mut impl Rng, degree: usize, target: f64) -> Result<ZonalFunction> {
    if degree < 2 || degree > ctx.l {
        return Err(Error::domain(format!("degree {degree} must lie in 2..={}", ctx.l)));
    }
    let p = ctx.params.p;
    let pole = ctx.harmonics_at(1.0, degree + 1);
    for _ in 0..1000 {
        let mut c = vec![0.0; degree + 1];
        for (l, a) in c.iter_mut().enumerate().skip(2) {
            // G_l / G_l(1) is bounded by one on [-1, 1]
            *a = rng.random_range(-1.0..1.0) / pole[l];
        }
        let r = ZonalFunction::synthesize(ctx, &c)?;
        let scale = target.sqrt() / r.lp_norm(p);
        let r = &r * scale;
        if r.min() >= -1.0 {
            return Ok(r);
        }
    }
    Err(Error::Numerical(format!("no admissible draw at target {target:e} after 1000 tries")))
}

pub fn seeded_rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn full(n: usize, s: f64) -> Arc<SphereContext> {
        SphereContext::full(ProblemParams::new(n, s).unwrap(), 160).unwrap()
    }

    #[test]
    fn admissibility_cases() {
        let c = full(30, 1.0);
        let g2 = ZonalFunction::harmonic(&c, 2).unwrap();
        assert!(verify_admissibility(&(&g2 * 1e-3), None).admissible());
        let g1 = ZonalFunction::harmonic(&c, 1).unwrap();
        assert!(!verify_admissibility(&g1, None).admissible());
        let low = ZonalFunction::from_fn(&c, |t| -1.5 * (1.0 - t));
        let adm = verify_admissibility(&low, Some(1e-3));
        assert!(adm.failures.len() >= 3);
    }

    #[test]
    fn split_identity_below_gamma() {
        let c = full(30, 1.0);
        let r = &ZonalFunction::harmonic(&c, 2).unwrap() * 1e-3;
        assert!(r.max() < 1.0 / 32.0);
        assert!(split_lemma_residual(&r, 1.0 / 32.0, 1.0).abs() < 1e-15);
    }

    #[test]
    fn split_lemma_on_bump() {
        let c = full(30, 1.0);
        let gamma = 1.0 / 32.0;
        let bump = ZonalFunction::from_fn(&c, |t| gamma + (1.0 - gamma) * ((t - 1.0) * 40.0).exp());
        let mean = bump.integrate();
        let r = bump.map(|v| v - mean);
        assert!(split_lemma_residual(&r, gamma, 1.0) >= -1e-9);
        let mut rng = seeded_rng(7);
        for _ in 0..20 {
            let r = random_admissible(&c, &mut rng, 40, 0.2).unwrap();
            assert!(split_lemma_residual(&r, gamma, 1.0) >= -1e-9);
        }
    }

    #[test]
    fn selection_is_monotone_and_rechecked() {
        let a = select_k_n0(1.0, 1e3, 0.125).unwrap();
        let b = select_k_n0(1.0, 1e4, 0.125).unwrap();
        assert!(a.recheck && b.recheck);
        assert!(b.k0 >= a.k0 && b.n0 >= a.n0);
        assert!(k_condition(1.0, a.b, a.k0 as f64, a.n0 as f64));
        assert!(!k_condition(1.0, a.b, a.k0 as f64, a.n0 as f64 - 1.0) || a.n0 == 1);
    }

    #[test]
    fn i3_chain() {
        for (n, s) in [(15, 1.0), (30, 1.0), (60, 2.0), (200, 0.5)] {
            let p = ProblemParams::new(n, s).unwrap();
            assert!(i3_coefficient_margin(&p, 0.125, 0.5, 0.125) >= 0.0);
        }
    }

    #[test]
    fn duke_bound() {
        for n in [4, 10, 30] {
            let c = SphereContext::new(ProblemParams::new(n, 1.0).unwrap(), 8, 256).unwrap();
            assert!(duke_bound_check(&c, 0, 3.0).unwrap().abs() < 1e-13);
            for l in 1..=6 {
                for p in [2.0, 3.0, 4.0, 5.0, 6.0, 7.0] {
                    assert!(duke_bound_check(&c, l, p).unwrap() >= -1e-9, "n={n} l={l} p={p}");
                }
            }
        }
    }

    #[test]
    fn degree_two_breakdown() {
        let params = ProblemParams::new(30, 1.0).unwrap();
        let cp = CertificateParams::defaults(&params).unwrap();
        let c = full(30, 1.0);
        let zero = ZonalFunction::constant(&c, 0.0);
        let b0 = deficit_breakdown(&zero, &cp).unwrap();
        assert!(b0.i1 == 0.0 && b0.i2 == 0.0 && b0.i3 == 0.0 && b0.deficit.abs() < 1e-15);
        let r = &ZonalFunction::harmonic(&c, 2).unwrap() * 1e-3;
        let b = deficit_breakdown(&r, &cp).unwrap();
        assert!(b.i1 >= -1e-10 && b.i2 >= -1e-10 && b.i3 >= -1e-10, "{b:?}");
        assert!(b.slack() >= -1e-9);
        assert!(b.r1_spectral_residual.abs() < 1e-10);
    }

    #[test]
    fn breakdown_with_tail_past_m() {
        let params = ProblemParams::new(30, 1.0).unwrap();
        let cp = CertificateParams::defaults(&params).unwrap();
        let c = full(30, 1.0);
        let g2 = ZonalFunction::harmonic(&c, 2).unwrap();
        let tail = ZonalFunction::from_fn(&c, |t| 3.0 * ((t - 1.0) * 30.0).exp());
        let mix = &(&g2 * 0.01) + &tail;
        let c0 = mix.coefficients()[0];
        let c1 = mix.coefficients()[1];
        let g1 = ZonalFunction::harmonic(&c, 1).unwrap();
        let r = &mix.map(|v| v - c0) - &(&g1 * c1);
        assert!(r.max() > cp.m && r.min() >= -1.0);
        let b = deficit_breakdown(&r, &cp).unwrap();
        assert!(split(&r, cp.gamma, cp.m).r3.max() > 0.0);
        assert!(b.slack() >= -1e-9, "{b:?}");
    }

    #[test]
    fn projection_bound_samples() {
        let c = full(30, 1.0);
        let mut rng = seeded_rng(11);
        for _ in 0..20 {
            let r = random_admissible(&c, &mut rng, 40, 0.05).unwrap();
            for k in [1, 2, 4, 8] {
                assert!(projection_bound_check(&r, k, 1.0 / 32.0, 1.0, None) >= -1e-9);
            }
        }
    }

    #[test]
    fn ratio_in_quadratic_regime() {
        let c = full(30, 1.0);
        let g2 = ZonalFunction::harmonic(&c, 2).unwrap();
        let a = local_stability_ratio(&(&g2 * 1e-3)).unwrap();
        let b = local_stability_ratio(&(&g2 * 5e-4)).unwrap();
        assert!(a > 0.0 && ((a - b) / b).abs() < 0.05);
        assert!(local_stability_ratio(&ZonalFunction::constant(&c, 0.0)).is_err());
    }
}
