//! The zonal slice of the extremizer manifold, projection onto it in the
//! `<P_2s ., .>` metric, Euler–Lagrange residuals and the comparability and
//! reverse-bound checks.

use std::sync::Arc;

use serde::Serialize;

use crate::constants::comparability_bound;
use crate::error::{Error, Result};
use crate::sphere::{SphereContext, ZonalFunction};

/// Closest approach of `|tau|` to 1.
pub const TAU_MARGIN: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Extremizer {
    pub c: f64,
    pub tau: f64,
}

impl Extremizer {
    pub fn new(c: f64, tau: f64) -> Result<Self> {
        if !(tau.abs() < 1.0) || !c.is_finite() {
            return Err(Error::domain(format!("extremizer needs |tau| < 1 and finite c, got c = {c}, tau = {tau}")));
        }
        Ok(Self { c, tau })
    }

    /// `c (sqrt(1 - tau^2) / (1 - tau t))^{(n+2s)/2}`.
    pub fn value(&self, exponent: f64, t: f64) -> f64 {
        self.c * unit_profile(self.tau, exponent, t)
    }

    pub fn profile(&self, ctx: &Arc<SphereContext>) -> ZonalFunction {
        let e = ctx.params.profile_exponent();
        ZonalFunction::from_fn(ctx, |t| self.value(e, t))
    }
}

fn unit_profile(tau: f64, exponent: f64, t: f64) -> f64 {
    if tau == 0.0 {
        return 1.0;
    }
    (exponent * (0.5 * (1.0 - tau * tau).ln() - (1.0 - tau * t).ln())).exp()
}

/// `d/dtau` of the unit profile.
fn unit_profile_dtau(tau: f64, exponent: f64, t: f64) -> f64 {
    unit_profile(tau, exponent, t) * exponent * (t / (1.0 - tau * t) - tau / (1.0 - tau * tau))
}

/// Largest `|tau|` whose profile the context resolves: the spectral tail
/// of the profile decays like `|tau|^l`, so `|tau|^Q` must stay below rounding.
pub fn tau_limit(ctx: &SphereContext) -> f64 {
    let resolved = (1e-13f64.ln() / ctx.q as f64).exp();
    resolved.min(1.0 - TAU_MARGIN)
}

pub fn extremizer_profile(e: &Extremizer, ctx: &Arc<SphereContext>) -> ZonalFunction {
    e.profile(ctx)
}

#[derive(Debug, Clone, Serialize)]
pub struct DecompositionResult {
    /// `None` when the minimizer is pinned to the boundary and the manifold
    /// point degenerates to zero.
    pub phi: Option<Extremizer>,
    #[serde(skip)]
    pub r: ZonalFunction,
    /// `<P_2s r, r>`.
    pub hs_distance_sq: f64,
    /// `||r||_p`.
    pub lp_distance: f64,
    /// `<P_2s r, u_tau>` and `<P_2s r, d_tau u_tau>`.
    pub ortho_residuals: (f64, f64),
    pub degenerate: bool,
}

/// Objective after eliminating `c`, with the pieces needed to rebuild it.
struct Probe {
    tau: f64,
    value: f64,
    c: f64,
}

struct Projector<'a> {
    g: &'a ZonalFunction,
    pg_g: f64,
    pg: ZonalFunction,
    exponent: f64,
}

impl<'a> Projector<'a> {
    fn new(g: &'a ZonalFunction) -> Self {
        let pg = g.apply_p2s();
        Self { g, pg_g: pg.dot(g), pg, exponent: g.context().params.profile_exponent() }
    }

    fn unit(&self, tau: f64) -> ZonalFunction {
        let e = self.exponent;
        ZonalFunction::from_fn(self.g.context(), |t| unit_profile(tau, e, t))
    }

    fn probe(&self, tau: f64) -> Probe {
        let u = self.unit(tau);
        let pgu = self.pg.dot(&u);
        let puu = u.p2s_form(&u);
        let c = pgu / puu;
        Probe { tau, value: self.pg_g - pgu * c, c }
    }

    /// `<P_2s (g - c* u), d_tau u>`, zero at interior critical points.
    fn slope(&self, tau: f64) -> f64 {
        let e = self.exponent;
        let ctx = self.g.context();
        let u = self.unit(tau);
        let du = ZonalFunction::from_fn(ctx, |t| unit_profile_dtau(tau, e, t));
        let c = self.pg.dot(&u) / u.p2s_form(&u);
        (self.pg.dot(&du)) - c * u.p2s_form(&du)
    }
}

fn golden_section(f: impl Fn(f64) -> f64, mut a: f64, mut b: f64, tol: f64) -> f64 {
    let r = (5f64.sqrt() - 1.0) / 2.0;
    let mut x1 = b - r * (b - a);
    let mut x2 = a + r * (b - a);
    let (mut f1, mut f2) = (f(x1), f(x2));
    while b - a > tol {
        if f1 <= f2 {
            b = x2;
            x2 = x1;
            f2 = f1;
            x1 = b - r * (b - a);
            f1 = f(x1);
        } else {
            a = x1;
            x1 = x2;
            f1 = f2;
            x2 = a + r * (b - a);
            f2 = f(x2);
        }
    }
    0.5 * (a + b)
}

/// Local minima of the `c`-eliminated objective from `starts` brackets.
fn local_minima(proj: &Projector, starts: usize, limit: f64) -> Vec<Probe> {
    let starts = starts.max(9);
    let width = 2.0 * limit / starts as f64;
    let mut out: Vec<Probe> = (0..starts)
        .map(|k| {
            let a = -limit + k as f64 * width;
            let tau = golden_section(|t| proj.probe(t).value, a, a + width, 1e-10);
            polish(proj, tau, limit)
        })
        .collect();
    out.sort_by(|x, y| x.value.total_cmp(&y.value));
    out
}

/// Secant steps on the slope, kept only if they do not raise the objective.
fn polish(proj: &Projector, tau: f64, limit: f64) -> Probe {
    let mut best = proj.probe(tau);
    if tau.abs() >= limit - 1e-9 {
        return best;
    }
    let (mut x0, mut x1) = (tau, (tau + 1e-7).min(limit));
    let (mut s0, mut s1) = (proj.slope(x0), proj.slope(x1));
    for _ in 0..20 {
        if s1 == s0 || !s1.is_finite() {
            break;
        }
        let x2 = (x1 - s1 * (x1 - x0) / (s1 - s0)).clamp(-limit, limit);
        x0 = x1;
        s0 = s1;
        x1 = x2;
        s1 = proj.slope(x1);
        let cand = proj.probe(x1);
        if cand.value <= best.value {
            best = cand;
        }
        if (x1 - x0).abs() < 1e-15 {
            break;
        }
    }
    best
}

fn decomposition(proj: &Projector, best: &Probe, limit: f64) -> DecompositionResult {
    let g = proj.g;
    let ctx = g.context();
    let p = ctx.params.p;
    let pinned = best.tau.abs() >= limit - 1e-8;
    if pinned {
        return DecompositionResult {
            phi: None,
            r: g.clone(),
            hs_distance_sq: proj.pg_g,
            lp_distance: g.lp_norm(p),
            ortho_residuals: (0.0, 0.0),
            degenerate: true,
        };
    }
    let phi = Extremizer { c: best.c, tau: best.tau };
    let v = phi.profile(ctx);
    let r = g - &v;
    let pr = r.apply_p2s();
    let e = proj.exponent;
    let u = proj.unit(best.tau);
    let du = ZonalFunction::from_fn(ctx, |t| unit_profile_dtau(best.tau, e, t));
    DecompositionResult {
        phi: Some(phi),
        hs_distance_sq: pr.dot(&r),
        lp_distance: r.lp_norm(p),
        ortho_residuals: (pr.dot(&u), pr.dot(&du)),
        degenerate: false,
        r,
    }
}

/// Nearest manifold point to `g` in the `<P_2s ., .>` metric.
pub fn project_hminus_s(g: &ZonalFunction) -> Result<DecompositionResult> {
    project_with_starts(g, 9)
}

pub fn project_with_starts(g: &ZonalFunction, starts: usize) -> Result<DecompositionResult> {
    if g.values().iter().all(|&v| v == 0.0) {
        return Err(Error::domain("cannot project the zero function"));
    }
    let proj = Projector::new(g);
    let limit = tau_limit(g.context());
    let minima = local_minima(&proj, starts, limit);
    Ok(decomposition(&proj, &minima[0], limit))
}

/// Sup over nodes of `|P_2s v - ||v||_p^theta |v|^{-theta} v|`, relative to `sup |v|`.
pub fn euler_lagrange_residual(e: &Extremizer, ctx: &Arc<SphereContext>) -> f64 {
    let params = ctx.params;
    let v = e.profile(ctx);
    let pv = v.apply_p2s();
    let scale = v.lp_norm(params.p).powf(params.theta);
    let sup = v.values().iter().fold(0.0f64, |m, x| m.max(x.abs()));
    v.values()
        .iter()
        .zip(pv.values())
        .map(|(&x, &px)| (px - scale * x.abs().powf(-params.theta) * x).abs())
        .fold(0.0f64, f64::max)
        / sup
}

#[derive(Debug, Clone, Serialize)]
#[serde(tag = "outcome", rename_all = "lowercase")]
pub enum ComparabilityReport {
    Unique { tau: f64 },
    Tied { taus: Vec<f64>, lp_distances: Vec<f64>, ratio: f64, bound: f64 },
}

impl ComparabilityReport {
    pub fn within_bound(&self) -> bool {
        match self {
            Self::Unique { .. } => true,
            Self::Tied { ratio, bound, .. } => ratio <= bound,
        }
    }
}

/// Relative objective gap below which two minimizers count as tied.
pub const TIE_TOLERANCE: f64 = 1e-9;

pub fn comparability_check(g: &ZonalFunction, starts: usize) -> Result<ComparabilityReport> {
    let proj = Projector::new(g);
    let limit = tau_limit(g.context());
    let minima = local_minima(&proj, starts, limit);
    let best = minima[0].value;
    let mut tied: Vec<&Probe> = Vec::new();
    for m in &minima {
        let close = (m.value - best).abs() <= TIE_TOLERANCE * best.abs().max(proj.pg_g.abs());
        if close && tied.iter().all(|t| (t.tau - m.tau).abs() > 1e-6) {
            tied.push(m);
        }
    }
    if tied.len() < 2 {
        return Ok(ComparabilityReport::Unique { tau: minima[0].tau });
    }
    let dists: Vec<f64> = tied.iter().map(|m| decomposition(&proj, m, limit).lp_distance).collect();
    let hi = dists.iter().copied().fold(0.0f64, f64::max);
    let lo = dists.iter().copied().fold(f64::INFINITY, f64::min);
    Ok(ComparabilityReport::Tied {
        taus: tied.iter().map(|m| m.tau).collect(),
        ratio: if lo > 0.0 { hi / lo } else { f64::INFINITY },
        lp_distances: dists,
        bound: comparability_bound(&g.context().params),
    })
}

/// `((n+2s)/(n-2s)) 2^{2s/n} <P_2s d, d> - ||d||_p^2` for `d = v1 - v2`.
pub fn reverse_bound_check(e1: &Extremizer, e2: &Extremizer, ctx: &Arc<SphereContext>) -> f64 {
    let params = ctx.params;
    let (n, s) = (params.nf(), params.s);
    let d = &e1.profile(ctx) - &e2.profile(ctx);
    let factor = (n + 2.0 * s) / (n - 2.0 * s) * 2f64.powf(2.0 * s / n);
    factor * d.p2s_form(&d) - d.lp_norm(params.p).powi(2)
}

/// Objective at an extremizer centred off the axis: `|tau|` along a
/// direction at angle `beta` from the pole. Rotation acts on each degree
/// by `G_l(cos beta) / G_l(1)`.
pub fn off_axis_objective(g: &ZonalFunction, tau: f64, beta: f64) -> f64 {
    let ctx = g.context();
    let e = ctx.params.profile_exponent();
    let u = ZonalFunction::from_fn(ctx, |t| unit_profile(tau, e, t));
    let a = g.coefficients();
    let b = u.coefficients();
    let count = a.len();
    let at_angle = ctx.harmonics_at(beta.cos(), count);
    let at_pole = ctx.harmonics_at(1.0, count);
    let cross: f64 = (0..count).map(|l| ctx.multiplier(l) * a[l] * b[l] * at_angle[l] / at_pole[l]).sum();
    g.p2s_form(g) - cross * cross / u.p2s_form(&u)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::constants::ProblemParams;
    use crate::sphere::hls_deficit;

    fn ctx(n: usize, s: f64) -> Arc<SphereContext> {
        SphereContext::full(ProblemParams::new(n, s).unwrap(), 128).unwrap()
    }

    #[test]
    fn profile_values() {
        let c = ctx(4, 1.0);
        let one = Extremizer::new(1.0, 0.0).unwrap().profile(&c);
        assert!(one.values().iter().all(|&v| v == 1.0));
        let e = Extremizer::new(1.0, 0.5).unwrap();
        assert!((e.value(3.0, 1.0) - (0.75f64.sqrt() / 0.5).powi(3)).abs() < 1e-12);
        assert!(Extremizer::new(1.0, 1.0).is_err());
    }

    #[test]
    fn profiles_have_zero_deficit_and_solve_el() {
        let c = ctx(4, 1.0);
        for (cc, tau) in [(1.0, 0.0), (1.0, 0.5), (3.0, 0.5), (0.2, -0.7)] {
            let e = Extremizer::new(cc, tau).unwrap();
            let v = e.profile(&c);
            let d = hls_deficit(&v);
            assert!(d.deficit.abs() <= 1e-9 * d.lp_norm_sq, "c={cc} tau={tau} {:?}", d);
            assert!(euler_lagrange_residual(&e, &c) < 1e-7);
        }
    }

    #[test]
    fn projection_of_manifold_point() {
        let c = ctx(4, 1.0);
        let g = Extremizer::new(2.0, 0.3).unwrap().profile(&c);
        let d = project_hminus_s(&g).unwrap();
        let phi = d.phi.unwrap();
        assert!((phi.c - 2.0).abs() < 1e-7 && (phi.tau - 0.3).abs() < 1e-7, "{phi:?}");
        assert!(d.hs_distance_sq.abs() < 1e-9 && d.lp_distance < 1e-6);
    }

    #[test]
    fn projection_of_degree_two_perturbation() {
        let c = ctx(4, 1.0);
        let eps = 1e-2;
        let g2 = ZonalFunction::harmonic(&c, 2).unwrap();
        let g = &ZonalFunction::constant(&c, 1.0) + &(&g2 * eps);
        let d = project_hminus_s(&g).unwrap();
        let phi = d.phi.unwrap();
        assert!(phi.tau.abs() < 1e-6 && (phi.c - 1.0).abs() < 1e-6, "{phi:?}");
        let (a, b) = d.ortho_residuals;
        assert!(a.abs() < 1e-7 && b.abs() < 1e-7);
        let v = phi.profile(&c);
        assert!((d.hs_distance_sq + v.p2s_form(&v) - g.p2s_form(&g)).abs() < 1e-8);
    }

    #[test]
    fn degree_one_perturbation_is_absorbed() {
        let c = ctx(4, 1.0);
        let g1 = ZonalFunction::harmonic(&c, 1).unwrap();
        for eps in [1e-2, 5e-3] {
            let g = &ZonalFunction::constant(&c, 1.0) + &(&g1 * eps);
            let d = project_hminus_s(&g).unwrap();
            let phi = d.phi.unwrap();
            assert!(phi.tau.abs() > 1e-4);
            assert!(d.lp_distance < 10.0 * eps * eps, "eps={eps} dist={}", d.lp_distance);
        }
    }

    #[test]
    fn symmetric_mixture_ties() {
        let c = ctx(4, 1.0);
        let a = Extremizer::new(1.0, 0.6).unwrap().profile(&c);
        let b = Extremizer::new(1.0, -0.6).unwrap().profile(&c);
        let g = &(&a + &b) * 0.5;
        match comparability_check(&g, 16).unwrap() {
            ComparabilityReport::Tied { ratio, bound, .. } => assert!((ratio - 1.0).abs() < 1e-6 && ratio <= bound),
            ComparabilityReport::Unique { tau } => assert!(tau.abs() < 1e-6, "expected a tie or the symmetric point"),
        }
        let g2 = ZonalFunction::harmonic(&c, 2).unwrap();
        let plain = &ZonalFunction::constant(&c, 1.0) + &(&g2 * 0.01);
        assert!(matches!(comparability_check(&plain, 9).unwrap(), ComparabilityReport::Unique { .. }));
    }

    #[test]
    fn reverse_bound_holds() {
        let c = ctx(4, 1.0);
        let e1 = Extremizer::new(1.0, 0.0).unwrap();
        assert_eq!(reverse_bound_check(&e1, &e1, &c), 0.0);
        let e2 = Extremizer::new(1.0, 0.4).unwrap();
        assert!(reverse_bound_check(&e1, &e2, &c) >= 0.0);
    }

    #[test]
    fn minimizer_lies_on_axis() {
        let c = SphereContext::full(ProblemParams::new(3, 0.5).unwrap(), 96).unwrap();
        let g1 = ZonalFunction::harmonic(&c, 1).unwrap();
        let g2 = ZonalFunction::harmonic(&c, 2).unwrap();
        let g = &(&ZonalFunction::constant(&c, 1.0) + &(&g1 * 0.05)) + &(&g2 * 0.03);
        let d = project_hminus_s(&g).unwrap();
        let best = d.hs_distance_sq;
        for i in 0..=12 {
            let beta = std::f64::consts::PI * i as f64 / 12.0;
            for j in 1..=9 {
                let tau = 0.1 * j as f64 - 0.05;
                assert!(off_axis_objective(&g, tau, beta) >= best - 1e-9, "beta={beta} tau={tau}");
            }
        }
    }
}
