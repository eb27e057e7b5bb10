//! Legendre duality between the Sobolev and HLS sides on the sphere.
//!
//! For `F` on the Sobolev side the dual density is
//! `G = ||F||_q^{2-q} |F|^{q-1} sgn F` and `F1 = P_2s G`. Then
//! `||F||_q^2 + ||G||_p^2 = 2 int F G` and
//! `sobolev_deficit(F) = hls_deficit(G) + <E_s (F - F1), F - F1>`.

use std::sync::Arc;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::extremizers::project_hminus_s;
use crate::sphere::{hls_deficit, sobolev_deficit, SphereContext, ZonalFunction};

#[derive(Debug, Clone)]
pub struct DualPair {
    pub f: ZonalFunction,
    pub g: ZonalFunction,
    pub f1: ZonalFunction,
}

pub fn dual_density(f: &ZonalFunction) -> Result<DualPair> {
    let q = f.context().params.q;
    let norm = f.lp_norm(q);
    if !(norm > 0.0) || !norm.is_finite() {
        return Err(Error::domain("dual density needs a nonzero finite F"));
    }
    let scale = norm.powf(2.0 - q);
    let g = f.map(|v| scale * v.abs().powf(q - 1.0) * v.signum());
    let f1 = g.apply_p2s();
    Ok(DualPair { f: f.clone(), g, f1 })
}

#[derive(Debug, Clone, Serialize)]
pub struct LegendreReport {
    pub sobolev_norm_sq: f64,
    pub hls_norm_sq: f64,
    pub pairing: f64,
    /// `| ||F||_q^2 + ||G||_p^2 - 2 int F G |`.
    pub residual: f64,
    /// `| ||G||_p - ||F||_q |`.
    pub norm_link: f64,
}

pub fn legendre_identity_check(pair: &DualPair) -> LegendreReport {
    let params = pair.f.context().params;
    let nf = pair.f.lp_norm(params.q);
    let ng = pair.g.lp_norm(params.p);
    let pairing = pair.f.dot(&pair.g);
    LegendreReport {
        sobolev_norm_sq: nf * nf,
        hls_norm_sq: ng * ng,
        pairing,
        residual: (nf * nf + ng * ng - 2.0 * pairing).abs(),
        norm_link: (ng - nf).abs(),
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct TransferReport {
    pub sobolev_deficit: f64,
    pub hls_deficit: f64,
    /// `<E_s (F - F1), F - F1>`.
    pub gap_energy: f64,
    pub residual: f64,
}

pub fn deficit_transfer_check(pair: &DualPair) -> TransferReport {
    let ds = sobolev_deficit(&pair.f).deficit;
    let dh = hls_deficit(&pair.g).deficit;
    let gap = &pair.f - &pair.f1;
    let gap_energy = gap.es_form(&gap);
    TransferReport { sobolev_deficit: ds, hls_deficit: dh, gap_energy, residual: (ds - dh - gap_energy).abs() }
}

#[derive(Debug, Clone, Serialize)]
pub struct SobolevBoundReport {
    pub sobolev_deficit: f64,
    pub hls_deficit: f64,
    /// `<P_2s (G - g0), G - g0>` for the projection `g0` of `G`.
    pub hls_distance_sq: f64,
    /// `<E_s (F - P g0), F - P g0>`.
    pub sobolev_distance_sq: f64,
    /// `min(c_hls, 1)`.
    pub effective_constant: f64,
    pub bound: f64,
    /// `hls_deficit >= c_hls * hls_distance_sq`, the hypothesis of the chain.
    pub hypothesis_holds: bool,
    pub holds: bool,
    pub ratio: f64,
}

/// Sobolev deficit against `(c/2) <E_s (F - P g0), F - P g0>` where `g0` is
/// the H^{-s} projection of the dual density and `c = min(c_hls, 1)`.
pub fn sobolev_stability_from_hls(f: &ZonalFunction, c_hls: f64, tol: f64) -> Result<SobolevBoundReport> {
    if !(c_hls > 0.0) {
        return Err(Error::domain(format!("c_hls = {c_hls} must be positive")));
    }
    let pair = dual_density(f)?;
    let dec = project_hminus_s(&pair.g)?;
    let phi = dec
        .phi
        .ok_or_else(|| Error::Numerical("projection of the dual density degenerated".into()))?;
    let ctx = f.context();
    let image = phi.profile(ctx).apply_p2s();
    let diff = f - &image;
    let sobolev_distance_sq = diff.es_form(&diff);
    let ds = sobolev_deficit(f).deficit;
    let dh = hls_deficit(&pair.g).deficit;
    let c = c_hls.min(1.0);
    let bound = 0.5 * c * sobolev_distance_sq;
    Ok(SobolevBoundReport {
        sobolev_deficit: ds,
        hls_deficit: dh,
        hls_distance_sq: dec.hs_distance_sq,
        sobolev_distance_sq,
        effective_constant: c,
        bound,
        hypothesis_holds: dh >= c_hls * dec.hs_distance_sq - tol,
        holds: ds >= bound - tol,
        ratio: if sobolev_distance_sq > 0.0 { ds / sobolev_distance_sq } else { f64::INFINITY },
    })
}

/// `1 - A(l)/A(1)`: the Sobolev deficit of `1 + eps G_l` over its
/// `E_s`-distance to the constants, to leading order in `eps`.
pub fn linearized_sobolev_quotient_exact(ctx: &SphereContext, l: usize) -> f64 {
    1.0 - ctx.multiplier(l) / ctx.multiplier(1)
}

/// The same quotient evaluated at finite `eps`.
pub fn linearized_sobolev_quotient(ctx: &Arc<SphereContext>, l: usize, eps: f64) -> Result<f64> {
    if l < 2 {
        return Err(Error::domain("degrees 0 and 1 are tangent to the extremizer manifold"));
    }
    let h = ZonalFunction::harmonic(ctx, l)?;
    let f = (&h * eps).map(|v| 1.0 + v);
    let pert = &h * eps;
    Ok(sobolev_deficit(&f).deficit / pert.es_form(&pert))
}
