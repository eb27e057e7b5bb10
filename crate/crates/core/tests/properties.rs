use std::sync::Arc;

use proptest::prelude::*;

use hls_lab::constants::{funk_hecke_eigenvalue, ProblemParams};
use hls_lab::duality::{deficit_transfer_check, dual_density, legendre_identity_check};
use hls_lab::extremizers::{reverse_bound_check, Extremizer};
use hls_lab::flows::{AxiGrid, AxiSymFunction};
use hls_lab::local_stability::split;
use hls_lab::profile::{emit_zonal, parse_profile, Profile};
use hls_lab::scalar::{cubic_bound_residual, split_scalar};
use hls_lab::sphere::{hls_deficit, sobolev_deficit, SphereContext, ZonalFunction};

fn ctx(n: usize, s: f64, q: usize) -> Arc<SphereContext> {
    SphereContext::full(ProblemParams::new(n, s).unwrap(), q).unwrap()
}

fn pole_normalized(ctx: &Arc<SphereContext>, coeffs: &[f64]) -> ZonalFunction {
    let pole = ctx.harmonics_at(1.0, coeffs.len());
    let c: Vec<f64> = coeffs.iter().zip(&pole).map(|(a, g)| a / g).collect();
    ZonalFunction::synthesize(ctx, &c).unwrap()
}

fn dimension() -> impl Strategy<Value = (usize, f64)> {
    (3usize..12).prop_flat_map(|n| (Just(n), 0.05..(n as f64 / 2.0 - 0.05)))
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 64, failure_persistence: None, ..ProptestConfig::default() })]

    #[test]
    fn scalar_split_sums_back(r in -1.0f64..50.0, gamma in 0.01f64..0.5, m in 1.0f64..4.0) {
        let (r1, r2, r3) = split_scalar(r, gamma, m).unwrap();
        prop_assert!((r1 + r2 + r3 - r).abs() <= 1e-14 * r.abs().max(1.0));
        prop_assert!(r1 >= -1.0 && r1 <= gamma);
        prop_assert!(r2 >= 0.0 && r2 <= m - gamma + 1e-15);
        prop_assert!(r3 >= 0.0);
    }

    #[test]
    fn cubic_bound_holds(p in 1.0f64..2.0, r in -1.0f64..1e3) {
        prop_assert!(cubic_bound_residual(p, r).unwrap() >= -1e-10 * (1.0 + r.abs()).powi(3));
    }

    #[test]
    fn multipliers_decrease((n, s) in dimension(), l in 0usize..30) {
        let params = ProblemParams::new(n, s).unwrap();
        let a = funk_hecke_eigenvalue(&params, l);
        let b = funk_hecke_eigenvalue(&params, l + 1);
        prop_assert!(b > 0.0 && b < a);
        prop_assert!((1.0 / funk_hecke_eigenvalue(&params, 1) - (params.q - 1.0)).abs() < 1e-11 * params.q);
    }
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 24, failure_persistence: None, ..ProptestConfig::default() })]

    #[test]
    fn split_partitions_functions(coeffs in prop::collection::vec(-0.5f64..0.5, 1..8), gamma in 0.02f64..0.3) {
        let c = ctx(6, 1.0, 48);
        let mut all = vec![0.0];
        all.extend(coeffs.iter().enumerate().map(|(i, a)| a * 2.0 / (i as f64 + 1.0)));
        let r = pole_normalized(&c, &all);
        let parts = split(&r, gamma, 1.0);
        let sum = &(&parts.r1 + &parts.r2) + &parts.r3;
        for (a, b) in sum.values().iter().zip(r.values()) {
            prop_assert!((a - b).abs() <= 1e-14 * b.abs().max(1.0));
        }
    }

    #[test]
    fn legendre_norms_agree((n, s) in dimension(), coeffs in prop::collection::vec(-0.3f64..0.3, 1..9)) {
        let c = ctx(n, s, 64);
        let mut all = vec![1.0];
        all.extend(coeffs);
        let f = pole_normalized(&c, &all);
        let pair = dual_density(&f).unwrap();
        let leg = legendre_identity_check(&pair);
        prop_assert!(leg.norm_link <= 1e-12 * leg.sobolev_norm_sq.sqrt());
        prop_assert!(leg.residual <= 1e-12 * leg.sobolev_norm_sq);
        let t = deficit_transfer_check(&pair);
        prop_assert!(t.residual <= 1e-11 * leg.sobolev_norm_sq);
        prop_assert!(t.gap_energy >= -1e-12 * leg.sobolev_norm_sq);
    }

    #[test]
    fn deficits_are_nonnegative((n, s) in dimension(), coeffs in prop::collection::vec(-0.4f64..0.4, 1..9)) {
        let c = ctx(n, s, 64);
        let mut all = vec![1.0];
        all.extend(coeffs);
        let g = pole_normalized(&c, &all);
        let h = hls_deficit(&g);
        prop_assert!(h.deficit >= -1e-12 * h.lp_norm_sq);
        let so = sobolev_deficit(&g);
        prop_assert!(so.deficit >= -1e-12 * so.lp_norm_sq);
    }

    #[test]
    fn extremizers_have_no_deficit((n, s) in dimension(), c in 0.2f64..5.0, tau in -0.6f64..0.6) {
        let cx = ctx(n, s, 128);
        let g = Extremizer::new(c, tau).unwrap().profile(&cx);
        let d = hls_deficit(&g);
        prop_assert!(d.deficit.abs() <= 1e-10 * d.lp_norm_sq);
    }

    #[test]
    fn reverse_bound_is_nonnegative(c1 in 0.3f64..3.0, t1 in -0.6f64..0.6, c2 in 0.3f64..3.0, t2 in -0.6f64..0.6) {
        let cx = ctx(5, 1.0, 64);
        let (e1, e2) = (Extremizer::new(c1, t1).unwrap(), Extremizer::new(c2, t2).unwrap());
        let d = &e1.profile(&cx) - &e2.profile(&cx);
        prop_assert!(reverse_bound_check(&e1, &e2, &cx) >= -1e-12 * d.lp_norm(2.0).powi(2).max(1e-300));
    }

    #[test]
    fn nodal_profiles_round_trip(values in prop::collection::vec(-1e6f64..1e6, 8..40)) {
        let c = ctx(4, 1.0, values.len());
        let f = ZonalFunction::from_nodal(&c, values).unwrap();
        let Profile::Zonal(g) = parse_profile(&emit_zonal(&f)).unwrap() else { panic!("expected zonal") };
        prop_assert!(f.values().iter().zip(g.values()).all(|(a, b)| a.to_bits() == b.to_bits()));
    }
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 4, failure_persistence: None, ..ProptestConfig::default() })]

    #[test]
    fn rearrangement_is_equimeasurable(a in 0.2f64..1.5, b in 0.2f64..1.5, x0 in 0.3f64..1.5, w in 0.5f64..2.0) {
        let params = ProblemParams::new(4, 1.0).unwrap();
        let grid = AxiGrid::new(4, params.p, 128, 32, 1e-3, 1e3).unwrap();
        let f = AxiSymFunction::from_fn(&grid, |rho, mu| {
            let z = rho * mu;
            let r2 = rho * rho - z * z;
            a * (-(r2 + (z - x0).powi(2)) / w).exp() + b * (-(r2 + (z + x0).powi(2)) / w).exp()
        });
        let g = f.rearrange().unwrap();
        prop_assert!(g.is_radial(1e-12));
        let radial = g.radial_values();
        prop_assert!(radial.windows(2).all(|p| p[1] <= p[0]));
        prop_assert!((g.lp_norm() / f.lp_norm() - 1.0).abs() < 5e-3);
        prop_assert!((g.radial_values()[0] - f.values().iter().copied().fold(0.0, f64::max)).abs() < 1e-3 * (a + b));
    }
}
