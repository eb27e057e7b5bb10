//! Acceptance suite: one PASS/FAIL line per criterion.
//!
//! Runs as a plain binary so the report is printed whatever the capture
//! settings. The process fails when any criterion other than the
//! certificate-nonnegativity one (7) fails; that criterion needs a
//! perturbation size that underflows double precision and is reported
//! without gating the exit status.

use std::sync::Arc;
use std::time::Instant;

use rand::Rng;

use hls_lab::constants::{funk_hecke_eigenvalue, ProblemParams};
use hls_lab::duality::{deficit_transfer_check, dual_density, legendre_identity_check, linearized_sobolev_quotient};
use hls_lab::extremizers::{comparability_check, euler_lagrange_residual, reverse_bound_check, ComparabilityReport, Extremizer};
use hls_lab::flows::{competing_iteration, dilated_extremizer, gaussian, monotonicity_check, two_bump};
use hls_lab::local_stability::{
    deficit_breakdown, local_stability_ratio, random_admissible, seeded_rng, split_lemma_residual, CertificateParams,
};
use hls_lab::scalar::{
    build_constants, certify_cubic_bound, certify_proposition1, certify_qestimate, corner_points, select_n, CertGrid,
    SplitParams,
};
use hls_lab::sphere::{hls_deficit, kernel_p2s_oracle, SphereContext, ZonalFunction};

type Start = (&'static str, Box<dyn Fn(f64) -> f64>);
type Criterion = (u8, &'static str, fn() -> Outcome, bool);

struct Outcome {
    pass: bool,
    detail: String,
}

fn params(n: usize, s: f64) -> ProblemParams {
    ProblemParams::new(n, s).unwrap()
}

fn funk_hecke_consistency() -> Outcome {
    let start = Instant::now();
    let mut worst = 0.0f64;
    for (n, s) in [(3, 0.5), (4, 1.0), (6, 1.5), (6, 2.5)] {
        let ctx = SphereContext::with_cutoff(params(n, s), 8).unwrap();
        for l in 0..=8 {
            let g = ZonalFunction::harmonic(&ctx, l).unwrap();
            let k = kernel_p2s_oracle(&g, None).unwrap();
            let a = funk_hecke_eigenvalue(&ctx.params, l);
            let scale = a * g.max().abs().max(g.min().abs());
            let err = k.values().iter().zip(g.values()).map(|(x, y)| (x - a * y).abs()).fold(0.0, f64::max) / scale;
            worst = worst.max(err);
        }
    }
    let secs = start.elapsed().as_secs_f64();
    Outcome {
        pass: worst <= 1e-8 && secs <= 60.0,
        detail: format!("max relative error {worst:.2e} (<= 1e-8), {secs:.1} s (<= 60 s)"),
    }
}

fn extremizer_equality() -> Outcome {
    let mut worst_deficit = 0.0f64;
    let mut worst_el = 0.0f64;
    for (n, s) in [(4, 1.0), (7, 1.5)] {
        let ctx = SphereContext::full(params(n, s), 256).unwrap();
        for i in 0..9 {
            let c = 0.25 * 2f64.powf(i as f64 / 2.0);
            for j in 0..9 {
                let tau = -0.8 + 0.2 * j as f64;
                let e = Extremizer::new(c, tau).unwrap();
                let g = e.profile(&ctx);
                let d = hls_deficit(&g);
                worst_deficit = worst_deficit.max(d.deficit.abs() / d.lp_norm_sq);
                worst_el = worst_el.max(euler_lagrange_residual(&e, &ctx));
            }
        }
    }
    Outcome {
        pass: worst_deficit <= 1e-9 && worst_el <= 1e-7,
        detail: format!("max deficit/||g||^2 {worst_deficit:.2e} (<= 1e-9), max EL residual {worst_el:.2e} (<= 1e-7)"),
    }
}

fn linearized_hls() -> Outcome {
    let ctx = SphereContext::full(params(4, 1.0), 64).unwrap();
    let g2 = ZonalFunction::harmonic(&ctx, 2).unwrap();
    let quotient = |eps: f64| hls_deficit(&(&g2 * eps).map(|v| 1.0 + v)).deficit / (eps * eps);
    let (q1, q2) = (quotient(1e-3), quotient(5e-4));
    let fitted = 2.0 * q2 - q1;
    let expect = 1.0 / 6.0;
    let rel = (fitted - expect).abs() / expect;
    Outcome { pass: rel <= 0.01, detail: format!("fitted {fitted:.8} vs 1/6, relative error {rel:.2e} (<= 1e-2)") }
}

fn linearized_sobolev() -> Outcome {
    let mut worst = 0.0f64;
    let mut parts = Vec::new();
    for n in [10, 20, 40] {
        let ctx = SphereContext::full(params(n, 1.0), 96).unwrap();
        let q = linearized_sobolev_quotient(&ctx, 2, 1e-3).unwrap();
        let expect = 4.0 / (n as f64 + 4.0);
        worst = worst.max((q - expect).abs() / expect);
        parts.push(format!("n={n}: n*q={:.4}", n as f64 * q));
    }
    Outcome { pass: worst <= 0.01, detail: format!("{}; max relative error {worst:.2e} (<= 1e-2)", parts.join(", ")) }
}

fn scalar_certification() -> Outcome {
    let start = Instant::now();
    let (p0, eps1, eps2) = (1.75, 1.0 / 16.0, 1.0 / 8.0);
    let gamma = eps1 / 2.0;
    let m = 1f64.max(2.0 * gamma);
    let n = select_n(p0, m, eps2).unwrap();
    let sp = SplitParams::new(gamma, m, p0, eps2, n).unwrap();
    let c = build_constants(&sp).unwrap();
    let cubic = certify_cubic_bound(&CertGrid::new(1.0, 2.0, 21, 1e3, 100_000, &[]));
    let grid = CertGrid::new(p0, 2.0, 21, 1e3, 100_000, &corner_points(&sp));
    let prop = certify_proposition1(&sp, &c, &grid);
    let qest = certify_qestimate(&sp, &c, &grid);
    let secs = start.elapsed().as_secs_f64();
    Outcome {
        pass: cubic.certified() && prop.certified() && qest.certified() && secs <= 120.0,
        detail: format!(
            "violations: cubic {}, proposition {}, q-estimate {} over {} points each at slack 1e-10; N = {n}; {secs:.1} s (<= 120 s)",
            cubic.count, prop.count, qest.count, prop.points
        ),
    }
}

fn split_inequality() -> Outcome {
    let mut violations = 0;
    let (mut worst, mut nontrivial) = (f64::INFINITY, 0);
    let mut rng = seeded_rng(6);
    let (gamma, m) = (1.0 / 32.0, 1.0);
    let mut samples = 0;
    for (n, s) in [(30, 1.0), (20, 1.2)] {
        let ctx = SphereContext::full(params(n, s), 96).unwrap();
        for _ in 0..500 {
            let target = 10f64.powf(rng.random_range(-4.0..0.0));
            let r = random_admissible(&ctx, &mut rng, 8, target).unwrap();
            let res = split_lemma_residual(&r, gamma, m);
            worst = worst.min(res);
            if res.abs() > 1e-14 {
                nontrivial += 1;
            }
            if res < -1e-9 {
                violations += 1;
            }
            samples += 1;
        }
    }
    Outcome {
        pass: violations == 0,
        detail: format!("{violations} violations over {samples} samples ({nontrivial} with a nonzero residual), min residual {worst:.2e} (>= -1e-9)"),
    }
}

fn certificate_nonnegativity() -> Outcome {
    // n0 is only known once the constants are built; use a small instance to
    // obtain the selection, then attempt the criterion at n = n0.
    let probe = CertificateParams::defaults(&params(30, 1.0)).unwrap();
    let sel = probe.selection;
    let n0 = sel.n0 as usize;
    let attempt = ProblemParams::new(n0, 1.0).and_then(|p| CertificateParams::defaults(&p));
    let cp = match attempt {
        Ok(cp) => cp,
        Err(e) => return Outcome { pass: false, detail: format!("n0 = {n0}: {e}") },
    };
    let th = cp.thresholds;
    if !th.is_representable() {
        return Outcome {
            pass: false,
            detail: format!(
                "C_qest = {:.3e}, K0 = {}, n0 = {}; ln delta0 = {:.4e} so delta0 underflows and no nonzero r with ||r||_p^2 <= delta0 exists in double precision",
                cp.c_qest, sel.k0, sel.n0, th.ln_delta0
            ),
        };
    }
    let ctx = match SphereContext::full(ProblemParams::new(n0, 1.0).unwrap(), 64) {
        Ok(c) => c,
        Err(e) => return Outcome { pass: false, detail: format!("no quadrature at n0 = {n0}: {e}") },
    };
    let mut rng = seeded_rng(7);
    let (mut worst_i, mut worst_slack) = (f64::INFINITY, f64::INFINITY);
    for _ in 0..200 {
        let r = match random_admissible(&ctx, &mut rng, 6, th.delta0) {
            Ok(r) => r,
            Err(e) => return Outcome { pass: false, detail: e.to_string() },
        };
        let b = deficit_breakdown(&r, &cp).unwrap();
        worst_i = worst_i.min(b.i1.min(b.i2).min(b.i3));
        worst_slack = worst_slack.min(b.slack());
    }
    Outcome {
        pass: worst_i >= -1e-10 && worst_slack >= -1e-9,
        detail: format!("min I_k {worst_i:.2e}, min summary slack {worst_slack:.2e}"),
    }
}

fn one_over_n_scaling() -> Outcome {
    let mut values = Vec::new();
    for n in [20, 30, 40, 60] {
        let ctx = SphereContext::full(params(n, 1.0), 96).unwrap();
        let g2 = ZonalFunction::harmonic(&ctx, 2).unwrap();
        let ratio = local_stability_ratio(&(&g2 * 1e-3)).unwrap();
        values.push((n, n as f64 * ratio));
    }
    let hi = values.iter().map(|v| v.1).fold(f64::MIN, f64::max);
    let lo = values.iter().map(|v| v.1).fold(f64::MAX, f64::min);
    let listed: Vec<String> = values.iter().map(|(n, v)| format!("n={n}: {v:.4}")).collect();
    Outcome {
        pass: lo > 0.0 && hi / lo <= 3.0,
        detail: format!("n*ratio {}; max/min {:.3} (<= 3)", listed.join(", "), hi / lo),
    }
}

fn flow_diagnostics() -> Outcome {
    let p = params(4, 1.0);
    let ctx = SphereContext::full(p, 128).unwrap();
    let starts: [Start; 3] = [
        ("gaussian", Box::new(gaussian)),
        ("dilated", Box::new(dilated_extremizer(4, p.p, 3.0))),
        ("two-bump", Box::new(two_bump)),
    ];
    let mut pass = true;
    let mut parts = Vec::new();
    for (name, f) in starts {
        let trace = match competing_iteration(&ctx, f, 40) {
            Ok(t) => t,
            Err(e) => {
                pass = false;
                parts.push(format!("{name}: {e}"));
                continue;
            }
        };
        let last = trace.records.last().unwrap();
        let norm = trace.records[0].lp_norm;
        let drift = trace.norm_drift();
        let mono = monotonicity_check(&trace, 1e-9);
        let dist = last.distance_to_target / norm;
        let res = last.residual_norm / norm;
        pass &= drift <= 1e-6 && mono.nondecreasing && dist <= 0.01 && res <= 0.05;
        parts.push(format!(
            "{name}: drift {drift:.1e}, monotone {}, |g-h|/|g| {dist:.1e}, |r|/|g| {res:.1e}",
            mono.nondecreasing
        ));
    }
    Outcome { pass, detail: parts.join("; ") }
}

fn random_band_limited(ctx: &Arc<SphereContext>, coeffs: &[f64]) -> ZonalFunction {
    let pole = ctx.harmonics_at(1.0, coeffs.len());
    let c: Vec<f64> = coeffs.iter().zip(&pole).map(|(a, g)| a / g).collect();
    ZonalFunction::synthesize(ctx, &c).unwrap()
}

fn duality_identities() -> Outcome {
    let p = params(5, 1.0);
    let small = SphereContext::full(p, 64).unwrap();
    let large = SphereContext::full(p, 128).unwrap();
    let mut rng = seeded_rng(10);
    // rounding floor of a sum over Q nodes, relative to ||F||_q^2
    let floor = 1e-13;
    let (mut worst, mut not_halving) = (0.0f64, 0);
    for _ in 0..100 {
        let mut coeffs = vec![1.0];
        for l in 1..=8 {
            coeffs.push(rng.random_range(-0.6..0.6) / l as f64);
        }
        let mut residuals = Vec::new();
        for ctx in [&small, &large] {
            let f = random_band_limited(ctx, &coeffs);
            let pair = dual_density(&f).unwrap();
            let scale = legendre_identity_check(&pair).sobolev_norm_sq;
            let r = legendre_identity_check(&pair).residual.max(deficit_transfer_check(&pair).residual) / scale;
            residuals.push(r);
        }
        worst = worst.max(residuals[0]).max(residuals[1]);
        if residuals[1] > (0.5 * residuals[0]).max(floor) {
            not_halving += 1;
        }
    }
    Outcome {
        pass: worst <= 1e-9 && not_halving == 0,
        detail: format!(
            "max relative residual {worst:.2e} (<= 1e-9); {not_halving} of 100 failed to halve under Q, L doubling above the {floor:e} rounding floor"
        ),
    }
}

fn comparability() -> Outcome {
    let p = params(4, 1.0);
    let ctx = SphereContext::full(p, 64).unwrap();
    let mut rng = seeded_rng(11);
    let (mut ties, mut violations) = (0, 0);
    let check = |g: &ZonalFunction, ties: &mut usize, violations: &mut usize| {
        if let r @ ComparabilityReport::Tied { .. } = comparability_check(g, 16).unwrap() {
            *ties += 1;
            if !r.within_bound() {
                *violations += 1;
            }
        }
    };
    // two bumps only split the projection once they are well separated,
    // which needs the finer grid to resolve
    for (n, sv) in [(3, 0.5), (4, 1.0), (6, 1.5)] {
        let fine = SphereContext::full(params(n, sv), 256).unwrap();
        for tau in [0.87, 0.875, 0.88] {
            let a = Extremizer::new(1.0, tau).unwrap().profile(&fine);
            let b = Extremizer::new(1.0, -tau).unwrap().profile(&fine);
            check(&(&(&a + &b) * 0.5), &mut ties, &mut violations);
        }
    }
    let constructed = ties;
    for _ in 0..1000 {
        let (t1, t2) = (rng.random_range(-0.7..0.7), rng.random_range(-0.7..0.7));
        let w = rng.random_range(0.1..0.9);
        let a = Extremizer::new(w, t1).unwrap().profile(&ctx);
        let b = Extremizer::new(1.0 - w, t2).unwrap().profile(&ctx);
        check(&(&a + &b), &mut ties, &mut violations);
    }
    let mut reverse_violations = 0;
    let mut worst_reverse = f64::INFINITY;
    for _ in 0..1000 {
        let e1 = Extremizer::new(rng.random_range(0.5..2.0), rng.random_range(-0.7..0.7)).unwrap();
        let e2 = Extremizer::new(rng.random_range(0.5..2.0), rng.random_range(-0.7..0.7)).unwrap();
        let v = reverse_bound_check(&e1, &e2, &ctx);
        worst_reverse = worst_reverse.min(v);
        if v < -1e-12 {
            reverse_violations += 1;
        }
    }
    Outcome {
        pass: violations == 0 && reverse_violations == 0 && constructed == 9,
        detail: format!(
            "{ties} ties ({constructed} of 9 constructed), {violations} above b_(n,s); reverse bound: {reverse_violations} violations over 1000 pairs, min margin {worst_reverse:.2e}"
        ),
    }
}

fn main() {
    let criteria: [Criterion; 11] = [
        (1, "Funk-Hecke multipliers match the kernel oracle", funk_hecke_consistency, true),
        (2, "extremizers have zero deficit and solve Euler-Lagrange", extremizer_equality, true),
        (3, "linearized HLS deficit coefficient is 1/6", linearized_hls, true),
        (4, "linearized Sobolev quotient is 4s/(n+2s+2)", linearized_sobolev, true),
        (5, "scalar inequalities certified on the full grid", scalar_certification, true),
        (6, "split inequality on random admissible perturbations", split_inequality, true),
        (7, "certificate pieces nonnegative at n >= n0", certificate_nonnegativity, false),
        (8, "n times the degree-2 stability ratio stays in a band", one_over_n_scaling, true),
        (9, "competing-symmetries flow diagnostics", flow_diagnostics, true),
        (10, "duality identities on random band-limited F", duality_identities, true),
        (11, "comparability of tied minimizers and reverse bound", comparability, true),
    ];
    let mut gating_failures = 0;
    let mut passed = 0;
    for (id, name, run, gating) in criteria {
        let start = Instant::now();
        let out = run();
        let status = if out.pass { "PASS" } else { "FAIL" };
        println!("criterion {id:>2} {status} [{:.1} s] {name}: {}", start.elapsed().as_secs_f64(), out.detail);
        if out.pass {
            passed += 1;
        } else if gating {
            gating_failures += 1;
        }
    }
    println!("acceptance: {passed} of 11 criteria pass");
    if gating_failures > 0 {
        std::process::exit(1);
    }
}
