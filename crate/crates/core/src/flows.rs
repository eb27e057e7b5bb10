//! Competing symmetries: the conformal map `U`, symmetric decreasing
//! rearrangement `R` on `R^n`, and the iteration `g_{k+1} = R U g_k` with its
//! diagnostics.
//!
//! Two representations are provided. [`AxiSymFunction`] samples a function
//! axisymmetric about `e_n` on a log-radial by Gauss–Gegenbauer angular grid
//! and implements `U` and `R` directly. The iteration itself runs on the
//! stereographic lift of the radial iterates: `U` lifts to a rotation taking
//! the pole to `e_n`, so the distribution function of `U g` is an integral
//! over the sphere of an explicit integrand with a monotone cut, and `R U g`
//! is computed from it without two-dimensional interpolation.

use std::f64::consts::PI;
use std::sync::Arc;

use rayon::prelude::*;
use serde::Serialize;

use crate::constants::{ln_gamma, sphere_area, ProblemParams};
use crate::error::{Error, Result};
use crate::extremizers::{project_hminus_s, DecompositionResult, Extremizer};
use crate::quadrature::{GaussRule, JacobiRecurrence};
use crate::sphere::{hls_deficit, radius_of_height, stereographic_lift, SphereContext, ZonalFunction};

/// Number of geometric levels in the distribution table.
pub const LEVELS: usize = 64;
/// Ratio between the lowest and highest tabulated level.
pub const LEVEL_SPAN: f64 = 1e-8;

#[derive(Debug)]
pub struct AxiGrid {
    pub n: usize,
    pub p: f64,
    pub rho: Vec<f64>,
    ln_rho0: f64,
    step: f64,
    pub mu: GaussRule,
    mu_rec: JacobiRecurrence,
}

impl AxiGrid {
    pub fn new(n: usize, p: f64, radial: usize, angular: usize, rho_min: f64, rho_max: f64) -> Result<Arc<Self>> {
        if n < 3 {
            return Err(Error::domain(format!("n = {n} must be at least 3")));
        }
        if radial < 4 || angular < 2 || !(rho_min > 0.0 && rho_max > rho_min) {
            return Err(Error::domain("grid needs at least 4 radial and 2 angular nodes and 0 < rho_min < rho_max"));
        }
        let a = (n as f64 - 3.0) / 2.0;
        let mu = GaussRule::jacobi(angular, a, a)?;
        let mu_rec = JacobiRecurrence::new(a, a, angular)?;
        let (l0, l1) = (rho_min.ln(), rho_max.ln());
        let step = (l1 - l0) / (radial - 1) as f64;
        let rho = (0..radial).map(|i| (l0 + step * i as f64).exp()).collect();
        Ok(Arc::new(Self { n, p, rho, ln_rho0: l0, step, mu, mu_rec }))
    }

    /// 256 radial nodes on `[1e-4, 1e4]` and 64 angular nodes.
    pub fn standard(n: usize, p: f64) -> Result<Arc<Self>> {
        Self::new(n, p, 256, 64, 1e-4, 1e4)
    }

    pub fn radial_len(&self) -> usize {
        self.rho.len()
    }

    pub fn angular_len(&self) -> usize {
        self.mu.nodes.len()
    }

    /// Decay power `2n/p` of the conformal tail.
    pub fn tail_power(&self) -> f64 {
        2.0 * self.n as f64 / self.p
    }

    /// Trapezoid weights in `ln rho` for `int rho^{n-1} d rho`.
    fn radial_weights(&self) -> Vec<f64> {
        let nr = self.rho.len();
        let nf = self.n as f64;
        (0..nr)
            .map(|i| {
                let end = if i == 0 || i == nr - 1 { 0.5 } else { 1.0 };
                end * self.step * self.rho[i].powf(nf)
            })
            .collect()
    }
}

#[derive(Debug, Clone)]
pub struct AxiSymFunction {
    grid: Arc<AxiGrid>,
    /// `values[i * angular + j] = f(rho_i, mu_j)`.
    values: Vec<f64>,
}

impl AxiSymFunction {
    pub fn from_fn(grid: &Arc<AxiGrid>, f: impl Fn(f64, f64) -> f64 + Sync) -> Self {
        let nm = grid.angular_len();
        let values = (0..grid.radial_len() * nm)
            .into_par_iter()
            .map(|k| f(grid.rho[k / nm], grid.mu.nodes[k % nm]))
            .collect();
        Self { grid: Arc::clone(grid), values }
    }

    pub fn from_radial(grid: &Arc<AxiGrid>, f: impl Fn(f64) -> f64 + Sync) -> Self {
        Self::from_fn(grid, |r, _| f(r))
    }

    pub fn grid(&self) -> &Arc<AxiGrid> {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn value(&self, i: usize, j: usize) -> f64 {
        self.values[i * self.grid.angular_len() + j]
    }

    pub fn min(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    /// True when every radial row is constant to `tol` relative.
    pub fn is_radial(&self, tol: f64) -> bool {
        let nm = self.grid.angular_len();
        self.values.chunks(nm).all(|row| {
            let (lo, hi) = row.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &v| (a.min(v), b.max(v)));
            hi - lo <= tol * hi.abs().max(lo.abs()).max(f64::MIN_POSITIVE)
        })
    }

    /// `||f||_p` on `R^n`, including the analytic contributions of the ball
    /// inside `rho_min` and of the conformal tail beyond `rho_max`.
    pub fn lp_norm(&self) -> f64 {
        let g = &*self.grid;
        let (nm, nr) = (g.angular_len(), g.radial_len());
        let nf = g.n as f64;
        let p = g.p;
        let rw = g.radial_weights();
        let shell = |i: usize| -> f64 {
            (0..nm).map(|j| g.mu.weights[j] * self.values[i * nm + j].abs().powf(p)).sum()
        };
        let mut total: f64 = (0..nr).map(|i| rw[i] * shell(i)).sum();
        total += shell(0) * g.rho[0].powf(nf) / nf;
        // rho^{n-1} (rho_max / rho)^{2n} integrates to rho_max^n / n
        total += shell(nr - 1) * g.rho[nr - 1].powf(nf) / nf;
        (sphere_area(g.n - 1) * total).powf(1.0 / p)
    }

    /// Angular series of every radial row.
    fn row_series(&self) -> Vec<Vec<f64>> {
        let g = &*self.grid;
        let nm = g.angular_len();
        let basis: Vec<Vec<f64>> = g.mu.nodes.iter().map(|&m| g.mu_rec.eval(m, nm)).collect();
        self.values
            .par_chunks(nm)
            .map(|row| {
                let mut c = vec![0.0; nm];
                for j in 0..nm {
                    let wf = g.mu.weights[j] * row[j];
                    for (ck, b) in c.iter_mut().zip(&basis[j]) {
                        *ck += wf * b;
                    }
                }
                c
            })
            .collect()
    }

    /// `U f` with `f` interpolated spectrally in `mu` and by local cubics of
    /// `ln f` in `ln rho`; the second value counts samples taken outside the
    /// radial range.
    pub fn apply_u(&self) -> (Self, usize) {
        let g = &self.grid;
        let series = self.row_series();
        let interp = Interpolator { f: self, series: &series };
        let np = g.n as f64 / g.p;
        let outside = std::sync::atomic::AtomicUsize::new(0);
        let out = Self::from_fn(g, |rho, mu| {
            let d = rho * rho - 2.0 * rho * mu + 1.0;
            let y2 = (rho * rho + 2.0 * rho * mu + 1.0) / d;
            let y = y2.sqrt();
            let mu_y = ((rho * rho - 1.0) / d / y).clamp(-1.0, 1.0);
            let (v, out_of_range) = interp.at(y, mu_y);
            if out_of_range {
                outside.fetch_add(1, std::sync::atomic::Ordering::Relaxed);
            }
            (2.0 / d).powf(np) * v
        });
        (out, outside.into_inner())
    }

    /// Symmetric decreasing rearrangement, returned as a radial function.
    pub fn rearrange(&self) -> Result<Self> {
        if self.min() < 0.0 {
            return Err(Error::domain("rearrangement needs a nonnegative function"));
        }
        let g = &self.grid;
        let nm = g.angular_len();
        let columns: Vec<Vec<f64>> = (0..nm).map(|j| (0..g.radial_len()).map(|i| self.value(i, j)).collect()).collect();
        let lambda = |t: f64| -> f64 {
            let nf = g.n as f64;
            let s: f64 = columns
                .iter()
                .zip(&g.mu.weights)
                .map(|(col, w)| w * row_superlevel_measure(g, col, t, nf))
                .sum();
            sphere_area(g.n - 1) * s
        };
        let top = self.values.iter().copied().fold(0.0f64, f64::max);
        let profile = invert_distribution(&lambda, top, g.n, &g.rho)?;
        let nmf = nm;
        let mut values = Vec::with_capacity(g.radial_len() * nmf);
        for v in profile {
            values.extend(std::iter::repeat_n(v, nmf));
        }
        Ok(Self { grid: Arc::clone(g), values })
    }

    /// Radial profile from the first angular node.
    pub fn radial_values(&self) -> Vec<f64> {
        self.values.chunks(self.grid.angular_len()).map(|r| r[0]).collect()
    }

    /// Radial profile at an arbitrary radius, by the same cubic used in `U`.
    pub fn radial_at(&self, rho: f64) -> f64 {
        let vals = self.radial_values();
        radial_interp(&self.grid, &vals, rho).0
    }
}

struct Interpolator<'a> {
    f: &'a AxiSymFunction,
    series: &'a [Vec<f64>],
}

impl Interpolator<'_> {
    fn at(&self, rho: f64, mu: f64) -> (f64, bool) {
        let g = &*self.f.grid;
        let rows: Vec<f64> = self.series.iter().map(|c| g.mu_rec.series(c, mu)).collect::<Vec<_>>();
        radial_interp(g, &rows, rho)
    }
}

/// Cubic in `ln rho` through four neighbouring samples, on `ln f` when they
/// are positive; constant inside `rho_min` and conformal decay beyond `rho_max`.
fn radial_interp(g: &AxiGrid, vals: &[f64], rho: f64) -> (f64, bool) {
    let nr = vals.len();
    let x = (rho.ln() - g.ln_rho0) / g.step;
    if x <= 0.0 {
        return (vals[0], x < 0.0);
    }
    if x >= (nr - 1) as f64 {
        let decay = (g.rho[nr - 1] / rho).powf(g.tail_power());
        return (vals[nr - 1] * decay, x > (nr - 1) as f64);
    }
    let i = (x.floor() as usize).clamp(1, nr - 3);
    let u = x - i as f64;
    let pts = [vals[i - 1], vals[i], vals[i + 1], vals[i + 2]];
    // Lagrange weights at offsets -1, 0, 1, 2
    let w = [
        -u * (u - 1.0) * (u - 2.0) / 6.0,
        (u + 1.0) * (u - 1.0) * (u - 2.0) / 2.0,
        -(u + 1.0) * u * (u - 2.0) / 2.0,
        (u + 1.0) * u * (u - 1.0) / 6.0,
    ];
    let v = if pts.iter().all(|&v| v > 0.0) {
        w.iter().zip(&pts).map(|(w, v)| w * v.ln()).sum::<f64>().exp()
    } else {
        w.iter().zip(&pts).map(|(w, v)| w * v).sum::<f64>()
    };
    (v, false)
}

/// `int_{f(rho) > t} rho^{n-1} d rho` along one angular ray.
fn row_superlevel_measure(g: &AxiGrid, col: &[f64], t: f64, nf: f64) -> f64 {
    let nr = col.len();
    let mut total = 0.0;
    let above = |i: usize| col[i] > t;
    let mut start = if above(0) { Some(0.0) } else { None };
    for i in 0..nr - 1 {
        if above(i) != above(i + 1) {
            let r = crossing(g, col, i, t);
            match start.take() {
                Some(a) => total += (r.powf(nf) - a) / nf,
                None => start = Some(r.powf(nf)),
            }
        }
    }
    if let Some(a) = start {
        // conformal tail: f = f_end (rho_max / rho)^{2n/p} stays above t until rho_e
        let end = g.rho[nr - 1] * (col[nr - 1] / t).powf(1.0 / g.tail_power());
        total += (end.powf(nf) - a) / nf;
    }
    total
}

/// Radius in `[rho_i, rho_{i+1}]` where the interpolant crosses `t`.
fn crossing(g: &AxiGrid, col: &[f64], i: usize, t: f64) -> f64 {
    let (mut a, mut b) = (g.rho[i].ln(), g.rho[i + 1].ln());
    let fa = radial_interp(g, col, a.exp()).0 - t;
    for _ in 0..60 {
        let m = 0.5 * (a + b);
        let fm = radial_interp(g, col, m.exp()).0 - t;
        if (fm > 0.0) == (fa > 0.0) {
            a = m;
        } else {
            b = m;
        }
    }
    (0.5 * (a + b)).exp()
}

/// `f*(rho)` at each radius from a decreasing distribution function: the
/// level `t` with `lambda(t) = |B_1| rho^n`. Levels are tabulated on a
/// geometric ladder below `top`, then refined by Illinois steps in `ln t`.
fn invert_distribution(lambda: &(impl Fn(f64) -> f64 + Sync), top: f64, n: usize, radii: &[f64]) -> Result<Vec<f64>> {
    if !(top > 0.0) {
        return Ok(vec![0.0; radii.len()]);
    }
    let ball = sphere_area(n - 1) / n as f64;
    let ln_top = top.ln();
    let ln_step = LEVEL_SPAN.ln() / (LEVELS - 1) as f64;
    let table: Vec<(f64, f64)> = (0..LEVELS)
        .into_par_iter()
        .map(|k| {
            let lt = ln_top + ln_step * k as f64;
            (lt, lambda(lt.exp()))
        })
        .collect();
    let mut levels = radii
        .par_iter()
        .map(|&rho| {
            let target = ball * rho.powf(n as f64);
            let phi = |lt: f64| lambda(lt.exp()) / target - 1.0;
            // lambda grows as the level falls, so phi decreases in ln t
            let k = table.partition_point(|&(_, m)| m < target);
            let (lo, hi) = if k == 0 {
                return Ok(top);
            } else if k < LEVELS {
                (table[k].0, table[k - 1].0)
            } else {
                let mut hi = table[LEVELS - 1].0;
                let mut lo = hi - 10f64.ln();
                let mut tries = 0;
                while phi(lo) < 0.0 {
                    hi = lo;
                    lo -= 10f64.ln();
                    tries += 1;
                    if tries > 200 {
                        return Ok(0.0);
                    }
                }
                (lo, hi)
            };
            Ok(illinois(phi, lo, hi).exp())
        })
        .collect::<Result<Vec<f64>>>()?;
    // f* is nonincreasing in the radius; remove root-finding jitter
    let mut order: Vec<usize> = (0..radii.len()).collect();
    order.sort_by(|&a, &b| radii[a].total_cmp(&radii[b]));
    let mut running = f64::INFINITY;
    for i in order {
        running = running.min(levels[i]);
        levels[i] = running;
    }
    Ok(levels)
}

/// Root of a decreasing function bracketed by `phi(lo) >= 0 >= phi(hi)`,
/// accepted once `|phi| <= 1e-12`.
fn illinois(phi: impl Fn(f64) -> f64, mut lo: f64, mut hi: f64) -> f64 {
    let (mut flo, mut fhi) = (phi(lo), phi(hi));
    if flo == 0.0 {
        return lo;
    }
    if fhi == 0.0 {
        return hi;
    }
    if flo.signum() == fhi.signum() {
        return if flo.abs() < fhi.abs() { lo } else { hi };
    }
    let mut side = 0;
    for _ in 0..100 {
        let x = (lo * fhi - hi * flo) / (fhi - flo);
        let fx = phi(x);
        if fx.abs() <= 1e-12 || (hi - lo).abs() < 1e-15 * (1.0 + x.abs()) {
            return x;
        }
        if fx.signum() == flo.signum() {
            lo = x;
            flo = fx;
            if side == -1 {
                fhi *= 0.5;
            }
            side = -1;
        } else {
            hi = x;
            fhi = fx;
            if side == 1 {
                flo *= 0.5;
            }
            side = 1;
        }
    }
    0.5 * (lo + hi)
}

/// Measure of `{U g > t}` for radial `g` given by its lift `G`.
///
/// With `a = omega . e_n = cos phi` and `omega_{n+1} = sin(phi) cos(psi)`,
/// `U g = (1 - omega_{n+1})^{n/p} G(a)` and `dx = |S^n| (1 - omega_{n+1})^{-n} d sigma`.
/// The cut `U g > t` is `psi > psi*(phi)`.
struct LiftedDistribution {
    n: usize,
    np: f64,
    ln_za: f64,
    ln_zv: f64,
    area: f64,
    gl: GaussRule,
    scan: Vec<(f64, f64)>,
    /// `G(cos phi)` on `TABLE + 1` equispaced angles, padded by one on each side.
    table: Vec<f64>,
}

const SCAN: usize = 256;
const TABLE: usize = 4096;

impl LiftedDistribution {
    fn new(g: &ZonalFunction, p: f64) -> Result<Self> {
        let n = g.context().params.n;
        let nf = n as f64;
        let ln_beta = |a: f64, b: f64| ln_gamma(a) + ln_gamma(b) - ln_gamma(a + b);
        // G(cos phi) is even and 2 pi periodic in phi, so the padding reflects
        let table: Vec<f64> = (0..TABLE + 3)
            .map(|k| g.eval((PI * (k as f64 - 1.0) / TABLE as f64).cos()))
            .collect();
        let scan = (0..=SCAN).map(|k| (PI * k as f64 / SCAN as f64, table[1 + k * (TABLE / SCAN)].max(0.0))).collect();
        Ok(Self {
            n,
            np: nf / p,
            ln_za: ln_beta(nf / 2.0, 0.5),
            ln_zv: ln_beta((nf - 1.0) / 2.0, 0.5),
            area: sphere_area(n),
            gl: GaussRule::jacobi(16, 0.0, 0.0)?,
            scan,
            table,
        })
    }

    /// Cubic interpolation of the tabulated lift.
    fn lift(&self, phi: f64) -> f64 {
        let x = (phi / PI * TABLE as f64).clamp(0.0, TABLE as f64);
        let i = (x.floor() as usize).min(TABLE - 1);
        let u = x - i as f64;
        let v = &self.table[i..i + 4];
        let w = [
            -u * (u - 1.0) * (u - 2.0) / 6.0,
            (u + 1.0) * (u - 1.0) * (u - 2.0) / 2.0,
            -(u + 1.0) * u * (u - 2.0) / 2.0,
            (u + 1.0) * u * (u - 1.0) / 6.0,
        ];
        (w[0] * v[0] + w[1] * v[1] + w[2] * v[2] + w[3] * v[3]).max(0.0)
    }

    /// `v*` in `[-1, 1]` scaled: returns `psi*`, or `None` when the slice is empty.
    fn cut(&self, phi: f64, gval: f64, t: f64) -> Option<f64> {
        if gval <= 0.0 {
            return None;
        }
        let beta = phi.sin();
        let c = (t / gval).powf(1.0 / self.np);
        if c >= 1.0 + beta {
            return None;
        }
        if beta == 0.0 {
            // the slice is a point; the cut is all or nothing
            return if c < 1.0 { Some(0.0) } else { None };
        }
        let v = ((1.0 - c) / beta).clamp(-1.0, 1.0);
        Some(v.acos())
    }

    /// `(1/Z_v) int_{psi*}^{pi} (1 - beta cos psi)^{-n} sin^{n-2} psi d psi`.
    fn inner(&self, beta: f64, psi_star: f64) -> f64 {
        let nf = self.n as f64;
        let f = |psi: f64| {
            let s = psi.sin();
            if s <= 0.0 && self.n > 2 {
                return 0.0;
            }
            (-nf * (1.0 - beta * psi.cos()).ln() + (nf - 2.0) * s.ln() - self.ln_zv).exp()
        };
        let width = (2.0 * (1.0 - beta)).max(0.0).sqrt().max(1e-12);
        let mut a = psi_star;
        let mut h = (width + psi_star).max(1e-12).min(PI - a);
        let mut total = 0.0;
        while a < PI {
            let b = (a + h).min(PI);
            total += panel(&self.gl, &f, a, b);
            a = b;
            h *= 2.0;
        }
        total
    }

    fn slice(&self, phi: f64, t: f64) -> f64 {
        let gval = self.lift(phi);
        match self.cut(phi, gval, t) {
            None => 0.0,
            Some(ps) => self.inner(phi.sin(), ps),
        }
    }

    /// Regime of a slice: 0 empty, 1 partial, 2 full.
    fn regime(&self, phi: f64, gval: f64, t: f64) -> u8 {
        match self.cut(phi, gval, t) {
            None => 0,
            Some(ps) if ps <= 0.0 => 2,
            Some(ps) if ps >= PI => 0,
            Some(_) => 1,
        }
    }

    fn measure(&self, t: f64) -> f64 {
        let nf = self.n as f64;
        // break points where the regime changes
        let mut cuts = vec![0.0];
        for w in self.scan.windows(2) {
            let (p0, g0) = w[0];
            let (p1, g1) = w[1];
            let (r0, r1) = (self.regime(p0, g0, t), self.regime(p1, g1, t));
            if r0 != r1 {
                let (mut a, mut b) = (p0, p1);
                for _ in 0..50 {
                    let m = 0.5 * (a + b);
                    if self.regime(m, self.lift(m), t) == r0 {
                        a = m;
                    } else {
                        b = m;
                    }
                }
                cuts.push(0.5 * (a + b));
            }
        }
        cuts.push(PI);
        let weight = |phi: f64| ((nf - 1.0) * phi.sin().max(1e-300).ln() - self.ln_za).exp();
        let mut total = 0.0;
        for w in cuts.windows(2) {
            let (a, b) = (w[0], w[1]);
            if b <= a {
                continue;
            }
            let pieces = ((b - a) / (PI / 16.0)).ceil().max(1.0) as usize;
            let h = (b - a) / pieces as f64;
            for k in 0..pieces {
                let (x0, x1) = (a + h * k as f64, a + h * (k + 1) as f64);
                total += panel(&self.gl, &|phi: f64| weight(phi) * self.slice(phi, t), x0, x1);
            }
        }
        self.area * total
    }
}

fn panel(gl: &GaussRule, f: &impl Fn(f64) -> f64, a: f64, b: f64) -> f64 {
    let (mid, half) = (0.5 * (a + b), 0.5 * (b - a));
    2.0 * half * gl.nodes.iter().zip(&gl.weights).map(|(&x, &w)| w * f(mid + half * x)).sum::<f64>()
}

/// Lift of `R U g` for radial `g` given by its lift.
pub fn lifted_ru_step(g: &ZonalFunction) -> Result<ZonalFunction> {
    let ctx = g.context();
    let params = ctx.params;
    let p = params.p;
    if g.min() < 0.0 {
        return Err(Error::domain("iterates must be nonnegative"));
    }
    let dist = LiftedDistribution::new(g, p)?;
    // sup of U g over the sphere: (1 - sin phi cos psi)^{n/p} G(cos phi) peaks at psi = pi
    let top = dist
        .scan
        .iter()
        .map(|&(phi, gv)| (1.0 + phi.sin()).powf(dist.np) * gv)
        .fold(0.0f64, f64::max)
        * 1.01;
    let radii: Vec<f64> = ctx.nodes.iter().map(|&t| radius_of_height(t)).collect();
    let lambda = |t: f64| dist.measure(t);
    let profile = invert_distribution(&lambda, top, params.n, &radii)?;
    let n = params.n;
    let values = radii
        .iter()
        .zip(&profile)
        .map(|(&rho, &v)| crate::sphere::conformal_weight(n, p, rho) * v)
        .collect();
    ZonalFunction::from_nodal(ctx, values)
}

/// `||f||_p |S^n|^{-1/p} (2/(1+rho^2))^{n/p}`.
pub fn target_profile(n: usize, p: f64, norm: f64, rho: f64) -> f64 {
    norm * sphere_area(n).powf(-1.0 / p) * (n as f64 / p * (2.0 / (1.0 + rho * rho)).ln()).exp()
}

#[derive(Debug, Clone, Serialize)]
pub struct FlowRecord {
    pub k: usize,
    /// `||g_k||_p` on `R^n`.
    pub lp_norm: f64,
    /// `<P_2s G_k, G_k>` of the lift.
    pub quadratic_form: f64,
    /// `||g_k - h||_p` on `R^n`.
    pub distance_to_target: f64,
    /// `||r_k||_p` on `R^n` from the projection of the lift.
    pub residual_norm: f64,
    /// `||phi_k - h||_p`, zero when the projection degenerates.
    pub manifold_to_target: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct FlowTrace {
    pub n: usize,
    pub s: f64,
    pub records: Vec<FlowRecord>,
}

impl FlowTrace {
    pub fn norm_drift(&self) -> f64 {
        let n0 = self.records[0].lp_norm;
        self.records.iter().map(|r| (r.lp_norm - n0).abs() / n0).fold(0.0, f64::max)
    }
}

/// Norm drift beyond which the iteration stops.
pub const DRIFT_ABORT: f64 = 1e-4;

fn record(k: usize, g: &ZonalFunction, h_value: f64) -> Result<(FlowRecord, DecompositionResult)> {
    let ctx = g.context();
    let p = ctx.params.p;
    let scale = sphere_area(ctx.params.n).powf(1.0 / p);
    let h = ZonalFunction::constant(ctx, h_value);
    let dec = project_hminus_s(g)?;
    let phi_to_h = match dec.phi {
        Some(e) => (&Extremizer::new(e.c, e.tau)?.profile(ctx) - &h).lp_norm(p),
        None => h.lp_norm(p),
    };
    let rec = FlowRecord {
        k,
        lp_norm: scale * g.lp_norm(p),
        quadratic_form: g.p2s_form(g),
        distance_to_target: scale * (g - &h).lp_norm(p),
        residual_norm: scale * dec.lp_distance,
        manifold_to_target: scale * phi_to_h,
    };
    Ok((rec, dec))
}

/// Iterates `g_{k+1} = R U g_k` from a nonnegative radial start.
pub fn competing_iteration(
    ctx: &Arc<SphereContext>,
    start: impl Fn(f64) -> f64,
    k_max: usize,
) -> Result<FlowTrace> {
    competing_iteration_lifted(stereographic_lift(ctx, start, ctx.params.p)?, k_max)
}

/// The same iteration from the lift of the start profile.
pub fn competing_iteration_lifted(mut g: ZonalFunction, k_max: usize) -> Result<FlowTrace> {
    let params = g.context().params;
    let p = params.p;
    if g.min() < 0.0 {
        return Err(Error::domain("start profile must be nonnegative"));
    }
    let scale = sphere_area(params.n).powf(1.0 / p);
    let norm = scale * g.lp_norm(p);
    if !(norm > 0.0) {
        return Err(Error::domain("start profile has zero norm"));
    }
    let h_value = norm / scale;
    let mut records = vec![record(0, &g, h_value)?.0];
    for k in 1..=k_max {
        g = lifted_ru_step(&g)?;
        let (rec, _) = record(k, &g, h_value)?;
        let drift = (rec.lp_norm - norm).abs() / norm;
        records.push(rec);
        if drift > DRIFT_ABORT {
            return Err(Error::Numerical(format!(
                "norm drift {drift:.3e} at iteration {k} exceeds {DRIFT_ABORT:e}"
            )));
        }
    }
    Ok(FlowTrace { n: params.n, s: params.s, records })
}

#[derive(Debug, Clone, Serialize)]
pub struct MonotonicityReport {
    pub nondecreasing: bool,
    pub first_violation: Option<usize>,
    pub worst_drop: f64,
    pub total_increase: f64,
}

/// `<P_2s G_k, G_k>` nondecreasing for `k >= 1` within `tol` relative.
pub fn monotonicity_check(trace: &FlowTrace, tol: f64) -> MonotonicityReport {
    let forms: Vec<f64> = trace.records.iter().skip(1).map(|r| r.quadratic_form).collect();
    let mut first_violation = None;
    let mut worst_drop = 0.0f64;
    for (i, w) in forms.windows(2).enumerate() {
        let drop = w[0] - w[1];
        worst_drop = worst_drop.max(drop);
        if drop > tol * w[0].abs().max(1.0) && first_violation.is_none() {
            first_violation = Some(i + 2);
        }
    }
    MonotonicityReport {
        nondecreasing: first_violation.is_none(),
        first_violation,
        worst_drop,
        total_increase: forms.last().copied().unwrap_or(0.0) - forms.first().copied().unwrap_or(0.0),
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct ResidualDecayReport {
    /// First index from which `||r_k|| / ||g||` stays below the target.
    pub settled_at: Option<usize>,
    pub final_fraction: f64,
    pub target: f64,
    /// Largest violation of `||r_k|| <= ||g_k - h|| + ||phi_k - h||`.
    pub triangle_excess: f64,
}

impl ResidualDecayReport {
    pub fn passed(&self) -> bool {
        self.settled_at.is_some() && self.triangle_excess <= 1e-9
    }
}

pub fn residual_decay_check(trace: &FlowTrace, target: f64) -> ResidualDecayReport {
    let norm = trace.records[0].lp_norm;
    let fr: Vec<f64> = trace.records.iter().map(|r| r.residual_norm / norm).collect();
    let settled_at = (0..fr.len()).find(|&k| fr[k..].iter().all(|&f| f <= target));
    let triangle_excess = trace
        .records
        .iter()
        .map(|r| (r.residual_norm - r.distance_to_target - r.manifold_to_target) / norm)
        .fold(f64::NEG_INFINITY, f64::max);
    ResidualDecayReport { settled_at, final_fraction: *fr.last().unwrap_or(&f64::NAN), target, triangle_excess }
}

/// `inf_{c, tau} ||F - c u_tau||_p` over the zonal manifold slice, with `c = 0` included.
pub fn lp_distance_to_manifold(f: &ZonalFunction) -> f64 {
    let ctx = f.context();
    let p = ctx.params.p;
    let e = ctx.params.profile_exponent();
    let fnorm = f.lp_norm(p);
    let limit = crate::extremizers::tau_limit(ctx);
    let best_c = |tau: f64| -> f64 {
        let u = Extremizer { c: 1.0, tau }.profile(ctx);
        let un = u.lp_norm(p);
        let bound = 2.0 * fnorm / un;
        let obj = |c: f64| (f - &(&u * c)).lp_norm(p);
        let c = golden(obj, -bound, bound, 1e-12 * bound.max(1.0));
        obj(c)
    };
    let _ = e;
    let starts = 17;
    let width = 2.0 * limit / starts as f64;
    let mut best = fnorm;
    for k in 0..starts {
        let a = -limit + width * k as f64;
        let tau = golden(best_c, a, a + width, 1e-9);
        best = best.min(best_c(tau));
    }
    best
}

fn golden(f: impl Fn(f64) -> f64, mut a: f64, mut b: f64, tol: f64) -> f64 {
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

#[derive(Debug, Clone, Serialize)]
pub struct GlobalRatioReport {
    /// `deficit(f) / inf-dist^2`.
    pub quotient_distance: f64,
    /// `deficit(f) / ||f||_p^2`.
    pub quotient_norm: f64,
    /// `deficit(g_k) / ||g_k||_p^2` along the iteration.
    pub quotient_iterates: Vec<f64>,
    /// `||r||_p^2 / ||f||_p^2` for the projection of `f`.
    pub residual_fraction: f64,
    pub precondition_met: bool,
    pub chain_holds: bool,
}

/// The quotient chain `deficit/dist^2 >= deficit/||f||^2 >= deficit(g_k)/||g_k||^2`.
pub fn global_ratio_demo(
    ctx: &Arc<SphereContext>,
    start: impl Fn(f64) -> f64,
    iterations: usize,
    delta: f64,
) -> Result<GlobalRatioReport> {
    let p = ctx.params.p;
    let f = stereographic_lift(ctx, start, p)?;
    let norm_sq = f.lp_norm(p).powi(2);
    let deficit = hls_deficit(&f).deficit;
    let dist = lp_distance_to_manifold(&f);
    let dec = project_hminus_s(&f)?;
    let residual_fraction = dec.lp_distance.powi(2) / norm_sq;
    let mut g = f.clone();
    let mut quotient_iterates = Vec::with_capacity(iterations);
    for _ in 0..iterations {
        g = lifted_ru_step(&g)?;
        quotient_iterates.push(hls_deficit(&g).deficit / g.lp_norm(p).powi(2));
    }
    let quotient_distance = if dist > 0.0 { deficit / (dist * dist) } else { f64::INFINITY };
    let quotient_norm = deficit / norm_sq;
    let tol = 1e-9;
    let chain_holds = quotient_distance >= quotient_norm - tol
        && quotient_iterates.iter().all(|&q| quotient_norm >= q - tol);
    Ok(GlobalRatioReport {
        quotient_distance,
        quotient_norm,
        quotient_iterates,
        residual_fraction,
        precondition_met: residual_fraction >= delta,
        chain_holds,
    })
}

/// Radial two-bump profile: a central Gaussian and a shell at radius 2.5.
pub fn two_bump(rho: f64) -> f64 {
    (-rho * rho).exp() + 0.6 * (-4.0 * (rho - 2.5).powi(2)).exp()
}

pub fn gaussian(rho: f64) -> f64 {
    (-rho * rho).exp()
}

/// `(2 lambda / (lambda^2 + rho^2))^{n/p}`.
pub fn dilated_extremizer(n: usize, p: f64, lambda: f64) -> impl Fn(f64) -> f64 {
    move |rho: f64| (n as f64 / p * (2.0 * lambda / (lambda * lambda + rho * rho)).ln()).exp()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Family {
    Twobump,
    Degree2,
}

#[derive(Debug, Clone, Serialize)]
pub struct QuotientRow {
    pub n: usize,
    pub quotient: f64,
    pub n_quotient: f64,
}

/// `deficit / dist^2` across dimensions for a fixed family.
pub fn quotient_sweep(s: f64, dims: &[usize], family: Family, q: usize) -> Result<Vec<QuotientRow>> {
    dims.par_iter()
        .map(|&n| {
            let params = ProblemParams::new(n, s)?;
            let ctx = SphereContext::full(params, q)?;
            let quotient = match family {
                Family::Degree2 => {
                    let g2 = ZonalFunction::harmonic(&ctx, 2)?;
                    let r = &g2 * 1e-3;
                    crate::local_stability::local_stability_ratio(&r)?
                }
                Family::Twobump => {
                    let f = stereographic_lift(&ctx, two_bump, params.p)?;
                    let d = lp_distance_to_manifold(&f);
                    hls_deficit(&f).deficit / (d * d)
                }
            };
            Ok(QuotientRow { n, quotient, n_quotient: n as f64 * quotient })
        })
        .collect()
}
