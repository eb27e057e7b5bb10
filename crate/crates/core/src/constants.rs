//! Closed-form constants: sharp constant, Funk–Hecke eigenvalues of the
//! sphere operator `P_2s`, harmonic multiplicities, the comparability bound
//! and the thresholds of the local-stability certificate.

use std::f64::consts::PI;

use serde::Serialize;

use crate::error::{Error, Result};

/// Dimension and order of the problem with the derived Lebesgue exponents.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ProblemParams {
    pub n: usize,
    pub s: f64,
    /// `2n/(n+2s)`, the HLS exponent.
    pub p: f64,
    /// `2n/(n-2s)`, the Sobolev exponent.
    pub q: f64,
    /// `2 - p = 4s/(n+2s)`.
    pub theta: f64,
}

impl ProblemParams {
    pub fn new(n: usize, s: f64) -> Result<Self> {
        if n < 3 {
            return Err(Error::domain(format!("n = {n} must be at least 3")));
        }
        let nf = n as f64;
        if !(s.is_finite() && s > 0.0 && s < nf / 2.0) {
            return Err(Error::domain(format!("s = {s} must lie in (0, n/2) = (0, {})", nf / 2.0)));
        }
        let p = 2.0 * nf / (nf + 2.0 * s);
        let q = 2.0 * nf / (nf - 2.0 * s);
        let theta = 4.0 * s / (nf + 2.0 * s);
        Ok(Self { n, s, p, q, theta })
    }

    pub fn nf(&self) -> f64 {
        self.n as f64
    }

    /// Exponent of the extremizer profile, `(n+2s)/2 = n/p`.
    pub fn profile_exponent(&self) -> f64 {
        (self.nf() + 2.0 * self.s) / 2.0
    }
}

pub fn ln_gamma(x: f64) -> f64 {
    libm::lgamma(x)
}

/// Surface area of the unit sphere `S^m` in `R^{m+1}`.
pub fn sphere_area(m: usize) -> f64 {
    ln_sphere_area(m).exp()
}

pub fn ln_sphere_area(m: usize) -> f64 {
    let a = (m as f64 + 1.0) / 2.0;
    2f64.ln() + a * PI.ln() - ln_gamma(a)
}

/// Sharp constant `S_{s,n}` written with the area of `S^n`.
pub fn sharp_constant(params: &ProblemParams) -> f64 {
    ln_sharp_constant(params).exp()
}

pub fn ln_sharp_constant(params: &ProblemParams) -> f64 {
    let (n, s) = (params.nf(), params.s);
    ln_gamma((n + 2.0 * s) / 2.0) - ln_gamma((n - 2.0 * s) / 2.0) + (2.0 * s / n) * ln_sphere_area(params.n)
}

/// Same constant written as `(4π)^s Γ-ratio (Γ(n/2)/Γ(n))^{2s/n}`.
pub fn sharp_constant_gamma_form(params: &ProblemParams) -> f64 {
    ln_sharp_constant_gamma_form(params).exp()
}

pub fn ln_sharp_constant_gamma_form(params: &ProblemParams) -> f64 {
    let (n, s) = (params.nf(), params.s);
    s * (4.0 * PI).ln() + ln_gamma((n + 2.0 * s) / 2.0) - ln_gamma((n - 2.0 * s) / 2.0)
        + (2.0 * s / n) * (ln_gamma(n / 2.0) - ln_gamma(n))
}

/// Eigenvalue `A_{n,s}(l)` of `P_2s` on degree-`l` harmonics, by telescoping product.
pub fn funk_hecke_eigenvalue(params: &ProblemParams, l: usize) -> f64 {
    let half = params.nf() / 2.0;
    let s = params.s;
    (0..l).fold(1.0, |acc, j| {
        let j = j as f64;
        acc * (half - s + j) / (half + s + j)
    })
}

/// Eigenvalues `A(0..=lmax)`.
pub fn funk_hecke_table(params: &ProblemParams, lmax: usize) -> Vec<f64> {
    let half = params.nf() / 2.0;
    let s = params.s;
    let mut out = Vec::with_capacity(lmax + 1);
    let mut a = 1.0;
    for j in 0..=lmax {
        out.push(a);
        let jf = j as f64;
        a *= (half - s + jf) / (half + s + jf);
    }
    out
}

fn binomial(m: u128, k: u128) -> Option<u128> {
    if k > m {
        return Some(0);
    }
    let k = k.min(m - k);
    let mut c: u128 = 1;
    for i in 1..=k {
        // c * (m - k + i) is divisible by i at every step
        let g = gcd(c, i);
        let (c_red, i_red) = (c / g, i / g);
        let f = (m - k + i) / i_red;
        c = c_red.checked_mul(f)?;
    }
    Some(c)
}

fn gcd(mut a: u128, mut b: u128) -> u128 {
    while b != 0 {
        let t = a % b;
        a = b;
        b = t;
    }
    a
}

/// Dimension of degree-`l` spherical harmonics on `S^n`, exact.
pub fn multiplicity(n: usize, l: usize) -> Result<u128> {
    if n < 2 {
        return Err(Error::domain(format!("multiplicity needs n >= 2, got {n}")));
    }
    if l == 0 {
        return Ok(1);
    }
    let (n, l) = (n as u128, l as u128);
    let overflow = || Error::Overflow(format!("N({n}, {l}) exceeds 128 bits"));
    let a = binomial(n + l, n).ok_or_else(overflow)?;
    let b = if l >= 2 { binomial(n + l - 2, n).ok_or_else(overflow)? } else { 0 };
    Ok(a - b)
}

/// `b_{n,s} = 1 + 2^{1+s/n} sqrt((n+2s)/(n-2s))`.
pub fn comparability_bound(params: &ProblemParams) -> f64 {
    let (n, s) = (params.nf(), params.s);
    1.0 + 2f64.powf(1.0 + s / n) * ((n + 2.0 * s) / (n - 2.0 * s)).sqrt()
}

/// Lower bound for the global constant from the constant on nonnegative functions.
pub fn constant_relation(c_pos: f64, params: &ProblemParams) -> Result<f64> {
    if !(c_pos >= 0.0) {
        return Err(Error::domain(format!("c_pos = {c_pos} must be nonnegative")));
    }
    let (n, s) = (params.nf(), params.s);
    let gap = 2f64.powf((n + 2.0 * s) / n) - 2.0;
    Ok(0.5 * c_pos.min(gap.min(1.0)))
}

/// Exponent used for `delta2`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Default)]
pub enum Delta2Exponent {
    /// The instance's own `p`.
    #[default]
    Instance,
    /// The `p = 2` limit.
    Limit,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ThresholdSet {
    pub delta1: f64,
    pub delta2: f64,
    pub delta0: f64,
    /// Natural logarithms; `delta2` underflows for large `K`.
    pub ln_delta2: f64,
    pub ln_delta0: f64,
    #[serde(rename = "K")]
    pub k: u64,
    pub n0: u64,
}

impl ThresholdSet {
    /// True when `delta0` is a positive normal double.
    pub fn is_representable(&self) -> bool {
        self.delta0.is_normal() && self.delta0 > 0.0
    }
}

/// `delta1 = 98 eps1 / 280^2`.
pub fn delta1(eps1: f64) -> f64 {
    98.0 * eps1 / (280.0 * 280.0)
}

/// `ln delta2` solving `1 - 3^K gamma^{-p/2} delta2^{p/4} = 2/3` with `gamma = eps1/2`.
pub fn ln_delta2(eps1: f64, k: u64, p: f64) -> f64 {
    let gamma = eps1 / 2.0;
    2.0 * gamma.ln() - 4.0 * (k as f64 + 1.0) / p * 3f64.ln()
}

/// Certificate thresholds for a selected `(K, n0)` pair.
pub fn thresholds(
    params: &ProblemParams,
    eps1: f64,
    eps2: f64,
    k: u64,
    n0: u64,
    exponent: Delta2Exponent,
) -> Result<ThresholdSet> {
    if !(eps1 > 0.0 && eps1 <= 1.0 / 16.0) {
        return Err(Error::domain(format!("eps1 = {eps1} must lie in (0, 1/16]")));
    }
    if !(eps2 > 0.0 && eps2 <= 1.0 / 8.0) {
        return Err(Error::domain(format!("eps2 = {eps2} must lie in (0, 1/8]")));
    }
    if k < 1 {
        return Err(Error::domain("K must be at least 1"));
    }
    let p = match exponent {
        Delta2Exponent::Instance => params.p,
        Delta2Exponent::Limit => 2.0,
    };
    let d1 = delta1(eps1);
    let ln_d2 = ln_delta2(eps1, k, p);
    let ln_d0 = d1.ln().min(ln_d2);
    Ok(ThresholdSet {
        delta1: d1,
        delta2: ln_d2.exp(),
        delta0: ln_d0.exp(),
        ln_delta2: ln_d2,
        ln_delta0: ln_d0,
        k,
        n0,
    })
}
