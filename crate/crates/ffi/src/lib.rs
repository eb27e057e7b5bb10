//! C ABI for hls-lab.
//!
//! Objects cross the boundary as opaque handles created by `*_new` or
//! `*_from_*` functions and released by the matching `*_free`. Every function
//! returns an [`HlsStatus`]; on failure [`hls_last_error`] describes the cause
//! for the calling thread. Outputs are written through caller-provided
//! pointers only on success.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::sync::Arc;

use hls_lab::constants::{funk_hecke_eigenvalue, sharp_constant, ProblemParams};
use hls_lab::duality::{deficit_transfer_check, dual_density, legendre_identity_check};
use hls_lab::extremizers::project_hminus_s;
use hls_lab::flows::competing_iteration_lifted;
use hls_lab::local_stability::local_stability_ratio;
use hls_lab::profile::load_profile;
use hls_lab::sphere::{hls_deficit, sobolev_deficit, SphereContext, ZonalFunction};
use hls_lab::Error;

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum HlsStatus {
    Ok = 0,
    NullPointer = 1,
    Domain = 2,
    Overflow = 3,
    Quadrature = 4,
    Cutoff = 5,
    Numerical = 6,
    Schema = 7,
    Io = 8,
    InvalidString = 9,
    BufferTooSmall = 10,
    Panic = 11,
}

/// Spectral context on the sphere: parameters, cutoff and quadrature.
pub struct HlsContext {
    inner: Arc<SphereContext>,
}

/// Zonal function sampled at the nodes of its context.
pub struct HlsZonal {
    inner: ZonalFunction,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, Default)]
pub struct HlsProjection {
    /// Scale of the nearest extremizer; zero when degenerate.
    pub c: f64,
    pub tau: f64,
    pub hs_distance_sq: f64,
    pub lp_distance: f64,
    pub degenerate: bool,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, Default)]
pub struct HlsFlowRecord {
    pub k: usize,
    pub lp_norm: f64,
    pub quadratic_form: f64,
    pub distance_to_target: f64,
    pub residual_norm: f64,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = c);
}

fn status_of(e: &Error) -> HlsStatus {
    match e {
        Error::Domain(_) => HlsStatus::Domain,
        Error::Overflow(_) => HlsStatus::Overflow,
        Error::Quadrature(_) => HlsStatus::Quadrature,
        Error::Cutoff { .. } => HlsStatus::Cutoff,
        Error::Numerical(_) => HlsStatus::Numerical,
        Error::Schema(_) | Error::Json(_) => HlsStatus::Schema,
        Error::Io(_) => HlsStatus::Io,
    }
}

struct Failure(HlsStatus, String);

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure(status_of(&e), e.to_string())
    }
}

fn null(what: &str) -> Failure {
    Failure(HlsStatus::NullPointer, format!("{what} is null"))
}

fn guard(f: impl FnOnce() -> Result<(), Failure>) -> HlsStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            set_error(String::new());
            HlsStatus::Ok
        }
        Ok(Err(Failure(status, msg))) => {
            set_error(msg);
            status
        }
        Err(_) => {
            set_error("internal panic".into());
            HlsStatus::Panic
        }
    }
}

unsafe fn write<T>(out: *mut T, value: T, what: &str) -> Result<(), Failure> {
    if out.is_null() {
        return Err(null(what));
    }
    out.write(value);
    Ok(())
}

unsafe fn borrow<'a, T>(p: *const T, what: &str) -> Result<&'a T, Failure> {
    p.as_ref().ok_or_else(|| null(what))
}

unsafe fn slice<'a>(p: *const f64, len: usize, what: &str) -> Result<&'a [f64], Failure> {
    if len == 0 {
        return Ok(&[]);
    }
    if p.is_null() {
        return Err(null(what));
    }
    Ok(std::slice::from_raw_parts(p, len))
}

unsafe fn fill(dst: *mut f64, len: usize, src: &[f64]) -> Result<(), Failure> {
    if len < src.len() {
        return Err(Failure(HlsStatus::BufferTooSmall, format!("buffer holds {len}, need {}", src.len())));
    }
    if dst.is_null() {
        return Err(null("output buffer"));
    }
    std::ptr::copy_nonoverlapping(src.as_ptr(), dst, src.len());
    Ok(())
}

/// Message for the last failed call on this thread; empty after a success.
/// The pointer stays valid until the next call on the same thread.
#[no_mangle]
pub extern "C" fn hls_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn hls_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Sharp HLS constant for `(n, s)`.
///
/// # Safety
/// `out` must be valid for writing one `double`.
#[no_mangle]
pub unsafe extern "C" fn hls_sharp_constant(n: usize, s: f64, out: *mut f64) -> HlsStatus {
    guard(|| {
        let params = ProblemParams::new(n, s)?;
        write(out, sharp_constant(&params), "out")
    })
}

/// Multiplier `A(l)` of the spectral operator on degree-`l` harmonics.
///
/// # Safety
/// `out` must be valid for writing one `double`.
#[no_mangle]
pub unsafe extern "C" fn hls_multiplier(n: usize, s: f64, l: usize, out: *mut f64) -> HlsStatus {
    guard(|| {
        let params = ProblemParams::new(n, s)?;
        write(out, funk_hecke_eigenvalue(&params, l), "out")
    })
}

/// Context with spectral cutoff `l` and `q` quadrature nodes (`q > l`).
///
/// # Safety
/// `out` must be valid for writing one pointer. Release the handle with
/// `hls_context_free`.
#[no_mangle]
pub unsafe extern "C" fn hls_context_new(n: usize, s: f64, l: usize, q: usize, out: *mut *mut HlsContext) -> HlsStatus {
    guard(|| {
        let ctx = SphereContext::new(ProblemParams::new(n, s)?, l, q)?;
        write(out, Box::into_raw(Box::new(HlsContext { inner: ctx })), "out")
    })
}

/// Releases a context. Functions created from it stay valid.
///
/// # Safety
/// `ctx` must be null or a handle from `hls_context_new` not yet freed.
#[no_mangle]
pub unsafe extern "C" fn hls_context_free(ctx: *mut HlsContext) {
    if !ctx.is_null() {
        drop(Box::from_raw(ctx));
    }
}

/// Number of quadrature nodes.
///
/// # Safety
/// `ctx` must be a live context and `out` valid for one `size_t`.
#[no_mangle]
pub unsafe extern "C" fn hls_context_size(ctx: *const HlsContext, out: *mut usize) -> HlsStatus {
    guard(|| write(out, borrow(ctx, "ctx")?.inner.q, "out"))
}

/// Copies the node heights `t_i` into `buf`.
///
/// # Safety
/// `ctx` must be a live context and `buf` valid for `len` doubles.
#[no_mangle]
pub unsafe extern "C" fn hls_context_nodes(ctx: *const HlsContext, buf: *mut f64, len: usize) -> HlsStatus {
    guard(|| fill(buf, len, &borrow(ctx, "ctx")?.inner.nodes))
}

/// Zonal function from its values at the context nodes.
///
/// # Safety
/// `ctx` must be a live context, `values` valid for `len` doubles and `out`
/// valid for one pointer. Release the handle with `hls_zonal_free`.
#[no_mangle]
pub unsafe extern "C" fn hls_zonal_from_nodal(
    ctx: *const HlsContext,
    values: *const f64,
    len: usize,
    out: *mut *mut HlsZonal,
) -> HlsStatus {
    guard(|| {
        let ctx = borrow(ctx, "ctx")?;
        let v = slice(values, len, "values")?.to_vec();
        let z = ZonalFunction::from_nodal(&ctx.inner, v)?;
        write(out, Box::into_raw(Box::new(HlsZonal { inner: z })), "out")
    })
}

/// Zonal function from coefficients in the orthonormal zonal basis.
///
/// # Safety
/// As for `hls_zonal_from_nodal`.
#[no_mangle]
pub unsafe extern "C" fn hls_zonal_from_coefficients(
    ctx: *const HlsContext,
    coeffs: *const f64,
    len: usize,
    out: *mut *mut HlsZonal,
) -> HlsStatus {
    guard(|| {
        let ctx = borrow(ctx, "ctx")?;
        let c = slice(coeffs, len, "coeffs")?;
        let z = ZonalFunction::synthesize(&ctx.inner, c)?;
        write(out, Box::into_raw(Box::new(HlsZonal { inner: z })), "out")
    })
}

/// Loads a JSON profile; radial profiles are lifted onto `q` nodes.
///
/// # Safety
/// `path` must be a NUL-terminated string and `out` valid for one pointer.
#[no_mangle]
pub unsafe extern "C" fn hls_zonal_load(path: *const c_char, q: usize, out: *mut *mut HlsZonal) -> HlsStatus {
    guard(|| {
        if path.is_null() {
            return Err(null("path"));
        }
        let path = CStr::from_ptr(path)
            .to_str()
            .map_err(|_| Failure(HlsStatus::InvalidString, "path is not UTF-8".into()))?;
        let z = load_profile(path)?.to_zonal(q)?;
        write(out, Box::into_raw(Box::new(HlsZonal { inner: z })), "out")
    })
}

/// # Safety
/// `z` must be null or a live zonal handle.
#[no_mangle]
pub unsafe extern "C" fn hls_zonal_free(z: *mut HlsZonal) {
    if !z.is_null() {
        drop(Box::from_raw(z));
    }
}

/// Number of nodal values.
///
/// # Safety
/// `z` must be a live zonal handle and `out` valid for one `size_t`.
#[no_mangle]
pub unsafe extern "C" fn hls_zonal_size(z: *const HlsZonal, out: *mut usize) -> HlsStatus {
    guard(|| write(out, borrow(z, "z")?.inner.values().len(), "out"))
}

/// Copies the nodal values into `buf`.
///
/// # Safety
/// `z` must be a live zonal handle and `buf` valid for `len` doubles.
#[no_mangle]
pub unsafe extern "C" fn hls_zonal_values(z: *const HlsZonal, buf: *mut f64, len: usize) -> HlsStatus {
    guard(|| fill(buf, len, borrow(z, "z")?.inner.values()))
}

/// `||g||_p^2 - <P g, g>`.
///
/// # Safety
/// `z` must be a live zonal handle and `out` valid for one `double`.
#[no_mangle]
pub unsafe extern "C" fn hls_hls_deficit(z: *const HlsZonal, out: *mut f64) -> HlsStatus {
    guard(|| write(out, hls_deficit(&borrow(z, "z")?.inner).deficit, "out"))
}

/// `<E u, u> - ||u||_q^2`.
///
/// # Safety
/// `z` must be a live zonal handle and `out` valid for one `double`.
#[no_mangle]
pub unsafe extern "C" fn hls_sobolev_deficit(z: *const HlsZonal, out: *mut f64) -> HlsStatus {
    guard(|| write(out, sobolev_deficit(&borrow(z, "z")?.inner).deficit, "out"))
}

/// `deficit(1 + r) / ||r||_p^2`.
///
/// # Safety
/// `r` must be a live zonal handle and `out` valid for one `double`.
#[no_mangle]
pub unsafe extern "C" fn hls_local_stability_ratio(r: *const HlsZonal, out: *mut f64) -> HlsStatus {
    guard(|| write(out, local_stability_ratio(&borrow(r, "r")?.inner)?, "out"))
}

/// Nearest point of the extremizer manifold in the H^{-s} metric.
///
/// # Safety
/// `g` must be a live zonal handle and `out` valid for one `HlsProjection`.
#[no_mangle]
pub unsafe extern "C" fn hls_project(g: *const HlsZonal, out: *mut HlsProjection) -> HlsStatus {
    guard(|| {
        let dec = project_hminus_s(&borrow(g, "g")?.inner)?;
        let (c, tau) = dec.phi.map_or((0.0, 0.0), |e| (e.c, e.tau));
        let proj = HlsProjection {
            c,
            tau,
            hs_distance_sq: dec.hs_distance_sq,
            lp_distance: dec.lp_distance,
            degenerate: dec.degenerate,
        };
        write(out, proj, "out")
    })
}

/// Residuals of the Legendre identity and of the deficit transfer for the
/// dual density of `f`.
///
/// # Safety
/// `f` must be a live zonal handle; `legendre` and `transfer` must each be
/// valid for one `double`.
#[no_mangle]
pub unsafe extern "C" fn hls_duality_residuals(f: *const HlsZonal, legendre: *mut f64, transfer: *mut f64) -> HlsStatus {
    guard(|| {
        let pair = dual_density(&borrow(f, "f")?.inner)?;
        if legendre.is_null() || transfer.is_null() {
            return Err(null("output"));
        }
        write(legendre, legendre_identity_check(&pair).residual, "legendre")?;
        write(transfer, deficit_transfer_check(&pair).residual, "transfer")
    })
}

/// Runs `iters` competing-symmetries steps from the nonnegative lift `g` and
/// writes `iters + 1` records.
///
/// # Safety
/// `g` must be a live zonal handle and `records` valid for `len` records.
#[no_mangle]
pub unsafe extern "C" fn hls_flow(g: *const HlsZonal, iters: usize, records: *mut HlsFlowRecord, len: usize) -> HlsStatus {
    guard(|| {
        let g = borrow(g, "g")?;
        if len < iters + 1 {
            return Err(Failure(HlsStatus::BufferTooSmall, format!("buffer holds {len}, need {}", iters + 1)));
        }
        if records.is_null() {
            return Err(null("records"));
        }
        let trace = competing_iteration_lifted(g.inner.clone(), iters)?;
        for (i, r) in trace.records.iter().enumerate() {
            records.add(i).write(HlsFlowRecord {
                k: r.k,
                lp_norm: r.lp_norm,
                quadratic_form: r.quadratic_form,
                distance_to_target: r.distance_to_target,
                residual_norm: r.residual_norm,
            });
        }
        Ok(())
    })
}
