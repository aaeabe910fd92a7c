//! C ABI for `orbitgrad`.
//!
//! Fallible functions return an [`OgStatus`] and write results through out
//! pointers. Objects are opaque handles created by the `og_schedule_*`
//! constructors or `og_denoiser_load` and released with the matching
//! `og_*_free`. After a non-OK status, `og_last_error` describes the failure
//! on the calling thread.
//!
//! Arrays are passed as `(pointer, length)` pairs of `double`.

#![allow(clippy::missing_safety_doc)]

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};

use orbitgrad::estimator::{counterexample_check, exact_orbit_target};
use orbitgrad::groups::{cyclic_translations, reflection_group, symmetric_group, GroupElement};
use orbitgrad::kernels::ForwardKernel;
use orbitgrad::net::Denoiser;
use orbitgrad::schedule::NoiseSchedule;
use orbitgrad::torus::wrapped_normal_log_pdf;
use orbitgrad::{Error, Point};

/// Result code of fallible calls.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OgStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    InvalidShape = 3,
    NotAGroup = 4,
    DegenerateWeights = 5,
    Numerical = 6,
    Io = 7,
    Panic = 8,
}

/// Discrete noise schedule (opaque).
pub struct OgSchedule(NoiseSchedule);

/// Trained denoiser loaded from a checkpoint (opaque).
pub struct OgDenoiser(Denoiser);

/// Finite group used by the exact orbit target.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OgGroup {
    /// `{+1, -1}` acting on every coordinate.
    Reflection = 0,
    /// All permutations of `param` blocks of size `dim / param`.
    Symmetric = 1,
    /// Cyclic translations `k / param` of every coordinate (torus).
    CyclicTranslation = 2,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_error(msg: &str) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = c);
}

fn status_of(e: &Error) -> OgStatus {
    match e {
        Error::InvalidShape(_) => OgStatus::InvalidShape,
        Error::NotAGroup => OgStatus::NotAGroup,
        Error::DegenerateWeights => OgStatus::DegenerateWeights,
        Error::NumericalDivergence(_) => OgStatus::Numerical,
        Error::Io(_) => OgStatus::Io,
        _ => OgStatus::InvalidArgument,
    }
}

/// Runs `f`, converting errors and panics into status codes.
fn guard<F: FnOnce() -> Result<(), (OgStatus, String)>>(f: F) -> OgStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => OgStatus::Ok,
        Ok(Err((status, msg))) => {
            set_error(&msg);
            status
        }
        Err(_) => {
            set_error("internal panic");
            OgStatus::Panic
        }
    }
}

trait IntoFfi<T> {
    fn ffi(self) -> Result<T, (OgStatus, String)>;
}

impl<T> IntoFfi<T> for orbitgrad::Result<T> {
    fn ffi(self) -> Result<T, (OgStatus, String)> {
        self.map_err(|e| (status_of(&e), e.to_string()))
    }
}

fn null(what: &str) -> (OgStatus, String) {
    (OgStatus::NullPointer, format!("{what} is null"))
}

unsafe fn slice<'a>(
    p: *const f64,
    len: usize,
    what: &str,
) -> Result<&'a [f64], (OgStatus, String)> {
    if p.is_null() {
        return Err(null(what));
    }
    Ok(std::slice::from_raw_parts(p, len))
}

unsafe fn slice_mut<'a>(
    p: *mut f64,
    len: usize,
    what: &str,
) -> Result<&'a mut [f64], (OgStatus, String)> {
    if p.is_null() {
        return Err(null(what));
    }
    Ok(std::slice::from_raw_parts_mut(p, len))
}

/// Message for the last failed call on this thread. Valid until the next
/// failing call on the same thread; never null.
#[no_mangle]
pub extern "C" fn og_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn og_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Variance-preserving schedule with linear betas in `[1e-4, 0.02]`.
#[no_mangle]
pub unsafe extern "C" fn og_schedule_vp_linear(
    steps: usize,
    out: *mut *mut OgSchedule,
) -> OgStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let s = NoiseSchedule::vp_linear(steps).ffi()?;
        *out = Box::into_raw(Box::new(OgSchedule(s)));
        Ok(())
    })
}

/// `alpha = 1` schedule with geometric sigma from `sigma_min` to `sigma_max`.
#[no_mangle]
pub unsafe extern "C" fn og_schedule_ve_geometric(
    steps: usize,
    sigma_min: f64,
    sigma_max: f64,
    out: *mut *mut OgSchedule,
) -> OgStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let s = NoiseSchedule::ve_geometric(steps, sigma_min, sigma_max).ffi()?;
        *out = Box::into_raw(Box::new(OgSchedule(s)));
        Ok(())
    })
}

/// Releases a schedule; null is ignored.
#[no_mangle]
pub unsafe extern "C" fn og_schedule_free(schedule: *mut OgSchedule) {
    if !schedule.is_null() {
        drop(Box::from_raw(schedule));
    }
}

/// Number of steps `T`.
#[no_mangle]
pub unsafe extern "C" fn og_schedule_steps(
    schedule: *const OgSchedule,
    out: *mut usize,
) -> OgStatus {
    guard(|| {
        let s = schedule.as_ref().ok_or_else(|| null("schedule"))?;
        if out.is_null() {
            return Err(null("out"));
        }
        *out = s.0.steps();
        Ok(())
    })
}

/// `(alpha_t, sigma_t)` for `t` in `0..=T`.
#[no_mangle]
pub unsafe extern "C" fn og_schedule_level(
    schedule: *const OgSchedule,
    t: usize,
    alpha: *mut f64,
    sigma: *mut f64,
) -> OgStatus {
    guard(|| {
        let s = schedule.as_ref().ok_or_else(|| null("schedule"))?;
        if alpha.is_null() || sigma.is_null() {
            return Err(null("alpha/sigma"));
        }
        if t > s.0.steps() {
            return Err((
                OgStatus::InvalidArgument,
                format!("t = {t} exceeds T = {}", s.0.steps()),
            ));
        }
        *alpha = s.0.alpha(t);
        *sigma = s.0.sigma(t);
        Ok(())
    })
}

fn group_elements(
    group: OgGroup,
    param: usize,
    dim: usize,
) -> Result<(Vec<GroupElement>, bool), (OgStatus, String)> {
    let bad = |m: String| (OgStatus::InvalidArgument, m);
    match group {
        OgGroup::Reflection => Ok((reflection_group(), false)),
        OgGroup::Symmetric => {
            if param == 0 || param > 6 || !dim.is_multiple_of(param) {
                return Err(bad(format!(
                    "symmetric group needs 1..=6 blocks dividing dim, got {param} for dim {dim}"
                )));
            }
            Ok((symmetric_group(param), false))
        }
        OgGroup::CyclicTranslation => {
            if param == 0 {
                return Err(bad("cyclic order must be >= 1".into()));
            }
            Ok((cyclic_translations(param, dim), true))
        }
    }
}

/// Exact orbit-weighted target for a finite group, written to `out[0..dim]`.
///
/// Euclidean groups use the Gaussian kernel; `CyclicTranslation` uses the
/// wrapped normal on `[0, 1)^dim` with `param` as the order. For `Symmetric`,
/// `param` is the number of equal-size blocks.
#[no_mangle]
pub unsafe extern "C" fn og_exact_orbit_target(
    schedule: *const OgSchedule,
    group: OgGroup,
    param: usize,
    x0: *const f64,
    xt: *const f64,
    dim: usize,
    t: usize,
    out: *mut f64,
) -> OgStatus {
    guard(|| {
        let s = schedule.as_ref().ok_or_else(|| null("schedule"))?;
        let (x0, xt, out) = (
            slice(x0, dim, "x0")?,
            slice(xt, dim, "xt")?,
            slice_mut(out, dim, "out")?,
        );
        let (elements, torus) = group_elements(group, param, dim)?;
        let (kernel, p0, pt) = if torus {
            (
                ForwardKernel::wrapped_normal(s.0.clone()),
                Point::torus(x0.to_vec()),
                Point::torus(xt.to_vec()),
            )
        } else {
            (
                ForwardKernel::gaussian(s.0.clone()),
                Point::euclidean(x0.to_vec()),
                Point::euclidean(xt.to_vec()),
            )
        };
        s.0.check_step(t).ffi()?;
        let est = exact_orbit_target(&p0, &pt, t, &kernel, &elements).ffi()?;
        out.copy_from_slice(&est.target.coords);
        Ok(())
    })
}

/// Log density of the wrapped normal `N(delta; 0, sigma^2)` on the unit circle.
#[no_mangle]
pub unsafe extern "C" fn og_wrapped_normal_log_pdf(
    delta: f64,
    sigma: f64,
    out: *mut f64,
) -> OgStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        if !(sigma > 0.0 && sigma.is_finite() && delta.is_finite()) {
            return Err((
                OgStatus::InvalidArgument,
                format!("need finite delta and sigma > 0, got {delta}, {sigma}"),
            ));
        }
        *out = wrapped_normal_log_pdf(delta, sigma);
        Ok(())
    })
}

/// Conditional means for the two-point dataset `{0, 1}`:
/// `lhs = phi(xt + a)` and `rhs = phi(xt) + a`.
#[no_mangle]
pub unsafe extern "C" fn og_counterexample(
    alpha: f64,
    sigma: f64,
    xt: f64,
    a: f64,
    lhs: *mut f64,
    rhs: *mut f64,
) -> OgStatus {
    guard(|| {
        if lhs.is_null() || rhs.is_null() {
            return Err(null("lhs/rhs"));
        }
        let (l, r) = counterexample_check(alpha, sigma, xt, a).ffi()?;
        *lhs = l;
        *rhs = r;
        Ok(())
    })
}

/// Loads a checkpoint written by the `orbitgrad train` command.
#[no_mangle]
pub unsafe extern "C" fn og_denoiser_load(
    path: *const c_char,
    out: *mut *mut OgDenoiser,
) -> OgStatus {
    guard(|| {
        if path.is_null() || out.is_null() {
            return Err(null("path/out"));
        }
        let path = CStr::from_ptr(path)
            .to_str()
            .map_err(|_| (OgStatus::InvalidArgument, "path is not UTF-8".to_string()))?;
        let f = std::fs::File::open(path).map_err(|e| (OgStatus::Io, format!("{path}: {e}")))?;
        let d = Denoiser::read_checkpoint(std::io::BufReader::new(f)).ffi()?;
        *out = Box::into_raw(Box::new(OgDenoiser(d)));
        Ok(())
    })
}

/// Releases a denoiser; null is ignored.
#[no_mangle]
pub unsafe extern "C" fn og_denoiser_free(denoiser: *mut OgDenoiser) {
    if !denoiser.is_null() {
        drop(Box::from_raw(denoiser));
    }
}

/// Point dimension the denoiser expects.
#[no_mangle]
pub unsafe extern "C" fn og_denoiser_dim(denoiser: *const OgDenoiser, out: *mut usize) -> OgStatus {
    guard(|| {
        let d = denoiser.as_ref().ok_or_else(|| null("denoiser"))?;
        if out.is_null() {
            return Err(null("out"));
        }
        *out = d.0.dim();
        Ok(())
    })
}

/// Evaluates the denoiser at `x[0..dim]` and normalized time `t_norm = t / T`.
#[no_mangle]
pub unsafe extern "C" fn og_denoiser_forward(
    denoiser: *const OgDenoiser,
    x: *const f64,
    dim: usize,
    t_norm: f64,
    out: *mut f64,
) -> OgStatus {
    guard(|| {
        let d = denoiser.as_ref().ok_or_else(|| null("denoiser"))?;
        if dim != d.0.dim() {
            return Err((
                OgStatus::InvalidShape,
                format!("denoiser dim is {}, got {dim}", d.0.dim()),
            ));
        }
        let (x, out) = (slice(x, dim, "x")?, slice_mut(out, dim, "out")?);
        out.copy_from_slice(&d.0.forward_raw(x, t_norm));
        Ok(())
    })
}
