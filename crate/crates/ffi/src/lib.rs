//! C ABI over the scenery library.
//!
//! Objects cross the boundary as opaque handles built from JSON and released
//! with the matching `_free` function. Every fallible call returns a
//! [`ScnStatus`]; on failure [`scn_last_error`] describes the cause. Strings
//! returned by the library are released with [`scn_string_free`].

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use scenery::correlations::{estimate_temporal, spatial_correlation_flat};
use scenery::reconstruct::{reconstruct_pipeline, PipelineConfig};
use scenery::torus::{aligned_distance, wrap};
use scenery::{Error, Scenery, StepLaw};

/// Status codes of every fallible call.
#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ScnStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidUtf8 = 2,
    InvalidJson = 3,
    InvalidArgument = 4,
    Unsupported = 5,
    /// A search or solve inside the library did not succeed.
    Failed = 6,
    Panic = 7,
}

/// Opaque scenery handle.
pub struct ScnScenery(Scenery);

/// Opaque step-law handle.
pub struct ScnStepLaw(StepLaw);

#[repr(C)]
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct ScnComplex {
    pub re: f64,
    pub im: f64,
}

#[repr(C)]
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct ScnEstimate {
    pub value: f64,
    pub stderr: f64,
    pub samples: u64,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).expect("nul bytes replaced");
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

struct Fail(ScnStatus, String);

impl From<Error> for Fail {
    fn from(e: Error) -> Self {
        let status = match &e {
            Error::Json(_) => ScnStatus::InvalidJson,
            Error::Unsupported(_) => ScnStatus::Unsupported,
            Error::NonFinite(_)
            | Error::DimensionMismatch { .. }
            | Error::InvalidScenery(_)
            | Error::InvalidLaw(_)
            | Error::InvalidArgument(_)
            | Error::DuplicateGenerators(..) => ScnStatus::InvalidArgument,
            _ => ScnStatus::Failed,
        };
        Fail(status, e.to_string())
    }
}

fn null(what: &str) -> Fail {
    Fail(ScnStatus::NullPointer, format!("{what} is null"))
}

/// Runs `f`, converting errors and panics into a status and the last error.
fn guard(f: impl FnOnce() -> Result<(), Fail>) -> ScnStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => ScnStatus::Ok,
        Ok(Err(Fail(status, msg))) => {
            set_error(msg);
            status
        }
        Err(_) => {
            set_error("panic inside the scenery library".into());
            ScnStatus::Panic
        }
    }
}

unsafe fn str_arg<'a>(p: *const c_char, what: &str) -> Result<&'a str, Fail> {
    if p.is_null() {
        return Err(null(what));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|e| Fail(ScnStatus::InvalidUtf8, format!("{what}: {e}")))
}

unsafe fn ref_arg<'a, T>(p: *const T, what: &str) -> Result<&'a T, Fail> {
    p.as_ref().ok_or_else(|| null(what))
}

unsafe fn slice_arg<'a, T>(p: *const T, len: usize, what: &str) -> Result<&'a [T], Fail> {
    if len == 0 {
        return Ok(&[]);
    }
    if p.is_null() {
        return Err(null(what));
    }
    Ok(std::slice::from_raw_parts(p, len))
}

unsafe fn write_out<T>(out: *mut T, v: T) -> Result<(), Fail> {
    if out.is_null() {
        return Err(null("output pointer"));
    }
    out.write(v);
    Ok(())
}

/// Message of the last failed call on this thread, or null. The pointer is
/// valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn scn_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Library version as a static string.
#[no_mangle]
pub extern "C" fn scn_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// # Safety
/// `json` must be a nul-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn scn_scenery_from_json(
    json: *const c_char,
    out: *mut *mut ScnScenery,
) -> ScnStatus {
    guard(|| {
        let s = Scenery::from_json_str(str_arg(json, "json")?)?;
        write_out(out, Box::into_raw(Box::new(ScnScenery(s))))
    })
}

/// # Safety
/// `s` must come from [`scn_scenery_from_json`] and not be freed twice.
#[no_mangle]
pub unsafe extern "C" fn scn_scenery_free(s: *mut ScnScenery) {
    if !s.is_null() {
        drop(Box::from_raw(s));
    }
}

/// # Safety
/// `json` must be a nul-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn scn_step_law_from_json(
    json: *const c_char,
    out: *mut *mut ScnStepLaw,
) -> ScnStatus {
    guard(|| {
        let law = StepLaw::from_json_str(str_arg(json, "json")?)?;
        write_out(out, Box::into_raw(Box::new(ScnStepLaw(law))))
    })
}

/// # Safety
/// `law` must come from [`scn_step_law_from_json`] and not be freed twice.
#[no_mangle]
pub unsafe extern "C" fn scn_step_law_free(law: *mut ScnStepLaw) {
    if !law.is_null() {
        drop(Box::from_raw(law));
    }
}

/// Indicator `f(x)` at a point of `len` coordinates; wrapped first.
///
/// # Safety
/// `x` must point to `len` doubles.
#[no_mangle]
pub unsafe extern "C" fn scn_scenery_indicator(
    s: *const ScnScenery,
    x: *const f64,
    len: usize,
    out: *mut u8,
) -> ScnStatus {
    guard(|| {
        let s = &ref_arg(s, "scenery")?.0;
        let p = wrap(slice_arg(x, len, "x")?)?;
        write_out(out, s.indicator(&p)?)
    })
}

/// # Safety
/// Pointers must be valid.
#[no_mangle]
pub unsafe extern "C" fn scn_scenery_measure(s: *const ScnScenery, out: *mut f64) -> ScnStatus {
    guard(|| write_out(out, ref_arg(s, "scenery")?.0.measure()))
}

/// `S_n(y)` for a pointer tuple flattened to `len = n·d` reals.
///
/// # Safety
/// `y` must point to `len` doubles.
#[no_mangle]
pub unsafe extern "C" fn scn_spatial_correlation(
    s: *const ScnScenery,
    y: *const f64,
    len: usize,
    out: *mut f64,
) -> ScnStatus {
    guard(|| {
        let s = &ref_arg(s, "scenery")?.0;
        write_out(out, spatial_correlation_flat(s, slice_arg(y, len, "y")?)?)
    })
}

/// `D̂_t(k)` for a frequency of `len = d` integers.
///
/// # Safety
/// `k` must point to `len` integers.
#[no_mangle]
pub unsafe extern "C" fn scn_d_hat(
    law: *const ScnStepLaw,
    t: f64,
    k: *const i64,
    len: usize,
    out: *mut ScnComplex,
) -> ScnStatus {
    guard(|| {
        let z = ref_arg(law, "law")?.0.d_hat(t, slice_arg(k, len, "k")?)?;
        write_out(out, ScnComplex { re: z.re, im: z.im })
    })
}

/// `γ̂_t(k)`, the transform of the continuous part of the step law.
///
/// # Safety
/// `k` must point to `len` integers.
#[no_mangle]
pub unsafe extern "C" fn scn_gamma_hat(
    law: *const ScnStepLaw,
    t: f64,
    k: *const i64,
    len: usize,
    out: *mut ScnComplex,
) -> ScnStatus {
    guard(|| {
        let z = ref_arg(law, "law")?
            .0
            .gamma_hat(t, slice_arg(k, len, "k")?)?;
        write_out(out, ScnComplex { re: z.re, im: z.im })
    })
}

/// Monte Carlo estimate of `T_n(t)` for `n` time gaps. A non-positive
/// `gap` selects the default separation between blocks.
///
/// # Safety
/// `t` must point to `n` doubles.
#[no_mangle]
pub unsafe extern "C" fn scn_estimate_temporal(
    law: *const ScnStepLaw,
    s: *const ScnScenery,
    t: *const f64,
    n: usize,
    samples: u64,
    gap: f64,
    seed: u64,
    out: *mut ScnEstimate,
) -> ScnStatus {
    guard(|| {
        let law = &ref_arg(law, "law")?.0;
        let s = &ref_arg(s, "scenery")?.0;
        let gap = (gap > 0.0).then_some(gap);
        let e = estimate_temporal(law, s, slice_arg(t, n, "t")?, samples, gap, seed)?;
        write_out(
            out,
            ScnEstimate {
                value: e.value,
                stderr: e.stderr,
                samples: e.samples,
            },
        )
    })
}

/// `min_θ μ((a + θ) Δ b)` over a grid of `resolution` shifts per axis.
///
/// # Safety
/// Pointers must be valid.
#[no_mangle]
pub unsafe extern "C" fn scn_aligned_distance(
    a: *const ScnScenery,
    b: *const ScnScenery,
    resolution: usize,
    allow_reflection: bool,
    out: *mut f64,
) -> ScnStatus {
    guard(|| {
        let a = &ref_arg(a, "a")?.0;
        let b = &ref_arg(b, "b")?.0;
        write_out(
            out,
            aligned_distance(a, b, resolution, allow_reflection)?.distance,
        )
    })
}

/// Runs the reconstruction chain on a JSON configuration and returns the
/// JSON result in `out`, to be released with [`scn_string_free`]. Relative
/// trace paths resolve against the working directory.
///
/// # Safety
/// `config_json` must be a nul-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn scn_reconstruct(
    config_json: *const c_char,
    out: *mut *mut c_char,
) -> ScnStatus {
    guard(|| {
        let text = str_arg(config_json, "config_json")?;
        let cfg: PipelineConfig = serde_json::from_str(text).map_err(Error::from)?;
        let result = reconstruct_pipeline(&cfg, None)?;
        let json = serde_json::to_string(&result).map_err(Error::from)?;
        let c = CString::new(json).map_err(|e| Fail(ScnStatus::Failed, e.to_string()))?;
        write_out(out, c.into_raw())
    })
}

/// # Safety
/// `s` must come from this library and not be freed twice.
#[no_mangle]
pub unsafe extern "C" fn scn_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}
