//! C ABI for the point source recovery library: opaque handles, integer
//! status codes, and a thread-local last-error message.

use heatsrc::config::RunConfig;
use heatsrc::error::Error;
use heatsrc::experiment::{Experiment, RunOptions};
use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;

/// Status codes returned by every fallible entry point.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum HsStatus {
    HsOk = 0,
    HsNullPointer = 1,
    HsInvalidUtf8 = 2,
    HsConfigError = 3,
    HsIoError = 4,
    HsNumericsError = 5,
    HsPanic = 6,
}

/// Disable the removal sweep for this run.
pub const HS_RUN_NO_THINNING: u32 = 1;
/// Scale noise by the l2 norm of the clean signal instead of its RMS.
pub const HS_RUN_LITERAL_NOISE_NORM: u32 = 2;

/// An assembled experiment: config, mesh, observation operator and data
/// generator. Create with hs_experiment_new, release with
/// hs_experiment_free.
pub struct HsExperiment {
    inner: Experiment,
}

/// The outcome of one run: recovered sources and summary metrics. Release
/// with hs_result_free.
pub struct HsResult {
    sources: Vec<(f64, f64, f64)>,
    relative_error: f64,
    final_misfit: f64,
    mean_acceptance: f64,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_last_error(msg: &str) {
    let sanitized: Vec<u8> = msg.bytes().map(|b| if b == 0 { b' ' } else { b }).collect();
    LAST_ERROR.with(|slot| {
        *slot.borrow_mut() = CString::new(sanitized).unwrap_or_default();
    });
}

fn status_of(err: &Error) -> HsStatus {
    match err {
        Error::Config(_) | Error::Toml(_) => HsStatus::HsConfigError,
        Error::Io(_) => HsStatus::HsIoError,
        Error::Numerics(_) | Error::Cache(_) => HsStatus::HsNumericsError,
        Error::Json(_) => HsStatus::HsIoError,
    }
}

fn fail(err: Error) -> HsStatus {
    let status = status_of(&err);
    set_last_error(&err.to_string());
    status
}

fn guarded<F: FnOnce() -> HsStatus>(f: F) -> HsStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(status) => status,
        Err(_) => {
            set_last_error("internal panic");
            HsStatus::HsPanic
        }
    }
}

/// Copy the message of the most recent error on this thread into `buf`
/// (NUL terminated, truncated to `cap` bytes). Returns the full message
/// length in bytes, excluding the terminator; 0 means no recorded error.
///
/// # Safety
/// `buf` must point to `cap` writable bytes, or be null (query mode).
#[no_mangle]
pub unsafe extern "C" fn hs_last_error(buf: *mut c_char, cap: usize) -> usize {
    LAST_ERROR.with(|slot| {
        let msg = slot.borrow();
        let bytes = msg.as_bytes();
        if !buf.is_null() && cap > 0 {
            let n = bytes.len().min(cap - 1);
            std::ptr::copy_nonoverlapping(bytes.as_ptr().cast::<c_char>(), buf, n);
            *buf.add(n) = 0;
        }
        bytes.len()
    })
}

/// Load a TOML run configuration and assemble the experiment.
///
/// # Safety
/// `config_path` must be a NUL-terminated string and `out` a valid
/// pointer; on success `*out` owns the experiment.
#[no_mangle]
pub unsafe extern "C" fn hs_experiment_new(
    config_path: *const c_char,
    out: *mut *mut HsExperiment,
) -> HsStatus {
    guarded(|| {
        if config_path.is_null() || out.is_null() {
            set_last_error("null pointer argument");
            return HsStatus::HsNullPointer;
        }
        let path = match CStr::from_ptr(config_path).to_str() {
            Ok(s) => s,
            Err(_) => {
                set_last_error("config path is not valid UTF-8");
                return HsStatus::HsInvalidUtf8;
            }
        };
        let cfg = match RunConfig::load(Path::new(path)) {
            Ok(c) => c,
            Err(e) => return fail(e),
        };
        match Experiment::assemble(cfg, None) {
            Ok(inner) => {
                *out = Box::into_raw(Box::new(HsExperiment { inner }));
                HsStatus::HsOk
            }
            Err(e) => fail(e),
        }
    })
}

/// Run the chain for one seed with the given flag bits (HS_RUN_*).
///
/// # Safety
/// `exp` must come from hs_experiment_new and `out` must be valid; on
/// success `*out` owns the result.
#[no_mangle]
pub unsafe extern "C" fn hs_experiment_run(
    exp: *const HsExperiment,
    seed: u64,
    flags: u32,
    out: *mut *mut HsResult,
) -> HsStatus {
    guarded(|| {
        if exp.is_null() || out.is_null() {
            set_last_error("null pointer argument");
            return HsStatus::HsNullPointer;
        }
        let exp = &*exp;
        let opts = RunOptions {
            seed,
            thinning: (flags & HS_RUN_NO_THINNING != 0).then_some(false),
            literal_norm: (flags & HS_RUN_LITERAL_NOISE_NORM != 0).then_some(true),
        };
        match exp.inner.run(opts) {
            Ok(report) => {
                let result = HsResult {
                    sources: report
                        .sources
                        .iter()
                        .map(|s| (s.x, s.y, s.intensity))
                        .collect(),
                    relative_error: report.relative_error,
                    final_misfit: report.final_misfit,
                    mean_acceptance: report.mean_acceptance,
                };
                *out = Box::into_raw(Box::new(result));
                HsStatus::HsOk
            }
            Err(e) => fail(e),
        }
    })
}

/// Number of recovered sources; 0 if `res` is null.
///
/// # Safety
/// `res` must be null or a pointer from hs_experiment_run.
#[no_mangle]
pub unsafe extern "C" fn hs_result_source_count(res: *const HsResult) -> usize {
    if res.is_null() {
        return 0;
    }
    (*res).sources.len()
}

/// Fetch one recovered source by index.
///
/// # Safety
/// `res` must come from hs_experiment_run; `x`, `y`, `intensity` must be
/// valid writable pointers.
#[no_mangle]
pub unsafe extern "C" fn hs_result_source(
    res: *const HsResult,
    index: usize,
    x: *mut f64,
    y: *mut f64,
    intensity: *mut f64,
) -> HsStatus {
    if res.is_null() || x.is_null() || y.is_null() || intensity.is_null() {
        set_last_error("null pointer argument");
        return HsStatus::HsNullPointer;
    }
    let res = &*res;
    match res.sources.get(index) {
        Some(&(sx, sy, sw)) => {
            *x = sx;
            *y = sy;
            *intensity = sw;
            HsStatus::HsOk
        }
        None => {
            set_last_error("source index out of range");
            HsStatus::HsConfigError
        }
    }
}

/// Relative error of the recovered weights against the configured truth.
///
/// # Safety
/// `res` must come from hs_experiment_run; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn hs_result_relative_error(res: *const HsResult, out: *mut f64) -> HsStatus {
    if res.is_null() || out.is_null() {
        set_last_error("null pointer argument");
        return HsStatus::HsNullPointer;
    }
    *out = (*res).relative_error;
    HsStatus::HsOk
}

/// Final relative data misfit ||K(f) - g|| / ||g||.
///
/// # Safety
/// `res` must come from hs_experiment_run; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn hs_result_final_misfit(res: *const HsResult, out: *mut f64) -> HsStatus {
    if res.is_null() || out.is_null() {
        set_last_error("null pointer argument");
        return HsStatus::HsNullPointer;
    }
    *out = (*res).final_misfit;
    HsStatus::HsOk
}

/// Mean pCN acceptance rate over the whole run.
///
/// # Safety
/// `res` must come from hs_experiment_run; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn hs_result_acceptance_rate(
    res: *const HsResult,
    out: *mut f64,
) -> HsStatus {
    if res.is_null() || out.is_null() {
        set_last_error("null pointer argument");
        return HsStatus::HsNullPointer;
    }
    *out = (*res).mean_acceptance;
    HsStatus::HsOk
}

/// Release an experiment. Null is a no-op.
///
/// # Safety
/// `exp` must be null or a pointer from hs_experiment_new, not yet freed.
#[no_mangle]
pub unsafe extern "C" fn hs_experiment_free(exp: *mut HsExperiment) {
    if !exp.is_null() {
        drop(Box::from_raw(exp));
    }
}

/// Release a result. Null is a no-op.
///
/// # Safety
/// `res` must be null or a pointer from hs_experiment_run, not yet freed.
#[no_mangle]
pub unsafe extern "C" fn hs_result_free(res: *mut HsResult) {
    if !res.is_null() {
        drop(Box::from_raw(res));
    }
}
