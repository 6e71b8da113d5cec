//! C ABI over the specguard toolkit.
//!
//! Every fallible call returns an [`SgStatus`]; on anything other than
//! `SG_STATUS_OK` the message is available from [`sg_last_error_message`]
//! on the calling thread. Handles are opaque and must be released with the
//! matching `_free` function.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use specguard::guard::{monitor_step, DetectionMetrics, GuardConfig, RhoWindow};
use specguard::linalg::{eig_radius_exact, power_method, Matrix};
use specguard::spectral::{horizon_bound, lipschitz_certificate, HorizonInputs};
use specguard::ssm::{RunOptions, SelectiveSsm, SelectiveSsmConfig};
use specguard::Error;

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SgStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    DimensionMismatch = 3,
    BoundUndefined = 4,
    Numerical = 5,
    Parse = 6,
    BufferTooSmall = 7,
    Panic = 8,
}

/// Detection metrics derived from a confusion matrix.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SgMetrics {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub fpr: f64,
    /// No positive predictions; `precision` is reported as 0.
    pub precision_undefined: bool,
}

/// Opaque model handle.
pub struct SgModel {
    inner: SelectiveSsm,
}

/// Opaque streaming threshold monitor.
pub struct SgMonitor {
    window: RhoWindow,
    config: GuardConfig,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn clear_error() {
    LAST_ERROR.with(|e| *e.borrow_mut() = None);
}

fn status_of(err: &Error) -> SgStatus {
    match err {
        Error::InvalidArgument(_) | Error::Empty(_) | Error::TokenOutOfRange { .. } | Error::NonFinite { .. } => {
            SgStatus::InvalidArgument
        }
        Error::NotSquare { .. } | Error::DimensionMismatch { .. } | Error::TooLarge { .. } => {
            SgStatus::DimensionMismatch
        }
        Error::BoundUndefined { .. } | Error::GramianDiverges { .. } => SgStatus::BoundUndefined,
        Error::Json(_) | Error::Schema { .. } | Error::Csv(_) => SgStatus::Parse,
        _ => SgStatus::Numerical,
    }
}

fn fail(status: SgStatus, msg: impl Into<String>) -> SgStatus {
    set_error(msg.into());
    status
}

fn guard<F: FnOnce() -> SgStatus>(f: F) -> SgStatus {
    clear_error();
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(s) => s,
        Err(_) => fail(SgStatus::Panic, "internal panic"),
    }
}

fn lift<T>(r: specguard::Result<T>) -> Result<T, SgStatus> {
    r.map_err(|e| {
        let s = status_of(&e);
        set_error(e.to_string());
        s
    })
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn sg_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Message for the last failed call on this thread, or NULL. The pointer
/// stays valid until the next call into the library on the same thread.
#[no_mangle]
pub extern "C" fn sg_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Dense power method on a row-major `n x n` matrix with `k` iterations.
///
/// # Safety
/// `data` must point to `n * n` readable doubles and `out_rho` to one
/// writable double.
#[no_mangle]
pub unsafe extern "C" fn sg_power_method(
    data: *const f64,
    n: usize,
    k: usize,
    seed: u64,
    out_rho: *mut f64,
) -> SgStatus {
    guard(|| {
        if data.is_null() || out_rho.is_null() {
            return fail(SgStatus::NullPointer, "null pointer argument");
        }
        let Some(len) = n.checked_mul(n) else {
            return fail(SgStatus::DimensionMismatch, "n * n overflows");
        };
        let values = std::slice::from_raw_parts(data, len).to_vec();
        let est = match lift(Matrix::dense(n, n, values).and_then(|m| power_method(&m, k, seed))) {
            Ok(e) => e,
            Err(s) => return s,
        };
        *out_rho = est.rho_hat;
        SgStatus::Ok
    })
}

/// Exact spectral radius of a row-major `n x n` matrix.
///
/// # Safety
/// As for [`sg_power_method`].
#[no_mangle]
pub unsafe extern "C" fn sg_spectral_radius(data: *const f64, n: usize, out_rho: *mut f64) -> SgStatus {
    guard(|| {
        if data.is_null() || out_rho.is_null() {
            return fail(SgStatus::NullPointer, "null pointer argument");
        }
        let Some(len) = n.checked_mul(n) else {
            return fail(SgStatus::DimensionMismatch, "n * n overflows");
        };
        let values = std::slice::from_raw_parts(data, len).to_vec();
        match lift(Matrix::dense(n, n, values).and_then(|m| eig_radius_exact(&m))) {
            Ok(e) => {
                *out_rho = e.rho_hat;
                SgStatus::Ok
            }
            Err(s) => s,
        }
    })
}

/// Memory-horizon bound in tokens. `out_vacuous` is set when the bound
/// collapses to zero; `SG_STATUS_BOUND_UNDEFINED` is returned for rho >= 1.
///
/// # Safety
/// `out_tokens` and `out_vacuous` must be writable.
#[no_mangle]
pub unsafe extern "C" fn sg_horizon_bound(
    rho: f64,
    kappa: f64,
    h0_norm: f64,
    epsilon: f64,
    lambda_max: f64,
    out_tokens: *mut f64,
    out_vacuous: *mut bool,
) -> SgStatus {
    guard(|| {
        if out_tokens.is_null() || out_vacuous.is_null() {
            return fail(SgStatus::NullPointer, "null pointer argument");
        }
        let inputs = HorizonInputs {
            rho,
            kappa,
            h0_norm,
            epsilon,
            lambda_max_wc: lambda_max,
        };
        match lift(horizon_bound(&inputs)) {
            Ok(b) => {
                *out_tokens = b.tokens;
                *out_vacuous = b.vacuous;
                SgStatus::Ok
            }
            Err(s) => s,
        }
    })
}

#[no_mangle]
pub extern "C" fn sg_lipschitz_certificate(a_norm: f64, delta_max: f64) -> f64 {
    lipschitz_certificate(a_norm, delta_max)
}

/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn sg_metrics_from_counts(tn: u64, fp: u64, fn_: u64, tp: u64, out: *mut SgMetrics) -> SgStatus {
    guard(|| {
        if out.is_null() {
            return fail(SgStatus::NullPointer, "null pointer argument");
        }
        let m = DetectionMetrics::from_counts(tn, fp, fn_, tp);
        *out = SgMetrics {
            precision: m.precision,
            recall: m.recall,
            f1: m.f1,
            fpr: m.fpr,
            precision_undefined: m.precision_undefined,
        };
        SgStatus::Ok
    })
}

/// Default-sized toy model initialised from `seed`.
///
/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn sg_model_new(seed: u64, out: *mut *mut SgModel) -> SgStatus {
    guard(|| {
        if out.is_null() {
            return fail(SgStatus::NullPointer, "null pointer argument");
        }
        match lift(SelectiveSsm::init(SelectiveSsmConfig::with_seed(seed))) {
            Ok(m) => {
                *out = Box::into_raw(Box::new(SgModel { inner: m }));
                SgStatus::Ok
            }
            Err(s) => s,
        }
    })
}

/// Model from serialized weights.
///
/// # Safety
/// `json` must be a NUL-terminated string and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn sg_model_from_json(json: *const c_char, out: *mut *mut SgModel) -> SgStatus {
    guard(|| {
        if json.is_null() || out.is_null() {
            return fail(SgStatus::NullPointer, "null pointer argument");
        }
        let Ok(text) = CStr::from_ptr(json).to_str() else {
            return fail(SgStatus::Parse, "model JSON is not valid UTF-8");
        };
        match lift(SelectiveSsm::from_json(text)) {
            Ok(m) => {
                *out = Box::into_raw(Box::new(SgModel { inner: m }));
                SgStatus::Ok
            }
            Err(s) => s,
        }
    })
}

/// # Safety
/// `model` must come from `sg_model_new`/`sg_model_from_json` or be NULL.
#[no_mangle]
pub unsafe extern "C" fn sg_model_free(model: *mut SgModel) {
    if !model.is_null() {
        drop(Box::from_raw(model));
    }
}

/// # Safety
/// `model` must be a live handle; output pointers may be NULL.
#[no_mangle]
pub unsafe extern "C" fn sg_model_dims(
    model: *const SgModel,
    n_layers: *mut usize,
    d_state: *mut usize,
    vocab_size: *mut usize,
) -> SgStatus {
    guard(|| {
        let Some(m) = model.as_ref() else {
            return fail(SgStatus::NullPointer, "null model handle");
        };
        if let Some(p) = n_layers.as_mut() {
            *p = m.inner.n_layers();
        }
        if let Some(p) = d_state.as_mut() {
            *p = m.inner.d_state();
        }
        if let Some(p) = vocab_size.as_mut() {
            *p = m.inner.vocab_size();
        }
        SgStatus::Ok
    })
}

/// Runs `tokens` through the model and writes the probed radius of every
/// (token, layer) pair, token-major, into `out_rho`. `capacity` must be at
/// least `n_tokens * n_layers`.
///
/// # Safety
/// `tokens` must point to `n_tokens` readable values and `out_rho` to
/// `capacity` writable doubles.
#[no_mangle]
pub unsafe extern "C" fn sg_model_run(
    model: *const SgModel,
    tokens: *const u32,
    n_tokens: usize,
    power_iters: usize,
    out_rho: *mut f64,
    capacity: usize,
) -> SgStatus {
    guard(|| {
        let Some(m) = model.as_ref() else {
            return fail(SgStatus::NullPointer, "null model handle");
        };
        if tokens.is_null() || out_rho.is_null() {
            return fail(SgStatus::NullPointer, "null pointer argument");
        }
        let need = n_tokens.saturating_mul(m.inner.n_layers());
        if capacity < need {
            return fail(
                SgStatus::BufferTooSmall,
                format!("output buffer holds {capacity} values, {need} required"),
            );
        }
        if power_iters == 0 {
            return fail(SgStatus::InvalidArgument, "power_iters must be >= 1");
        }
        let toks: Vec<usize> = std::slice::from_raw_parts(tokens, n_tokens)
            .iter()
            .map(|&t| t as usize)
            .collect();
        let opts = RunOptions {
            power_iters,
            ..RunOptions::default()
        };
        let trace = match lift(m.inner.run_with(&toks, &opts, None)) {
            Ok((_, t)) => t,
            Err(s) => return s,
        };
        let out = std::slice::from_raw_parts_mut(out_rho, need);
        for (slot, r) in out.iter_mut().zip(&trace.records) {
            *slot = r.rho_hat;
        }
        SgStatus::Ok
    })
}

/// Windowed threshold monitor; blocks while the minimum of the last
/// `window` radii is below `rho_min`.
///
/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn sg_monitor_new(rho_min: f64, window: usize, out: *mut *mut SgMonitor) -> SgStatus {
    guard(|| {
        if out.is_null() {
            return fail(SgStatus::NullPointer, "null pointer argument");
        }
        let config = GuardConfig {
            rho_min,
            window,
            ..GuardConfig::default()
        };
        if let Err(s) = lift(config.validate()) {
            return s;
        }
        *out = Box::into_raw(Box::new(SgMonitor {
            window: RhoWindow::new(window),
            config,
        }));
        SgStatus::Ok
    })
}

/// Feeds one per-token radius. `out_block` receives the decision and
/// `out_window_min` (may be NULL) the current window minimum.
///
/// # Safety
/// `monitor` must be a live handle and `out_block` writable.
#[no_mangle]
pub unsafe extern "C" fn sg_monitor_push(
    monitor: *mut SgMonitor,
    rho: f64,
    out_block: *mut bool,
    out_window_min: *mut f64,
) -> SgStatus {
    guard(|| {
        let Some(m) = monitor.as_mut() else {
            return fail(SgStatus::NullPointer, "null monitor handle");
        };
        if out_block.is_null() {
            return fail(SgStatus::NullPointer, "null pointer argument");
        }
        if !rho.is_finite() {
            return fail(SgStatus::InvalidArgument, "rho must be finite");
        }
        let v = monitor_step(&mut m.window, rho, &m.config);
        *out_block = v.is_block();
        if let Some(p) = out_window_min.as_mut() {
            *p = v.window_min_rho;
        }
        SgStatus::Ok
    })
}

/// # Safety
/// `monitor` must come from `sg_monitor_new` or be NULL.
#[no_mangle]
pub unsafe extern "C" fn sg_monitor_free(monitor: *mut SgMonitor) {
    if !monitor.is_null() {
        drop(Box::from_raw(monitor));
    }
}
