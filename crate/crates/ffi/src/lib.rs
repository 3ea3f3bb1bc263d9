//! C ABI over the slowecho simulator.
//!
//! Configs and results are opaque heap handles created and released by this
//! library. Every fallible call returns a [`SlowechoStatus`]; on failure the
//! message is available from [`slowecho_last_error`] on the same thread.
//! Status codes match the CLI exit codes where they overlap.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::ptr;

use slowecho::analysis::{fit_exponential, CMode};
use slowecho::config::ScenarioConfig;
use slowecho::scenarios::{self, Outcome, RunReport};
use slowecho::Error;

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SlowechoStatus {
    Ok = 0,
    Io = 1,
    Config = 2,
    Instability = 3,
    Analysis = 4,
    NullPointer = 10,
    InvalidUtf8 = 11,
    WrongKind = 12,
    OutOfRange = 13,
    Panic = 99,
}

/// Exponential fit A·exp[B(τ − C)] with the log-linear R².
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SlowechoFit {
    pub a: f64,
    pub b: f64,
    pub c: f64,
    pub r_squared: f64,
}

/// One sweep point; NaN marks an undetected delay.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SlowechoSweepRow {
    pub t_h_us: f64,
    pub hole_depth: f64,
    pub tau_g_us: f64,
    pub v_g_km_s: f64,
    pub eta: f64,
    pub echo_efficiency: f64,
}

/// Parsed scenario configuration.
pub struct SlowechoConfig {
    inner: ScenarioConfig,
    hash: CString,
}

/// Outcome of [`slowecho_run`].
pub struct SlowechoResult {
    outcome: Outcome,
    summary: CString,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_error(msg: impl Into<String>) {
    let msg = CString::new(msg.into().replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = msg);
}

fn status_of(e: &Error) -> SlowechoStatus {
    match e.exit_code() {
        2 => SlowechoStatus::Config,
        3 => SlowechoStatus::Instability,
        4 => SlowechoStatus::Analysis,
        _ => SlowechoStatus::Io,
    }
}

/// Runs `f`, turning errors and panics into a status plus a last-error message.
fn guard(f: impl FnOnce() -> Result<(), (SlowechoStatus, String)>) -> SlowechoStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            set_error("");
            SlowechoStatus::Ok
        }
        Ok(Err((status, msg))) => {
            set_error(msg);
            status
        }
        Err(_) => {
            set_error("panic inside slowecho");
            SlowechoStatus::Panic
        }
    }
}

fn lib_err(e: Error) -> (SlowechoStatus, String) {
    (status_of(&e), e.to_string())
}

fn null(what: &str) -> (SlowechoStatus, String) {
    (SlowechoStatus::NullPointer, format!("{what} is null"))
}

unsafe fn str_arg<'a>(p: *const c_char, what: &str) -> Result<&'a str, (SlowechoStatus, String)> {
    if p.is_null() {
        return Err(null(what));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|_| (SlowechoStatus::InvalidUtf8, format!("{what} is not UTF-8")))
}

/// Message of the last failed call on this thread ("" after a success).
/// Valid until the next slowecho call on the same thread.
#[no_mangle]
pub extern "C" fn slowecho_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn slowecho_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Parses config text (`dotted.key = value` lines).
///
/// # Safety
/// `text` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn slowecho_config_parse(text: *const c_char, out: *mut *mut SlowechoConfig) -> SlowechoStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        *out = ptr::null_mut();
        let text = str_arg(text, "text")?;
        let inner = ScenarioConfig::parse(text).map_err(lib_err)?;
        let hash = CString::new(inner.hash_hex()).unwrap_or_default();
        *out = Box::into_raw(Box::new(SlowechoConfig { inner, hash }));
        Ok(())
    })
}

/// SHA-256 of the canonical config text; owned by `cfg`.
///
/// # Safety
/// `cfg` must be null or a live handle from [`slowecho_config_parse`].
#[no_mangle]
pub unsafe extern "C" fn slowecho_config_hash(cfg: *const SlowechoConfig) -> *const c_char {
    match cfg.as_ref() {
        Some(c) => c.hash.as_ptr(),
        None => ptr::null(),
    }
}

/// # Safety
/// `cfg` must be null or a handle from [`slowecho_config_parse`] not yet freed.
#[no_mangle]
pub unsafe extern "C" fn slowecho_config_free(cfg: *mut SlowechoConfig) {
    if !cfg.is_null() {
        drop(Box::from_raw(cfg));
    }
}

/// Runs the configured scenario.
///
/// # Safety
/// `cfg` must be a live config handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn slowecho_run(cfg: *const SlowechoConfig, out: *mut *mut SlowechoResult) -> SlowechoStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        *out = ptr::null_mut();
        let cfg = cfg.as_ref().ok_or_else(|| null("cfg"))?;
        let outcome = scenarios::run(&cfg.inner).map_err(lib_err)?;
        let summary = outcome.summary_json().map_err(lib_err)?;
        *out = Box::into_raw(Box::new(SlowechoResult {
            outcome,
            summary: CString::new(summary).unwrap_or_default(),
        }));
        Ok(())
    })
}

/// Writes the result's artifacts and manifest into `dir`.
///
/// # Safety
/// `cfg` and `result` must be live handles (the result produced from `cfg`);
/// `dir` must be a NUL-terminated path.
#[no_mangle]
pub unsafe extern "C" fn slowecho_write_artifacts(
    cfg: *const SlowechoConfig,
    result: *const SlowechoResult,
    dir: *const c_char,
) -> SlowechoStatus {
    guard(|| {
        let cfg = cfg.as_ref().ok_or_else(|| null("cfg"))?;
        let result = result.as_ref().ok_or_else(|| null("result"))?;
        let dir = str_arg(dir, "dir")?;
        scenarios::write_artifacts(&cfg.inner, &result.outcome, Path::new(dir)).map_err(lib_err)?;
        Ok(())
    })
}

/// JSON summary of the result; owned by `result`.
///
/// # Safety
/// `result` must be null or a live result handle.
#[no_mangle]
pub unsafe extern "C" fn slowecho_result_summary_json(result: *const SlowechoResult) -> *const c_char {
    match result.as_ref() {
        Some(r) => r.summary.as_ptr(),
        None => ptr::null(),
    }
}

fn main_report(o: &Outcome) -> Option<&RunReport> {
    match o {
        Outcome::Single(r) => Some(&r.report),
        Outcome::Pair(p) => Some(&p.report.with_burn),
        Outcome::Control(c) => Some(&c.report.forward),
        Outcome::Sweep(_) => None,
    }
}

/// Primary echo efficiency of the single run, the burnt run of a pair, or the
/// forward run of a backward control.
///
/// # Safety
/// `result` must be a live result handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn slowecho_result_echo_efficiency(result: *const SlowechoResult, out: *mut f64) -> SlowechoStatus {
    guard(|| {
        let r = result.as_ref().ok_or_else(|| null("result"))?;
        let out = out.as_mut().ok_or_else(|| null("out"))?;
        let report = main_report(&r.outcome)
            .ok_or_else(|| (SlowechoStatus::WrongKind, "sweep results have no single efficiency".into()))?;
        *out = report.echo_efficiency;
        Ok(())
    })
}

/// Number of sweep rows (0 for non-sweep results).
///
/// # Safety
/// `result` must be null or a live result handle.
#[no_mangle]
pub unsafe extern "C" fn slowecho_result_sweep_len(result: *const SlowechoResult) -> usize {
    match result.as_ref().map(|r| &r.outcome) {
        Some(Outcome::Sweep(s)) => s.result.rows.len(),
        _ => 0,
    }
}

/// # Safety
/// `result` must be a live result handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn slowecho_result_sweep_row(
    result: *const SlowechoResult,
    index: usize,
    out: *mut SlowechoSweepRow,
) -> SlowechoStatus {
    guard(|| {
        let r = result.as_ref().ok_or_else(|| null("result"))?;
        let out = out.as_mut().ok_or_else(|| null("out"))?;
        let Outcome::Sweep(s) = &r.outcome else {
            return Err((SlowechoStatus::WrongKind, "not a sweep result".into()));
        };
        let row = s
            .result
            .rows
            .get(index)
            .ok_or_else(|| (SlowechoStatus::OutOfRange, format!("row {index} of {}", s.result.rows.len())))?;
        *out = SlowechoSweepRow {
            t_h_us: row.t_h_us,
            hole_depth: row.hole_depth,
            tau_g_us: row.tau_g_us,
            v_g_km_s: row.v_g_km_s,
            eta: row.eta,
            echo_efficiency: row.echo_efficiency,
        };
        Ok(())
    })
}

/// # Safety
/// `result` must be null or a handle from [`slowecho_run`] not yet freed.
#[no_mangle]
pub unsafe extern "C" fn slowecho_result_free(result: *mut SlowechoResult) {
    if !result.is_null() {
        drop(Box::from_raw(result));
    }
}

/// Fits y = A·exp[B(τ − C)] to `n` points; `c_mode` is "fixed:X" or "min-tau".
///
/// # Safety
/// `tau` and `y` must point to `n` readable doubles; `c_mode` must be a
/// NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn slowecho_fit_exponential(
    tau: *const f64,
    y: *const f64,
    n: usize,
    c_mode: *const c_char,
    out: *mut SlowechoFit,
) -> SlowechoStatus {
    guard(|| {
        if tau.is_null() || y.is_null() {
            return Err(null("points"));
        }
        let out = out.as_mut().ok_or_else(|| null("out"))?;
        let mode: CMode = str_arg(c_mode, "c_mode")?.parse().map_err(lib_err)?;
        let tau = std::slice::from_raw_parts(tau, n);
        let y = std::slice::from_raw_parts(y, n);
        let pts: Vec<(f64, f64)> = tau.iter().copied().zip(y.iter().copied()).collect();
        let f = fit_exponential(&pts, mode).map_err(lib_err)?;
        *out = SlowechoFit {
            a: f.a,
            b: f.b,
            c: f.c,
            r_squared: f.r_squared,
        };
        Ok(())
    })
}
