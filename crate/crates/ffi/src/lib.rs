//! C interface to the sharpbound solver.
//!
//! Problems and results are opaque handles owned by the caller and released
//! with the matching `_free` function. Every fallible call returns an
//! [`SbStatus`]; on failure a description is available from
//! [`sb_last_error_message`] on the same thread.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use sharpbound::closed_form;
use sharpbound::config::{Config, Resolved};
use sharpbound::dual::BoundStatus;
use sharpbound::problem::Direction;
use sharpbound::report::{self, Report, RunOptions, RunStatus};

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SbStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidUtf8 = 2,
    ConfigError = 3,
    SolveError = 4,
    Infeasible = 5,
    BoundaryPhi = 6,
    NonConvergence = 7,
    NotAvailable = 8,
    BufferTooSmall = 9,
    DomainError = 10,
    Panic = 11,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SbDirection {
    Lower = 0,
    Upper = 1,
}

impl From<SbDirection> for Direction {
    fn from(d: SbDirection) -> Self {
        match d {
            SbDirection::Lower => Direction::Lower,
            SbDirection::Upper => Direction::Upper,
        }
    }
}

/// A parsed and validated problem configuration.
pub struct SbProblem {
    resolved: Resolved,
}

/// Output of [`sb_solve`].
pub struct SbResult {
    report: Report,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_error(msg: impl Into<String>) {
    let msg = msg.into().replace('\0', " ");
    LAST_ERROR.with(|e| *e.borrow_mut() = CString::new(msg).unwrap_or_default());
}

fn fail(status: SbStatus, msg: impl Into<String>) -> SbStatus {
    set_error(msg);
    status
}

fn guard(f: impl FnOnce() -> SbStatus) -> SbStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(s) => s,
        Err(_) => fail(SbStatus::Panic, "internal panic"),
    }
}

unsafe fn read_str<'a>(s: *const c_char) -> Result<&'a str, SbStatus> {
    if s.is_null() {
        return Err(fail(SbStatus::NullPointer, "null string"));
    }
    CStr::from_ptr(s)
        .to_str()
        .map_err(|_| fail(SbStatus::InvalidUtf8, "string is not valid UTF-8"))
}

fn run_status(s: RunStatus) -> SbStatus {
    match s {
        RunStatus::Ok => SbStatus::Ok,
        RunStatus::Infeasible => SbStatus::Infeasible,
        RunStatus::BoundaryPhi => SbStatus::BoundaryPhi,
        RunStatus::NonConvergence => SbStatus::NonConvergence,
    }
}

/// Message of the last failure on this thread; empty if none. The pointer is
/// valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn sb_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

/// Parses a JSON config (same schema as the command-line tool).
///
/// # Safety
/// `json` must be a NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn sb_problem_from_json(json: *const c_char, out: *mut *mut SbProblem) -> SbStatus {
    guard(|| {
        if out.is_null() {
            return fail(SbStatus::NullPointer, "null output pointer");
        }
        *out = ptr::null_mut();
        let text = match read_str(json) {
            Ok(t) => t,
            Err(s) => return s,
        };
        match Config::from_json(text).and_then(|c| c.resolve()) {
            Ok(resolved) => {
                *out = Box::into_raw(Box::new(SbProblem { resolved }));
                SbStatus::Ok
            }
            Err(e) => fail(SbStatus::ConfigError, e.to_string()),
        }
    })
}

/// # Safety
/// `problem` must come from [`sb_problem_from_json`] and not be freed twice.
#[no_mangle]
pub unsafe extern "C" fn sb_problem_free(problem: *mut SbProblem) {
    if !problem.is_null() {
        drop(Box::from_raw(problem));
    }
}

/// Dimension of X, or 0 for a null handle.
///
/// # Safety
/// `problem` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn sb_problem_dim(problem: *const SbProblem) -> usize {
    problem.as_ref().map_or(0, |p| p.resolved.problem.dim)
}

/// Number of moment constraints, or 0 for a null handle.
///
/// # Safety
/// `problem` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn sb_problem_constraint_count(problem: *const SbProblem) -> usize {
    problem.as_ref().map_or(0, |p| p.resolved.problem.m())
}

/// Solves every direction the config requests. A result is produced for
/// `Infeasible`, `BoundaryPhi` and `NonConvergence` as well as `Ok`.
///
/// # Safety
/// `problem` must be a live handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn sb_solve(problem: *const SbProblem, out: *mut *mut SbResult) -> SbStatus {
    guard(|| {
        if out.is_null() {
            return fail(SbStatus::NullPointer, "null output pointer");
        }
        *out = ptr::null_mut();
        let Some(p) = problem.as_ref() else {
            return fail(SbStatus::NullPointer, "null problem");
        };
        match report::run(&p.resolved, RunOptions::default()) {
            Ok(report) => {
                let status = run_status(report.status);
                if status != SbStatus::Ok {
                    set_error(report.status.as_str());
                }
                *out = Box::into_raw(Box::new(SbResult { report }));
                status
            }
            Err(e) => fail(SbStatus::SolveError, e.to_string()),
        }
    })
}

/// # Safety
/// `result` must come from [`sb_solve`] and not be freed twice.
#[no_mangle]
pub unsafe extern "C" fn sb_result_free(result: *mut SbResult) {
    if !result.is_null() {
        drop(Box::from_raw(result));
    }
}

/// Overall status of the run.
///
/// # Safety
/// `result` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn sb_result_status(result: *const SbResult) -> SbStatus {
    match result.as_ref() {
        Some(r) => run_status(r.report.status),
        None => fail(SbStatus::NullPointer, "null result"),
    }
}

fn direction_result(r: &SbResult, d: SbDirection) -> Option<&report::DirectionReport> {
    let d = Direction::from(d);
    r.report.results.iter().find(|x| x.result.direction == d)
}

/// Writes the bound for `direction` (possibly ±infinity) to `out`.
///
/// # Safety
/// `result` must be a live handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn sb_result_bound(result: *const SbResult, direction: SbDirection, out: *mut f64) -> SbStatus {
    guard(|| {
        let (Some(r), false) = (result.as_ref(), out.is_null()) else {
            return fail(SbStatus::NullPointer, "null argument");
        };
        match direction_result(r, direction).and_then(|d| d.result.bound) {
            Some(b) => {
                *out = b;
                SbStatus::Ok
            }
            None => fail(SbStatus::NotAvailable, "no bound for this direction"),
        }
    })
}

/// Status of one direction.
///
/// # Safety
/// `result` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn sb_result_direction_status(result: *const SbResult, direction: SbDirection) -> SbStatus {
    let Some(r) = result.as_ref() else {
        return fail(SbStatus::NullPointer, "null result");
    };
    match direction_result(r, direction).map(|d| d.result.status) {
        Some(BoundStatus::Converged) => SbStatus::Ok,
        Some(BoundStatus::Infeasible) => SbStatus::Infeasible,
        Some(BoundStatus::BoundaryPhi) => SbStatus::BoundaryPhi,
        Some(BoundStatus::NonConvergence) => SbStatus::NonConvergence,
        None => fail(SbStatus::NotAvailable, "direction was not solved"),
    }
}

/// Copies the certificate α into `buf`. `len` is the capacity of `buf`; the
/// number of multipliers is always written to `out_len`.
///
/// # Safety
/// `result` must be a live handle, `buf` must hold `len` doubles (or be null
/// with `len == 0`), and `out_len` must be valid.
#[no_mangle]
pub unsafe extern "C" fn sb_result_alpha(
    result: *const SbResult,
    direction: SbDirection,
    buf: *mut f64,
    len: usize,
    out_len: *mut usize,
) -> SbStatus {
    guard(|| {
        let (Some(r), false) = (result.as_ref(), out_len.is_null()) else {
            return fail(SbStatus::NullPointer, "null argument");
        };
        let Some(cert) = direction_result(r, direction).and_then(|d| d.result.certificate.as_ref()) else {
            return fail(SbStatus::NotAvailable, "no certificate for this direction");
        };
        *out_len = cert.alpha.len();
        if len < cert.alpha.len() {
            return fail(SbStatus::BufferTooSmall, format!("need {} entries", cert.alpha.len()));
        }
        if buf.is_null() {
            return fail(SbStatus::NullPointer, "null buffer");
        }
        ptr::copy_nonoverlapping(cert.alpha.as_ptr(), buf, cert.alpha.len());
        SbStatus::Ok
    })
}

/// Full report as JSON (without timestamps). Free with [`sb_string_free`].
/// Returns null on failure.
///
/// # Safety
/// `result` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn sb_result_to_json(result: *const SbResult) -> *mut c_char {
    let Some(r) = result.as_ref() else {
        set_error("null result");
        return ptr::null_mut();
    };
    match serde_json::to_string(&r.report) {
        Ok(s) => CString::new(s).map_or(ptr::null_mut(), CString::into_raw),
        Err(e) => {
            set_error(e.to_string());
            ptr::null_mut()
        }
    }
}

/// # Safety
/// `s` must come from this library and not be freed twice.
#[no_mangle]
pub unsafe extern "C" fn sb_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// Bounds on `E exp(sX)` for `X ≥ 0` with mean `lambda` and variance `var`.
/// The upper bound is +infinity for `s > 0`.
///
/// # Safety
/// `lower` and `upper` must be valid pointers.
#[no_mangle]
pub unsafe extern "C" fn sb_mgf_bounds(lambda: f64, var: f64, s: f64, lower: *mut f64, upper: *mut f64) -> SbStatus {
    if lower.is_null() || upper.is_null() {
        return fail(SbStatus::NullPointer, "null output pointer");
    }
    match closed_form::mgf_bounds(lambda, var, s) {
        Ok(b) => {
            *lower = b.lower;
            *upper = b.upper;
            SbStatus::Ok
        }
        Err(e) => fail(SbStatus::DomainError, e.to_string()),
    }
}

/// Bounds on the power mean `(E X^s)^{1/s}`; `upper` is +infinity when no
/// upper bound exists.
///
/// # Safety
/// `lower` and `upper` must be valid pointers.
#[no_mangle]
pub unsafe extern "C" fn sb_power_mean_bounds(
    lambda: f64,
    var: f64,
    s: f64,
    lower: *mut f64,
    upper: *mut f64,
) -> SbStatus {
    if lower.is_null() || upper.is_null() {
        return fail(SbStatus::NullPointer, "null output pointer");
    }
    match closed_form::power_mean_bounds(lambda, var, s) {
        Ok(b) => {
            *lower = b.lower;
            *upper = b.upper.unwrap_or(f64::INFINITY);
            SbStatus::Ok
        }
        Err(e) => fail(SbStatus::DomainError, e.to_string()),
    }
}

/// Largest variance of a law on `[a, b]` with mean `lambda`.
///
/// # Safety
/// `upper` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn sb_variance_range(a: f64, b: f64, lambda: f64, upper: *mut f64) -> SbStatus {
    if upper.is_null() {
        return fail(SbStatus::NullPointer, "null output pointer");
    }
    match closed_form::variance_range(a, b, lambda) {
        Ok((_, v)) => {
            *upper = v;
            SbStatus::Ok
        }
        Err(e) => fail(SbStatus::DomainError, e.to_string()),
    }
}

/// Sharp lower bound of `P(X ≤ a)` for `X ≥ 0` with mean `lambda`.
#[no_mangle]
pub extern "C" fn sb_markov_bound(lambda: f64, a: f64) -> f64 {
    closed_form::markov_bound(lambda, a)
}

/// Sharp upper bound of `P(X ≥ lambda)` for `X ≥ a` with `E e^X = 1`.
#[no_mangle]
pub extern "C" fn sb_jarzynski_bound(a: f64, lambda: f64) -> f64 {
    closed_form::jarzynski_bound(a, lambda)
}
