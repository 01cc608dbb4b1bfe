//! C ABI over `aircomp-core`.
//!
//! Scenarios and outcomes are opaque heap handles released with their
//! `_free` function. Every fallible call returns an [`AircompStatus`]; on
//! failure a message for the calling thread is available from
//! [`aircomp_last_error`]. Strings returned to the caller are released with
//! [`aircomp_string_free`].

#![allow(clippy::neg_cmp_op_on_partial_ord)]

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use aircomp_core::benchmarks::{run_scheme, upper_bound, SchemeId, SchemeOutcome};
use aircomp_core::orchestrator::{BcdOptions, SolveError};
use aircomp_core::scenario::{generate_desk_scenario, generate_paper_scenario, Scenario};
use aircomp_core::scheduling::SlotRule;
use aircomp_core::verify::{verify_outcome, Tolerances};

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AircompStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidUtf8 = 2,
    InvalidArgument = 3,
    Io = 4,
    Parse = 5,
    InvalidScenario = 6,
    SolveFailed = 7,
    NoPlan = 8,
    Panic = 99,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AircompScheme {
    Joint = 0,
    StaticUav = 1,
    EqualPower = 2,
    Orthogonal = 3,
    UpperBound = 4,
}

impl From<AircompScheme> for SchemeId {
    fn from(s: AircompScheme) -> Self {
        match s {
            AircompScheme::Joint => SchemeId::Joint,
            AircompScheme::StaticUav => SchemeId::StaticUav,
            AircompScheme::EqualPower => SchemeId::EqualPower,
            AircompScheme::Orthogonal => SchemeId::Orthogonal,
            AircompScheme::UpperBound => SchemeId::UpperBound,
        }
    }
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AircompLayout {
    /// Three clusters of five devices.
    Desk = 0,
    /// Six clusters of twenty devices.
    Paper = 1,
}

/// Inner-loop settings; obtain defaults from [`aircomp_options_default`].
#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct AircompOptions {
    pub max_iters: usize,
    pub tol: f64,
}

pub struct AircompScenario {
    inner: Scenario,
}

pub struct AircompOutcome {
    scenario: Scenario,
    inner: SchemeOutcome,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: impl Into<String>) {
    let text = msg.into().replace('\0', " ");
    LAST_ERROR.with(|e| *e.borrow_mut() = CString::new(text).ok());
}

fn fail(status: AircompStatus, msg: impl Into<String>) -> AircompStatus {
    set_error(msg);
    status
}

/// Runs `f` with the error slot cleared and panics turned into a status.
fn guard(f: impl FnOnce() -> AircompStatus) -> AircompStatus {
    LAST_ERROR.with(|e| *e.borrow_mut() = None);
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(s) => s,
        Err(p) => {
            let msg = p
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| p.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "unknown panic".into());
            fail(AircompStatus::Panic, format!("internal panic: {msg}"))
        }
    }
}

unsafe fn read_str<'a>(p: *const c_char) -> Result<&'a str, AircompStatus> {
    if p.is_null() {
        return Err(fail(AircompStatus::NullPointer, "null string argument"));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|_| fail(AircompStatus::InvalidUtf8, "string argument is not UTF-8"))
}

fn scenario_status(e: &aircomp_core::scenario::ScenarioError) -> AircompStatus {
    use aircomp_core::scenario::ScenarioError as E;
    match e {
        E::Io { .. } => AircompStatus::Io,
        E::Parse { .. } => AircompStatus::Parse,
        _ => AircompStatus::InvalidScenario,
    }
}

unsafe fn emit<T>(out: *mut *mut T, value: T) -> AircompStatus {
    *out = Box::into_raw(Box::new(value));
    AircompStatus::Ok
}

unsafe fn emit_string(out: *mut *mut c_char, text: String) -> AircompStatus {
    match CString::new(text) {
        Ok(c) => {
            *out = c.into_raw();
            AircompStatus::Ok
        }
        Err(_) => fail(AircompStatus::Panic, "string contains an interior NUL"),
    }
}

/// Message of the last failed call on this thread, or NULL. The pointer is
/// valid until the next call into this library from the same thread.
#[no_mangle]
pub extern "C" fn aircomp_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Releases a string returned by this library. NULL is ignored.
///
/// # Safety
/// `s` must come from this library and not have been freed.
#[no_mangle]
pub unsafe extern "C" fn aircomp_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

#[no_mangle]
pub extern "C" fn aircomp_options_default() -> AircompOptions {
    let d = BcdOptions::default();
    AircompOptions {
        max_iters: d.max_iters,
        tol: d.tol,
    }
}

/// Parses and validates a scenario document.
///
/// # Safety
/// `json` must be a NUL-terminated string and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn aircomp_scenario_from_json(json: *const c_char, out: *mut *mut AircompScenario) -> AircompStatus {
    guard(|| {
        if out.is_null() {
            return fail(AircompStatus::NullPointer, "null output pointer");
        }
        let text = match read_str(json) {
            Ok(t) => t,
            Err(s) => return s,
        };
        match Scenario::from_json(text) {
            Ok(inner) => emit(out, AircompScenario { inner }),
            Err(e) => fail(scenario_status(&e), e.to_string()),
        }
    })
}

/// Reads a scenario file.
///
/// # Safety
/// `path` must be a NUL-terminated string and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn aircomp_scenario_load(path: *const c_char, out: *mut *mut AircompScenario) -> AircompStatus {
    guard(|| {
        if out.is_null() {
            return fail(AircompStatus::NullPointer, "null output pointer");
        }
        let path = match read_str(path) {
            Ok(t) => t,
            Err(s) => return s,
        };
        match Scenario::load(path) {
            Ok(inner) => emit(out, AircompScenario { inner }),
            Err(e) => fail(scenario_status(&e), e.to_string()),
        }
    })
}

/// Generates a clustered scenario with devices drawn from `seed`.
///
/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn aircomp_scenario_generate(
    layout: AircompLayout,
    duration: f64,
    num_uavs: usize,
    power_budget: f64,
    seed: u64,
    out: *mut *mut AircompScenario,
) -> AircompStatus {
    guard(|| {
        if out.is_null() {
            return fail(AircompStatus::NullPointer, "null output pointer");
        }
        let made = match layout {
            AircompLayout::Desk => generate_desk_scenario(duration, num_uavs, power_budget, seed),
            AircompLayout::Paper => generate_paper_scenario(duration, num_uavs, power_budget, seed),
        };
        match made {
            Ok(inner) => emit(out, AircompScenario { inner }),
            Err(e) => fail(scenario_status(&e), e.to_string()),
        }
    })
}

/// # Safety
/// `scenario` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn aircomp_scenario_to_json(scenario: *const AircompScenario, out: *mut *mut c_char) -> AircompStatus {
    guard(|| {
        if scenario.is_null() || out.is_null() {
            return fail(AircompStatus::NullPointer, "null argument");
        }
        emit_string(out, (*scenario).inner.to_json())
    })
}

/// Largest task count any scheme can reach on this scenario.
///
/// # Safety
/// `scenario` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn aircomp_scenario_upper_bound(scenario: *const AircompScenario, out: *mut usize) -> AircompStatus {
    guard(|| {
        if scenario.is_null() || out.is_null() {
            return fail(AircompStatus::NullPointer, "null argument");
        }
        *out = upper_bound(&(*scenario).inner);
        AircompStatus::Ok
    })
}

/// # Safety
/// `scenario` must come from this library and not have been freed. NULL is
/// ignored.
#[no_mangle]
pub unsafe extern "C" fn aircomp_scenario_free(scenario: *mut AircompScenario) {
    if !scenario.is_null() {
        drop(Box::from_raw(scenario));
    }
}

/// Runs a scheme to completion. `options` may be NULL for defaults.
///
/// # Safety
/// `scenario` must be a live handle, `options` NULL or readable, `out`
/// writable.
#[no_mangle]
pub unsafe extern "C" fn aircomp_solve(
    scenario: *const AircompScenario,
    scheme: AircompScheme,
    options: *const AircompOptions,
    out: *mut *mut AircompOutcome,
) -> AircompStatus {
    guard(|| {
        if scenario.is_null() || out.is_null() {
            return fail(AircompStatus::NullPointer, "null argument");
        }
        let mut opts = BcdOptions::default();
        if !options.is_null() {
            let o = *options;
            if o.max_iters == 0 || !(o.tol > 0.0) {
                return fail(AircompStatus::InvalidArgument, "max_iters must be positive and tol above zero");
            }
            opts.max_iters = o.max_iters;
            opts.tol = o.tol;
        }
        let s = &(*scenario).inner;
        match run_scheme(s, scheme.into(), &opts) {
            Ok(inner) => emit(
                out,
                AircompOutcome {
                    scenario: s.clone(),
                    inner,
                },
            ),
            Err(e @ SolveError::InvalidScenario(_)) => fail(AircompStatus::InvalidScenario, e.to_string()),
            Err(e) => fail(AircompStatus::SolveFailed, e.to_string()),
        }
    })
}

/// Returns the achieved task count, or 0 for a NULL handle.
///
/// # Safety
/// `outcome` must be NULL or a live handle.
#[no_mangle]
pub unsafe extern "C" fn aircomp_outcome_d_star(outcome: *const AircompOutcome) -> usize {
    outcome.as_ref().map_or(0, |o| o.inner.d_star)
}

/// # Safety
/// `outcome` must be NULL or a live handle.
#[no_mangle]
pub unsafe extern "C" fn aircomp_outcome_upper_bound(outcome: *const AircompOutcome) -> usize {
    outcome.as_ref().map_or(0, |o| o.inner.upper_bound)
}

/// Worst MSE-to-target ratio of the returned plan; NaN when the scheme
/// produces no plan.
///
/// # Safety
/// `outcome` must be NULL or a live handle.
#[no_mangle]
pub unsafe extern "C" fn aircomp_outcome_gamma(outcome: *const AircompOutcome) -> f64 {
    outcome
        .as_ref()
        .and_then(|o| o.inner.solve.as_ref())
        .map_or(f64::NAN, |s| s.gamma)
}

/// Serializes the full outcome, plan included.
///
/// # Safety
/// `outcome` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn aircomp_outcome_to_json(outcome: *const AircompOutcome, out: *mut *mut c_char) -> AircompStatus {
    guard(|| {
        if outcome.is_null() || out.is_null() {
            return fail(AircompStatus::NullPointer, "null argument");
        }
        match serde_json::to_string(&(*outcome).inner) {
            Ok(text) => emit_string(out, text),
            Err(e) => fail(AircompStatus::Parse, e.to_string()),
        }
    })
}

/// Checks the plan against every constraint. `feasible` receives 1 or 0;
/// `worst_ratio` (optional) receives the largest MSE-to-target ratio.
///
/// # Safety
/// `outcome` must be a live handle, `feasible` writable, `worst_ratio` NULL
/// or writable.
#[no_mangle]
pub unsafe extern "C" fn aircomp_outcome_verify(
    outcome: *const AircompOutcome,
    feasible: *mut i32,
    worst_ratio: *mut f64,
) -> AircompStatus {
    guard(|| {
        if outcome.is_null() || feasible.is_null() {
            return fail(AircompStatus::NullPointer, "null argument");
        }
        let o = &*outcome;
        let Some(solve) = o.inner.solve.as_ref() else {
            return fail(AircompStatus::NoPlan, "the analytic upper bound carries no plan");
        };
        let rule = if o.inner.scheme == SchemeId::Orthogonal {
            SlotRule::Orthogonal
        } else {
            SlotRule::PerUav
        };
        let report = verify_outcome(&o.scenario, solve, rule, &Tolerances::default());
        *feasible = report.ok() as i32;
        if !worst_ratio.is_null() {
            *worst_ratio = report.worst_mse_ratio;
        }
        if !report.ok() {
            set_error(report.violations.join("; "));
        }
        AircompStatus::Ok
    })
}

/// # Safety
/// `outcome` must come from this library and not have been freed. NULL is
/// ignored.
#[no_mangle]
pub unsafe extern "C" fn aircomp_outcome_free(outcome: *mut AircompOutcome) {
    if !outcome.is_null() {
        drop(Box::from_raw(outcome));
    }
}
