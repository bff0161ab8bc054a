//! C ABI for surgeflow.
//!
//! Objects are opaque handles created by `sf_*_load`/`sf_solve` and
//! released with the matching `_free`. Every fallible call returns an
//! [`SfStatus`]; on failure [`sf_last_error_message`] describes the error on
//! the calling thread. Strings returned through out-pointers belong to the
//! caller and are released with [`sf_string_free`].

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::{Path, PathBuf};
use std::ptr;

use surgeflow::census::{estimate_admissions, CensusSeries};
use surgeflow::dataio::{self, metrics_json, run_scenario, save_results, ScenarioConfig, ScenarioRun};
use surgeflow::evaluation::compute_metrics_with;
use surgeflow::los::LosDistribution;
use surgeflow::solver::Status;
use surgeflow::Error;

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SfStatus {
    Ok = 0,
    InvalidArgument = 1,
    Validation = 2,
    Parse = 3,
    Io = 4,
    Solver = 5,
    NullPointer = 6,
    Panic = 7,
}

/// Solver outcome of a run.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SfSolveStatus {
    Optimal = 0,
    Infeasible = 1,
    Unbounded = 2,
    IterationLimit = 3,
}

/// One patient transfer; indices follow the scenario's location and group
/// order, `day` counts from the first scenario day.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SfTransfer {
    pub group: usize,
    pub from: usize,
    pub to: usize,
    pub day: usize,
    pub amount: f64,
}

/// A scenario file and the directory its relative paths resolve against.
pub struct SfScenario {
    config: ScenarioConfig,
    base: PathBuf,
}

/// A solved scenario.
pub struct SfRun {
    run: ScenarioRun,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).expect("no interior nul");
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn status_of(err: &Error) -> SfStatus {
    match err {
        Error::InvalidArgument(_) | Error::Json(_) => SfStatus::InvalidArgument,
        Error::Validation(_) => SfStatus::Validation,
        Error::Parse { .. } => SfStatus::Parse,
        Error::Io { .. } => SfStatus::Io,
        Error::Solver(_) => SfStatus::Solver,
    }
}

/// Runs `f`, recording any error or panic for `sf_last_error_message`.
fn guard(f: impl FnOnce() -> Result<(), SfStatus>) -> SfStatus {
    LAST_ERROR.with(|e| *e.borrow_mut() = None);
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => SfStatus::Ok,
        Ok(Err(s)) => s,
        Err(p) => {
            let msg = p
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| p.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "unknown panic".into());
            set_error(format!("internal panic: {msg}"));
            SfStatus::Panic
        }
    }
}

fn fail(err: Error) -> SfStatus {
    let s = status_of(&err);
    set_error(err.to_string());
    s
}

fn null(what: &str) -> SfStatus {
    set_error(format!("`{what}` is null"));
    SfStatus::NullPointer
}

unsafe fn str_arg<'a>(p: *const c_char, what: &str) -> Result<&'a str, SfStatus> {
    if p.is_null() {
        return Err(null(what));
    }
    CStr::from_ptr(p).to_str().map_err(|_| {
        set_error(format!("`{what}` is not valid UTF-8"));
        SfStatus::InvalidArgument
    })
}

unsafe fn write_string(out: *mut *mut c_char, s: String) -> Result<(), SfStatus> {
    let c = CString::new(s).map_err(|_| {
        set_error("string contains a nul byte".into());
        SfStatus::InvalidArgument
    })?;
    *out = c.into_raw();
    Ok(())
}

/// Library version as a static nul-terminated string.
#[no_mangle]
pub extern "C" fn sf_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Message of the last failed call on this thread, or NULL. Valid until the
/// next surgeflow call on the same thread.
#[no_mangle]
pub extern "C" fn sf_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// # Safety
/// `s` must come from a surgeflow out-pointer and not be freed yet.
#[no_mangle]
pub unsafe extern "C" fn sf_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// Reads a scenario JSON file.
///
/// # Safety
/// `path` must be a nul-terminated string and `out` a writable pointer.
#[no_mangle]
pub unsafe extern "C" fn sf_scenario_load(path: *const c_char, out: *mut *mut SfScenario) -> SfStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let path = str_arg(path, "path")?;
        let (config, base) = ScenarioConfig::load(Path::new(path)).map_err(fail)?;
        *out = Box::into_raw(Box::new(SfScenario { config, base }));
        Ok(())
    })
}

/// Parses a scenario from JSON text; relative paths resolve against
/// `base_dir`.
///
/// # Safety
/// `json` and `base_dir` must be nul-terminated strings and `out` a writable
/// pointer.
#[no_mangle]
pub unsafe extern "C" fn sf_scenario_from_json(
    json: *const c_char,
    base_dir: *const c_char,
    out: *mut *mut SfScenario,
) -> SfStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let text = str_arg(json, "json")?;
        let base = str_arg(base_dir, "base_dir")?;
        let config = ScenarioConfig::from_json(text).map_err(fail)?;
        *out = Box::into_raw(Box::new(SfScenario { config, base: PathBuf::from(base) }));
        Ok(())
    })
}

/// Replaces top-level scenario fields with those in the JSON object.
///
/// # Safety
/// `scenario` must be a live handle and `json` a nul-terminated string.
#[no_mangle]
pub unsafe extern "C" fn sf_scenario_apply_overrides(scenario: *mut SfScenario, json: *const c_char) -> SfStatus {
    guard(|| {
        let Some(sc) = scenario.as_mut() else {
            return Err(null("scenario"));
        };
        let text = str_arg(json, "json")?;
        let value: serde_json::Value = serde_json::from_str(text).map_err(|e| fail(e.into()))?;
        sc.config = sc.config.with_overrides(&value).map_err(fail)?;
        Ok(())
    })
}

/// # Safety
/// `scenario` must be NULL or a live handle, not used afterwards.
#[no_mangle]
pub unsafe extern "C" fn sf_scenario_free(scenario: *mut SfScenario) {
    if !scenario.is_null() {
        drop(Box::from_raw(scenario));
    }
}

/// Loads the dataset, builds and solves the model and scores the plan.
///
/// # Safety
/// `scenario` must be a live handle and `out` a writable pointer.
#[no_mangle]
pub unsafe extern "C" fn sf_solve(scenario: *const SfScenario, out: *mut *mut SfRun) -> SfStatus {
    guard(|| {
        let Some(sc) = scenario.as_ref() else {
            return Err(null("scenario"));
        };
        if out.is_null() {
            return Err(null("out"));
        }
        let run = run_scenario(&sc.config, &sc.base).map_err(fail)?;
        *out = Box::into_raw(Box::new(SfRun { run }));
        Ok(())
    })
}

/// # Safety
/// `run` must be NULL or a live handle, not used afterwards.
#[no_mangle]
pub unsafe extern "C" fn sf_run_free(run: *mut SfRun) {
    if !run.is_null() {
        drop(Box::from_raw(run));
    }
}

unsafe fn run_ref<'a>(run: *const SfRun) -> Result<&'a ScenarioRun, SfStatus> {
    run.as_ref().map(|r| &r.run).ok_or_else(|| null("run"))
}

/// # Safety
/// `run` must be a live handle and `status`/`objective` writable pointers.
#[no_mangle]
pub unsafe extern "C" fn sf_run_solution(
    run: *const SfRun,
    status: *mut SfSolveStatus,
    objective: *mut f64,
) -> SfStatus {
    guard(|| {
        let r = run_ref(run)?;
        if status.is_null() || objective.is_null() {
            return Err(null("status/objective"));
        }
        let sol = &r.outcome.solution;
        *status = match sol.status {
            Status::Optimal => SfSolveStatus::Optimal,
            Status::Infeasible => SfSolveStatus::Infeasible,
            Status::Unbounded => SfSolveStatus::Unbounded,
            Status::IterationLimit => SfSolveStatus::IterationLimit,
        };
        *objective = sol.objective;
        Ok(())
    })
}

/// Metrics as JSON, byte-identical to the `metrics.json` of a result bundle.
///
/// # Safety
/// `run` must be a live handle and `out` a writable pointer.
#[no_mangle]
pub unsafe extern "C" fn sf_run_metrics_json(run: *const SfRun, out: *mut *mut c_char) -> SfStatus {
    guard(|| {
        let r = run_ref(run)?;
        if out.is_null() {
            return Err(null("out"));
        }
        let text = metrics_json(&r.outcome.metrics).map_err(fail)?;
        write_string(out, text)
    })
}

/// # Safety
/// `run` must be a live handle and `count` a writable pointer.
#[no_mangle]
pub unsafe extern "C" fn sf_run_transfer_count(run: *const SfRun, count: *mut usize) -> SfStatus {
    guard(|| {
        let r = run_ref(run)?;
        if count.is_null() {
            return Err(null("count"));
        }
        *count = r.outcome.plan.transfers.len();
        Ok(())
    })
}

/// # Safety
/// `run` must be a live handle and `out` a writable pointer.
#[no_mangle]
pub unsafe extern "C" fn sf_run_transfer(run: *const SfRun, index: usize, out: *mut SfTransfer) -> SfStatus {
    guard(|| {
        let r = run_ref(run)?;
        if out.is_null() {
            return Err(null("out"));
        }
        let Some(e) = r.outcome.plan.transfers.get(index) else {
            set_error(format!("transfer index {index} out of range"));
            return Err(SfStatus::InvalidArgument);
        };
        *out = SfTransfer { group: e.group, from: e.from, to: e.to, day: e.day, amount: e.amount };
        Ok(())
    })
}

/// Writes the result bundle (CSV and JSON files) into `out_dir`.
///
/// # Safety
/// `run` must be a live handle and `out_dir` a nul-terminated string.
#[no_mangle]
pub unsafe extern "C" fn sf_run_save(run: *const SfRun, out_dir: *const c_char) -> SfStatus {
    guard(|| {
        let r = run_ref(run)?;
        let dir = str_arg(out_dir, "out_dir")?;
        save_results(Path::new(dir), &r.request.instance, &r.built.model, &r.outcome).map_err(fail)?;
        Ok(())
    })
}

/// Scores the plan in a `transfers.csv` against the scenario and returns the
/// metrics JSON.
///
/// # Safety
/// `scenario` must be a live handle, `plan_path` a nul-terminated string and
/// `out` a writable pointer.
#[no_mangle]
pub unsafe extern "C" fn sf_evaluate_plan(
    scenario: *const SfScenario,
    plan_path: *const c_char,
    out: *mut *mut c_char,
) -> SfStatus {
    guard(|| {
        let Some(sc) = scenario.as_ref() else {
            return Err(null("scenario"));
        };
        let path = str_arg(plan_path, "plan_path")?;
        if out.is_null() {
            return Err(null("out"));
        }
        let inst = dataio::load_scenario(&sc.config, &sc.base).map_err(fail)?.instance;
        let plan = dataio::load_plan(Path::new(path), &inst).map_err(fail)?;
        let metrics = compute_metrics_with(&inst, &plan, &sc.config.metrics).map_err(fail)?;
        write_string(out, metrics_json(&metrics).map_err(fail)?)
    })
}

/// Reconstructs daily admissions from a census series of `len` days.
/// `admissions` receives `len` values.
///
/// # Safety
/// `census` and `admissions` must hold `len` values, `los_pmf` `los_len`
/// values, and `residual` must be writable.
#[no_mangle]
pub unsafe extern "C" fn sf_estimate_admissions(
    census: *const f64,
    len: usize,
    los_pmf: *const f64,
    los_len: usize,
    iterations: usize,
    seed: u64,
    admissions: *mut f64,
    residual: *mut f64,
) -> SfStatus {
    guard(|| {
        if census.is_null() || los_pmf.is_null() || admissions.is_null() || residual.is_null() {
            return Err(null("census/los_pmf/admissions/residual"));
        }
        if len == 0 || los_len == 0 {
            set_error("`len` and `los_len` must be positive".into());
            return Err(SfStatus::InvalidArgument);
        }
        let series = CensusSeries::new("series", std::slice::from_raw_parts(census, len).to_vec());
        let los = LosDistribution::from_pmf(std::slice::from_raw_parts(los_pmf, los_len).to_vec()).map_err(fail)?;
        let est = estimate_admissions(&series, &los, iterations, seed).map_err(fail)?;
        std::slice::from_raw_parts_mut(admissions, len).copy_from_slice(&est.admissions);
        *residual = est.residual;
        Ok(())
    })
}
