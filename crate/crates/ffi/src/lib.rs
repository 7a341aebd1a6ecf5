//! C interface to the `wtomo` library.
//!
//! Objects cross the boundary as opaque heap handles that the caller releases
//! with the matching `*_free` function. Every fallible call returns a
//! [`WtomoStatus`]; on failure the message is available from
//! [`wtomo_last_error`] on the same thread until the next failing call.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::fs::File;
use std::io::BufWriter;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::ptr;

use wtomo::experiments::{reconstruction_error, run_scenario, RunOptions, Scenario, Setup};
use wtomo::{DenseTensor, Error, Solver, SolverReport, TensorShape};

/// Result code of every fallible call.
#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum WtomoStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    SolverFailure = 3,
    Parse = 4,
    Io = 5,
    Panic = 6,
}

#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum WtomoSolver {
    Vector = 0,
    Matrix = 1,
    Tensor = 2,
}

impl From<WtomoSolver> for Solver {
    fn from(s: WtomoSolver) -> Self {
        match s {
            WtomoSolver::Vector => Solver::Vector,
            WtomoSolver::Matrix => Solver::Matrix,
            WtomoSolver::Tensor => Solver::Tensor,
        }
    }
}

/// Experiment description: grid, nodes, obstructions, sampling and solver settings.
pub struct WtomoScenario(Scenario);

/// Dense real field of order 1 to 4, last index fastest.
pub struct WtomoField(DenseTensor);

/// Outcome of a single reconstruction.
pub struct WtomoReport {
    report: SolverReport,
    epsilon: f64,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_last_error(message: String) {
    let c = CString::new(message.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|slot| *slot.borrow_mut() = Some(c));
}

struct Failure(WtomoStatus, String);

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let status = match e {
            Error::InvalidArgument(_) => WtomoStatus::InvalidArgument,
            Error::SolverFailure { .. } => WtomoStatus::SolverFailure,
            Error::Parse { .. } => WtomoStatus::Parse,
            Error::Io { .. } => WtomoStatus::Io,
        };
        Failure(status, e.to_string())
    }
}

fn null(what: &str) -> Failure {
    Failure(WtomoStatus::NullPointer, format!("{what} is null"))
}

fn invalid(msg: impl Into<String>) -> Failure {
    Failure(WtomoStatus::InvalidArgument, msg.into())
}

fn guard(body: impl FnOnce() -> Result<(), Failure>) -> WtomoStatus {
    match catch_unwind(AssertUnwindSafe(body)) {
        Ok(Ok(())) => WtomoStatus::Ok,
        Ok(Err(Failure(status, message))) => {
            set_last_error(message);
            status
        }
        Err(payload) => {
            let msg = payload
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| payload.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "unknown panic".into());
            set_last_error(format!("internal panic: {msg}"));
            WtomoStatus::Panic
        }
    }
}

unsafe fn borrow<'a, T>(p: *const T, what: &str) -> Result<&'a T, Failure> {
    unsafe { p.as_ref() }.ok_or_else(|| null(what))
}

unsafe fn borrow_mut<'a, T>(p: *mut T, what: &str) -> Result<&'a mut T, Failure> {
    unsafe { p.as_mut() }.ok_or_else(|| null(what))
}

unsafe fn text<'a>(p: *const c_char, what: &str) -> Result<&'a str, Failure> {
    if p.is_null() {
        return Err(null(what));
    }
    unsafe { CStr::from_ptr(p) }
        .to_str()
        .map_err(|_| invalid(format!("{what} is not valid UTF-8")))
}

unsafe fn put<T>(out: *mut *mut T, value: T) -> Result<(), Failure> {
    let slot = unsafe { borrow_mut(out, "output handle")? };
    *slot = Box::into_raw(Box::new(value));
    Ok(())
}

unsafe fn free<T>(p: *mut T) {
    if !p.is_null() {
        drop(unsafe { Box::from_raw(p) });
    }
}

/// Message of the most recent failure on this thread, or null if none.
/// The pointer stays valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn wtomo_last_error() -> *const c_char {
    LAST_ERROR.with(|slot| slot.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Loads a built-in scenario by name (`d2`, `d3` or `d4`).
///
/// # Safety
/// `name` must be a NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn wtomo_scenario_preset(name: *const c_char, out: *mut *mut WtomoScenario) -> WtomoStatus {
    guard(|| {
        let name = unsafe { text(name, "name")? };
        let scenario = Scenario::preset(name)?;
        unsafe { put(out, WtomoScenario(scenario)) }
    })
}

/// Loads a scenario file. A preset name is accepted as a fallback.
///
/// # Safety
/// `path` must be a NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn wtomo_scenario_load(path: *const c_char, out: *mut *mut WtomoScenario) -> WtomoStatus {
    guard(|| {
        let path = unsafe { text(path, "path")? };
        let scenario = Scenario::load(path)?;
        unsafe { put(out, WtomoScenario(scenario)) }
    })
}

/// Parses a scenario from TOML text.
///
/// # Safety
/// `toml` must be a NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn wtomo_scenario_from_toml(toml: *const c_char, out: *mut *mut WtomoScenario) -> WtomoStatus {
    guard(|| {
        let toml = unsafe { text(toml, "toml")? };
        let scenario = Scenario::from_toml(toml)?;
        unsafe { put(out, WtomoScenario(scenario)) }
    })
}

/// # Safety
/// `scenario` must be null or a handle from this library that has not been freed.
#[no_mangle]
pub unsafe extern "C" fn wtomo_scenario_free(scenario: *mut WtomoScenario) {
    unsafe { free(scenario) }
}

/// Writes the field order to `order` and its extents to `dims[0..order]`.
/// `dims` must have room for four entries.
///
/// # Safety
/// All pointers must be valid; `dims` must point to at least four `size_t`.
#[no_mangle]
pub unsafe extern "C" fn wtomo_scenario_field_shape(
    scenario: *const WtomoScenario,
    dims: *mut usize,
    order: *mut usize,
) -> WtomoStatus {
    guard(|| {
        let sc = unsafe { borrow(scenario, "scenario")? };
        let shape = sc.0.field_shape()?;
        if dims.is_null() {
            return Err(null("dims"));
        }
        let out = unsafe { std::slice::from_raw_parts_mut(dims, 4) };
        out.fill(0);
        out[..shape.order()].copy_from_slice(shape.dims());
        *unsafe { borrow_mut(order, "order")? } = shape.order();
        Ok(())
    })
}

/// Sets the total number of measurements, split evenly across intervals.
///
/// # Safety
/// `scenario` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn wtomo_scenario_set_measurements(scenario: *mut WtomoScenario, total: usize) -> WtomoStatus {
    guard(|| {
        let sc = unsafe { borrow_mut(scenario, "scenario")? };
        sc.0 = sc.0.clone().with_total_measurements(total)?;
        Ok(())
    })
}

/// Sets the noise standard deviation in dB.
///
/// # Safety
/// `scenario` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn wtomo_scenario_set_noise(scenario: *mut WtomoScenario, eta: f64) -> WtomoStatus {
    guard(|| {
        let sc = unsafe { borrow_mut(scenario, "scenario")? };
        sc.0 = sc.0.clone().with_eta(eta)?;
        Ok(())
    })
}

/// Sets the base seed and the number of runs.
///
/// # Safety
/// `scenario` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn wtomo_scenario_set_seed(scenario: *mut WtomoScenario, seed: u64, runs: usize) -> WtomoStatus {
    guard(|| {
        let sc = unsafe { borrow_mut(scenario, "scenario")? };
        let mut next = sc.0.clone();
        next.seed = seed;
        next.runs = runs;
        next.validate()?;
        sc.0 = next;
        Ok(())
    })
}

/// Builds the ground-truth field of a scenario.
///
/// # Safety
/// `scenario` must be a live handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn wtomo_build_truth(scenario: *const WtomoScenario, out: *mut *mut WtomoField) -> WtomoStatus {
    guard(|| {
        let sc = unsafe { borrow(scenario, "scenario")? };
        let truth = wtomo::experiments::build_truth(&sc.0)?;
        unsafe { put(out, WtomoField(truth)) }
    })
}

/// Creates a field from `len` values laid out last index fastest.
///
/// # Safety
/// `dims` must point to `order` entries and `values` to `len` doubles.
#[no_mangle]
pub unsafe extern "C" fn wtomo_field_new(
    dims: *const usize,
    order: usize,
    values: *const f64,
    len: usize,
    out: *mut *mut WtomoField,
) -> WtomoStatus {
    guard(|| {
        if dims.is_null() || values.is_null() {
            return Err(null(if dims.is_null() { "dims" } else { "values" }));
        }
        let dims = unsafe { std::slice::from_raw_parts(dims, order) };
        let shape = TensorShape::new(dims)?;
        if shape.len() != len {
            return Err(invalid(format!("shape {dims:?} holds {} values, got {len}", shape.len())));
        }
        let values = unsafe { std::slice::from_raw_parts(values, len) }.to_vec();
        unsafe { put(out, WtomoField(DenseTensor::from_vec(shape, values)?)) }
    })
}

/// # Safety
/// `field` must be null or a handle from this library that has not been freed.
#[no_mangle]
pub unsafe extern "C" fn wtomo_field_free(field: *mut WtomoField) {
    unsafe { free(field) }
}

/// Number of values in the field, or 0 for a null handle.
///
/// # Safety
/// `field` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn wtomo_field_len(field: *const WtomoField) -> usize {
    unsafe { field.as_ref() }.map_or(0, |f| f.0.len())
}

/// Order of the field, or 0 for a null handle.
///
/// # Safety
/// `field` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn wtomo_field_order(field: *const WtomoField) -> usize {
    unsafe { field.as_ref() }.map_or(0, |f| f.0.shape().order())
}

/// Copies the extents into `dims`, which holds `cap` entries.
///
/// # Safety
/// `field` must be a live handle and `dims` must point to `cap` entries.
#[no_mangle]
pub unsafe extern "C" fn wtomo_field_dims(field: *const WtomoField, dims: *mut usize, cap: usize) -> WtomoStatus {
    guard(|| {
        let f = unsafe { borrow(field, "field")? };
        let src = f.0.shape().dims();
        if dims.is_null() {
            return Err(null("dims"));
        }
        if cap < src.len() {
            return Err(invalid(format!("dims buffer holds {cap} entries, need {}", src.len())));
        }
        unsafe { std::slice::from_raw_parts_mut(dims, src.len()) }.copy_from_slice(src);
        Ok(())
    })
}

/// Copies the values into `values`, which holds `cap` doubles.
///
/// # Safety
/// `field` must be a live handle and `values` must point to `cap` doubles.
#[no_mangle]
pub unsafe extern "C" fn wtomo_field_values(field: *const WtomoField, values: *mut f64, cap: usize) -> WtomoStatus {
    guard(|| {
        let f = unsafe { borrow(field, "field")? };
        let src = f.0.vectorize();
        if values.is_null() {
            return Err(null("values"));
        }
        if cap < src.len() {
            return Err(invalid(format!("values buffer holds {cap} entries, need {}", src.len())));
        }
        unsafe { std::slice::from_raw_parts_mut(values, src.len()) }.copy_from_slice(src);
        Ok(())
    })
}

/// Normalized reconstruction error of `count` estimates against `truth`,
/// averaged over the estimates.
///
/// # Safety
/// `estimates` must point to `count` live field handles.
#[no_mangle]
pub unsafe extern "C" fn wtomo_reconstruction_error(
    truth: *const WtomoField,
    estimates: *const *const WtomoField,
    count: usize,
    out: *mut f64,
) -> WtomoStatus {
    guard(|| {
        let truth = unsafe { borrow(truth, "truth")? };
        if estimates.is_null() {
            return Err(null("estimates"));
        }
        let handles = unsafe { std::slice::from_raw_parts(estimates, count) };
        let fields = handles
            .iter()
            .map(|&h| unsafe { borrow(h, "estimate") }.map(|f| f.0.clone()))
            .collect::<Result<Vec<_>, _>>()?;
        let value = reconstruction_error(&truth.0, &fields)?;
        *unsafe { borrow_mut(out, "out")? } = value;
        Ok(())
    })
}

/// Simulates run `run` (1-based) of the scenario and reconstructs it with
/// `solver`, using the scenario's solver settings.
///
/// # Safety
/// `scenario` must be a live handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn wtomo_recover(
    scenario: *const WtomoScenario,
    solver: WtomoSolver,
    run: usize,
    out: *mut *mut WtomoReport,
) -> WtomoStatus {
    guard(|| {
        let sc = unsafe { borrow(scenario, "scenario")? };
        if run == 0 {
            return Err(invalid("run numbers start at 1"));
        }
        let setup = Setup::new(&sc.0)?;
        let trial = setup.trial(run)?;
        let report = wtomo::solve(solver.into(), &trial.operator, &trial.measurements.y, &sc.0.solver)?;
        let epsilon = reconstruction_error(&setup.truth, std::slice::from_ref(&report.estimate))?;
        unsafe { put(out, WtomoReport { report, epsilon }) }
    })
}

/// # Safety
/// `report` must be null or a handle from this library that has not been freed.
#[no_mangle]
pub unsafe extern "C" fn wtomo_report_free(report: *mut WtomoReport) {
    unsafe { free(report) }
}

/// Copies the estimate into a new field handle.
///
/// # Safety
/// `report` must be a live handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn wtomo_report_estimate(report: *const WtomoReport, out: *mut *mut WtomoField) -> WtomoStatus {
    guard(|| {
        let r = unsafe { borrow(report, "report")? };
        unsafe { put(out, WtomoField(r.report.estimate.clone())) }
    })
}

/// Normalized error of the estimate against the scenario truth, NaN for null.
///
/// # Safety
/// `report` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn wtomo_report_error(report: *const WtomoReport) -> f64 {
    unsafe { report.as_ref() }.map_or(f64::NAN, |r| r.epsilon)
}

/// Final objective value, NaN for null.
///
/// # Safety
/// `report` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn wtomo_report_objective(report: *const WtomoReport) -> f64 {
    unsafe { report.as_ref() }.map_or(f64::NAN, |r| r.report.objective)
}

/// Iterations performed, 0 for null.
///
/// # Safety
/// `report` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn wtomo_report_iterations(report: *const WtomoReport) -> usize {
    unsafe { report.as_ref() }.map_or(0, |r| r.report.iterations)
}

/// Whether the stopping rule was met before the iteration cap.
///
/// # Safety
/// `report` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn wtomo_report_converged(report: *const WtomoReport) -> bool {
    unsafe { report.as_ref() }.is_some_and(|r| r.report.converged)
}

/// Runs every configured solver over all runs of the scenario and writes the
/// per-run CSV to `path`. Returns `SolverFailure` after writing if any run failed.
///
/// # Safety
/// `scenario` must be a live handle and `path` a NUL-terminated string.
#[no_mangle]
pub unsafe extern "C" fn wtomo_run_scenario(
    scenario: *const WtomoScenario,
    jobs: usize,
    path: *const c_char,
) -> WtomoStatus {
    guard(|| {
        let sc = unsafe { borrow(scenario, "scenario")? };
        let path = Path::new(unsafe { text(path, "path")? });
        let options = RunOptions {
            jobs: jobs.max(1),
            ..RunOptions::default()
        };
        let result = run_scenario(&sc.0, &options)?;
        let io = |e| Failure::from(Error::Io { path: path.into(), source: e });
        let file = File::create(path).map_err(io)?;
        result.write_csv(BufWriter::new(file), &options).map_err(io)?;
        if result.has_failures() {
            let failed: usize = result.points.iter().map(|p| p.failures().count()).sum();
            return Err(Failure(WtomoStatus::SolverFailure, format!("{failed} runs failed")));
        }
        Ok(())
    })
}
