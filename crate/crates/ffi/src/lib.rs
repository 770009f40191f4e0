//! C ABI over `abf-core`.
//!
//! Objects cross the boundary as opaque handles that the caller frees with
//! the matching `*_free` function. Every fallible call returns an
//! [`AbfStatus`]; on failure a message is available from
//! [`abf_last_error`] on the same thread until the next failing call.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::ptr;

use abf_core::cli::parse_short_instance;
use abf_core::problem::{InstanceDescriptor, ProblemInstance};
use abf_core::prox::Regularizer;
use abf_core::solvers::{run, Method, RunConfig};
use abf_core::trajectory::{write_atomic, Trajectory};
use abf_core::verify::{verify_trajectory, TrendOptions};
use abf_core::Error;
use nalgebra::DVector;

/// Result codes.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AbfStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    Config = 3,
    Dimension = 4,
    Diverged = 5,
    Unconverged = 6,
    Io = 7,
    Violation = 8,
    Panic = 9,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AbfMethod {
    Abf = 0,
    AbfSc = 1,
    Fista = 2,
    FistaSc = 3,
    Pg = 4,
}

impl From<AbfMethod> for Method {
    fn from(m: AbfMethod) -> Self {
        match m {
            AbfMethod::Abf => Method::Abf,
            AbfMethod::AbfSc => Method::AbfSc,
            AbfMethod::Fista => Method::Fista,
            AbfMethod::FistaSc => Method::FistaSc,
            AbfMethod::Pg => Method::Pg,
        }
    }
}

/// One trajectory row. Quantities that do not apply to the method are NaN.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AbfRecord {
    pub k: usize,
    pub f_gap: f64,
    pub eta: f64,
    pub psi: f64,
    pub energy: f64,
    pub bound: f64,
    pub residual_y: f64,
    pub residual_z: f64,
    pub grad_drift: f64,
    pub y_increment: f64,
}

/// Opaque problem instance.
pub struct AbfInstance {
    inner: ProblemInstance,
}

/// Opaque completed (or diverged) run.
pub struct AbfRun {
    trajectory: Trajectory,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(message: impl Into<String>) {
    let text = message.into().replace('\0', " ");
    LAST_ERROR.with(|e| *e.borrow_mut() = CString::new(text).ok());
}

fn status_of(e: &Error) -> AbfStatus {
    match e {
        Error::Config { .. } | Error::OutsideDomain { .. } => AbfStatus::Config,
        Error::Dimension { .. } => AbfStatus::Dimension,
        Error::Unconverged { .. } => AbfStatus::Unconverged,
        Error::Diverged { .. } => AbfStatus::Diverged,
    }
}

fn fail(status: AbfStatus, message: impl Into<String>) -> AbfStatus {
    set_error(message);
    status
}

fn fail_with(e: Error) -> AbfStatus {
    fail(status_of(&e), e.to_string())
}

fn guard(body: impl FnOnce() -> AbfStatus) -> AbfStatus {
    catch_unwind(AssertUnwindSafe(body)).unwrap_or_else(|_| fail(AbfStatus::Panic, "internal panic"))
}

unsafe fn c_str<'a>(p: *const c_char, what: &str) -> Result<&'a str, AbfStatus> {
    if p.is_null() {
        return Err(fail(AbfStatus::NullPointer, format!("{what} is null")));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|_| fail(AbfStatus::InvalidArgument, format!("{what} is not UTF-8")))
}

unsafe fn emit_instance(built: abf_core::Result<ProblemInstance>, out: *mut *mut AbfInstance) -> AbfStatus {
    if out.is_null() {
        return fail(AbfStatus::NullPointer, "out is null");
    }
    *out = ptr::null_mut();
    match built {
        Ok(inner) => {
            *out = Box::into_raw(Box::new(AbfInstance { inner }));
            AbfStatus::Ok
        }
        Err(e) => fail_with(e),
    }
}

/// Message of the last failed call on this thread, or null. The pointer is
/// valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn abf_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |s| s.as_ptr()))
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn abf_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Random quadratic `½xᵀAx − bᵀx` with spectrum in `[1/cond, 1]`, plus
/// `l1_weight·‖x‖₁` when `l1_weight > 0`.
///
/// # Safety
/// `out` must be a valid pointer to writable storage for one handle.
#[no_mangle]
pub unsafe extern "C" fn abf_instance_quadratic(
    dimension: usize,
    condition_number: f64,
    seed: u64,
    l1_weight: f64,
    out: *mut *mut AbfInstance,
) -> AbfStatus {
    guard(|| {
        let regularizer = if l1_weight == 0.0 {
            Ok(Regularizer::Zero)
        } else {
            Regularizer::l1(l1_weight)
        };
        let built = regularizer.and_then(|regularizer| {
            InstanceDescriptor::Quadratic {
                dimension,
                condition_number,
                seed,
                regularizer,
            }
            .build()
        });
        emit_instance(built, out)
    })
}

/// Random lasso `½‖Mx − b‖² + reg_weight·‖x‖₁` with `M` of size
/// `rows × cols`.
///
/// # Safety
/// `out` must be a valid pointer to writable storage for one handle.
#[no_mangle]
pub unsafe extern "C" fn abf_instance_lasso(
    rows: usize,
    cols: usize,
    reg_weight: f64,
    seed: u64,
    out: *mut *mut AbfInstance,
) -> AbfStatus {
    guard(|| {
        let built = InstanceDescriptor::Lasso {
            rows,
            cols,
            reg_weight,
            seed,
        }
        .build();
        emit_instance(built, out)
    })
}

/// Instance from a JSON document or a short form such as
/// `lasso:rows=20,cols=40,reg=0.5,seed=7`.
///
/// # Safety
/// `text` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn abf_instance_parse(text: *const c_char, out: *mut *mut AbfInstance) -> AbfStatus {
    guard(|| {
        let text = match c_str(text, "text") {
            Ok(t) => t,
            Err(s) => return s,
        };
        let descriptor = if text.trim_start().starts_with('{') {
            match serde_json::from_str::<InstanceDescriptor>(text) {
                Ok(d) => d,
                Err(e) => {
                    return fail(
                        AbfStatus::Config,
                        format!("line {} column {}: {e}", e.line(), e.column()),
                    )
                }
            }
        } else {
            match parse_short_instance(text) {
                Ok(d) => d,
                Err(e) => return fail_with(e),
            }
        };
        emit_instance(descriptor.build(), out)
    })
}

/// # Safety
/// `instance` must be null or a handle from an `abf_instance_*`
/// constructor that has not been freed.
#[no_mangle]
pub unsafe extern "C" fn abf_instance_free(instance: *mut AbfInstance) {
    if !instance.is_null() {
        drop(Box::from_raw(instance));
    }
}

/// Dimension, or 0 for a null handle.
///
/// # Safety
/// `instance` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn abf_instance_dimension(instance: *const AbfInstance) -> usize {
    instance.as_ref().map_or(0, |i| i.inner.dimension())
}

/// Lipschitz constant of `∇f`, or NaN for a null handle.
///
/// # Safety
/// `instance` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn abf_instance_lipschitz(instance: *const AbfInstance) -> f64 {
    instance.as_ref().map_or(f64::NAN, |i| i.inner.lipschitz())
}

/// Strong convexity modulus of `f`, or NaN for a null handle.
///
/// # Safety
/// `instance` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn abf_instance_strong_convexity(instance: *const AbfInstance) -> f64 {
    instance.as_ref().map_or(f64::NAN, |i| i.inner.strong_convexity())
}

unsafe fn vector_arg(instance: &ProblemInstance, x: *const f64, len: usize) -> Result<DVector<f64>, AbfStatus> {
    if x.is_null() {
        return Err(fail(AbfStatus::NullPointer, "x is null"));
    }
    if len != instance.dimension() {
        return Err(fail_with(Error::Dimension {
            expected: instance.dimension(),
            actual: len,
        }));
    }
    Ok(DVector::from_column_slice(std::slice::from_raw_parts(x, len)))
}

/// `F(x) = f(x) + g(x)`; `+inf` outside the domain of `g`.
///
/// # Safety
/// `x` must point to `len` doubles; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn abf_instance_objective(
    instance: *const AbfInstance,
    x: *const f64,
    len: usize,
    out: *mut f64,
) -> AbfStatus {
    guard(|| {
        let (Some(inst), false) = (instance.as_ref(), out.is_null()) else {
            return fail(AbfStatus::NullPointer, "instance or out is null");
        };
        match vector_arg(&inst.inner, x, len) {
            Ok(x) => {
                *out = inst.inner.objective(&x);
                AbfStatus::Ok
            }
            Err(s) => s,
        }
    })
}

/// Reference minimizer and minimum (closed form or a tight proximal-gradient
/// solve).
///
/// # Safety
/// `x_out` must point to `len` writable doubles; `minimum` must be
/// writable.
#[no_mangle]
pub unsafe extern "C" fn abf_instance_reference(
    instance: *const AbfInstance,
    x_out: *mut f64,
    len: usize,
    minimum: *mut f64,
) -> AbfStatus {
    guard(|| {
        let Some(inst) = instance.as_ref() else {
            return fail(AbfStatus::NullPointer, "instance is null");
        };
        if x_out.is_null() || minimum.is_null() {
            return fail(AbfStatus::NullPointer, "output pointer is null");
        }
        if len != inst.inner.dimension() {
            return fail_with(Error::Dimension {
                expected: inst.inner.dimension(),
                actual: len,
            });
        }
        match inst.inner.reference() {
            Ok((x, f)) => {
                std::slice::from_raw_parts_mut(x_out, len).copy_from_slice(x.as_slice());
                *minimum = f;
                AbfStatus::Ok
            }
            Err(e) => fail_with(e),
        }
    })
}

unsafe fn emit_run(instance: *const AbfInstance, config: &RunConfig, out: *mut *mut AbfRun) -> AbfStatus {
    let Some(inst) = instance.as_ref() else {
        return fail(AbfStatus::NullPointer, "instance is null");
    };
    if out.is_null() {
        return fail(AbfStatus::NullPointer, "out is null");
    }
    *out = ptr::null_mut();
    match run(&inst.inner, config) {
        Ok(trajectory) => {
            let status = match &trajectory.divergence {
                Some(e) => fail_with(e.clone()),
                None => AbfStatus::Ok,
            };
            *out = Box::into_raw(Box::new(AbfRun { trajectory }));
            status
        }
        Err(e) => fail_with(e),
    }
}

/// Runs `method` for `iterations` steps with `s = 1/L` and default
/// schedule, recording every iteration.
///
/// Returns `ABF_STATUS_DIVERGED` with a valid handle holding the partial
/// trajectory when an iterate becomes non-finite.
///
/// # Safety
/// `instance` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn abf_run(
    instance: *const AbfInstance,
    method: AbfMethod,
    iterations: usize,
    out: *mut *mut AbfRun,
) -> AbfStatus {
    guard(|| emit_run(instance, &RunConfig::new(method.into(), iterations), out))
}

/// Runs with a JSON run configuration
/// (`{"method", "max_iterations", "step", "schedule", "record_every", "stopping", "start"}`).
///
/// # Safety
/// `config_json` must be a NUL-terminated string; see [`abf_run`].
#[no_mangle]
pub unsafe extern "C" fn abf_run_with_config(
    instance: *const AbfInstance,
    config_json: *const c_char,
    out: *mut *mut AbfRun,
) -> AbfStatus {
    guard(|| {
        let text = match c_str(config_json, "config_json") {
            Ok(t) => t,
            Err(s) => return s,
        };
        match serde_json::from_str::<RunConfig>(text) {
            Ok(config) => emit_run(instance, &config, out),
            Err(e) => fail(
                AbfStatus::Config,
                format!("line {} column {}: {e}", e.line(), e.column()),
            ),
        }
    })
}

/// # Safety
/// `run` must be null or a handle from `abf_run*` that has not been freed.
#[no_mangle]
pub unsafe extern "C" fn abf_run_free(run: *mut AbfRun) {
    if !run.is_null() {
        drop(Box::from_raw(run));
    }
}

/// Number of records, or 0 for a null handle.
///
/// # Safety
/// `run` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn abf_run_record_count(run: *const AbfRun) -> usize {
    run.as_ref().map_or(0, |r| r.trajectory.records.len())
}

/// Whether the run stopped on a non-finite iterate.
///
/// # Safety
/// `run` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn abf_run_diverged(run: *const AbfRun) -> bool {
    run.as_ref().is_some_and(|r| r.trajectory.divergence.is_some())
}

/// Copies record `index` into `out`.
///
/// # Safety
/// `run` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn abf_run_record(run: *const AbfRun, index: usize, out: *mut AbfRecord) -> AbfStatus {
    guard(|| {
        let (Some(r), false) = (run.as_ref(), out.is_null()) else {
            return fail(AbfStatus::NullPointer, "run or out is null");
        };
        let Some(rec) = r.trajectory.records.get(index) else {
            return fail(
                AbfStatus::InvalidArgument,
                format!("record {index} out of range ({} records)", r.trajectory.records.len()),
            );
        };
        let nan = f64::NAN;
        *out = AbfRecord {
            k: rec.k,
            f_gap: rec.f_gap,
            eta: rec.eta.map_or(nan, |c| c.value),
            psi: rec.psi.value,
            energy: rec.energy.map_or(nan, |e| e.value),
            bound: rec.bound.unwrap_or(nan),
            residual_y: rec.residual_y.unwrap_or(nan),
            residual_z: rec.residual_z.unwrap_or(nan),
            grad_drift: rec.grad_drift,
            y_increment: rec.y_increment,
        };
        AbfStatus::Ok
    })
}

/// Copies the final `x` iterate into `out` (`len` must equal the
/// dimension).
///
/// # Safety
/// `out` must point to `len` writable doubles.
#[no_mangle]
pub unsafe extern "C" fn abf_run_final_x(run: *const AbfRun, out: *mut f64, len: usize) -> AbfStatus {
    guard(|| {
        let (Some(r), false) = (run.as_ref(), out.is_null()) else {
            return fail(AbfStatus::NullPointer, "run or out is null");
        };
        let x = &r.trajectory.final_state.x;
        if len != x.len() {
            return fail_with(Error::Dimension {
                expected: x.len(),
                actual: len,
            });
        }
        std::slice::from_raw_parts_mut(out, len).copy_from_slice(x.as_slice());
        AbfStatus::Ok
    })
}

/// Writes the trajectory CSV to `path` (write-then-rename).
///
/// # Safety
/// `path` must be a NUL-terminated string.
#[no_mangle]
pub unsafe extern "C" fn abf_run_write_csv(run: *const AbfRun, path: *const c_char) -> AbfStatus {
    guard(|| {
        let Some(r) = run.as_ref() else {
            return fail(AbfStatus::NullPointer, "run is null");
        };
        let path = match c_str(path, "path") {
            Ok(p) => p,
            Err(s) => return s,
        };
        match write_atomic(Path::new(path), r.trajectory.to_csv().as_bytes()) {
            Ok(()) => AbfStatus::Ok,
            Err(e) => fail(AbfStatus::Io, format!("{path}: {e}")),
        }
    })
}

/// Evaluates every applicable trajectory certificate. Returns
/// `ABF_STATUS_VIOLATION` when any fails; the failing check names are then
/// in [`abf_last_error`]. `failed` (optional) receives the failure count.
///
/// # Safety
/// `run` must be a live handle; `failed` must be null or writable.
#[no_mangle]
pub unsafe extern "C" fn abf_run_verify(run: *const AbfRun, failed: *mut usize) -> AbfStatus {
    guard(|| {
        let Some(r) = run.as_ref() else {
            return fail(AbfStatus::NullPointer, "run is null");
        };
        let report = verify_trajectory(&r.trajectory, &TrendOptions::default());
        let names = report.violations();
        if !failed.is_null() {
            *failed = names.len();
        }
        if names.is_empty() {
            AbfStatus::Ok
        } else {
            fail(AbfStatus::Violation, names.join(", "))
        }
    })
}
