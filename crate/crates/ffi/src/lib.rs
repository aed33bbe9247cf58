//! C ABI over `emo-core`.
//!
//! Problems and results are opaque handles owned by the caller and released
//! with `emo_problem_free` / `emo_result_free`. Every fallible function
//! returns an [`EmoStatus`]; on failure, `emo_last_error_message` describes
//! the most recent error raised on the calling thread.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use emo_core::builtin::Builtin;
use emo_core::config::{Experiment, ExperimentConfig};
use emo_core::{integrate, kkt_residual, Algorithm, EmoError, KktReport, Trajectory};

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EmoStatus {
    Ok = 0,
    /// The run finished without meeting the stop rule. The result handle
    /// is still produced.
    NotConverged = 1,
    NullPointer = 2,
    InvalidArgument = 3,
    InvalidProblem = 4,
    /// Non-finite state or integrator fault.
    Numerical = 5,
    BufferTooSmall = 6,
    Panic = 7,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EmoAlgorithm {
    Dpofa = 0,
    Ddfa = 1,
}

impl From<EmoAlgorithm> for Algorithm {
    fn from(a: EmoAlgorithm) -> Self {
        match a {
            EmoAlgorithm::Dpofa => Algorithm::Dpofa,
            EmoAlgorithm::Ddfa => Algorithm::Ddfa,
        }
    }
}

/// Integration settings. Non-positive `h`, `t_end` or `tol`, and a zero
/// `dwell`, keep the problem's configured value.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EmoSolveOptions {
    pub h: f64,
    pub t_end: f64,
    pub tol: f64,
    pub dwell: usize,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct EmoKkt {
    pub stationarity: f64,
    pub feasibility: f64,
    pub consensus: f64,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct EmoRunInfo {
    pub converged: bool,
    pub steps: usize,
    pub final_time: f64,
    pub h_final: f64,
    pub dim: usize,
    pub multipliers: usize,
}

/// Opaque problem handle.
pub struct EmoProblemHandle {
    experiment: Experiment,
}

/// Opaque result handle.
pub struct EmoResultHandle {
    trajectory: Trajectory,
    kkt: KktReport,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_error(msg: impl ToString) {
    let msg = msg.to_string().replace('\0', " ");
    LAST_ERROR.with(|e| *e.borrow_mut() = CString::new(msg).unwrap_or_default());
}

fn status_of(e: &EmoError) -> EmoStatus {
    match e {
        EmoError::NonFinite { .. } => EmoStatus::Numerical,
        EmoError::Precondition(msg) if msg.starts_with("integrator fault") => EmoStatus::Numerical,
        EmoError::Precondition(_) | EmoError::Config(_) => EmoStatus::InvalidArgument,
        _ => EmoStatus::InvalidProblem,
    }
}

fn fail(e: EmoError) -> EmoStatus {
    let status = status_of(&e);
    set_error(e);
    status
}

fn guarded(f: impl FnOnce() -> EmoStatus) -> EmoStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(s) => s,
        Err(_) => {
            set_error("internal panic");
            EmoStatus::Panic
        }
    }
}

unsafe fn str_arg<'a>(p: *const c_char) -> Result<&'a str, EmoStatus> {
    if p.is_null() {
        set_error("null string argument");
        return Err(EmoStatus::NullPointer);
    }
    CStr::from_ptr(p).to_str().map_err(|_| {
        set_error("string argument is not valid UTF-8");
        EmoStatus::InvalidArgument
    })
}

fn publish(config: ExperimentConfig, out: *mut *mut EmoProblemHandle) -> EmoStatus {
    match config.resolve() {
        Ok(experiment) => {
            let handle = Box::new(EmoProblemHandle { experiment });
            // SAFETY: checked non-null by the caller of `publish`.
            unsafe { *out = Box::into_raw(handle) };
            EmoStatus::Ok
        }
        Err(e) => fail(e),
    }
}

/// Message for the last failing call on this thread. Valid until the next
/// failing call on the same thread; empty when nothing failed yet.
#[no_mangle]
pub extern "C" fn emo_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

#[no_mangle]
pub extern "C" fn emo_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

#[no_mangle]
pub extern "C" fn emo_default_options() -> EmoSolveOptions {
    EmoSolveOptions {
        h: 0.0,
        t_end: 0.0,
        tol: 0.0,
        dwell: 0,
    }
}

/// Loads `nonsmooth10`, `netflow6x12` or `minnorm` (`seed` only affects
/// `minnorm`).
///
/// # Safety
/// `name` must be a NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn emo_problem_builtin(
    name: *const c_char,
    seed: u64,
    out: *mut *mut EmoProblemHandle,
) -> EmoStatus {
    guarded(|| {
        if out.is_null() {
            set_error("null output pointer");
            return EmoStatus::NullPointer;
        }
        *out = ptr::null_mut();
        let name = match str_arg(name) {
            Ok(s) => s,
            Err(s) => return s,
        };
        let builtin: Builtin = match name.parse() {
            Ok(b) => b,
            Err(e) => return fail(e),
        };
        let mut config = ExperimentConfig::builtin(builtin);
        config.run.seed = Some(seed);
        publish(config, out)
    })
}

/// Builds a problem from TOML experiment text (the format read by
/// `emo run --config`).
///
/// # Safety
/// `toml` must be a NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn emo_problem_from_config(toml: *const c_char, out: *mut *mut EmoProblemHandle) -> EmoStatus {
    guarded(|| {
        if out.is_null() {
            set_error("null output pointer");
            return EmoStatus::NullPointer;
        }
        *out = ptr::null_mut();
        let text = match str_arg(toml) {
            Ok(s) => s,
            Err(s) => return s,
        };
        match ExperimentConfig::from_toml(text) {
            Ok(config) => publish(config, out),
            Err(e) => fail(e),
        }
    })
}

/// # Safety
/// `problem` must come from `emo_problem_*` and not have been freed; null
/// is accepted.
#[no_mangle]
pub unsafe extern "C" fn emo_problem_free(problem: *mut EmoProblemHandle) {
    if !problem.is_null() {
        drop(Box::from_raw(problem));
    }
}

/// Agents, coupling rows and total decision dimension.
///
/// # Safety
/// `problem` must be a live handle; output pointers may be null.
#[no_mangle]
pub unsafe extern "C" fn emo_problem_dims(
    problem: *const EmoProblemHandle,
    n: *mut usize,
    m: *mut usize,
    dim: *mut usize,
) -> EmoStatus {
    guarded(|| {
        let Some(p) = problem.as_ref() else {
            set_error("null problem handle");
            return EmoStatus::NullPointer;
        };
        let prob = &p.experiment.problem;
        for (ptr, v) in [(n, prob.n()), (m, prob.m()), (dim, prob.total_dim())] {
            if !ptr.is_null() {
                *ptr = v;
            }
        }
        EmoStatus::Ok
    })
}

/// Integrates one algorithm from the default initial state. Returns
/// `EMO_STATUS_OK` when the stop rule fired and `EMO_STATUS_NOT_CONVERGED`
/// when `t_end` was reached first; both produce a result handle.
///
/// # Safety
/// `problem` must be a live handle, `options` null or valid, `out` valid.
#[no_mangle]
pub unsafe extern "C" fn emo_solve(
    problem: *const EmoProblemHandle,
    algorithm: EmoAlgorithm,
    options: *const EmoSolveOptions,
    out: *mut *mut EmoResultHandle,
) -> EmoStatus {
    guarded(|| {
        if out.is_null() {
            set_error("null output pointer");
            return EmoStatus::NullPointer;
        }
        *out = ptr::null_mut();
        let Some(p) = problem.as_ref() else {
            set_error("null problem handle");
            return EmoStatus::NullPointer;
        };
        let exp = &p.experiment;
        let mut opts = exp.options;
        if let Some(o) = options.as_ref() {
            if o.h > 0.0 {
                opts.h = o.h;
            }
            if o.t_end > 0.0 {
                opts.t_end = o.t_end;
            }
            let mut stop = opts.stop.unwrap_or_default();
            if o.tol > 0.0 {
                stop.tol = o.tol;
            }
            if o.dwell > 0 {
                stop.dwell = o.dwell;
            }
            opts.stop = Some(stop);
        }
        let alg = Algorithm::from(algorithm);
        let result = exp
            .initial_state(alg)
            .and_then(|init| integrate(&exp.problem, &exp.graph, alg, init, &opts))
            .and_then(|trajectory| {
                let kkt = kkt_residual(&exp.problem, &exp.graph, &trajectory.final_x, &trajectory.final_state.lambda)?;
                Ok(EmoResultHandle { trajectory, kkt })
            });
        match result {
            Ok(r) => {
                let converged = r.trajectory.converged;
                *out = Box::into_raw(Box::new(r));
                if converged {
                    EmoStatus::Ok
                } else {
                    set_error("stop rule not met before t_end");
                    EmoStatus::NotConverged
                }
            }
            Err(e) => fail(e),
        }
    })
}

/// # Safety
/// `result` must come from `emo_solve` and not have been freed; null is
/// accepted.
#[no_mangle]
pub unsafe extern "C" fn emo_result_free(result: *mut EmoResultHandle) {
    if !result.is_null() {
        drop(Box::from_raw(result));
    }
}

/// Copies the final decision vector into `buf`. `*written` receives the
/// vector length; a `len` shorter than that yields
/// `EMO_STATUS_BUFFER_TOO_SMALL` and copies nothing.
///
/// # Safety
/// `result` must be a live handle and `buf` valid for `len` doubles
/// (null is allowed when `len` is 0).
#[no_mangle]
pub unsafe extern "C" fn emo_result_x(
    result: *const EmoResultHandle,
    buf: *mut f64,
    len: usize,
    written: *mut usize,
) -> EmoStatus {
    guarded(|| {
        let Some(r) = result.as_ref() else {
            set_error("null result handle");
            return EmoStatus::NullPointer;
        };
        let x = r.trajectory.final_x.as_slice();
        if !written.is_null() {
            *written = x.len();
        }
        if len < x.len() {
            set_error(format!("buffer holds {len} values, {} needed", x.len()));
            return EmoStatus::BufferTooSmall;
        }
        if buf.is_null() {
            set_error("null buffer");
            return EmoStatus::NullPointer;
        }
        ptr::copy_nonoverlapping(x.as_ptr(), buf, x.len());
        EmoStatus::Ok
    })
}

/// # Safety
/// `result` must be a live handle and `out` valid.
#[no_mangle]
pub unsafe extern "C" fn emo_result_kkt(result: *const EmoResultHandle, out: *mut EmoKkt) -> EmoStatus {
    guarded(|| {
        let (Some(r), false) = (result.as_ref(), out.is_null()) else {
            set_error("null argument");
            return EmoStatus::NullPointer;
        };
        *out = EmoKkt {
            stationarity: r.kkt.stationarity,
            feasibility: r.kkt.feasibility,
            consensus: r.kkt.consensus,
        };
        EmoStatus::Ok
    })
}

/// # Safety
/// `result` must be a live handle and `out` valid.
#[no_mangle]
pub unsafe extern "C" fn emo_result_info(result: *const EmoResultHandle, out: *mut EmoRunInfo) -> EmoStatus {
    guarded(|| {
        let (Some(r), false) = (result.as_ref(), out.is_null()) else {
            set_error("null argument");
            return EmoStatus::NullPointer;
        };
        let t = &r.trajectory;
        *out = EmoRunInfo {
            converged: t.converged,
            steps: t.steps,
            final_time: t.final_state.t,
            h_final: t.h_final,
            dim: t.final_x.len(),
            multipliers: t.final_state.lambda.len(),
        };
        EmoStatus::Ok
    })
}
