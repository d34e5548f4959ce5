//! C ABI over `bottlenecklab`.
//!
//! Handles are opaque and owned by the caller once returned; release them with
//! the matching `_free`. Every fallible call returns a [`BlStatus`]; on failure
//! `bl_last_error_message` holds the message for the calling thread.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;

use bottlenecklab::bottleneck::{verify_bottleneck_theorem, PartitionSpec};
use bottlenecklab::config::{ExperimentConfig, Subcommand};
use bottlenecklab::markov::{classical_bottleneck_report, glauber_chain, StatePartition};
use bottlenecklab::model::{build_hamiltonian, classical_energies, gibbs_state, registry, CheckFamily, Hamiltonian};
use bottlenecklab::run::{center_ball, run};
use bottlenecklab::sampler::full_sweep;
use bottlenecklab::Error;

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BlStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidUtf8 = 2,
    InvalidArgument = 3,
    ModelNotFound = 4,
    ConfigInvalid = 5,
    /// A hypothesis of the theorem failed (fixed point, partition condition, locality).
    HypothesisViolated = 6,
    /// Requested size exceeds an enumeration or memory cap.
    TooLarge = 7,
    Numerical = 8,
    Io = 9,
    /// Run finished but some assertion failed; artifacts were written.
    AssertionFailed = 10,
    Panic = 11,
    Other = 12,
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

fn status_of(e: &Error) -> BlStatus {
    match e {
        Error::ModelNotFound(_) => BlStatus::ModelNotFound,
        Error::ConfigInvalid(_) | Error::Parse(_) => BlStatus::ConfigInvalid,
        Error::NotFixedPoint(_) | Error::ConditionViolated(_) | Error::LocalityInsufficient { .. } | Error::MixedFixedPoints { .. } => BlStatus::HypothesisViolated,
        Error::GroupTooLarge(_) | Error::EnumerationTooLarge { .. } | Error::SuperoperatorTooLarge(_) => BlStatus::TooLarge,
        Error::NotConverged(_) | Error::NotHermitian(_) | Error::InvalidDensity(_) | Error::ZeroDelta => BlStatus::Numerical,
        Error::Io(_) => BlStatus::Io,
        Error::AssertionFailed(_) => BlStatus::AssertionFailed,
        Error::BetaNegative(_) | Error::RadiusExceedsN { .. } | Error::EmptyA(_) | Error::InvalidPartition(_) | Error::NotClassical | Error::NotDiagonal => BlStatus::InvalidArgument,
        _ => BlStatus::Other,
    }
}

fn guard(f: impl FnOnce() -> Result<(), BlStatus>) -> BlStatus {
    clear_error();
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => BlStatus::Ok,
        Ok(Err(s)) => s,
        Err(p) => {
            let msg = p.downcast_ref::<&str>().map(|s| s.to_string()).or_else(|| p.downcast_ref::<String>().cloned()).unwrap_or_else(|| "panic".into());
            set_error(format!("panic: {msg}"));
            BlStatus::Panic
        }
    }
}

fn fail(e: Error) -> BlStatus {
    set_error(format!("[{}] {e}", e.code()));
    status_of(&e)
}

fn null(what: &str) -> BlStatus {
    set_error(format!("{what} is null"));
    BlStatus::NullPointer
}

unsafe fn read_str<'a>(p: *const c_char, what: &str) -> Result<&'a str, BlStatus> {
    if p.is_null() {
        return Err(null(what));
    }
    CStr::from_ptr(p).to_str().map_err(|_| {
        set_error(format!("{what} is not valid UTF-8"));
        BlStatus::InvalidUtf8
    })
}

/// A registry model with its Hamiltonian.
pub struct BlModel {
    family: CheckFamily,
    hamiltonian: Hamiltonian,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, Default)]
pub struct BlBottleneckResult {
    pub delta: f64,
    pub numerator: f64,
    pub denominator: f64,
    pub lhs: f64,
    pub bound: f64,
    pub condition_residual: f64,
    pub tmix_lower: f64,
    /// Partition radius used.
    pub r: u32,
    pub holds: bool,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, Default)]
pub struct BlClassicalResult {
    pub lhs: f64,
    pub bound: f64,
    pub pi_a: f64,
    pub pi_b: f64,
    pub pi_c: f64,
    pub condition_residual: f64,
    pub holds: bool,
}

/// Message of the last failure on this thread, or NULL. Valid until the next
/// call into this library from the same thread.
#[no_mangle]
pub extern "C" fn bl_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(std::ptr::null(), |c| c.as_ptr()))
}

/// Static version string.
#[no_mangle]
pub extern "C" fn bl_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Builds a model from a registry name such as `"ising_ring(6)"` or `"steane7"`.
///
/// # Safety
/// `name` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn bl_model_new(name: *const c_char, out: *mut *mut BlModel) -> BlStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        *out = std::ptr::null_mut();
        let name = read_str(name, "name")?;
        let family = registry(name).map_err(fail)?;
        let hamiltonian = build_hamiltonian(&family).map_err(fail)?;
        *out = Box::into_raw(Box::new(BlModel { family, hamiltonian }));
        Ok(())
    })
}

/// # Safety
/// `model` must come from `bl_model_new` and not be freed twice. NULL is ignored.
#[no_mangle]
pub unsafe extern "C" fn bl_model_free(model: *mut BlModel) {
    if !model.is_null() {
        drop(Box::from_raw(model));
    }
}

/// Number of qubits, or 0 for NULL.
///
/// # Safety
/// `model` must be NULL or a live handle.
#[no_mangle]
pub unsafe extern "C" fn bl_model_num_qubits(model: *const BlModel) -> u32 {
    model.as_ref().map_or(0, |m| m.family.n as u32)
}

/// Local bottleneck check for the Metropolis sweep at inverse temperature
/// `beta`, with A the Pauli ball of radius `inner` around the reference
/// eigenstate. `radius < 0` uses the sweep's locality.
///
/// # Safety
/// `model` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn bl_verify_local(model: *const BlModel, beta: f64, inner: u32, radius: i32, out: *mut BlBottleneckResult) -> BlStatus {
    guard(|| {
        let m = model.as_ref().ok_or_else(|| null("model"))?;
        if out.is_null() {
            return Err(null("out"));
        }
        let sweep = full_sweep(&m.hamiltonian, beta, bottlenecklab::sampler::DEFAULT_ATTEMPT_PROB).map_err(fail)?;
        let g = gibbs_state(&m.hamiltonian, beta).map_err(fail)?;
        let v = center_ball(&m.family, inner as usize).map_err(fail)?;
        let r = usize::try_from(radius).ok();
        let rep = verify_bottleneck_theorem(&sweep, &g.rho, PartitionSpec::Local { v: &v, r }).map_err(fail)?;
        *out = BlBottleneckResult {
            delta: rep.delta,
            numerator: rep.numerator,
            denominator: rep.denominator,
            lhs: rep.lhs,
            bound: rep.bound,
            condition_residual: rep.condition_residual,
            tmix_lower: rep.tmix_lower,
            r: rep.r.unwrap_or(0) as u32,
            holds: rep.holds,
        };
        Ok(())
    })
}

/// Classical check for lazy Glauber dynamics on a classical model, with A the
/// Hamming ball of radius `inner` around all-zeros and single-flip shells.
///
/// # Safety
/// `model` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn bl_verify_classical(model: *const BlModel, beta: f64, laziness: f64, inner: u32, out: *mut BlClassicalResult) -> BlStatus {
    guard(|| {
        let m = model.as_ref().ok_or_else(|| null("model"))?;
        if out.is_null() {
            return Err(null("out"));
        }
        let e = classical_energies(&m.family).map_err(fail)?;
        let chain = glauber_chain(&e, beta, laziness).map_err(fail)?;
        let part = StatePartition::hamming(m.family.n, 0, inner as usize, 1).map_err(fail)?;
        let rep = classical_bottleneck_report(&chain, &part).map_err(fail)?;
        *out = BlClassicalResult {
            lhs: rep.lhs,
            bound: rep.bound,
            pi_a: rep.pi_a,
            pi_b: rep.pi_b,
            pi_c: rep.pi_c,
            condition_residual: rep.condition_residual,
            holds: rep.holds,
        };
        Ok(())
    })
}

/// Runs a subcommand (`"verify-quantum"`, `"stability-sweep"`, ...) from a
/// JSON config and writes artifacts to `out_dir`. `jobs == 0` picks the
/// default worker count. Returns `AssertionFailed` when the run completed
/// with violations.
///
/// # Safety
/// All string arguments must be NUL-terminated.
#[no_mangle]
pub unsafe extern "C" fn bl_run(subcommand: *const c_char, config_json: *const c_char, out_dir: *const c_char, jobs: u32) -> BlStatus {
    guard(|| {
        let sub = read_str(subcommand, "subcommand")?;
        let cmd: Subcommand = serde_json::from_value(serde_json::Value::String(sub.to_string())).map_err(|_| {
            set_error(format!("unknown subcommand {sub:?}"));
            BlStatus::InvalidArgument
        })?;
        let cfg = ExperimentConfig::from_json(read_str(config_json, "config_json")?).map_err(fail)?;
        let out = Path::new(read_str(out_dir, "out_dir")?);
        let jobs = if jobs == 0 { cfg.jobs.unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get())) } else { jobs as usize };
        let res = run(cmd, &cfg, out, jobs).map_err(fail)?;
        if let Some(f) = res.failures.first() {
            set_error(format!("{} failure(s); first: {} on {} ({})", res.failures.len(), f.invariant, f.instance, f.detail));
            return Err(BlStatus::AssertionFailed);
        }
        Ok(())
    })
}
