//! C ABI over the engage solver and simulator.
//!
//! Every function returns an [`EngageStatus`]; on failure the message is
//! available from [`engage_last_error`] on the same thread. Handles are
//! opaque and must be released with their `_free` function.

use engage::cli::{parse_policy, solve, PolicySpec};
use engage::config::{parse_config, parse_config_str, ConfigFile, RunConfig};
use engage::fixtures::base_case;
use engage::simulator::{run_experiment, solve_policy, Policy};
use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EngageStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidUtf8 = 2,
    Config = 3,
    Solver = 4,
    Simulation = 5,
    BufferTooSmall = 6,
    Panic = 7,
}

/// Parsed and validated run configuration.
pub struct EngageConfig {
    inner: RunConfig,
}

/// Solved thresholds in marginal-cost order.
pub struct EngageSolution {
    beta_star: f64,
    tau: Vec<f64>,
    queue_thresholds: Vec<f64>,
    /// 0-based configuration index of the activity at each rank.
    order: Vec<usize>,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: impl Into<String>) {
    let s = msg.into().replace('\0', " ");
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(CString::new(s).expect("interior NULs removed")));
}

fn guard(f: impl FnOnce() -> Result<(), (EngageStatus, String)>) -> EngageStatus {
    LAST_ERROR.with(|e| *e.borrow_mut() = None);
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => EngageStatus::Ok,
        Ok(Err((status, msg))) => {
            set_error(msg);
            status
        }
        Err(_) => {
            set_error("internal panic");
            EngageStatus::Panic
        }
    }
}

unsafe fn str_arg<'a>(p: *const c_char, what: &str) -> Result<&'a str, (EngageStatus, String)> {
    if p.is_null() {
        return Err((EngageStatus::NullPointer, format!("{what} is null")));
    }
    CStr::from_ptr(p).to_str().map_err(|_| (EngageStatus::InvalidUtf8, format!("{what} is not UTF-8")))
}

unsafe fn ref_arg<'a, T>(p: *const T, what: &str) -> Result<&'a T, (EngageStatus, String)> {
    p.as_ref().ok_or_else(|| (EngageStatus::NullPointer, format!("{what} is null")))
}

fn out_arg<T>(p: *mut T, what: &str) -> Result<(), (EngageStatus, String)> {
    if p.is_null() {
        Err((EngageStatus::NullPointer, format!("{what} is null")))
    } else {
        Ok(())
    }
}

/// Message of the last failed call on this thread, or NULL. Valid until the
/// next call into this library on the same thread.
#[no_mangle]
pub extern "C" fn engage_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(std::ptr::null(), |s| s.as_ptr()))
}

/// Loads a TOML configuration file.
///
/// # Safety
/// `path` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn engage_config_from_file(path: *const c_char, out: *mut *mut EngageConfig) -> EngageStatus {
    guard(|| {
        out_arg(out, "out")?;
        let path = str_arg(path, "path")?;
        let rc = parse_config(Path::new(path)).map_err(|e| (EngageStatus::Config, e.to_string()))?;
        *out = Box::into_raw(Box::new(EngageConfig { inner: rc }));
        Ok(())
    })
}

/// Parses TOML configuration text.
///
/// # Safety
/// `text` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn engage_config_from_str(text: *const c_char, out: *mut *mut EngageConfig) -> EngageStatus {
    guard(|| {
        out_arg(out, "out")?;
        let text = str_arg(text, "text")?;
        let rc = parse_config_str(text, "<string>").map_err(|e| (EngageStatus::Config, e.to_string()))?;
        *out = Box::into_raw(Box::new(EngageConfig { inner: rc }));
        Ok(())
    })
}

/// The built-in food-bank base case.
///
/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn engage_config_base_case(out: *mut *mut EngageConfig) -> EngageStatus {
    guard(|| {
        out_arg(out, "out")?;
        let text = ConfigFile::from_params(&base_case()).to_toml();
        let rc = parse_config_str(&text, "<base case>").map_err(|e| (EngageStatus::Config, e.to_string()))?;
        *out = Box::into_raw(Box::new(EngageConfig { inner: rc }));
        Ok(())
    })
}

/// # Safety
/// `cfg` must come from an `engage_config_*` constructor and not be used
/// afterwards. NULL is ignored.
#[no_mangle]
pub unsafe extern "C" fn engage_config_free(cfg: *mut EngageConfig) {
    if !cfg.is_null() {
        drop(Box::from_raw(cfg));
    }
}

/// Number of engagement activities.
///
/// # Safety
/// `cfg` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn engage_config_activity_count(cfg: *const EngageConfig, out: *mut usize) -> EngageStatus {
    guard(|| {
        out_arg(out, "out")?;
        *out = ref_arg(cfg, "cfg")?.inner.params.activities.len();
        Ok(())
    })
}

/// Overrides the number of simulation replications.
///
/// # Safety
/// `cfg` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn engage_config_set_replications(cfg: *mut EngageConfig, replications: u32) -> EngageStatus {
    guard(|| {
        let cfg = cfg.as_mut().ok_or((EngageStatus::NullPointer, "cfg is null".to_string()))?;
        if replications == 0 {
            return Err((EngageStatus::Config, "replications must be positive".into()));
        }
        cfg.inner.sim.replications = replications;
        Ok(())
    })
}

/// Solves for β* and the nested thresholds.
///
/// # Safety
/// `cfg` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn engage_solve(cfg: *const EngageConfig, out: *mut *mut EngageSolution) -> EngageStatus {
    guard(|| {
        out_arg(out, "out")?;
        let rc = &ref_arg(cfg, "cfg")?.inner;
        let s = solve(rc).map_err(|e| (EngageStatus::Solver, e.to_string()))?;
        *out = Box::into_raw(Box::new(EngageSolution {
            beta_star: s.solution.beta_star,
            tau: s.solution.tau.clone(),
            queue_thresholds: s.queue_thresholds,
            order: s.ladder.order.clone(),
        }));
        Ok(())
    })
}

/// # Safety
/// `sol` must come from [`engage_solve`] and not be used afterwards. NULL is
/// ignored.
#[no_mangle]
pub unsafe extern "C" fn engage_solution_free(sol: *mut EngageSolution) {
    if !sol.is_null() {
        drop(Box::from_raw(sol));
    }
}

/// # Safety
/// `sol` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn engage_solution_beta_star(sol: *const EngageSolution, out: *mut f64) -> EngageStatus {
    guard(|| {
        out_arg(out, "out")?;
        *out = ref_arg(sol, "sol")?.beta_star;
        Ok(())
    })
}

/// Copies workload thresholds τ, queue thresholds q* and the configuration
/// index of each ranked activity into caller buffers of length `capacity`.
/// Any buffer may be NULL to skip it. `len` receives the number of
/// thresholds; if it exceeds `capacity` nothing is copied and
/// `ENGAGE_STATUS_BUFFER_TOO_SMALL` is returned.
///
/// # Safety
/// Non-null buffers must hold `capacity` elements; `len` must be writable.
#[no_mangle]
pub unsafe extern "C" fn engage_solution_thresholds(
    sol: *const EngageSolution,
    tau: *mut f64,
    queue: *mut f64,
    activity: *mut usize,
    capacity: usize,
    len: *mut usize,
) -> EngageStatus {
    guard(|| {
        out_arg(len, "len")?;
        let sol = ref_arg(sol, "sol")?;
        let n = sol.tau.len();
        *len = n;
        if n > capacity {
            return Err((EngageStatus::BufferTooSmall, format!("need {n} elements, got {capacity}")));
        }
        if !tau.is_null() {
            std::ptr::copy_nonoverlapping(sol.tau.as_ptr(), tau, n);
        }
        if !queue.is_null() {
            std::ptr::copy_nonoverlapping(sol.queue_thresholds.as_ptr(), queue, n);
        }
        if !activity.is_null() {
            std::ptr::copy_nonoverlapping(sol.order.as_ptr(), activity, n);
        }
        Ok(())
    })
}

/// Simulates one policy (`static:1,2,3`, `static:` or `dynamic`) and
/// reports the mean annual total cost and its 95% half-width.
///
/// # Safety
/// `cfg` must be a live handle, `policy` NUL-terminated, outputs writable.
#[no_mangle]
pub unsafe extern "C" fn engage_simulate_total_cost(cfg: *const EngageConfig, policy: *const c_char, mean: *mut f64, half_width: *mut f64) -> EngageStatus {
    guard(|| {
        out_arg(mean, "mean")?;
        out_arg(half_width, "half_width")?;
        let rc = &ref_arg(cfg, "cfg")?.inner;
        let spec = str_arg(policy, "policy")?;
        let policy = match parse_policy(spec, rc.params.activities.len()).map_err(|e| (EngageStatus::Config, e))? {
            PolicySpec::Static(s) => Policy::Static(s),
            PolicySpec::Dynamic => solve_policy(&rc.params, None, &rc.solver).map_err(|e| (EngageStatus::Solver, e.to_string()))?.policy,
        };
        let rep = run_experiment(&rc.sim, &[policy]).map_err(|e| (EngageStatus::Simulation, e.to_string()))?;
        *mean = rep.policies[0].total_cost.mean;
        *half_width = rep.policies[0].total_cost.half_width;
        Ok(())
    })
}

/// Library version, NUL-terminated and static.
#[no_mangle]
pub extern "C" fn engage_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}
