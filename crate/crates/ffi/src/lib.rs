//! C ABI for the planner library.
//!
//! Every function returns an [`LgStatus`]. On failure the message is kept per
//! thread and can be read with [`lg_last_error`]. Handles are opaque and
//! owned by the caller, who releases them with the matching `*_free`.
//! Points are passed as `double[2]`.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::PathBuf;
use std::ptr;

use lyagraph::config::RunConfig;
use lyagraph::dynamics::{observation, SystemConfig, Vec2};
use lyagraph::executor::{RunStatus, Trajectory};
use lyagraph::nodes::NodeController;
use lyagraph::run::{run_gpc, run_tpc, LoadedRun};
use lyagraph::Error;

/// Result codes. The planner codes match the CLI exit codes.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LgStatus {
    Ok = 0,
    NullPointer = 1,
    Validation = 2,
    Coverage = 3,
    Execution = 4,
    Io = 5,
    OutOfRange = 6,
    Internal = 7,
}

/// Final status of an executed trajectory.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LgRunStatus {
    Reached = 0,
    Timeout = 1,
    ObstacleHit = 2,
}

impl From<RunStatus> for LgRunStatus {
    fn from(s: RunStatus) -> Self {
        match s {
            RunStatus::Reached => LgRunStatus::Reached,
            RunStatus::Timeout => LgRunStatus::Timeout,
            RunStatus::ObstacleHit => LgRunStatus::ObstacleHit,
        }
    }
}

/// Plant model.
pub struct LgSystem(SystemConfig);

/// One trained node controller loaded from its directory.
pub struct LgNode(NodeController);

/// A tree or graph run directory with its node controllers.
pub struct LgRun(LoadedRun);

/// Executed closed-loop trajectory.
pub struct LgTrajectory(Trajectory);

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn status_of(err: &Error) -> LgStatus {
    match err {
        Error::Config(_) | Error::Parse { .. } | Error::Budget { .. } | Error::OutsideRegion(..) | Error::Shape { .. } => {
            LgStatus::Validation
        }
        Error::TreeCoverage { .. } | Error::GraphCoverage { .. } | Error::Uncovered(..) | Error::GoalRejected(..) => {
            LgStatus::Coverage
        }
        Error::NoPath { .. } => LgStatus::Execution,
        Error::Io { .. } | Error::Json { .. } => LgStatus::Io,
        Error::UnknownNode(_) => LgStatus::OutOfRange,
        _ => LgStatus::Internal,
    }
}

struct Fail(LgStatus, String);

impl From<Error> for Fail {
    fn from(e: Error) -> Self {
        Fail(status_of(&e), e.to_string())
    }
}

fn null(what: &str) -> Fail {
    Fail(LgStatus::NullPointer, format!("{what} is null"))
}

/// Runs `f`, recording its error message and turning panics into `Internal`.
fn guard(f: impl FnOnce() -> Result<(), Fail>) -> LgStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => LgStatus::Ok,
        Ok(Err(Fail(status, msg))) => {
            set_error(msg);
            status
        }
        Err(payload) => {
            let msg = payload
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| payload.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_else(|| "panic".into());
            set_error(format!("internal panic: {msg}"));
            LgStatus::Internal
        }
    }
}

unsafe fn handle<'a, T>(p: *const T, what: &str) -> Result<&'a T, Fail> {
    p.as_ref().ok_or_else(|| null(what))
}

unsafe fn point(p: *const f64, what: &str) -> Result<Vec2, Fail> {
    if p.is_null() {
        return Err(null(what));
    }
    Ok([*p, *p.add(1)])
}

unsafe fn write_point(p: *mut f64, v: Vec2) -> Result<(), Fail> {
    if p.is_null() {
        return Err(null("output point"));
    }
    *p = v[0];
    *p.add(1) = v[1];
    Ok(())
}

unsafe fn write_out<T>(out: *mut *mut T, value: T) -> Result<(), Fail> {
    if out.is_null() {
        return Err(null("output handle"));
    }
    *out = Box::into_raw(Box::new(value));
    Ok(())
}

unsafe fn text(p: *const c_char, what: &str) -> Result<String, Fail> {
    if p.is_null() {
        return Err(null(what));
    }
    CStr::from_ptr(p)
        .to_str()
        .map(str::to_owned)
        .map_err(|_| Fail(LgStatus::Validation, format!("{what} is not UTF-8")))
}

/// Message of the last failed call on this thread, or null. The pointer stays
/// valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn lg_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn lg_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

// ---- system ----

/// Default benchmark plant.
///
/// # Safety
/// `out` must be a valid pointer to write a handle to.
#[no_mangle]
pub unsafe extern "C" fn lg_system_new_default(out: *mut *mut LgSystem) -> LgStatus {
    guard(|| write_out(out, LgSystem(SystemConfig::default())))
}

/// Plant from the `[system]` table of a TOML run configuration.
///
/// # Safety
/// `config_toml` must be a NUL-terminated string and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn lg_system_from_toml(config_toml: *const c_char, out: *mut *mut LgSystem) -> LgStatus {
    guard(|| {
        let cfg = RunConfig::from_toml_str(&text(config_toml, "config")?)?;
        cfg.system.validate()?;
        write_out(out, LgSystem(cfg.system))
    })
}

/// # Safety
/// `sys` must come from an `lg_system_*` constructor and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn lg_system_free(sys: *mut LgSystem) {
    if !sys.is_null() {
        drop(Box::from_raw(sys));
    }
}

/// Drift `∇h(x)`.
///
/// # Safety
/// `x` and `out` must each point to two doubles.
#[no_mangle]
pub unsafe extern "C" fn lg_system_vector_field(sys: *const LgSystem, x: *const f64, out: *mut f64) -> LgStatus {
    guard(|| {
        let sys = handle(sys, "system")?;
        write_point(out, sys.0.vector_field(point(x, "state")?))
    })
}

/// One integration step from `x` under control `u` (saturated first).
///
/// # Safety
/// `x`, `u` and `out` must each point to two doubles.
#[no_mangle]
pub unsafe extern "C" fn lg_system_step(sys: *const LgSystem, x: *const f64, u: *const f64, out: *mut f64) -> LgStatus {
    guard(|| {
        let sys = handle(sys, "system")?;
        let (next, _) = sys.0.advance(point(x, "state")?, point(u, "control")?)?;
        write_point(out, next)
    })
}

// ---- node ----

/// Loads a node directory holding `policy.json`, `lyapunov.json` and `meta.json`.
///
/// # Safety
/// `dir` must be a NUL-terminated path and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn lg_node_load(dir: *const c_char, out: *mut *mut LgNode) -> LgStatus {
    guard(|| {
        let node = NodeController::load(&PathBuf::from(text(dir, "directory")?))?;
        write_out(out, LgNode(node))
    })
}

/// # Safety
/// `node` must come from [`lg_node_load`] and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn lg_node_free(node: *mut LgNode) {
    if !node.is_null() {
        drop(Box::from_raw(node));
    }
}

/// Center and certified radius.
///
/// # Safety
/// `center` must point to two doubles, `eta` to one.
#[no_mangle]
pub unsafe extern "C" fn lg_node_region(node: *const LgNode, center: *mut f64, eta: *mut f64) -> LgStatus {
    guard(|| {
        let node = handle(node, "node")?;
        if eta.is_null() {
            return Err(null("eta"));
        }
        write_point(center, node.0.center)?;
        *eta = node.0.eta;
        Ok(())
    })
}

/// Deterministic control at `x` before saturation.
///
/// # Safety
/// `x` and `u` must each point to two doubles.
#[no_mangle]
pub unsafe extern "C" fn lg_node_action(
    node: *const LgNode,
    sys: *const LgSystem,
    x: *const f64,
    u: *mut f64,
) -> LgStatus {
    guard(|| {
        let node = handle(node, "node")?;
        let sys = handle(sys, "system")?;
        let obs = observation(&sys.0.state_bounds, point(x, "state")?, node.0.center);
        let a = node.0.policy.mean_action(&obs)?;
        write_point(u, [a[0], a[1]])
    })
}

/// Lyapunov value `V(x)`.
///
/// # Safety
/// `x` must point to two doubles and `value` to one.
#[no_mangle]
pub unsafe extern "C" fn lg_node_lyapunov(node: *const LgNode, x: *const f64, value: *mut f64) -> LgStatus {
    guard(|| {
        let node = handle(node, "node")?;
        if value.is_null() {
            return Err(null("value"));
        }
        *value = node.0.lyapunov.value(point(x, "state")?)?;
        Ok(())
    })
}

// ---- runs ----

/// Loads a tree or graph run directory.
///
/// # Safety
/// `dir` must be a NUL-terminated path and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn lg_run_load(dir: *const c_char, out: *mut *mut LgRun) -> LgStatus {
    guard(|| {
        let run = LoadedRun::load(&PathBuf::from(text(dir, "directory")?))?;
        write_out(out, LgRun(run))
    })
}

unsafe fn plan_with(
    config_toml: *const c_char,
    out_dir: *const c_char,
    out: *mut *mut LgRun,
    graph: bool,
) -> LgStatus {
    guard(|| {
        let cfg = RunConfig::from_toml_str(&text(config_toml, "config")?)?;
        let dir = PathBuf::from(text(out_dir, "output directory")?);
        if out.is_null() {
            return Err(null("output handle"));
        }
        if graph {
            run_gpc(&cfg, &dir)?;
        } else {
            run_tpc(&cfg, &dir)?;
        }
        write_out(out, LgRun(LoadedRun::load(&dir)?))
    })
}

/// Trains a controller tree for the configuration and executes it. The run
/// is written to `out_dir` and returned loaded. This trains neural networks
/// and takes minutes.
///
/// # Safety
/// Both strings must be NUL-terminated; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn lg_plan_tree(config_toml: *const c_char, out_dir: *const c_char, out: *mut *mut LgRun) -> LgStatus {
    plan_with(config_toml, out_dir, out, false)
}

/// Graph counterpart of [`lg_plan_tree`]: covers the box, attaches the goal
/// and routes every configured start.
///
/// # Safety
/// Both strings must be NUL-terminated; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn lg_plan_graph(config_toml: *const c_char, out_dir: *const c_char, out: *mut *mut LgRun) -> LgStatus {
    plan_with(config_toml, out_dir, out, true)
}

/// # Safety
/// `run` must come from an `lg_run_load` or `lg_plan_*` and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn lg_run_free(run: *mut LgRun) {
    if !run.is_null() {
        drop(Box::from_raw(run));
    }
}

/// Number of node controllers in the run.
///
/// # Safety
/// `count` must be writable.
#[no_mangle]
pub unsafe extern "C" fn lg_run_node_count(run: *const LgRun, count: *mut usize) -> LgStatus {
    guard(|| {
        let run = handle(run, "run")?;
        if count.is_null() {
            return Err(null("count"));
        }
        *count = run.0.nodes().len();
        Ok(())
    })
}

/// Center and radius of node `id`.
///
/// # Safety
/// `center` must point to two doubles, `eta` to one.
#[no_mangle]
pub unsafe extern "C" fn lg_run_node_region(run: *const LgRun, id: usize, center: *mut f64, eta: *mut f64) -> LgStatus {
    guard(|| {
        let run = handle(run, "run")?;
        let node = run.0.nodes().get(id).ok_or(Error::UnknownNode(id))?;
        if eta.is_null() {
            return Err(null("eta"));
        }
        write_point(center, node.center)?;
        *eta = node.eta;
        Ok(())
    })
}

/// Node sequence a start state would follow. Writes up to `capacity` ids and
/// the full length to `len`.
///
/// # Safety
/// `start` must point to two doubles, `ids` to `capacity` slots (may be null
/// when `capacity` is 0), `len` must be writable.
#[no_mangle]
pub unsafe extern "C" fn lg_run_plan(
    run: *const LgRun,
    start: *const f64,
    ids: *mut usize,
    capacity: usize,
    len: *mut usize,
) -> LgStatus {
    guard(|| {
        let run = handle(run, "run")?;
        let path = run.0.plan(point(start, "start")?)?;
        if len.is_null() || (ids.is_null() && capacity > 0) {
            return Err(null("output buffer"));
        }
        for (i, id) in path.iter().take(capacity).enumerate() {
            *ids.add(i) = *id;
        }
        *len = path.len();
        Ok(())
    })
}

/// Plans and executes from `start` without touching the run directory.
///
/// # Safety
/// `start` must point to two doubles; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn lg_run_simulate(run: *const LgRun, start: *const f64, out: *mut *mut LgTrajectory) -> LgStatus {
    guard(|| {
        let run = handle(run, "run")?;
        let (traj, _) = run.0.simulate(point(start, "start")?)?;
        write_out(out, LgTrajectory(traj))
    })
}

// ---- trajectories ----

/// # Safety
/// `traj` must come from [`lg_run_simulate`] and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn lg_trajectory_free(traj: *mut LgTrajectory) {
    if !traj.is_null() {
        drop(Box::from_raw(traj));
    }
}

/// Number of rows and final status.
///
/// # Safety
/// `len` and `status` must be writable.
#[no_mangle]
pub unsafe extern "C" fn lg_trajectory_summary(
    traj: *const LgTrajectory,
    len: *mut usize,
    status: *mut LgRunStatus,
) -> LgStatus {
    guard(|| {
        let traj = handle(traj, "trajectory")?;
        if len.is_null() || status.is_null() {
            return Err(null("output"));
        }
        *len = traj.0.len();
        *status = traj.0.status.into();
        Ok(())
    })
}

/// Row `i`: time, state, applied control and active node id.
///
/// # Safety
/// `x` and `u` must each point to two doubles; `t` and `node` must be writable.
#[no_mangle]
pub unsafe extern "C" fn lg_trajectory_row(
    traj: *const LgTrajectory,
    i: usize,
    t: *mut f64,
    x: *mut f64,
    u: *mut f64,
    node: *mut usize,
) -> LgStatus {
    guard(|| {
        let traj = &handle(traj, "trajectory")?.0;
        if i >= traj.len() {
            return Err(Fail(LgStatus::OutOfRange, format!("row {i} of {}", traj.len())));
        }
        if t.is_null() || node.is_null() {
            return Err(null("output"));
        }
        *t = traj.times[i];
        write_point(x, traj.states[i])?;
        write_point(u, traj.controls[i])?;
        *node = traj.node_ids[i];
        Ok(())
    })
}
