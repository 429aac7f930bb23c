use std::ffi::{CStr, CString};
use std::path::{Path, PathBuf};
use std::process::Command;
use std::ptr;

use lyagraph::config::RunConfig;
use lyagraph::dynamics::{StateBounds, SystemConfig, Vec2};
use lyagraph::lyapunov::LyapunovNet;
use lyagraph::nn::{Activation, Dense, NetworkParams};
use lyagraph::nodes::{NodeController, NodeOutcome, NodeSeed, PlannerWorld, Synthesizer};
use lyagraph::ppo::GaussianPolicy;
use lyagraph::run::run_tpc_with;
use lyagraph_ffi::*;

/// Stiff linear feedback with a fixed radius, so runs build in milliseconds.
struct Linear;

impl Synthesizer for Linear {
    fn synthesize(&self, world: &PlannerWorld, id: usize, center: Vec2, seed: NodeSeed) -> lyagraph::Result<NodeOutcome> {
        let net = NetworkParams::from_layers(vec![Dense {
            in_dim: 2,
            out_dim: 2,
            weights: vec![-50.0, 0.0, 0.0, -50.0],
            biases: vec![0.0, 0.0],
            activation: Activation::Identity,
        }])?;
        let bounds: StateBounds = world.system.state_bounds;
        let lyapunov = LyapunovNet::new(NetworkParams::zeros(&[2, 1], &[Activation::Identity])?, center, bounds)?;
        Ok(NodeOutcome::Accepted(Box::new(NodeController {
            id,
            center,
            policy: GaussianPolicy::new(net, vec![-1.0, -1.0])?,
            lyapunov,
            eta: 2.2,
            seed,
            reward_curve: Vec::new(),
            loss_curve: Vec::new(),
            shells: Vec::new(),
        })))
    }

    fn eta_ub(&self) -> f64 {
        2.2
    }
}

fn tree_run(dir: &Path) {
    run_tpc_with(&RunConfig::default(), &Linear, dir).unwrap();
}

fn c(s: &str) -> CString {
    CString::new(s).unwrap()
}

fn c_path(p: &Path) -> CString {
    c(p.to_str().unwrap())
}

fn last_error() -> String {
    let p = lg_last_error();
    assert!(!p.is_null());
    unsafe { CStr::from_ptr(p) }.to_string_lossy().into_owned()
}

#[test]
fn version_is_the_crate_version() {
    let v = unsafe { CStr::from_ptr(lg_version()) };
    assert_eq!(v.to_str().unwrap(), env!("CARGO_PKG_VERSION"));
}

#[test]
fn system_functions_match_the_library() {
    unsafe {
        let mut sys = ptr::null_mut();
        assert_eq!(lg_system_new_default(&mut sys), LgStatus::Ok);
        let x = [1.0, -2.0];
        let mut f = [0.0; 2];
        assert_eq!(lg_system_vector_field(sys, x.as_ptr(), f.as_mut_ptr()), LgStatus::Ok);
        assert_eq!(f, SystemConfig::default().vector_field(x));
        let u = [0.9, 0.0];
        let mut next = [0.0; 2];
        assert_eq!(lg_system_step(sys, x.as_ptr(), u.as_ptr(), next.as_mut_ptr()), LgStatus::Ok);
        assert_eq!(next, SystemConfig::default().advance(x, u).unwrap().0);
        assert_eq!(lg_system_step(sys, ptr::null(), u.as_ptr(), next.as_mut_ptr()), LgStatus::NullPointer);
        assert!(last_error().contains("state"));
        lg_system_free(sys);
        lg_system_free(ptr::null_mut());
    }
}

#[test]
fn bad_configuration_is_a_validation_error() {
    unsafe {
        let mut sys = ptr::null_mut();
        let toml = c("[system]\ndt = -1.0\n");
        assert_eq!(lg_system_from_toml(toml.as_ptr(), &mut sys), LgStatus::Validation);
        assert!(sys.is_null());
        assert!(last_error().contains("dt"));
        let toml = c("[system]\ndt = 0.05\n");
        assert_eq!(lg_system_from_toml(toml.as_ptr(), &mut sys), LgStatus::Ok);
        lg_system_free(sys);

        let mut run = ptr::null_mut();
        let out = c("/nonexistent/lyagraph-ffi");
        let bad = c("[ppo]\ntotal_timesteps = 100\n");
        assert_eq!(lg_plan_tree(bad.as_ptr(), out.as_ptr(), &mut run), LgStatus::Validation);
        assert!(run.is_null());
    }
}

#[test]
fn run_handles_plan_and_simulate() {
    let dir = tempfile::tempdir().unwrap();
    tree_run(dir.path());
    unsafe {
        let mut run = ptr::null_mut();
        assert_eq!(lg_run_load(c_path(dir.path()).as_ptr(), &mut run), LgStatus::Ok);
        let mut n = 0;
        assert_eq!(lg_run_node_count(run, &mut n), LgStatus::Ok);
        assert!(n >= 2);

        let (mut center, mut eta) = ([0.0; 2], 0.0);
        assert_eq!(lg_run_node_region(run, 0, center.as_mut_ptr(), &mut eta), LgStatus::Ok);
        assert_eq!((center, eta), ([4.0, 4.0], 2.2));
        assert_eq!(lg_run_node_region(run, n, center.as_mut_ptr(), &mut eta), LgStatus::OutOfRange);

        let start = [-4.0, -4.0];
        let mut len = 0;
        assert_eq!(lg_run_plan(run, start.as_ptr(), ptr::null_mut(), 0, &mut len), LgStatus::Ok);
        let mut ids = vec![0usize; len];
        assert_eq!(lg_run_plan(run, start.as_ptr(), ids.as_mut_ptr(), len, &mut len), LgStatus::Ok);
        assert_eq!(*ids.last().unwrap(), 0);

        let mut traj = ptr::null_mut();
        assert_eq!(lg_run_simulate(run, start.as_ptr(), &mut traj), LgStatus::Ok);
        let (mut rows, mut status) = (0, LgRunStatus::Timeout);
        assert_eq!(lg_trajectory_summary(traj, &mut rows, &mut status), LgStatus::Ok);
        assert_eq!(status, LgRunStatus::Reached);
        let (mut t, mut x, mut u, mut node) = (0.0, [0.0; 2], [0.0; 2], 0);
        assert_eq!(
            lg_trajectory_row(traj, 0, &mut t, x.as_mut_ptr(), u.as_mut_ptr(), &mut node),
            LgStatus::Ok
        );
        assert_eq!((t, x, node), (0.0, start, ids[0]));
        assert_eq!(
            lg_trajectory_row(traj, rows, &mut t, x.as_mut_ptr(), u.as_mut_ptr(), &mut node),
            LgStatus::OutOfRange
        );

        let uncovered = [9.0, 9.0];
        assert_eq!(lg_run_simulate(run, uncovered.as_ptr(), &mut traj), LgStatus::Coverage);
        lg_trajectory_free(traj);
        lg_run_free(run);
    }
}

#[test]
fn node_handles_expose_controller_and_certificate() {
    let dir = tempfile::tempdir().unwrap();
    tree_run(dir.path());
    unsafe {
        let mut node = ptr::null_mut();
        let node_dir = c_path(&dir.path().join("nodes/node_000"));
        assert_eq!(lg_node_load(node_dir.as_ptr(), &mut node), LgStatus::Ok);
        let mut sys = ptr::null_mut();
        lg_system_new_default(&mut sys);
        let (mut center, mut eta) = ([0.0; 2], 0.0);
        assert_eq!(lg_node_region(node, center.as_mut_ptr(), &mut eta), LgStatus::Ok);
        let x = [4.1, 3.8];
        let mut u = [0.0; 2];
        assert_eq!(lg_node_action(node, sys, x.as_ptr(), u.as_mut_ptr()), LgStatus::Ok);
        // u = −50 · (x − c) / 5
        assert!((u[0] + 1.0).abs() < 1e-12 && (u[1] - 2.0).abs() < 1e-12);
        let mut v = 1.0;
        assert_eq!(lg_node_lyapunov(node, x.as_ptr(), &mut v), LgStatus::Ok);
        assert_eq!(v, 0.0);
        lg_node_free(node);
        lg_system_free(sys);

        let missing = c_path(&dir.path().join("nodes/node_999"));
        assert_eq!(lg_node_load(missing.as_ptr(), &mut node), LgStatus::Io);
    }
}

fn target_dir() -> PathBuf {
    // tests run from target/<profile>/deps
    std::env::current_exe().unwrap().parent().unwrap().parent().unwrap().to_path_buf()
}

#[test]
fn c_program_links_against_the_header() {
    let lib_dir = target_dir();
    assert!(lib_dir.join("liblyagraph_ffi.so").is_file(), "shared library missing in {}", lib_dir.display());
    let manifest = Path::new(env!("CARGO_MANIFEST_DIR"));
    let dir = tempfile::tempdir().unwrap();
    let exe = dir.path().join("smoke");
    let status = Command::new("cc")
        .arg("-std=c99")
        .arg("-Wall")
        .arg("-Werror")
        .arg("-I")
        .arg(manifest.join("include"))
        .arg(manifest.join("tests/c/smoke.c"))
        .arg("-L")
        .arg(&lib_dir)
        .arg("-llyagraph_ffi")
        .arg("-o")
        .arg(&exe)
        .status()
        .unwrap();
    assert!(status.success());

    let run_dir = dir.path().join("run");
    tree_run(&run_dir);
    let out = Command::new(&exe)
        .arg(&run_dir)
        .env("LD_LIBRARY_PATH", &lib_dir)
        .output()
        .unwrap();
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert!(out.status.success(), "{stdout}\n{}", String::from_utf8_lossy(&out.stderr));
    assert!(stdout.contains("status 0"), "{stdout}");
}
