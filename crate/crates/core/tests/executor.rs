mod common;

use common::LinearSynth;
use lyagraph::dynamics::{Obstacle, SystemConfig, Vec2};
use lyagraph::executor::{run_sequence, RunStatus};
use lyagraph::nodes::{NodeController, NodeSeed};
use lyagraph::Error;
use proptest::prelude::*;

fn node(id: usize, center: Vec2, eta: f64) -> NodeController {
    LinearSynth::constant(eta).node(id, center, eta, NodeSeed { master: 0, stream: id as u64 }, SystemConfig::default().state_bounds)
}

#[test]
fn start_at_goal_center_is_a_single_terminal_row() {
    let system = SystemConfig::default();
    let goal = node(7, [1.0, 1.0], 2.0);
    let traj = run_sequence(&system, &[], &[&goal], [1.0, 1.0], 0.01, 300).unwrap();
    assert_eq!(traj.status, RunStatus::Reached);
    assert_eq!(traj.len(), 1);
    assert_eq!(traj.controls[0], [0.0, 0.0]);
    assert_eq!(traj.node_ids, vec![7]);
}

#[test]
fn start_outside_first_region_is_rejected() {
    let system = SystemConfig::default();
    let n = node(0, [0.0, 0.0], 1.5);
    let err = run_sequence(&system, &[], &[&n], [2.0, 0.0], 0.01, 300).unwrap_err();
    assert!(matches!(err, Error::OutsideRegion(..)));
    assert!(run_sequence(&system, &[], &[], [0.0, 0.0], 0.01, 300).is_err());
}

#[test]
fn two_node_chain_hands_over_and_reaches() {
    let system = SystemConfig::default();
    let a = node(3, [-2.0, 0.0], 2.0);
    let b = node(1, [-0.5, 0.0], 2.0);
    let traj = run_sequence(&system, &[], &[&a, &b], [-3.5, 0.5], 0.01, 600).unwrap();
    assert_eq!(traj.status, RunStatus::Reached);
    let switch = traj.node_ids.iter().position(|&id| id == 1).unwrap();
    assert!(switch > 0);
    assert!(traj.node_ids[..switch].iter().all(|&id| id == 3));
    assert!(traj.node_ids[switch..].iter().all(|&id| id == 1));
    // handover happens only once close to the first center
    let before = traj.states[switch];
    assert!(system.state_bounds.normalized_distance(before, a.center) < 0.01);
    assert!(system.state_bounds.normalized_distance(traj.final_state(), b.center) < 0.01);
    for w in traj.times.windows(2) {
        assert!((w[1] - w[0] - system.dt).abs() < 1e-12);
    }
}

#[test]
fn step_budget_exhaustion_is_a_timeout() {
    let system = SystemConfig::default();
    let n = node(0, [0.0, 0.0], 2.0);
    let traj = run_sequence(&system, &[], &[&n], [1.5, 0.0], 0.01, 0).unwrap();
    assert_eq!(traj.status, RunStatus::Timeout);
    assert_eq!(traj.len(), 1);
    let traj = run_sequence(&system, &[], &[&n], [1.5, 0.0], 0.01, 5).unwrap();
    assert_eq!(traj.status, RunStatus::Timeout);
    assert_eq!(traj.len(), 6);
    assert_eq!(*traj.controls.last().unwrap(), [0.0, 0.0]);
}

#[test]
fn obstacle_on_the_way_stops_the_run() {
    let system = SystemConfig::default();
    let n = node(0, [0.0, 0.0], 2.2);
    let wall = Obstacle { center: [1.0, 0.0], radius: 0.3 };
    let traj = run_sequence(&system, &[wall], &[&n], [2.0, 0.0], 0.01, 300).unwrap();
    assert_eq!(traj.status, RunStatus::ObstacleHit);
    assert!(wall.contains(traj.final_state()));
    assert!(traj.min_distance_to(wall.center) < wall.radius);
}

#[test]
fn csv_has_header_and_one_line_per_row() {
    let system = SystemConfig::default();
    let n = node(2, [0.0, 0.0], 2.0);
    let traj = run_sequence(&system, &[], &[&n], [0.5, -0.5], 0.01, 300).unwrap();
    let mut buf = Vec::new();
    traj.write_csv(&mut buf).unwrap();
    let text = String::from_utf8(buf).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "t,x1,x2,u1,u2,node_id");
    assert_eq!(lines.len(), traj.len() + 1);
    assert!(lines[1].starts_with("0,0.5,-0.5,"));
    assert!(lines[1].ends_with(",2"));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn applied_controls_respect_the_bound(
        cx in -3.0f64..3.0, cy in -3.0f64..3.0,
        r in 0.0f64..2.0, th in 0.0f64..std::f64::consts::TAU,
    ) {
        let system = SystemConfig::default();
        let n = node(0, [cx, cy], 2.0);
        let x0 = [cx + r * th.cos(), cy + r * th.sin()];
        let traj = run_sequence(&system, &[], &[&n], x0, 0.01, 300).unwrap();
        for u in &traj.controls {
            prop_assert!(u[0].abs() <= system.u_max + 1e-12 && u[1].abs() <= system.u_max + 1e-12);
        }
        for x in &traj.states {
            prop_assert!(system.state_bounds.contains(*x));
        }
    }
}
