//! Closed-loop execution of a controller sequence with distance-based switching.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::dynamics::{distance, observation, Obstacle, SystemConfig, Vec2};
use crate::error::{Error, Result};
use crate::nodes::NodeController;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RunStatus {
    Reached,
    Timeout,
    ObstacleHit,
}

impl std::fmt::Display for RunStatus {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            RunStatus::Reached => "reached",
            RunStatus::Timeout => "timeout",
            RunStatus::ObstacleHit => "obstacle-hit",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ExecutorConfig {
    /// Switching distance, normalized units.
    pub switch_tol: f64,
    /// Step budget per node on the path.
    pub steps_per_node: usize,
}

impl Default for ExecutorConfig {
    fn default() -> Self {
        Self {
            switch_tol: 0.01,
            steps_per_node: 300,
        }
    }
}

/// One row per visited state. The control on a row is the one applied from
/// that state; the terminal row carries zero control.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub states: Vec<Vec2>,
    pub controls: Vec<Vec2>,
    pub node_ids: Vec<usize>,
    pub status: RunStatus,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    pub fn final_state(&self) -> Vec2 {
        *self.states.last().expect("trajectory has at least one state")
    }

    pub fn min_distance_to(&self, point: Vec2) -> f64 {
        self.states.iter().map(|&x| distance(x, point)).fold(f64::INFINITY, f64::min)
    }

    /// CSV with columns `t,x1,x2,u1,u2,node_id`.
    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "t,x1,x2,u1,u2,node_id")?;
        for i in 0..self.len() {
            let (x, u) = (self.states[i], self.controls[i]);
            writeln!(w, "{},{},{},{},{},{}", self.times[i], x[0], x[1], u[0], u[1], self.node_ids[i])?;
        }
        Ok(())
    }
}

/// Runs the closed loop from `x0` through `path`, handing over to the next
/// node once within `switch_tol` (normalized) of the active center.
pub fn run_sequence(
    system: &SystemConfig,
    obstacles: &[Obstacle],
    path: &[&NodeController],
    x0: Vec2,
    switch_tol: f64,
    max_steps: usize,
) -> Result<Trajectory> {
    let first = path.first().ok_or_else(|| Error::Config("empty controller path".into()))?;
    if distance(x0, first.center) > first.eta {
        return Err(Error::OutsideRegion(x0[0], x0[1]));
    }
    let bounds = &system.state_bounds;
    let mut traj = Trajectory {
        times: Vec::new(),
        states: Vec::new(),
        controls: Vec::new(),
        node_ids: Vec::new(),
        status: RunStatus::Timeout,
    };
    let mut active = 0;
    let mut x = x0;
    for step in 0..=max_steps {
        let t = step as f64 * system.dt;
        if obstacles.iter().any(|o| o.contains(x)) {
            traj.status = RunStatus::ObstacleHit;
        } else {
            while active + 1 < path.len() && bounds.normalized_distance(x, path[active].center) < switch_tol {
                active += 1;
            }
            let last = active + 1 == path.len();
            if last && bounds.normalized_distance(x, path[active].center) < switch_tol {
                traj.status = RunStatus::Reached;
            } else if step < max_steps {
                let node = path[active];
                let u = node.policy.mean_action(&observation(bounds, x, node.center))?;
                let (next, applied) = system.advance(x, [u[0], u[1]])?;
                traj.times.push(t);
                traj.states.push(x);
                traj.controls.push(applied);
                traj.node_ids.push(node.id);
                x = next;
                continue;
            }
        }
        traj.times.push(t);
        traj.states.push(x);
        traj.controls.push([0.0, 0.0]);
        traj.node_ids.push(path[active].id);
        break;
    }
    Ok(traj)
}
