//! Backward tree of node controllers grown from the goal until the start is covered.

use log::info;
use serde::{Deserialize, Serialize};

use crate::dynamics::Vec2;
use crate::error::{Error, Result};
use crate::nodes::{
    nearest_containing, sample_candidate, seeded_stream, Ball, NodeController, NodeOutcome, NodeSeed, PlannerWorld,
    RejectSet, SamplingConfig, Synthesizer,
};

#[derive(Debug, Clone)]
pub struct ControllerTree {
    pub goal: Vec2,
    pub start: Vec2,
    /// Node 0 is the root (goal node).
    pub nodes: Vec<NodeController>,
    pub parent: Vec<Option<usize>>,
    pub rejects: RejectSet,
    /// Candidates sent to synthesis, accepted or not.
    pub trained: usize,
    pub iterations: usize,
}

impl ControllerTree {
    pub fn balls(&self) -> Vec<Ball> {
        self.nodes.iter().map(NodeController::ball).collect()
    }

    pub fn covers(&self, x: Vec2) -> bool {
        self.nodes.iter().any(|n| n.ball().contains(x))
    }

    pub fn find_parent(&self, x: Vec2) -> Result<usize> {
        find_parent(&self.balls(), x)
    }

    pub fn prune(&self, x_start: Vec2) -> Result<Vec<usize>> {
        prune(&self.parent, &self.balls(), x_start)
    }
}

/// Closest node whose region contains `x`; ties go to the lowest id.
pub fn find_parent(balls: &[Ball], x: Vec2) -> Result<usize> {
    nearest_containing(balls, x).ok_or(Error::Uncovered(x[0], x[1]))
}

/// Chain from the node entered at `x_start` up to the root.
pub fn prune(parent: &[Option<usize>], balls: &[Ball], x_start: Vec2) -> Result<Vec<usize>> {
    let mut path = vec![find_parent(balls, x_start)?];
    while let Some(p) = parent[*path.last().unwrap()] {
        if path.len() > parent.len() {
            return Err(Error::Parse {
                path: "tree".into(),
                message: "parent links contain a cycle".into(),
            });
        }
        path.push(p);
    }
    Ok(path)
}

/// Grows a tree rooted at `goal` until `start` lies in some node's region.
///
/// Candidate sampling uses stream 0 of `seed`; the k-th synthesized candidate
/// uses stream k + 1.
pub fn build_tree(
    world: &PlannerWorld,
    start: Vec2,
    goal: Vec2,
    synth: &dyn Synthesizer,
    sampling: &SamplingConfig,
    seed: u64,
) -> Result<ControllerTree> {
    for (name, x) in [("start", start), ("goal", goal)] {
        if !world.system.state_bounds.contains(x) || world.in_obstacle(x) {
            return Err(Error::Config(format!("{name} ({}, {}) is outside the free region", x[0], x[1])));
        }
    }
    let mut rng = seeded_stream(seed, 0);
    let mut tree = ControllerTree {
        goal,
        start,
        nodes: Vec::new(),
        parent: Vec::new(),
        rejects: RejectSet::default(),
        trained: 1,
        iterations: 0,
    };
    match synth.synthesize(world, 0, goal, NodeSeed { master: seed, stream: 1 })? {
        NodeOutcome::Accepted(node) => {
            tree.nodes.push(*node);
            tree.parent.push(None);
        }
        NodeOutcome::Rejected { center, eta } => return Err(Error::GoalRejected(center[0], center[1], eta)),
    }
    if tree.covers(start) {
        return Ok(tree);
    }

    for k in 1..=sampling.max_iters {
        tree.iterations = k;
        let balls = tree.balls();
        let Some(x) = sample_candidate(world, &balls, &tree.rejects, sampling, true, &mut rng) else {
            continue;
        };
        tree.trained += 1;
        let seed = NodeSeed {
            master: seed,
            stream: tree.trained as u64,
        };
        match synth.synthesize(world, tree.nodes.len(), x, seed)? {
            NodeOutcome::Accepted(node) => {
                let parent = find_parent(&balls, x)?;
                tree.nodes.push(*node);
                tree.parent.push(Some(parent));
            }
            NodeOutcome::Rejected { center, .. } => tree.rejects.insert(center),
        }
        if tree.covers(start) {
            info!("start covered after {k} iterations with {} nodes", tree.nodes.len());
            return Ok(tree);
        }
    }
    Err(Error::TreeCoverage {
        iterations: sampling.max_iters,
        partial: Box::new(tree),
    })
}

/// Serializable tree layout; node artifacts live in per-node directories.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TreeRecord {
    pub goal: Vec2,
    pub start: Vec2,
    pub nodes: Vec<NodeEntry>,
    pub rejects: Vec<Vec2>,
    pub trained: usize,
    pub iterations: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NodeEntry {
    pub id: usize,
    pub center: Vec2,
    pub eta: f64,
    pub parent: Option<usize>,
    /// Node directory relative to the run directory.
    pub dir: String,
}

pub fn node_dir_name(id: usize) -> String {
    format!("nodes/node_{id:03}")
}

impl TreeRecord {
    pub fn from_tree(tree: &ControllerTree) -> Self {
        Self {
            goal: tree.goal,
            start: tree.start,
            nodes: tree
                .nodes
                .iter()
                .zip(&tree.parent)
                .map(|(n, p)| NodeEntry {
                    id: n.id,
                    center: n.center,
                    eta: n.eta,
                    parent: *p,
                    dir: node_dir_name(n.id),
                })
                .collect(),
            rejects: tree.rejects.centers.clone(),
            trained: tree.trained,
            iterations: tree.iterations,
        }
    }

    pub fn balls(&self) -> Vec<Ball> {
        self.nodes
            .iter()
            .map(|n| Ball {
                center: n.center,
                eta: n.eta,
            })
            .collect()
    }

    pub fn parents(&self) -> Vec<Option<usize>> {
        self.nodes.iter().map(|n| n.parent).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ball(x: f64, y: f64, eta: f64) -> Ball {
        Ball { center: [x, y], eta }
    }

    #[test]
    fn parent_is_closest_container() {
        let balls = [ball(0.0, 0.0, 2.0), ball(1.0, 0.0, 2.0), ball(5.0, 5.0, 1.0)];
        assert_eq!(find_parent(&balls, [0.7, 0.0]).unwrap(), 1);
        assert_eq!(find_parent(&balls, [-0.2, 0.0]).unwrap(), 0);
        assert_eq!(find_parent(&balls, [0.5, 0.0]).unwrap(), 0);
        assert!(matches!(find_parent(&balls, [-4.0, -4.0]), Err(Error::Uncovered(..))));
    }

    #[test]
    fn prune_single_and_chain() {
        let balls = [ball(0.0, 0.0, 1.0)];
        assert_eq!(prune(&[None], &balls, [0.5, 0.0]).unwrap(), vec![0]);

        let balls = [ball(0.0, 0.0, 2.0), ball(2.0, 0.0, 2.0), ball(4.0, 0.0, 2.0)];
        let parent = [None, Some(0), Some(1)];
        assert_eq!(prune(&parent, &balls, [5.0, 0.0]).unwrap(), vec![2, 1, 0]);
    }

    #[test]
    fn prune_excludes_side_branches() {
        let balls = [
            ball(0.0, 0.0, 2.0),
            ball(2.0, 0.0, 2.0),
            ball(0.0, 2.0, 2.0),
            ball(4.0, 0.0, 2.0),
        ];
        let parent = [None, Some(0), Some(0), Some(1)];
        assert_eq!(prune(&parent, &balls, [4.5, 0.0]).unwrap(), vec![3, 1, 0]);
    }

    #[test]
    fn prune_detects_cycles() {
        let balls = [ball(0.0, 0.0, 2.0), ball(1.0, 0.0, 2.0)];
        assert!(prune(&[Some(1), Some(0)], &balls, [0.0, 0.0]).is_err());
    }
}
