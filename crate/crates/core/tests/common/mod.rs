#![allow(dead_code)]

use lyagraph::dynamics::{StateBounds, Vec2};
use lyagraph::lyapunov::LyapunovNet;
use lyagraph::nn::{Activation, Dense, NetworkParams};
use lyagraph::nodes::{NodeController, NodeOutcome, NodeSeed, PlannerWorld, Synthesizer};
use lyagraph::ppo::GaussianPolicy;
use lyagraph::Result;

/// Linear state feedback `u = −gain·(normalized offset)` as a policy network.
pub fn linear_policy(gain: f64) -> GaussianPolicy {
    let net = NetworkParams::from_layers(vec![Dense {
        in_dim: 2,
        out_dim: 2,
        weights: vec![-gain, 0.0, 0.0, -gain],
        biases: vec![0.0, 0.0],
        activation: Activation::Identity,
    }])
    .unwrap();
    GaussianPolicy::new(net, vec![-1.0, -1.0]).unwrap()
}

pub fn zero_lyapunov(center: Vec2, bounds: StateBounds) -> LyapunovNet {
    LyapunovNet::new(
        NetworkParams::zeros(&[2, 1], &[Activation::Identity]).unwrap(),
        center,
        bounds,
    )
    .unwrap()
}

/// Analytic node controllers: linear feedback and a radius chosen by `eta`.
pub struct LinearSynth {
    pub gain: f64,
    pub eta_lb: f64,
    pub eta_ub: f64,
    pub eta: Box<dyn Fn(Vec2) -> f64>,
}

impl LinearSynth {
    pub fn constant(eta: f64) -> Self {
        Self {
            gain: 50.0,
            eta_lb: 1.3,
            eta_ub: 2.2,
            eta: Box::new(move |_| eta),
        }
    }

    pub fn node(&self, id: usize, center: Vec2, eta: f64, seed: NodeSeed, bounds: StateBounds) -> NodeController {
        NodeController {
            id,
            center,
            policy: linear_policy(self.gain),
            lyapunov: zero_lyapunov(center, bounds),
            eta,
            seed,
            reward_curve: Vec::new(),
            loss_curve: Vec::new(),
            shells: Vec::new(),
        }
    }
}

impl Synthesizer for LinearSynth {
    fn synthesize(&self, world: &PlannerWorld, id: usize, center: Vec2, seed: NodeSeed) -> Result<NodeOutcome> {
        let eta = (self.eta)(center);
        if eta > self.eta_lb {
            Ok(NodeOutcome::Accepted(Box::new(self.node(
                id,
                center,
                eta,
                seed,
                world.system.state_bounds,
            ))))
        } else {
            Ok(NodeOutcome::Rejected { center, eta })
        }
    }

    fn eta_ub(&self) -> f64 {
        self.eta_ub
    }
}

/// Edge set `(i, j)` with `‖c_i − c_j‖² ≤ η_j²`, by squared distances.
pub fn edge_oracle(balls: &[lyagraph::nodes::Ball]) -> Vec<(usize, usize)> {
    let mut out = Vec::new();
    for i in 0..balls.len() {
        for j in 0..balls.len() {
            let dx = balls[i].center[0] - balls[j].center[0];
            let dy = balls[i].center[1] - balls[j].center[1];
            if i != j && dx * dx + dy * dy <= balls[j].eta * balls[j].eta {
                out.push((i, j));
            }
        }
    }
    out
}

/// Minimum cost over every simple path from `start` to `goal`, by exhaustive DFS.
pub fn enumerate_shortest(n: usize, edges: &[lyagraph::graph::Edge], start: usize, goal: usize) -> Option<f64> {
    fn dfs(
        at: usize,
        goal: usize,
        cost: f64,
        adj: &[Vec<(usize, f64)>],
        seen: &mut Vec<bool>,
        best: &mut Option<f64>,
    ) {
        if at == goal {
            if best.is_none_or(|b| cost < b) {
                *best = Some(cost);
            }
            return;
        }
        for &(next, w) in &adj[at] {
            if !seen[next] {
                seen[next] = true;
                dfs(next, goal, cost + w, adj, seen, best);
                seen[next] = false;
            }
        }
    }
    let mut adj = vec![Vec::new(); n];
    for e in edges {
        adj[e.from].push((e.to, e.weight));
    }
    let mut seen = vec![false; n];
    seen[start] = true;
    let mut best = None;
    dfs(start, goal, 0.0, &adj, &mut seen, &mut best);
    best
}

/// Total weight of `path` if every hop is an edge (cheapest parallel edge).
pub fn path_cost(edges: &[lyagraph::graph::Edge], path: &[usize]) -> Option<f64> {
    path.windows(2)
        .map(|w| {
            edges
                .iter()
                .filter(|e| e.from == w[0] && e.to == w[1])
                .map(|e| e.weight)
                .reduce(f64::min)
        })
        .sum()
}

/// Random directed graph with positive weights.
pub fn random_graph<R: rand::Rng>(n: usize, density: f64, rng: &mut R) -> Vec<lyagraph::graph::Edge> {
    let mut edges = Vec::new();
    for from in 0..n {
        for to in 0..n {
            if from != to && rng.random_bool(density) {
                edges.push(lyagraph::graph::Edge {
                    from,
                    to,
                    weight: rng.random_range(0.1..5.0),
                });
            }
        }
    }
    edges
}

/// Random balls with centers in the default box and radii in `[0.5, 3]`.
pub fn random_layout<R: rand::Rng>(n: usize, rng: &mut R) -> Vec<lyagraph::nodes::Ball> {
    (0..n)
        .map(|_| lyagraph::nodes::Ball {
            center: [rng.random_range(-5.0..5.0), rng.random_range(-5.0..5.0)],
            eta: rng.random_range(0.5..3.0),
        })
        .collect()
}
