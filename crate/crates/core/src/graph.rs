//! Space-covering directed graph of node controllers, routed with Dijkstra.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use log::info;
use serde::{Deserialize, Serialize};

use crate::dynamics::{distance, Obstacle, StateBounds, Vec2};
use crate::error::{Error, Result};
use crate::nodes::{
    nearest_containing, sample_candidate, seeded_stream, Ball, NodeController, NodeOutcome, NodeSeed, PlannerWorld,
    RejectSet, SamplingConfig, Synthesizer,
};
use crate::tree::{node_dir_name, NodeEntry};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Edge {
    pub from: usize,
    pub to: usize,
    pub weight: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EdgeWeight {
    #[default]
    Euclidean,
    Hops,
}

/// `i → j` iff the center of `i` lies in the region of `j` (`i ≠ j`).
/// Edges come out sorted by `(from, to)`.
pub fn build_edges(balls: &[Ball], weight: EdgeWeight) -> Vec<Edge> {
    let mut edges = Vec::new();
    for (i, bi) in balls.iter().enumerate() {
        for (j, bj) in balls.iter().enumerate() {
            if i == j {
                continue;
            }
            let d = distance(bi.center, bj.center);
            if d <= bj.eta {
                let w = match weight {
                    EdgeWeight::Euclidean => d,
                    EdgeWeight::Hops => 1.0,
                };
                edges.push(Edge { from: i, to: j, weight: w });
            }
        }
    }
    edges
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct Frontier {
    cost: f64,
    node: usize,
}

impl Eq for Frontier {}

impl Ord for Frontier {
    fn cmp(&self, other: &Self) -> Ordering {
        other
            .cost
            .total_cmp(&self.cost)
            .then_with(|| other.node.cmp(&self.node))
    }
}

impl PartialOrd for Frontier {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// Dijkstra over `n` nodes. Returns the node sequence and its total weight.
pub fn shortest_path(n: usize, edges: &[Edge], start: usize, goal: usize) -> Result<(Vec<usize>, f64)> {
    for id in [start, goal] {
        if id >= n {
            return Err(Error::UnknownNode(id));
        }
    }
    let mut adjacency = vec![Vec::new(); n];
    for e in edges {
        if e.from >= n || e.to >= n {
            return Err(Error::UnknownNode(e.from.max(e.to)));
        }
        adjacency[e.from].push((e.to, e.weight));
    }
    let mut dist = vec![f64::INFINITY; n];
    let mut prev = vec![usize::MAX; n];
    let mut heap = BinaryHeap::new();
    dist[start] = 0.0;
    heap.push(Frontier { cost: 0.0, node: start });
    while let Some(Frontier { cost, node }) = heap.pop() {
        if cost > dist[node] {
            continue;
        }
        if node == goal {
            break;
        }
        for &(next, w) in &adjacency[node] {
            let c = cost + w;
            if c < dist[next] {
                dist[next] = c;
                prev[next] = node;
                heap.push(Frontier { cost: c, node: next });
            }
        }
    }
    if !dist[goal].is_finite() {
        return Err(Error::NoPath { from: start, to: goal });
    }
    let mut path = vec![goal];
    while *path.last().unwrap() != start {
        path.push(prev[*path.last().unwrap()]);
    }
    path.reverse();
    Ok((path, dist[goal]))
}

/// True iff every node reaches every other node.
pub fn strongly_connected(n: usize, edges: &[Edge]) -> bool {
    if n <= 1 {
        return true;
    }
    let reach = |forward: bool| {
        let mut adjacency = vec![Vec::new(); n];
        for e in edges {
            if forward {
                adjacency[e.from].push(e.to);
            } else {
                adjacency[e.to].push(e.from);
            }
        }
        let mut seen = vec![false; n];
        let mut stack = vec![0];
        seen[0] = true;
        while let Some(v) = stack.pop() {
            for &w in &adjacency[v] {
                if !seen[w] {
                    seen[w] = true;
                    stack.push(w);
                }
            }
        }
        seen.into_iter().all(|s| s)
    };
    reach(true) && reach(false)
}

/// Grid over the planning box used as the coverage termination test.
#[derive(Debug, Clone, PartialEq)]
pub struct CoverageGrid {
    pub resolution: usize,
    points: Vec<Vec2>,
}

impl CoverageGrid {
    /// `resolution × resolution` points on the box corners and edges. Points
    /// strictly within `exempt_radius(o)` of an obstacle center are skipped.
    pub fn new(bounds: &StateBounds, resolution: usize, obstacles: &[Obstacle], exempt_radius: impl Fn(&Obstacle) -> f64) -> Self {
        let mut points = Vec::with_capacity(resolution * resolution);
        let step = |lo: f64, hi: f64, i: usize| {
            if resolution == 1 {
                0.5 * (lo + hi)
            } else {
                lo + (hi - lo) * i as f64 / (resolution - 1) as f64
            }
        };
        for i in 0..resolution {
            for j in 0..resolution {
                let p = [step(bounds.lo[0], bounds.hi[0], i), step(bounds.lo[1], bounds.hi[1], j)];
                if obstacles.iter().all(|o| distance(p, o.center) >= exempt_radius(o)) {
                    points.push(p);
                }
            }
        }
        Self { resolution, points }
    }

    pub fn points(&self) -> &[Vec2] {
        &self.points
    }

    /// `(fully covered, uncovered fraction)`.
    pub fn check(&self, balls: &[Ball]) -> (bool, f64) {
        if self.points.is_empty() {
            return (true, 0.0);
        }
        let uncovered = self.points.iter().filter(|p| !balls.iter().any(|b| b.contains(**p))).count();
        (uncovered == 0, uncovered as f64 / self.points.len() as f64)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BuildStatus {
    Covered,
    /// Candidate sampling found no admissible center.
    Exhausted,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GraphConfig {
    pub grid_resolution: usize,
    pub edge_weight: EdgeWeight,
}

impl Default for GraphConfig {
    fn default() -> Self {
        Self {
            grid_resolution: 101,
            edge_weight: EdgeWeight::Euclidean,
        }
    }
}

#[derive(Debug, Clone)]
pub struct ControllerGraph {
    pub nodes: Vec<NodeController>,
    pub edges: Vec<Edge>,
    pub goal_node: Option<usize>,
    pub rejects: RejectSet,
    pub edge_weight: EdgeWeight,
    pub status: BuildStatus,
    pub uncovered: f64,
    pub trained: usize,
    pub iterations: usize,
    pub seed: u64,
}

impl ControllerGraph {
    pub fn balls(&self) -> Vec<Ball> {
        self.nodes.iter().map(NodeController::ball).collect()
    }

    pub fn rebuild_edges(&mut self) {
        self.edges = build_edges(&self.balls(), self.edge_weight);
    }

    pub fn locate_start(&self, x: Vec2) -> Result<usize> {
        nearest_containing(&self.balls(), x).ok_or(Error::Uncovered(x[0], x[1]))
    }

    pub fn shortest_path(&self, start: usize, goal: usize) -> Result<(Vec<usize>, f64)> {
        shortest_path(self.nodes.len(), &self.edges, start, goal)
    }

    /// Node sequence from the node containing `x` to the goal node.
    pub fn route(&self, x: Vec2) -> Result<Vec<usize>> {
        let goal = self
            .goal_node
            .ok_or_else(|| Error::Config("graph has no goal node attached".into()))?;
        let start = self.locate_start(x)?;
        Ok(self.shortest_path(start, goal)?.0)
    }

    pub fn strongly_connected(&self) -> bool {
        strongly_connected(self.nodes.len(), &self.edges)
    }

    /// Removes the goal node, if any, leaving every other node untouched.
    pub fn detach_goal(&mut self) {
        if let Some(g) = self.goal_node.take() {
            self.nodes.remove(g);
            for (i, n) in self.nodes.iter_mut().enumerate().skip(g) {
                n.id = i;
            }
            self.rebuild_edges();
        }
    }

    /// Trains a single node at `goal` and links it into the graph, replacing
    /// any previous goal node. Returns the new node's id.
    pub fn attach_goal(
        &mut self,
        world: &PlannerWorld,
        goal: Vec2,
        synth: &dyn Synthesizer,
        seed: NodeSeed,
    ) -> Result<usize> {
        if !world.system.state_bounds.contains(goal) || world.in_obstacle(goal) {
            return Err(Error::Config(format!("goal ({}, {}) is outside the free region", goal[0], goal[1])));
        }
        self.detach_goal();
        let id = self.nodes.len();
        self.trained += 1;
        match synth.synthesize(world, id, goal, seed)? {
            NodeOutcome::Accepted(node) => {
                self.nodes.push(*node);
                self.goal_node = Some(id);
                self.rebuild_edges();
                Ok(id)
            }
            NodeOutcome::Rejected { center, eta } => Err(Error::GoalRejected(center[0], center[1], eta)),
        }
    }
}

/// Covers the planning box with node regions. Stops when the grid is
/// covered or no admissible candidate can be drawn; running out of
/// iterations first is an error carrying the partial graph.
pub fn build_graph(
    world: &PlannerWorld,
    synth: &dyn Synthesizer,
    sampling: &SamplingConfig,
    graph_cfg: &GraphConfig,
    seed: u64,
) -> Result<ControllerGraph> {
    let mut rng = seeded_stream(seed, 0);
    let alpha_shortfall = sampling.alpha - synth.eta_ub();
    let grid = CoverageGrid::new(&world.system.state_bounds, graph_cfg.grid_resolution, &world.obstacles, |o| {
        o.radius.max(alpha_shortfall)
    });
    let mut graph = ControllerGraph {
        nodes: Vec::new(),
        edges: Vec::new(),
        goal_node: None,
        rejects: RejectSet::default(),
        edge_weight: graph_cfg.edge_weight,
        status: BuildStatus::Exhausted,
        uncovered: 1.0,
        trained: 0,
        iterations: 0,
        seed,
    };
    for k in 1..=sampling.max_iters {
        graph.iterations = k;
        let balls = graph.balls();
        let connected = !balls.is_empty();
        let Some(x) = sample_candidate(world, &balls, &graph.rejects, sampling, connected, &mut rng) else {
            graph.status = BuildStatus::Exhausted;
            graph.uncovered = grid.check(&balls).1;
            graph.rebuild_edges();
            info!("candidate sampling exhausted with {} nodes", graph.nodes.len());
            return Ok(graph);
        };
        graph.trained += 1;
        let node_seed = NodeSeed {
            master: seed,
            stream: graph.trained as u64,
        };
        match synth.synthesize(world, graph.nodes.len(), x, node_seed)? {
            NodeOutcome::Accepted(node) => graph.nodes.push(*node),
            NodeOutcome::Rejected { center, .. } => graph.rejects.insert(center),
        }
        let (covered, uncovered) = grid.check(&graph.balls());
        graph.uncovered = uncovered;
        if covered {
            graph.status = BuildStatus::Covered;
            graph.rebuild_edges();
            info!("region covered with {} nodes after {k} iterations", graph.nodes.len());
            return Ok(graph);
        }
    }
    graph.rebuild_edges();
    Err(Error::GraphCoverage {
        iterations: sampling.max_iters,
        uncovered: graph.uncovered,
        partial: Box::new(graph),
    })
}

/// Serializable graph layout; node artifacts live in per-node directories.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GraphRecord {
    pub nodes: Vec<NodeEntry>,
    pub edges: Vec<Edge>,
    pub goal_node: Option<usize>,
    pub rejects: Vec<Vec2>,
    pub edge_weight: EdgeWeight,
    pub status: BuildStatus,
    pub uncovered: f64,
    pub trained: usize,
    pub iterations: usize,
    pub seed: u64,
}

impl GraphRecord {
    pub fn from_graph(graph: &ControllerGraph) -> Self {
        Self {
            nodes: graph
                .nodes
                .iter()
                .map(|n| NodeEntry {
                    id: n.id,
                    center: n.center,
                    eta: n.eta,
                    parent: None,
                    dir: node_dir_name(n.id),
                })
                .collect(),
            edges: graph.edges.clone(),
            goal_node: graph.goal_node,
            rejects: graph.rejects.centers.clone(),
            edge_weight: graph.edge_weight,
            status: graph.status,
            uncovered: graph.uncovered,
            trained: graph.trained,
            iterations: graph.iterations,
            seed: graph.seed,
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

    pub fn into_graph(self, nodes: Vec<NodeController>) -> ControllerGraph {
        ControllerGraph {
            nodes,
            edges: self.edges,
            goal_node: self.goal_node,
            rejects: RejectSet { centers: self.rejects },
            edge_weight: self.edge_weight,
            status: self.status,
            uncovered: self.uncovered,
            trained: self.trained,
            iterations: self.iterations,
            seed: self.seed,
        }
    }
}
