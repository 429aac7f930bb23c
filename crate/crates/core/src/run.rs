//! End-to-end pipelines behind the command-line tool: planning runs, their
//! on-disk layout, re-verification and export.
//!
//! A run directory holds `manifest.json`, `config.toml`, `tree.json` or
//! `graph.json`, CSV outputs and one `nodes/node_NNN/` directory per node.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;

use log::info;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::config::{Mode, RunConfig};
use crate::dynamics::{distance, Vec2};
use crate::error::{Error, Result};
use crate::executor::{run_sequence, RunStatus, Trajectory};
use crate::graph::{build_edges, build_graph, strongly_connected, BuildStatus, ControllerGraph, GraphRecord};
use crate::lyapunov::rollout_success_rate;
use crate::nodes::{read_json, write_json, Ball, NodeController, NodeSeed, PlannerWorld, Synthesizer, Trained};
use crate::tree::{build_tree, prune, ControllerTree, NodeEntry, TreeRecord};

pub const MANIFEST_FILE: &str = "manifest.json";
pub const CONFIG_FILE: &str = "config.toml";
pub const TREE_FILE: &str = "tree.json";
pub const GRAPH_FILE: &str = "graph.json";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RunKind {
    Tree,
    Graph,
}

/// Outcome of executing one start state.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RouteRecord {
    pub start: Vec2,
    pub goal_node: usize,
    pub path: Vec<usize>,
    pub status: RunStatus,
    pub steps: usize,
    /// Normalized distance from the final state to the last node's center.
    pub final_error: f64,
    /// Closest approach to any obstacle center, if there are obstacles.
    pub min_obstacle_distance: Option<f64>,
    /// Trajectory CSV relative to the run directory.
    pub csv: String,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Timings {
    pub build_seconds: f64,
    pub goal_seconds: f64,
    pub route_seconds: f64,
}

/// Summary of a run. Everything except `timings` is a deterministic function
/// of the configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub kind: RunKind,
    pub config: RunConfig,
    pub node_count: usize,
    pub trained: usize,
    pub iterations: usize,
    pub nodes: Vec<NodeEntry>,
    /// Fraction of the coverage grid left uncovered (graphs only).
    pub uncovered: Option<f64>,
    pub goal_node: Option<usize>,
    pub routes: Vec<RouteRecord>,
    pub status: String,
    pub timings: Timings,
}

impl RunManifest {
    /// Manifest JSON with `timings` removed, for reproducibility comparisons.
    pub fn deterministic_json(&self) -> String {
        let mut value = serde_json::to_value(self).expect("manifest serializes");
        if let Some(map) = value.as_object_mut() {
            map.remove("timings");
        }
        serde_json::to_string_pretty(&value).expect("manifest serializes")
    }
}

fn create_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

fn world_of(cfg: &RunConfig) -> Result<PlannerWorld> {
    PlannerWorld::new(cfg.system.clone(), cfg.obstacles.clone())
}

fn save_nodes(dir: &Path, nodes: &[NodeController]) -> Result<()> {
    for n in nodes {
        n.save(&dir.join(crate::tree::node_dir_name(n.id)))?;
    }
    Ok(())
}

fn load_nodes(dir: &Path, entries: &[NodeEntry]) -> Result<Vec<NodeController>> {
    entries
        .iter()
        .map(|e| {
            let node = NodeController::load(&dir.join(&e.dir))?;
            if node.id != e.id || node.center != e.center || node.eta != e.eta {
                return Err(Error::Parse {
                    path: dir.join(&e.dir),
                    message: format!("node metadata disagrees with the run index for node {}", e.id),
                });
            }
            Ok(node)
        })
        .collect()
}

/// `rewards.csv` and `lyapunov_loss.csv` for all nodes.
pub fn write_curves(dir: &Path, nodes: &[NodeController]) -> Result<()> {
    let mut rewards = String::from("node_id,update_index,mean_episode_reward\n");
    let mut losses = String::from("node_id,epoch,loss\n");
    for n in nodes {
        for p in &n.reward_curve {
            rewards.push_str(&format!("{},{},{}\n", n.id, p.update_index, p.mean_episode_reward));
        }
        for (epoch, l) in n.loss_curve.iter().enumerate() {
            losses.push_str(&format!("{},{},{}\n", n.id, epoch, l));
        }
    }
    write_text(&dir.join("rewards.csv"), &rewards)?;
    write_text(&dir.join("lyapunov_loss.csv"), &losses)
}

fn write_trajectory(path: &Path, traj: &Trajectory) -> Result<()> {
    let mut file = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    traj.write_csv(&mut file).map_err(|e| Error::io(path, e))?;
    file.flush().map_err(|e| Error::io(path, e))
}

fn execute(
    cfg: &RunConfig,
    nodes: &[NodeController],
    path: &[usize],
    start: Vec2,
) -> Result<(Trajectory, RouteRecord)> {
    let seq: Vec<&NodeController> = path.iter().map(|&i| &nodes[i]).collect();
    let max_steps = cfg.executor.steps_per_node * seq.len();
    let traj = run_sequence(&cfg.system, &cfg.obstacles, &seq, start, cfg.executor.switch_tol, max_steps)?;
    let last = seq.last().expect("non-empty path");
    let record = RouteRecord {
        start,
        goal_node: last.id,
        path: path.to_vec(),
        status: traj.status,
        steps: traj.len() - 1,
        final_error: cfg.system.state_bounds.normalized_distance(traj.final_state(), last.center),
        min_obstacle_distance: cfg
            .obstacles
            .iter()
            .map(|o| traj.min_distance_to(o.center))
            .reduce(f64::min),
        csv: String::new(),
    };
    Ok((traj, record))
}

fn tree_manifest(cfg: &RunConfig, tree: &ControllerTree, routes: Vec<RouteRecord>, status: &str, timings: Timings) -> RunManifest {
    let record = TreeRecord::from_tree(tree);
    RunManifest {
        kind: RunKind::Tree,
        config: cfg.clone(),
        node_count: tree.nodes.len(),
        trained: tree.trained,
        iterations: tree.iterations,
        nodes: record.nodes,
        uncovered: None,
        goal_node: Some(0),
        routes,
        status: status.to_string(),
        timings,
    }
}

fn save_tree_run(dir: &Path, cfg: &RunConfig, tree: &ControllerTree, manifest: &RunManifest) -> Result<()> {
    create_dir(dir)?;
    write_text(&dir.join(CONFIG_FILE), &cfg.to_toml_string())?;
    write_json(&dir.join(TREE_FILE), &TreeRecord::from_tree(tree))?;
    save_nodes(dir, &tree.nodes)?;
    write_curves(dir, &tree.nodes)?;
    write_json(&dir.join(MANIFEST_FILE), manifest)
}

/// Result of a tree run: the tree, the executed route and the manifest.
#[derive(Debug, Clone)]
pub struct TreeRun {
    pub tree: ControllerTree,
    pub path: Vec<usize>,
    pub trajectory: Trajectory,
    pub manifest: RunManifest,
}

/// Builds a controller tree from `cfg.goal` back to `cfg.start`, prunes it,
/// executes the path and writes everything under `dir`. A coverage failure
/// still writes the partial tree before returning the error.
pub fn run_tpc(cfg: &RunConfig, dir: &Path) -> Result<TreeRun> {
    run_tpc_with(cfg, &Trained(cfg.synthesis()), dir)
}

/// [`run_tpc`] with a caller-supplied node synthesizer.
pub fn run_tpc_with(cfg: &RunConfig, synth: &dyn Synthesizer, dir: &Path) -> Result<TreeRun> {
    cfg.validate()?;
    let world = world_of(cfg)?;
    let t0 = Instant::now();
    let built = build_tree(&world, cfg.start, cfg.goal, synth, &cfg.sampling, cfg.seed);
    let mut timings = Timings {
        build_seconds: t0.elapsed().as_secs_f64(),
        ..Timings::default()
    };
    let tree = match built {
        Ok(tree) => tree,
        Err(Error::TreeCoverage { iterations, partial }) => {
            let manifest = tree_manifest(cfg, &partial, Vec::new(), "coverage-failed", timings);
            save_tree_run(dir, cfg, &partial, &manifest)?;
            return Err(Error::TreeCoverage { iterations, partial });
        }
        Err(e) => return Err(e),
    };
    info!("tree built with {} nodes ({} trained)", tree.nodes.len(), tree.trained);

    let path = tree.prune(cfg.start)?;
    let t1 = Instant::now();
    let (trajectory, mut record) = execute(cfg, &tree.nodes, &path, cfg.start)?;
    timings.route_seconds = t1.elapsed().as_secs_f64();
    record.csv = "trajectory.csv".into();
    let status = trajectory.status.to_string();
    let manifest = tree_manifest(cfg, &tree, vec![record], &status, timings);

    save_tree_run(dir, cfg, &tree, &manifest)?;
    write_json(&dir.join("path.json"), &path)?;
    write_trajectory(&dir.join("trajectory.csv"), &trajectory)?;
    Ok(TreeRun {
        tree,
        path,
        trajectory,
        manifest,
    })
}

fn graph_manifest(cfg: &RunConfig, graph: &ControllerGraph, routes: Vec<RouteRecord>, status: &str, timings: Timings) -> RunManifest {
    let record = GraphRecord::from_graph(graph);
    RunManifest {
        kind: RunKind::Graph,
        config: cfg.clone(),
        node_count: graph.nodes.len(),
        trained: graph.trained,
        iterations: graph.iterations,
        nodes: record.nodes,
        uncovered: Some(graph.uncovered),
        goal_node: graph.goal_node,
        routes,
        status: status.to_string(),
        timings,
    }
}

/// A graph run loaded from or written to disk.
#[derive(Debug, Clone)]
pub struct GraphRun {
    pub config: RunConfig,
    pub graph: ControllerGraph,
    pub manifest: RunManifest,
    pub trajectories: Vec<Trajectory>,
}

impl GraphRun {
    pub fn save(&self, dir: &Path) -> Result<()> {
        create_dir(dir)?;
        write_text(&dir.join(CONFIG_FILE), &self.config.to_toml_string())?;
        write_json(&dir.join(GRAPH_FILE), &GraphRecord::from_graph(&self.graph))?;
        save_nodes(dir, &self.graph.nodes)?;
        write_curves(dir, &self.graph.nodes)?;
        write_json(&dir.join(MANIFEST_FILE), &self.manifest)
    }

    pub fn load(dir: &Path) -> Result<Self> {
        let manifest: RunManifest = read_json(&dir.join(MANIFEST_FILE))?;
        if manifest.kind != RunKind::Graph {
            return Err(Error::Parse {
                path: dir.join(MANIFEST_FILE),
                message: "run directory does not hold a graph".into(),
            });
        }
        let record: GraphRecord = read_json(&dir.join(GRAPH_FILE))?;
        let nodes = load_nodes(dir, &record.nodes)?;
        Ok(Self {
            config: manifest.config.clone(),
            graph: record.into_graph(nodes),
            manifest,
            trajectories: Vec::new(),
        })
    }

    fn refresh_manifest(&mut self, status: &str) {
        let routes = std::mem::take(&mut self.manifest.routes);
        let timings = std::mem::take(&mut self.manifest.timings);
        self.manifest = graph_manifest(&self.config, &self.graph, routes, status, timings);
    }

    /// Replaces the goal node. Only the goal node is trained.
    pub fn attach_goal(&mut self, goal: Vec2) -> Result<usize> {
        let synth = Trained(self.config.synthesis());
        self.attach_goal_with(goal, &synth)
    }

    pub fn attach_goal_with(&mut self, goal: Vec2, synth: &dyn Synthesizer) -> Result<usize> {
        let world = world_of(&self.config)?;
        let t0 = Instant::now();
        let seed = NodeSeed {
            master: self.config.seed,
            stream: self.graph.trained as u64 + 1,
        };
        let id = self.graph.attach_goal(&world, goal, synth, seed)?;
        self.config.goal = goal;
        self.manifest.routes.clear();
        self.manifest.timings.goal_seconds = t0.elapsed().as_secs_f64();
        self.refresh_manifest("goal-attached");
        Ok(id)
    }

    /// Routes and executes every start; trajectories go to `dir/trajectories/`.
    pub fn route(&mut self, starts: &[Vec2], dir: &Path) -> Result<Vec<RouteRecord>> {
        let t0 = Instant::now();
        let traj_dir = dir.join("trajectories");
        create_dir(&traj_dir)?;
        let mut records = Vec::new();
        self.trajectories.clear();
        for (k, &start) in starts.iter().enumerate() {
            let path = self.graph.route(start)?;
            let (traj, mut record) = execute(&self.config, &self.graph.nodes, &path, start)?;
            record.csv = format!("trajectories/route_{k}.csv");
            write_trajectory(&dir.join(&record.csv), &traj)?;
            records.push(record);
            self.trajectories.push(traj);
        }
        self.config.starts = starts.to_vec();
        self.manifest.routes = records.clone();
        self.manifest.timings.route_seconds = t0.elapsed().as_secs_f64();
        let status = if records.iter().all(|r| r.status == RunStatus::Reached) {
            "reached"
        } else {
            "execution-failed"
        };
        self.refresh_manifest(status);
        Ok(records)
    }
}

/// Covers the state box with nodes and writes the goal-less graph to `dir`.
pub fn run_graph_build(cfg: &RunConfig, dir: &Path) -> Result<GraphRun> {
    run_graph_build_with(cfg, &Trained(cfg.synthesis()), dir)
}

/// [`run_graph_build`] with a caller-supplied node synthesizer.
pub fn run_graph_build_with(cfg: &RunConfig, synth: &dyn Synthesizer, dir: &Path) -> Result<GraphRun> {
    cfg.validate()?;
    let world = world_of(cfg)?;
    let t0 = Instant::now();
    let built = build_graph(&world, synth, &cfg.sampling, &cfg.graph, cfg.seed);
    let timings = Timings {
        build_seconds: t0.elapsed().as_secs_f64(),
        ..Timings::default()
    };
    let mut config = cfg.clone();
    config.mode = Mode::Gpc;
    match built {
        Ok(graph) => {
            let status = match graph.status {
                BuildStatus::Covered => "covered",
                BuildStatus::Exhausted => "exhausted",
            };
            info!("graph built with {} nodes, {:.4} uncovered", graph.nodes.len(), graph.uncovered);
            let manifest = graph_manifest(&config, &graph, Vec::new(), status, timings);
            let run = GraphRun {
                config,
                graph,
                manifest,
                trajectories: Vec::new(),
            };
            run.save(dir)?;
            Ok(run)
        }
        Err(Error::GraphCoverage {
            iterations,
            uncovered,
            partial,
        }) => {
            let manifest = graph_manifest(&config, &partial, Vec::new(), "coverage-failed", timings);
            let run = GraphRun {
                config,
                graph: (*partial).clone(),
                manifest,
                trajectories: Vec::new(),
            };
            run.save(dir)?;
            Err(Error::GraphCoverage {
                iterations,
                uncovered,
                partial,
            })
        }
        Err(e) => Err(e),
    }
}

/// Full graph pipeline: build, attach `cfg.goal`, route every `cfg.starts`.
pub fn run_gpc(cfg: &RunConfig, dir: &Path) -> Result<GraphRun> {
    run_gpc_with(cfg, &Trained(cfg.synthesis()), dir)
}

/// [`run_gpc`] with a caller-supplied node synthesizer.
pub fn run_gpc_with(cfg: &RunConfig, synth: &dyn Synthesizer, dir: &Path) -> Result<GraphRun> {
    let mut run = run_graph_build_with(cfg, synth, dir)?;
    run.attach_goal_with(cfg.goal, synth)?;
    run.route(&cfg.starts.clone(), dir)?;
    run.save(dir)?;
    Ok(run)
}

/// Any run directory, loaded with its node artifacts.
#[derive(Debug, Clone)]
pub enum LoadedRun {
    Tree {
        config: RunConfig,
        record: TreeRecord,
        nodes: Vec<NodeController>,
        manifest: RunManifest,
    },
    Graph(GraphRun),
}

impl LoadedRun {
    pub fn load(dir: &Path) -> Result<Self> {
        let manifest: RunManifest = read_json(&dir.join(MANIFEST_FILE))?;
        match manifest.kind {
            RunKind::Graph => Ok(LoadedRun::Graph(GraphRun::load(dir)?)),
            RunKind::Tree => {
                let record: TreeRecord = read_json(&dir.join(TREE_FILE))?;
                let nodes = load_nodes(dir, &record.nodes)?;
                Ok(LoadedRun::Tree {
                    config: manifest.config.clone(),
                    record,
                    nodes,
                    manifest,
                })
            }
        }
    }

    pub fn config(&self) -> &RunConfig {
        match self {
            LoadedRun::Tree { config, .. } => config,
            LoadedRun::Graph(run) => &run.config,
        }
    }

    pub fn nodes(&self) -> &[NodeController] {
        match self {
            LoadedRun::Tree { nodes, .. } => nodes,
            LoadedRun::Graph(run) => &run.graph.nodes,
        }
    }

    /// Controller sequence a start state would follow.
    pub fn plan(&self, start: Vec2) -> Result<Vec<usize>> {
        match self {
            LoadedRun::Tree { record, .. } => prune(&record.parents(), &record.balls(), start),
            LoadedRun::Graph(run) => run.graph.route(start),
        }
    }

    /// Plans and executes from `start` without touching the run directory.
    pub fn simulate(&self, start: Vec2) -> Result<(Trajectory, RouteRecord)> {
        let path = self.plan(start)?;
        execute(self.config(), self.nodes(), &path, start)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerifyReport {
    pub checks: Vec<Check>,
}

impl VerifyReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn render(&self) -> String {
        let mut out = String::new();
        for c in &self.checks {
            out.push_str(&format!("{:<4}  {:<28} {}\n", if c.passed { "PASS" } else { "FAIL" }, c.name, c.detail));
        }
        out
    }

    fn push(&mut self, name: &str, passed: bool, detail: String) {
        self.checks.push(Check {
            name: name.to_string(),
            passed,
            detail,
        });
    }
}

/// Options for [`verify_run`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VerifyOptions {
    /// Rollouts per node for the region check; 0 skips it.
    pub rollouts: usize,
    pub radius_fraction: f64,
    pub tol: f64,
    pub max_steps: usize,
    pub min_success: f64,
    pub seed: u64,
}

impl Default for VerifyOptions {
    fn default() -> Self {
        Self {
            rollouts: 200,
            radius_fraction: 0.9,
            tol: 0.01,
            max_steps: 900,
            min_success: 0.95,
            seed: 0,
        }
    }
}

/// Per-node closed-loop rollout success rates from starts within
/// `radius_fraction·η` of each center.
pub fn rollout_rates(cfg: &RunConfig, nodes: &[NodeController], opts: &VerifyOptions) -> Result<Vec<f64>> {
    nodes
        .iter()
        .map(|n| {
            let mut rng = ChaCha8Rng::seed_from_u64(opts.seed ^ n.id as u64);
            rollout_success_rate(
                &cfg.system,
                &n.policy,
                n.center,
                opts.radius_fraction * n.eta,
                opts.rollouts,
                opts.tol,
                opts.max_steps,
                &mut rng,
            )
        })
        .collect()
}

/// Re-checks every persisted planner invariant of the run in `dir`.
pub fn verify_run(dir: &Path, opts: &VerifyOptions) -> Result<VerifyReport> {
    let run = LoadedRun::load(dir)?;
    let cfg = run.config().clone();
    let nodes = run.nodes();
    let balls: Vec<Ball> = nodes.iter().map(NodeController::ball).collect();
    let mut report = VerifyReport { checks: Vec::new() };

    // goal nodes are placed by the user, not sampled
    let goal = match &run {
        LoadedRun::Tree { .. } => Some(0),
        LoadedRun::Graph(g) => g.graph.goal_node,
    };
    let sampled: Vec<usize> = (0..nodes.len()).filter(|&i| Some(i) != goal).collect();

    let mut close = 0;
    for (a, &i) in sampled.iter().enumerate() {
        for &j in &sampled[a + 1..] {
            if distance(nodes[i].center, nodes[j].center) < cfg.sampling.rho {
                close += 1;
            }
        }
    }
    report.push(
        "center separation",
        close == 0,
        format!("{close} pairs closer than rho = {}", cfg.sampling.rho),
    );

    let near = sampled
        .iter()
        .filter(|&&i| cfg.obstacles.iter().any(|o| distance(nodes[i].center, o.center) < cfg.sampling.alpha))
        .count();
    report.push(
        "obstacle clearance",
        near == 0,
        format!("{near} centers within alpha = {}", cfg.sampling.alpha),
    );

    let roa = &cfg.roa;
    let bad_eta = nodes
        .iter()
        .filter(|n| {
            let k = (n.eta / roa.delta_eta).round();
            (n.eta - k * roa.delta_eta).abs() > 1e-9 || n.eta <= roa.eta_lb || n.eta > roa.eta_ub + 1e-9
        })
        .count();
    report.push(
        "certified radii",
        bad_eta == 0,
        format!("{bad_eta} radii off the delta_eta grid or outside (eta_lb, eta_ub]"),
    );

    match &run {
        LoadedRun::Tree { record, .. } => {
            let parents = record.parents();
            let roots = parents.iter().filter(|p| p.is_none()).count();
            let broken = parents
                .iter()
                .enumerate()
                .filter(|(i, p)| p.is_some_and(|p| p >= *i || !balls[p].contains(nodes[*i].center)))
                .count();
            report.push(
                "parent containment",
                roots == 1 && parents[0].is_none() && broken == 0,
                format!("{roots} roots, {broken} children outside their parent's region"),
            );
            let covered = balls.iter().any(|b| b.contains(record.start));
            report.push("start covered", covered, format!("start ({}, {})", record.start[0], record.start[1]));
        }
        LoadedRun::Graph(g) => {
            let expected = build_edges(&balls, g.graph.edge_weight);
            let matches = expected == g.graph.edges;
            report.push(
                "edge rule",
                matches,
                format!("{} stored edges, {} recomputed", g.graph.edges.len(), expected.len()),
            );
            let connected = strongly_connected(nodes.len(), &g.graph.edges);
            report.push("strong connectivity", connected, format!("{} nodes", nodes.len()));
        }
    }

    if opts.rollouts > 0 {
        let rates = rollout_rates(&cfg, nodes, opts)?;
        let failing: Vec<usize> = rates
            .iter()
            .enumerate()
            .filter(|(_, r)| **r < opts.min_success)
            .map(|(i, _)| i)
            .collect();
        let worst = rates.iter().cloned().fold(1.0, f64::min);
        report.push(
            "region rollouts",
            failing.is_empty(),
            format!("worst success rate {worst:.3}; failing nodes {failing:?}"),
        );
    }
    Ok(report)
}

/// Writes `nodes.csv`, `edges.csv`, `rewards.csv` and `lyapunov_loss.csv`
/// for the run in `dir` into `out`.
pub fn export_run(dir: &Path, out: &Path) -> Result<Vec<PathBuf>> {
    let run = LoadedRun::load(dir)?;
    create_dir(out)?;
    let nodes = run.nodes();
    let mut text = String::from("node_id,x1,x2,eta,parent\n");
    for n in nodes {
        let parent = match &run {
            LoadedRun::Tree { record, .. } => record.nodes[n.id].parent.map(|p| p.to_string()).unwrap_or_default(),
            LoadedRun::Graph(_) => String::new(),
        };
        text.push_str(&format!("{},{},{},{},{}\n", n.id, n.center[0], n.center[1], n.eta, parent));
    }
    write_text(&out.join("nodes.csv"), &text)?;
    let edges = match &run {
        LoadedRun::Tree { record, .. } => record
            .nodes
            .iter()
            .filter_map(|e| e.parent.map(|p| (e.id, p, distance(e.center, record.nodes[p].center))))
            .collect::<Vec<_>>(),
        LoadedRun::Graph(g) => g.graph.edges.iter().map(|e| (e.from, e.to, e.weight)).collect(),
    };
    let mut text = String::from("from,to,weight\n");
    for (a, b, w) in edges {
        text.push_str(&format!("{a},{b},{w}\n"));
    }
    write_text(&out.join("edges.csv"), &text)?;
    write_curves(out, nodes)?;
    Ok(["nodes.csv", "edges.csv", "rewards.csv", "lyapunov_loss.csv"]
        .iter()
        .map(|f| out.join(f))
        .collect())
}
