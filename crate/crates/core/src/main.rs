use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use log::error;

use lyagraph::config::{Mode, RunConfig};
use lyagraph::dynamics::{Obstacle, Vec2};
use lyagraph::executor::RunStatus;
use lyagraph::run::{export_run, run_graph_build, run_tpc, verify_run, GraphRun, LoadedRun, VerifyOptions};
use lyagraph::Error;

const EXIT_VALIDATION: u8 = 2;
const EXIT_COVERAGE: u8 = 3;
const EXIT_EXECUTION: u8 = 4;

#[derive(Parser)]
#[command(name = "lyagraph", version, about = "Plan with trees and graphs of certified RL controllers")]
struct Cli {
    /// Worker threads for rollout collection (results do not depend on it).
    #[arg(long, global = true)]
    threads: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Build a controller tree from the goal back to the start and execute it.
    Tpc(PlanArgs),
    /// Build, extend and route a space-covering controller graph.
    #[command(subcommand)]
    Graph(GraphCommand),
    /// Execute a stored tree or graph from a new start state.
    Simulate {
        #[arg(long)]
        run: PathBuf,
        #[arg(long, value_parser = parse_point, allow_hyphen_values = true)]
        start: Vec2,
        /// Trajectory CSV destination (stdout if omitted).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Re-check every stored invariant of a run directory.
    Verify {
        #[arg(long)]
        run: PathBuf,
        /// Closed-loop rollouts per node for the region check (0 skips it).
        #[arg(long, default_value_t = 200)]
        rollouts: usize,
    },
    /// Write node, edge and training-curve CSVs for a run.
    Export {
        #[arg(long)]
        run: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Subcommand)]
enum GraphCommand {
    /// Cover the state box with node controllers.
    Build(PlanArgs),
    /// Train a goal node and link it into an existing graph.
    AttachGoal {
        #[arg(long)]
        graph: PathBuf,
        #[arg(long, value_parser = parse_point, allow_hyphen_values = true)]
        goal: Vec2,
    },
    /// Route and execute start states through a graph with a goal.
    Route {
        #[arg(long)]
        graph: PathBuf,
        #[arg(long = "start", value_parser = parse_point, required = true, allow_hyphen_values = true)]
        starts: Vec<Vec2>,
    },
}

#[derive(Args)]
struct PlanArgs {
    /// TOML run configuration; built-in defaults otherwise.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, value_parser = parse_point, allow_hyphen_values = true)]
    goal: Option<Vec2>,
    #[arg(long, value_parser = parse_point, allow_hyphen_values = true)]
    start: Option<Vec2>,
    /// Obstacle as `x,y,r`; repeatable.
    #[arg(long = "obstacle", value_parser = parse_obstacle, allow_hyphen_values = true)]
    obstacles: Vec<Obstacle>,
    #[arg(long)]
    alpha: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
    /// PPO timesteps per node.
    #[arg(long)]
    budget: Option<usize>,
    /// Run directory (defaults to `$LYAGRAPH_OUT/<command>`).
    #[arg(long)]
    out: Option<PathBuf>,
}

impl PlanArgs {
    fn config(&self, mode: Mode) -> Result<RunConfig, Error> {
        let mut cfg = match &self.config {
            Some(path) => RunConfig::load(path)?,
            None => RunConfig::default(),
        };
        cfg.mode = mode;
        if let Some(g) = self.goal {
            cfg.goal = g;
        }
        if let Some(s) = self.start {
            cfg.start = s;
        }
        if !self.obstacles.is_empty() {
            cfg.obstacles = self.obstacles.clone();
        }
        if let Some(a) = self.alpha {
            cfg.sampling.alpha = a;
        }
        if let Some(s) = self.seed {
            cfg.seed = s;
        }
        if let Some(b) = self.budget {
            cfg.ppo.total_timesteps = b;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    fn out_dir(&self, default_name: &str) -> PathBuf {
        self.out.clone().unwrap_or_else(|| {
            let root = std::env::var_os("LYAGRAPH_OUT").map(PathBuf::from).unwrap_or_else(|| "runs".into());
            root.join(default_name)
        })
    }
}

fn parse_numbers(s: &str, n: usize) -> Result<Vec<f64>, String> {
    let values: Vec<f64> = s
        .split(',')
        .map(|p| p.trim().parse::<f64>().map_err(|e| format!("{p:?}: {e}")))
        .collect::<Result<_, _>>()?;
    if values.len() != n || values.iter().any(|v| !v.is_finite()) {
        return Err(format!("expected {n} comma-separated finite numbers, got {s:?}"));
    }
    Ok(values)
}

fn parse_point(s: &str) -> Result<Vec2, String> {
    let v = parse_numbers(s, 2)?;
    Ok([v[0], v[1]])
}

fn parse_obstacle(s: &str) -> Result<Obstacle, String> {
    let v = parse_numbers(s, 3)?;
    Ok(Obstacle {
        center: [v[0], v[1]],
        radius: v[2],
    })
}

fn exit_code(err: &Error) -> u8 {
    match err {
        Error::Config(_) | Error::Parse { .. } | Error::Budget { .. } | Error::OutsideRegion(..) => EXIT_VALIDATION,
        Error::TreeCoverage { .. } | Error::GraphCoverage { .. } | Error::Uncovered(..) | Error::GoalRejected(..) => {
            EXIT_COVERAGE
        }
        Error::NoPath { .. } => EXIT_EXECUTION,
        _ => 1,
    }
}

fn status_code(statuses: impl IntoIterator<Item = RunStatus>) -> ExitCode {
    if statuses.into_iter().all(|s| s == RunStatus::Reached) {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(EXIT_EXECUTION)
    }
}

fn print_routes(records: &[lyagraph::run::RouteRecord]) {
    for r in records {
        println!(
            "start ({}, {}) -> path {:?}: {} after {} steps, final error {:.5}",
            r.start[0], r.start[1], r.path, r.status, r.steps, r.final_error
        );
    }
}

fn run(cli: Cli) -> Result<ExitCode, Error> {
    match cli.command {
        Command::Tpc(args) => {
            let cfg = args.config(Mode::Tpc)?;
            let dir = args.out_dir("tpc");
            let result = run_tpc(&cfg, &dir)?;
            println!(
                "tree: {} nodes ({} trained), path {:?}; artifacts in {}",
                result.tree.nodes.len(),
                result.tree.trained,
                result.path,
                dir.display()
            );
            print_routes(&result.manifest.routes);
            Ok(status_code([result.trajectory.status]))
        }
        Command::Graph(GraphCommand::Build(args)) => {
            let cfg = args.config(Mode::Gpc)?;
            let dir = args.out_dir("graph");
            let run = run_graph_build(&cfg, &dir)?;
            println!(
                "graph: {} nodes, {} edges, {:.4} of the grid uncovered; artifacts in {}",
                run.graph.nodes.len(),
                run.graph.edges.len(),
                run.graph.uncovered,
                dir.display()
            );
            Ok(ExitCode::SUCCESS)
        }
        Command::Graph(GraphCommand::AttachGoal { graph, goal }) => {
            let mut run = GraphRun::load(&graph)?;
            let id = run.attach_goal(goal)?;
            run.save(&graph)?;
            println!(
                "goal node {id} at ({}, {}) with eta {}; {} edges",
                goal[0], goal[1], run.graph.nodes[id].eta, run.graph.edges.len()
            );
            Ok(ExitCode::SUCCESS)
        }
        Command::Graph(GraphCommand::Route { graph, starts }) => {
            let mut run = GraphRun::load(&graph)?;
            let records = run.route(&starts, &graph)?;
            run.save(&graph)?;
            print_routes(&records);
            Ok(status_code(records.iter().map(|r| r.status)))
        }
        Command::Simulate { run, start, out } => {
            let loaded = LoadedRun::load(&run)?;
            let (traj, record) = loaded.simulate(start)?;
            match out {
                Some(path) => {
                    let file = std::fs::File::create(&path).map_err(|e| Error::Io { path: path.clone(), source: e })?;
                    traj.write_csv(file).map_err(|e| Error::Io { path, source: e })?;
                }
                None => traj
                    .write_csv(std::io::stdout().lock())
                    .map_err(|e| Error::Io { path: "<stdout>".into(), source: e })?,
            }
            eprintln!("path {:?}: {} after {} steps", record.path, record.status, record.steps);
            Ok(status_code([record.status]))
        }
        Command::Verify { run, rollouts } => {
            let report = verify_run(
                &run,
                &VerifyOptions {
                    rollouts,
                    ..VerifyOptions::default()
                },
            )?;
            print!("{}", report.render());
            Ok(if report.passed() {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(EXIT_VALIDATION)
            })
        }
        Command::Export { run, out } => {
            for path in export_run(&run, &out)? {
                println!("{}", path.display());
            }
            Ok(ExitCode::SUCCESS)
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    if let Some(n) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            error!("cannot configure thread pool: {e}");
            return ExitCode::from(EXIT_VALIDATION);
        }
    }
    match run(cli) {
        Ok(code) => code,
        Err(e) => {
            error!("{e}");
            ExitCode::from(exit_code(&e))
        }
    }
}

