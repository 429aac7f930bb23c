//! Candidate sampling and synthesis of individual node controllers.

use std::fs;
use std::path::Path;

use log::{debug, info};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::dynamics::{distance, obstacle_clear, observation, Obstacle, RewardConfig, SystemConfig, Vec2};
use crate::error::{Error, Result};
use crate::lyapunov::{certify_radius, train_lyapunov, LyapunovConfig, LyapunovNet, RoaConfig, ShellResult};
use crate::ppo::{train_policy, EnvSpec, GaussianPolicy, PpoConfig, RewardPoint};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SamplingConfig {
    /// Minimum distance between node centers.
    pub rho: f64,
    /// Minimum distance from a node center to any obstacle center.
    pub alpha: f64,
    /// Planner iterations.
    pub max_iters: usize,
    /// Exclusion radius around rejected candidates.
    pub reject_radius: f64,
    /// Consecutive failed draws after which sampling gives up.
    pub max_draws: usize,
}

impl Default for SamplingConfig {
    fn default() -> Self {
        Self {
            rho: 1.2,
            alpha: 2.5,
            max_iters: 500,
            reject_radius: 1.2,
            max_draws: 500,
        }
    }
}

impl SamplingConfig {
    /// Checks `η_ub/2 < ρ < η_lb` and, with obstacles, `α > η_ub/2 + r_obs`.
    pub fn validate(&self, roa: &RoaConfig, obstacles: &[Obstacle]) -> Result<()> {
        if !(roa.eta_ub / 2.0 < self.rho && self.rho < roa.eta_lb) {
            return Err(Error::Config(format!(
                "rho must satisfy eta_ub/2 < rho < eta_lb ({} < {} < {})",
                roa.eta_ub / 2.0,
                self.rho,
                roa.eta_lb
            )));
        }
        if let Some(r) = obstacles.iter().map(|o| o.radius).reduce(f64::max) {
            if self.alpha <= roa.eta_ub / 2.0 + r {
                return Err(Error::Config(format!(
                    "alpha must exceed eta_ub/2 + obstacle radius ({} <= {})",
                    self.alpha,
                    roa.eta_ub / 2.0 + r
                )));
            }
        }
        if self.max_iters == 0 || self.max_draws == 0 || !(self.reject_radius >= 0.0) {
            return Err(Error::Config("sampling counts must be positive".into()));
        }
        Ok(())
    }
}

/// The planning region and what must be avoided in it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlannerWorld {
    pub system: SystemConfig,
    pub obstacles: Vec<Obstacle>,
}

impl PlannerWorld {
    pub fn new(system: SystemConfig, obstacles: Vec<Obstacle>) -> Result<Self> {
        system.validate()?;
        for o in &obstacles {
            o.validate()?;
        }
        Ok(Self { system, obstacles })
    }

    pub fn in_obstacle(&self, x: Vec2) -> bool {
        self.obstacles.iter().any(|o| o.contains(x))
    }
}

/// Centers of rejected candidates; nothing is sampled near them again.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct RejectSet {
    pub centers: Vec<Vec2>,
}

impl RejectSet {
    pub fn insert(&mut self, x: Vec2) {
        self.centers.push(x);
    }

    pub fn blocks(&self, x: Vec2, radius: f64) -> bool {
        self.centers.iter().any(|&c| distance(x, c) < radius)
    }
}

/// A ball `‖x − center‖ ≤ eta` in original units.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Ball {
    pub center: Vec2,
    pub eta: f64,
}

impl Ball {
    pub fn contains(&self, x: Vec2) -> bool {
        distance(x, self.center) <= self.eta
    }
}

/// Index of the closest ball containing `x`; ties go to the lowest index.
pub fn nearest_containing(balls: &[Ball], x: Vec2) -> Option<usize> {
    let mut best: Option<(usize, f64)> = None;
    for (i, b) in balls.iter().enumerate() {
        let d = distance(x, b.center);
        if d <= b.eta && best.is_none_or(|(_, bd)| d < bd) {
            best = Some((i, d));
        }
    }
    best.map(|(i, _)| i)
}

/// Draws uniform points in the state box until one is an acceptable node
/// center, or returns `None` after `cfg.max_draws` failures.
pub fn sample_candidate<R: Rng + ?Sized>(
    world: &PlannerWorld,
    balls: &[Ball],
    rejects: &RejectSet,
    cfg: &SamplingConfig,
    require_connected: bool,
    rng: &mut R,
) -> Option<Vec2> {
    let bounds = &world.system.state_bounds;
    for _ in 0..cfg.max_draws {
        let x = bounds.sample(rng);
        if candidate_ok(world, balls, rejects, cfg, require_connected, x) {
            return Some(x);
        }
    }
    None
}

/// The acceptance test applied by [`sample_candidate`].
pub fn candidate_ok(
    world: &PlannerWorld,
    balls: &[Ball],
    rejects: &RejectSet,
    cfg: &SamplingConfig,
    require_connected: bool,
    x: Vec2,
) -> bool {
    world.system.state_bounds.contains(x)
        && balls.iter().all(|b| distance(x, b.center) >= cfg.rho)
        && obstacle_clear(x, &world.obstacles, cfg.alpha)
        && !rejects.blocks(x, cfg.reject_radius)
        && (!require_connected || balls.iter().any(|b| b.contains(x)))
}

/// Everything needed to synthesize one node.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SynthesisConfig {
    pub ppo: PpoConfig,
    pub lyapunov: LyapunovConfig,
    pub roa: RoaConfig,
    pub reward: RewardConfig,
    pub horizon: usize,
    /// Normalized distance the closed loop started at the center must settle
    /// within; the executor's switching tolerance.
    pub settle_tol: f64,
}

impl Default for SynthesisConfig {
    fn default() -> Self {
        Self {
            ppo: PpoConfig::default(),
            lyapunov: LyapunovConfig::default(),
            roa: RoaConfig::default(),
            reward: RewardConfig::default(),
            horizon: 300,
            settle_tol: 0.01,
        }
    }
}

impl SynthesisConfig {
    pub fn validate(&self) -> Result<()> {
        self.ppo.validate()?;
        self.lyapunov.validate()?;
        self.roa.validate()?;
        if self.horizon == 0 {
            return Err(Error::Config("horizon must be positive".into()));
        }
        if !(self.settle_tol > 0.0) {
            return Err(Error::Config("settle_tol must be positive".into()));
        }
        Ok(())
    }
}

/// Where a node's randomness comes from: ChaCha8 seeded with `master`,
/// on stream `stream`. Stream 0 is reserved for the planner's own sampling.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct NodeSeed {
    pub master: u64,
    pub stream: u64,
}

impl NodeSeed {
    pub fn rng(&self) -> ChaCha8Rng {
        seeded_stream(self.master, self.stream)
    }
}

pub fn seeded_stream(master: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(master);
    rng.set_stream(stream);
    rng
}

/// A trained, certified local controller.
#[derive(Debug, Clone, PartialEq)]
pub struct NodeController {
    pub id: usize,
    pub center: Vec2,
    pub policy: GaussianPolicy,
    pub lyapunov: LyapunovNet,
    pub eta: f64,
    pub seed: NodeSeed,
    pub reward_curve: Vec<RewardPoint>,
    pub loss_curve: Vec<f64>,
    pub shells: Vec<ShellResult>,
}

impl NodeController {
    pub fn ball(&self) -> Ball {
        Ball {
            center: self.center,
            eta: self.eta,
        }
    }

    pub fn meta(&self) -> NodeMeta {
        NodeMeta {
            id: self.id,
            center: self.center,
            eta: self.eta,
            seed: self.seed,
            reward_curve: self.reward_curve.clone(),
            loss_curve: self.loss_curve.clone(),
            shells: self.shells.clone(),
        }
    }

    /// Writes `policy.json`, `lyapunov.json` and `meta.json` into `dir`.
    pub fn save(&self, dir: &Path) -> Result<()> {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        write_json(&dir.join("policy.json"), &self.policy)?;
        write_json(&dir.join("lyapunov.json"), &self.lyapunov)?;
        write_json(&dir.join("meta.json"), &self.meta())
    }

    pub fn load(dir: &Path) -> Result<Self> {
        let meta: NodeMeta = read_json(&dir.join("meta.json"))?;
        let policy: GaussianPolicy = read_json(&dir.join("policy.json"))?;
        let lyapunov: LyapunovNet = read_json(&dir.join("lyapunov.json"))?;
        Ok(Self {
            id: meta.id,
            center: meta.center,
            policy,
            lyapunov,
            eta: meta.eta,
            seed: meta.seed,
            reward_curve: meta.reward_curve,
            loss_curve: meta.loss_curve,
            shells: meta.shells,
        })
    }
}

/// Contents of a node's `meta.json`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NodeMeta {
    pub id: usize,
    pub center: Vec2,
    pub eta: f64,
    pub seed: NodeSeed,
    pub reward_curve: Vec<RewardPoint>,
    pub loss_curve: Vec<f64>,
    pub shells: Vec<ShellResult>,
}

pub(crate) fn write_json<T: Serialize + ?Sized>(path: &Path, value: &T) -> Result<()> {
    let text = serde_json::to_string_pretty(value).map_err(|source| Error::Json {
        path: path.to_path_buf(),
        source,
    })?;
    fs::write(path, text + "\n").map_err(|e| Error::io(path, e))
}

pub(crate) fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    serde_json::from_str(&text).map_err(|source| Error::Json {
        path: path.to_path_buf(),
        source,
    })
}

#[derive(Debug, Clone)]
pub enum NodeOutcome {
    Accepted(Box<NodeController>),
    Rejected { center: Vec2, eta: f64 },
}

/// Produces the controller for a candidate center. The planners only see
/// this interface.
pub trait Synthesizer {
    fn synthesize(&self, world: &PlannerWorld, id: usize, center: Vec2, seed: NodeSeed) -> Result<NodeOutcome>;

    /// Outer radius used when excluding obstacle neighbourhoods from coverage.
    fn eta_ub(&self) -> f64;
}

/// The learned pipeline: PPO policy, Lyapunov fit and radius certification.
#[derive(Debug, Clone, PartialEq)]
pub struct Trained(pub SynthesisConfig);

impl Synthesizer for Trained {
    fn synthesize(&self, world: &PlannerWorld, id: usize, center: Vec2, seed: NodeSeed) -> Result<NodeOutcome> {
        node_controller(world, id, center, &self.0, seed)
    }

    fn eta_ub(&self) -> f64 {
        self.0.roa.eta_ub
    }
}

/// Trains a policy at `center`, fits a Lyapunov function and certifies its
/// radius. The node is accepted iff the radius exceeds `eta_lb` and the closed
/// loop started at the center settles within `settle_tol` of it.
pub fn node_controller(
    world: &PlannerWorld,
    id: usize,
    center: Vec2,
    cfg: &SynthesisConfig,
    seed: NodeSeed,
) -> Result<NodeOutcome> {
    let mut rng = seed.rng();
    let spec = EnvSpec {
        system: world.system.clone(),
        target: center,
        horizon: cfg.horizon,
        reward: cfg.reward,
        reset_radius: cfg.roa.eta_ub,
    };
    let trained = train_policy(&spec, &cfg.ppo, &mut rng)?;
    let (lyapunov, loss_curve) =
        train_lyapunov(&world.system, &trained.policy, center, cfg.roa.tested_band(), &cfg.lyapunov, &mut rng)?;
    let (eta, shells) = certify_radius(
        &world.system,
        &trained.policy,
        &lyapunov,
        &cfg.roa,
        cfg.lyapunov.fd_step,
        &mut rng,
    )?;
    let offset = settling_offset(&world.system, &trained.policy, center, 3 * cfg.horizon)?;
    debug!(
        "node candidate ({:.3}, {:.3}) certified eta {eta}, settles {offset:.4} from center",
        center[0], center[1]
    );
    if eta > cfg.roa.eta_lb && offset < cfg.settle_tol {
        info!("accepted node {id} at ({:.3}, {:.3}) with eta {eta}", center[0], center[1]);
        Ok(NodeOutcome::Accepted(Box::new(NodeController {
            id,
            center,
            policy: trained.policy,
            lyapunov,
            eta,
            seed,
            reward_curve: trained.reward_curve,
            loss_curve,
            shells,
        })))
    } else {
        info!(
            "rejected candidate ({:.3}, {:.3}) with eta {eta}, settling offset {offset:.4}",
            center[0], center[1]
        );
        Ok(NodeOutcome::Rejected { center, eta })
    }
}

/// Normalized distance from `center` after running the deterministic closed
/// loop from `center` for `steps` steps.
pub fn settling_offset(system: &SystemConfig, policy: &GaussianPolicy, center: Vec2, steps: usize) -> Result<f64> {
    let bounds = &system.state_bounds;
    let mut x = center;
    for _ in 0..steps {
        let u = policy.mean_action(&observation(bounds, x, center))?;
        x = system.advance(x, [u[0], u[1]])?.0;
    }
    Ok(bounds.normalized_distance(x, center))
}
