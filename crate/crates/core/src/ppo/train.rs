use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::buffer::{RolloutBuffer, TrainingBatch};
use super::policy::{mlp_schedule, GaussianPolicy};
use super::update::{ppo_update, LossStats, PpoLearner};
use super::PpoConfig;
use crate::dynamics::{sample_disk, MdpEnv, RewardConfig, SystemConfig, Vec2};
use crate::error::{Error, Result};
use crate::nn::NetworkParams;

/// Everything needed to build the per-node training environments.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnvSpec {
    pub system: SystemConfig,
    pub target: Vec2,
    pub horizon: usize,
    pub reward: RewardConfig,
    /// Episodes start uniformly inside this disk around `target` (original units).
    pub reset_radius: f64,
}

impl EnvSpec {
    pub fn make_env(&self) -> Result<MdpEnv> {
        MdpEnv::new(self.system.clone(), self.target, self.horizon, self.reward.clone())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RewardPoint {
    pub update_index: usize,
    pub mean_episode_reward: f64,
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub policy: GaussianPolicy,
    pub value_net: NetworkParams,
    /// Mean return of episodes finished during each update; updates that
    /// finished no episode are omitted.
    pub reward_curve: Vec<RewardPoint>,
    pub losses: Vec<LossStats>,
}

struct Worker {
    env: MdpEnv,
    rng: ChaCha8Rng,
    obs: Vec2,
    episode_return: f64,
}

impl Worker {
    fn collect(
        &mut self,
        policy: &GaussianPolicy,
        value_net: &NetworkParams,
        steps: usize,
        gamma: f64,
        reset_radius: f64,
    ) -> Result<(RolloutBuffer, Vec<f64>)> {
        let mut buf = RolloutBuffer::new(2, 2);
        let mut finished = Vec::new();
        for _ in 0..steps {
            let (action, log_prob) = policy.sample_action(&self.obs, &mut self.rng)?;
            let value = value_net.forward_scalar(&self.obs)?;
            let tr = self.env.step([action[0], action[1]])?;
            self.episode_return += tr.reward;
            let mut reward = tr.reward;
            let next_obs = self.env.observe();
            if tr.done {
                // time-limit truncation: bootstrap from the state the episode was cut at
                reward += gamma * value_net.forward_scalar(&next_obs)?;
                finished.push(self.episode_return);
                self.episode_return = 0.0;
            }
            buf.push(&self.obs, &action, log_prob, reward, value, tr.done);
            self.obs = if tr.done {
                self.reset(reset_radius)
            } else {
                next_obs
            };
        }
        buf.bootstrap_value = value_net.forward_scalar(&self.obs)?;
        Ok((buf, finished))
    }

    fn reset(&mut self, radius: f64) -> Vec2 {
        let x = sample_in_box(&self.env.system, self.env.target, radius, &mut self.rng);
        self.env.reset(x)
    }
}

/// Uniform sample of the disk around `center`, redrawn until it lies in the state box.
pub(crate) fn sample_in_box<R: Rng + ?Sized>(system: &SystemConfig, center: Vec2, radius: f64, rng: &mut R) -> Vec2 {
    for _ in 0..1000 {
        let x = sample_disk(center, 0.0, radius, rng);
        if system.state_bounds.contains(x) {
            return x;
        }
    }
    system.state_bounds.clamp(center)
}

/// Trains a Gaussian policy that stabilizes `spec.target`.
///
/// Each worker owns its environment and a ChaCha stream seeded from `rng`,
/// so the result does not depend on the rayon thread count.
pub fn train_policy<R: Rng + ?Sized>(spec: &EnvSpec, cfg: &PpoConfig, rng: &mut R) -> Result<TrainOutcome> {
    cfg.validate()?;
    let per_update = cfg.steps_per_update();
    if cfg.total_timesteps > 0 && cfg.total_timesteps < per_update {
        return Err(Error::Budget {
            budget: cfg.total_timesteps,
            rollout: per_update,
        });
    }
    let policy = GaussianPolicy::init(2, 2, &cfg.hidden, cfg.init_log_std, rng)?;
    let (vdims, vacts) = mlp_schedule(2, &cfg.hidden, 1);
    let value_net = NetworkParams::init(&vdims, &vacts, rng)?;
    let mut learner = PpoLearner::new(policy, value_net, cfg.learning_rate);
    let mut update_rng = ChaCha8Rng::seed_from_u64(rng.random());

    let mut workers = Vec::with_capacity(cfg.n_envs);
    for _ in 0..cfg.n_envs {
        let mut w = Worker {
            env: spec.make_env()?,
            rng: ChaCha8Rng::seed_from_u64(rng.random()),
            obs: [0.0; 2],
            episode_return: 0.0,
        };
        w.obs = w.reset(spec.reset_radius);
        workers.push(w);
    }

    let updates = cfg.total_timesteps.div_ceil(per_update);
    let mut reward_curve = Vec::new();
    let mut losses = Vec::with_capacity(updates);
    for update_index in 0..updates {
        let (policy, value_net) = (&learner.policy, &learner.value_net);
        let collected: Vec<Result<(RolloutBuffer, Vec<f64>)>> = workers
            .par_iter_mut()
            .map(|w| w.collect(policy, value_net, cfg.rollout_len, cfg.gamma, spec.reset_radius))
            .collect();
        let mut buffers = Vec::with_capacity(collected.len());
        let mut finished = Vec::new();
        for item in collected {
            let (mut buf, done) = item?;
            buf.compute_advantages(cfg.gamma, cfg.gae_lambda)?;
            buffers.push(buf);
            finished.extend(done);
        }
        if !finished.is_empty() {
            reward_curve.push(RewardPoint {
                update_index,
                mean_episode_reward: finished.iter().sum::<f64>() / finished.len() as f64,
            });
        }
        let batch = TrainingBatch::from_buffers(&buffers)?;
        losses.push(ppo_update(&mut learner, &batch, cfg, &mut update_rng)?);
    }

    Ok(TrainOutcome {
        policy: learner.policy,
        value_net: learner.value_net,
        reward_curve,
        losses,
    })
}

/// Fraction of deterministic closed-loop rollouts, started uniformly within
/// `radius` of `target`, that end within `tol` (normalized) of it after `steps`.
pub fn evaluate_convergence<R: Rng + ?Sized>(
    system: &SystemConfig,
    policy: &GaussianPolicy,
    target: Vec2,
    radius: f64,
    n_starts: usize,
    steps: usize,
    tol: f64,
    rng: &mut R,
) -> Result<f64> {
    if n_starts == 0 {
        return Ok(0.0);
    }
    let bounds = &system.state_bounds;
    let mut hits = 0;
    for _ in 0..n_starts {
        let mut x = sample_in_box(system, target, radius, rng);
        for _ in 0..steps {
            let u = policy.mean_action(&crate::dynamics::observation(bounds, x, target))?;
            x = system.advance(x, [u[0], u[1]])?.0;
        }
        if bounds.normalized_distance(x, target) <= tol {
            hits += 1;
        }
    }
    Ok(hits as f64 / n_starts as f64)
}
