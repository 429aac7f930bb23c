//! Proximal policy optimization for the node controllers.

mod buffer;
mod policy;
mod train;
mod update;

use serde::{Deserialize, Serialize};

pub use buffer::{normalize_advantages, RolloutBuffer, TrainingBatch};
pub use policy::{diag_gaussian_log_prob, mlp_schedule, GaussianPolicy, LOG_STD_MAX, LOG_STD_MIN};
pub use train::{evaluate_convergence, train_policy, EnvSpec, RewardPoint, TrainOutcome};
pub use update::{clipped_surrogate, minibatch_gradients, ppo_update, LossStats, MinibatchGradients, PpoLearner};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PpoConfig {
    pub gamma: f64,
    pub clip_eps: f64,
    pub epochs_per_update: usize,
    pub minibatch_size: usize,
    pub learning_rate: f64,
    pub vf_coef: f64,
    pub n_envs: usize,
    pub total_timesteps: usize,
    /// Steps collected per environment between updates.
    pub rollout_len: usize,
    pub gae_lambda: f64,
    pub entropy_coef: f64,
    pub max_grad_norm: f64,
    pub hidden: Vec<usize>,
    pub init_log_std: f64,
}

impl Default for PpoConfig {
    fn default() -> Self {
        Self {
            gamma: 0.99,
            clip_eps: 0.2,
            epochs_per_update: 10,
            minibatch_size: 256,
            learning_rate: 3e-4,
            vf_coef: 0.5,
            n_envs: 8,
            total_timesteps: 200_000,
            rollout_len: 256,
            gae_lambda: 0.95,
            entropy_coef: 0.0,
            max_grad_norm: 0.5,
            hidden: vec![128, 64],
            init_log_std: 0.5f64.ln(),
        }
    }
}

impl PpoConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.gamma > 0.0 && self.gamma <= 1.0) {
            return Err(Error::Config(format!("gamma must lie in (0, 1], got {}", self.gamma)));
        }
        if !(self.clip_eps > 0.0) {
            return Err(Error::Config("clip_eps must be positive".into()));
        }
        if !(0.0..=1.0).contains(&self.gae_lambda) {
            return Err(Error::Config("gae_lambda must lie in [0, 1]".into()));
        }
        if self.epochs_per_update == 0 || self.minibatch_size == 0 || self.n_envs == 0 || self.rollout_len == 0 {
            return Err(Error::Config("PPO counts must be positive".into()));
        }
        if !(self.learning_rate > 0.0) || !(self.max_grad_norm > 0.0) {
            return Err(Error::Config("learning rate and gradient norm bound must be positive".into()));
        }
        if self.vf_coef < 0.0 || self.entropy_coef < 0.0 {
            return Err(Error::Config("loss coefficients must be nonnegative".into()));
        }
        Ok(())
    }

    /// Environment steps gathered per update.
    pub fn steps_per_update(&self) -> usize {
        self.n_envs * self.rollout_len
    }
}
