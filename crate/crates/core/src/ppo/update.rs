use rand::seq::SliceRandom;
use rand::Rng;

use super::buffer::TrainingBatch;
use super::policy::{GaussianPolicy, LOG_STD_MAX, LOG_STD_MIN};
use super::PpoConfig;
use crate::error::{Error, Result};
use crate::nn::{adam_update, AdamConfig, AdamState, GradientBundle, NetworkParams};

/// `min(r·Â, clip(r, 1−ε, 1+ε)·Â)`.
pub fn clipped_surrogate(ratio: f64, advantage: f64, eps: f64) -> f64 {
    let clipped = ratio.clamp(1.0 - eps, 1.0 + eps);
    (ratio * advantage).min(clipped * advantage)
}

/// d/d(ratio) of [`clipped_surrogate`], following whichever branch the min selects.
fn surrogate_slope(ratio: f64, advantage: f64, eps: f64) -> f64 {
    let clipped = ratio.clamp(1.0 - eps, 1.0 + eps);
    if ratio * advantage <= clipped * advantage {
        advantage
    } else {
        0.0
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct LossStats {
    pub policy_loss: f64,
    pub value_loss: f64,
    pub entropy: f64,
    pub approx_kl: f64,
    pub clip_fraction: f64,
}

impl LossStats {
    fn accumulate(&mut self, other: &LossStats, weight: f64) {
        self.policy_loss += weight * other.policy_loss;
        self.value_loss += weight * other.value_loss;
        self.entropy += weight * other.entropy;
        self.approx_kl += weight * other.approx_kl;
        self.clip_fraction += weight * other.clip_fraction;
    }

    pub fn total(&self, cfg: &PpoConfig) -> f64 {
        self.policy_loss + cfg.vf_coef * self.value_loss - cfg.entropy_coef * self.entropy
    }
}

/// Gradients of the PPO loss `−L_clip + c_v·MSE − c_e·H` on one minibatch.
#[derive(Debug, Clone)]
pub struct MinibatchGradients {
    pub policy: GradientBundle,
    pub value: GradientBundle,
    pub log_std: Vec<f64>,
    pub stats: LossStats,
}

impl MinibatchGradients {
    pub fn squared_norm(&self) -> f64 {
        self.policy.squared_norm() + self.value.squared_norm() + self.log_std.iter().map(|g| g * g).sum::<f64>()
    }

    pub fn scale(&mut self, factor: f64) {
        self.policy.scale(factor);
        self.value.scale(factor);
        self.log_std.iter_mut().for_each(|g| *g *= factor);
    }
}

pub fn minibatch_gradients(
    policy: &GaussianPolicy,
    value_net: &NetworkParams,
    batch: &TrainingBatch,
    indices: &[usize],
    cfg: &PpoConfig,
) -> Result<MinibatchGradients> {
    let n = indices.len();
    if n == 0 {
        return Err(Error::EmptyBuffer);
    }
    let (od, ad) = (batch.obs_dim, batch.act_dim);
    let mut obs = Vec::with_capacity(n * od);
    for &i in indices {
        obs.extend_from_slice(batch.obs(i));
    }

    let log_std: Vec<f64> = policy.log_std.iter().map(|s| s.clamp(LOG_STD_MIN, LOG_STD_MAX)).collect();
    let inv_var: Vec<f64> = log_std.iter().map(|s| (-2.0 * s).exp()).collect();
    let inv_n = 1.0 / n as f64;

    let policy_tape = policy.mean_net.forward_tape(&obs, n)?;
    let means = policy_tape.output();
    let mut mean_upstream = vec![0.0; n * ad];
    let mut log_std_grad = vec![0.0; ad];
    let mut stats = LossStats::default();

    for (row, &i) in indices.iter().enumerate() {
        let mean = &means[row * ad..(row + 1) * ad];
        let action = batch.action(i);
        let lp = super::policy::diag_gaussian_log_prob(mean, &log_std, action);
        let log_ratio = lp - batch.old_log_probs[i];
        let ratio = log_ratio.exp();
        let adv = batch.advantages[i];
        stats.policy_loss -= clipped_surrogate(ratio, adv, cfg.clip_eps) * inv_n;
        stats.approx_kl += ((ratio - 1.0) - log_ratio) * inv_n;
        if (ratio - 1.0).abs() > cfg.clip_eps {
            stats.clip_fraction += inv_n;
        }
        // d(−L)/d(log π) = −slope·ratio / n
        let dlogp = -surrogate_slope(ratio, adv, cfg.clip_eps) * ratio * inv_n;
        if dlogp != 0.0 {
            for j in 0..ad {
                let diff = action[j] - mean[j];
                mean_upstream[row * ad + j] = dlogp * diff * inv_var[j];
                log_std_grad[j] += dlogp * (diff * diff * inv_var[j] - 1.0);
            }
        }
    }
    stats.entropy = policy.entropy();
    for (g, s) in log_std_grad.iter_mut().zip(&policy.log_std) {
        if (LOG_STD_MIN..=LOG_STD_MAX).contains(s) {
            *g -= cfg.entropy_coef;
        } else {
            *g = 0.0;
        }
    }

    let value_tape = value_net.forward_tape(&obs, n)?;
    let values = value_tape.output();
    let mut value_upstream = vec![0.0; n];
    for (row, &i) in indices.iter().enumerate() {
        let err = values[row] - batch.returns[i];
        stats.value_loss += err * err * inv_n;
        value_upstream[row] = cfg.vf_coef * 2.0 * err * inv_n;
    }

    let total = stats.total(cfg);
    if !total.is_finite() {
        return Err(Error::NonFinite(format!(
            "PPO loss (policy {}, value {})",
            stats.policy_loss, stats.value_loss
        )));
    }

    let mut policy_grad = GradientBundle::zeros_like(&policy.mean_net);
    policy.mean_net.backward_tape(&policy_tape, &mean_upstream, &mut policy_grad)?;
    let mut value_grad = GradientBundle::zeros_like(value_net);
    value_net.backward_tape(&value_tape, &value_upstream, &mut value_grad)?;

    Ok(MinibatchGradients {
        policy: policy_grad,
        value: value_grad,
        log_std: log_std_grad,
        stats,
    })
}

/// Policy, value network and their optimizer state.
#[derive(Debug, Clone)]
pub struct PpoLearner {
    pub policy: GaussianPolicy,
    pub value_net: NetworkParams,
    policy_opt: AdamState,
    value_opt: AdamState,
    log_std_m: Vec<f64>,
    log_std_v: Vec<f64>,
    log_std_steps: u64,
}

impl PpoLearner {
    pub fn new(policy: GaussianPolicy, value_net: NetworkParams, learning_rate: f64) -> Self {
        let adam = AdamConfig::new(learning_rate);
        let ad = policy.act_dim();
        Self {
            policy_opt: AdamState::new(&policy.mean_net, adam),
            value_opt: AdamState::new(&value_net, adam),
            policy,
            value_net,
            log_std_m: vec![0.0; ad],
            log_std_v: vec![0.0; ad],
            log_std_steps: 0,
        }
    }

    /// Clips the global gradient norm and takes one Adam step on all parameters.
    pub fn apply(&mut self, mut grads: MinibatchGradients, max_grad_norm: f64) -> Result<()> {
        let norm = grads.squared_norm().sqrt();
        if !norm.is_finite() {
            grads.policy.check_finite()?;
            grads.value.check_finite()?;
            return Err(Error::NonFiniteGradient("log_std".into()));
        }
        if norm > max_grad_norm {
            grads.scale(max_grad_norm / (norm + 1e-6));
        }
        self.policy_opt.step(&mut self.policy.mean_net, &grads.policy)?;
        self.value_opt.step(&mut self.value_net, &grads.value)?;
        self.log_std_steps += 1;
        adam_update(
            &self.policy_opt.config,
            self.log_std_steps,
            &mut self.policy.log_std,
            &grads.log_std,
            &mut self.log_std_m,
            &mut self.log_std_v,
        );
        Ok(())
    }
}

/// Several epochs of shuffled minibatch updates over one batch. Returns the
/// sample-weighted mean loss statistics of the last epoch.
pub fn ppo_update<R: Rng + ?Sized>(
    learner: &mut PpoLearner,
    batch: &TrainingBatch,
    cfg: &PpoConfig,
    rng: &mut R,
) -> Result<LossStats> {
    if batch.is_empty() {
        return Err(Error::EmptyBuffer);
    }
    let mut order: Vec<usize> = (0..batch.len()).collect();
    let mut last = LossStats::default();
    for _ in 0..cfg.epochs_per_update {
        order.shuffle(rng);
        last = LossStats::default();
        for chunk in order.chunks(cfg.minibatch_size) {
            let grads = minibatch_gradients(&learner.policy, &learner.value_net, batch, chunk, cfg)?;
            last.accumulate(&grads.stats, chunk.len() as f64 / batch.len() as f64);
            learner.apply(grads, cfg.max_grad_norm)?;
        }
    }
    Ok(last)
}
