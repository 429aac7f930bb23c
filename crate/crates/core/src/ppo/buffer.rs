use crate::error::{Error, Result};

/// One worker's contiguous stretch of experience.
///
/// `dones[t]` marks the last step of an episode. Episodes here only end by
/// time limit, so the collector folds `γ·V(s_T)` into the final reward and
/// the estimator never bootstraps across a boundary.
#[derive(Debug, Clone, Default)]
pub struct RolloutBuffer {
    pub obs_dim: usize,
    pub act_dim: usize,
    pub observations: Vec<f64>,
    pub actions: Vec<f64>,
    pub log_probs: Vec<f64>,
    pub rewards: Vec<f64>,
    pub values: Vec<f64>,
    pub dones: Vec<bool>,
    /// `V(s)` of the state following the last stored step, used when that
    /// step did not end an episode.
    pub bootstrap_value: f64,
    pub advantages: Vec<f64>,
    pub returns: Vec<f64>,
}

impl RolloutBuffer {
    pub fn new(obs_dim: usize, act_dim: usize) -> Self {
        Self {
            obs_dim,
            act_dim,
            ..Self::default()
        }
    }

    pub fn len(&self) -> usize {
        self.rewards.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rewards.is_empty()
    }

    pub fn push(&mut self, obs: &[f64], action: &[f64], log_prob: f64, reward: f64, value: f64, done: bool) {
        debug_assert_eq!(obs.len(), self.obs_dim);
        debug_assert_eq!(action.len(), self.act_dim);
        self.observations.extend_from_slice(obs);
        self.actions.extend_from_slice(action);
        self.log_probs.push(log_prob);
        self.rewards.push(reward);
        self.values.push(value);
        self.dones.push(done);
    }

    /// Generalized advantage estimation; fills `advantages` (unnormalized)
    /// and `returns = advantages + values`.
    pub fn compute_advantages(&mut self, gamma: f64, lambda: f64) -> Result<()> {
        let n = self.len();
        if n == 0 {
            return Err(Error::EmptyBuffer);
        }
        if self.values.len() != n || self.dones.len() != n {
            return Err(Error::Shape {
                expected: n,
                got: self.values.len().min(self.dones.len()),
            });
        }
        self.advantages = vec![0.0; n];
        let mut gae = 0.0;
        for t in (0..n).rev() {
            let nonterminal = if self.dones[t] { 0.0 } else { 1.0 };
            let next_value = if t + 1 == n {
                self.bootstrap_value
            } else {
                self.values[t + 1]
            };
            let delta = self.rewards[t] + gamma * next_value * nonterminal - self.values[t];
            gae = delta + gamma * lambda * nonterminal * gae;
            self.advantages[t] = gae;
        }
        self.returns = self.advantages.iter().zip(&self.values).map(|(a, v)| a + v).collect();
        Ok(())
    }
}

/// Shifts and scales to zero mean and unit (population) standard deviation.
/// A constant batch is only centered.
pub fn normalize_advantages(adv: &mut [f64]) {
    if adv.is_empty() {
        return;
    }
    let n = adv.len() as f64;
    let mean = adv.iter().sum::<f64>() / n;
    adv.iter_mut().for_each(|a| *a -= mean);
    let var = adv.iter().map(|a| a * a).sum::<f64>() / n;
    let std = var.sqrt();
    if std > 1e-12 {
        adv.iter_mut().for_each(|a| *a /= std);
    }
}

/// Flattened, advantage-normalized training data from several buffers.
#[derive(Debug, Clone)]
pub struct TrainingBatch {
    pub obs_dim: usize,
    pub act_dim: usize,
    pub observations: Vec<f64>,
    pub actions: Vec<f64>,
    pub old_log_probs: Vec<f64>,
    pub advantages: Vec<f64>,
    pub returns: Vec<f64>,
}

impl TrainingBatch {
    pub fn from_buffers(buffers: &[RolloutBuffer]) -> Result<Self> {
        let first = buffers.first().ok_or(Error::EmptyBuffer)?;
        let mut batch = TrainingBatch {
            obs_dim: first.obs_dim,
            act_dim: first.act_dim,
            observations: Vec::new(),
            actions: Vec::new(),
            old_log_probs: Vec::new(),
            advantages: Vec::new(),
            returns: Vec::new(),
        };
        for b in buffers {
            if b.advantages.len() != b.len() {
                return Err(Error::Config("advantages not computed before batching".into()));
            }
            batch.observations.extend_from_slice(&b.observations);
            batch.actions.extend_from_slice(&b.actions);
            batch.old_log_probs.extend_from_slice(&b.log_probs);
            batch.advantages.extend_from_slice(&b.advantages);
            batch.returns.extend_from_slice(&b.returns);
        }
        if batch.advantages.is_empty() {
            return Err(Error::EmptyBuffer);
        }
        normalize_advantages(&mut batch.advantages);
        Ok(batch)
    }

    pub fn len(&self) -> usize {
        self.advantages.len()
    }

    pub fn is_empty(&self) -> bool {
        self.advantages.is_empty()
    }

    pub fn obs(&self, i: usize) -> &[f64] {
        &self.observations[i * self.obs_dim..(i + 1) * self.obs_dim]
    }

    pub fn action(&self, i: usize) -> &[f64] {
        &self.actions[i * self.act_dim..(i + 1) * self.act_dim]
    }
}
