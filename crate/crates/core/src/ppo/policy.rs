use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::nn::{Activation, NetworkParams};

pub const LOG_STD_MIN: f64 = -20.0;
pub const LOG_STD_MAX: f64 = 2.0;

const HALF_LN_TWO_PI: f64 = 0.918_938_533_204_672_7;

/// Diagonal Gaussian policy with a state-independent standard deviation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GaussianPolicy {
    pub mean_net: NetworkParams,
    pub log_std: Vec<f64>,
}

impl GaussianPolicy {
    pub fn new(mean_net: NetworkParams, log_std: Vec<f64>) -> Result<Self> {
        if log_std.len() != mean_net.output_dim() {
            return Err(Error::Shape {
                expected: mean_net.output_dim(),
                got: log_std.len(),
            });
        }
        if log_std.iter().any(|s| !s.is_finite()) {
            return Err(Error::NonFinite("log_std".into()));
        }
        Ok(Self { mean_net, log_std })
    }

    /// `obs_dim - hidden... - act_dim` mean network with LeakyReLU hidden layers.
    pub fn init<R: Rng + ?Sized>(
        obs_dim: usize,
        act_dim: usize,
        hidden: &[usize],
        init_log_std: f64,
        rng: &mut R,
    ) -> Result<Self> {
        let (dims, acts) = mlp_schedule(obs_dim, hidden, act_dim);
        let mean_net = NetworkParams::init(&dims, &acts, rng)?;
        Self::new(mean_net, vec![init_log_std; act_dim])
    }

    pub fn obs_dim(&self) -> usize {
        self.mean_net.input_dim()
    }

    pub fn act_dim(&self) -> usize {
        self.mean_net.output_dim()
    }

    pub fn std(&self) -> Vec<f64> {
        self.log_std.iter().map(|s| s.clamp(LOG_STD_MIN, LOG_STD_MAX).exp()).collect()
    }

    /// Deterministic action used at execution time.
    pub fn mean_action(&self, obs: &[f64]) -> Result<Vec<f64>> {
        self.mean_net.forward(obs)
    }

    pub fn log_prob(&self, mean: &[f64], action: &[f64]) -> f64 {
        diag_gaussian_log_prob(mean, &self.log_std, action)
    }

    /// Draws `a ~ N(mean(obs), diag(std²))`; returns the action and its log density.
    pub fn sample_action<R: Rng + ?Sized>(&self, obs: &[f64], rng: &mut R) -> Result<(Vec<f64>, f64)> {
        let mean = self.mean_net.forward(obs)?;
        let action: Vec<f64> = mean
            .iter()
            .zip(self.std())
            .map(|(m, s)| {
                let eps: f64 = StandardNormal.sample(rng);
                m + s * eps
            })
            .collect();
        let lp = self.log_prob(&mean, &action);
        Ok((action, lp))
    }

    /// Differential entropy of the action distribution.
    pub fn entropy(&self) -> f64 {
        self.log_std
            .iter()
            .map(|s| 0.5 + HALF_LN_TWO_PI + s.clamp(LOG_STD_MIN, LOG_STD_MAX))
            .sum()
    }
}

pub fn diag_gaussian_log_prob(mean: &[f64], log_std: &[f64], action: &[f64]) -> f64 {
    mean.iter()
        .zip(log_std)
        .zip(action)
        .map(|((m, ls), a)| {
            let ls = ls.clamp(LOG_STD_MIN, LOG_STD_MAX);
            let z = (a - m) / ls.exp();
            -0.5 * z * z - ls - HALF_LN_TWO_PI
        })
        .sum()
}

/// Layer dims and activations of an MLP with LeakyReLU hidden layers and a linear head.
pub fn mlp_schedule(input: usize, hidden: &[usize], output: usize) -> (Vec<usize>, Vec<Activation>) {
    let mut dims = vec![input];
    dims.extend_from_slice(hidden);
    dims.push(output);
    let mut acts = vec![Activation::LeakyRelu; hidden.len()];
    acts.push(Activation::Identity);
    (dims, acts)
}

#[cfg(test)]
mod tests {
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    use super::*;

    fn policy(seed: u64, log_std: f64) -> GaussianPolicy {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        GaussianPolicy::init(2, 2, &[16, 8], log_std, &mut rng).unwrap()
    }

    #[test]
    fn table_shapes() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let p = GaussianPolicy::init(2, 2, &[128, 64], 0.5f64.ln(), &mut rng).unwrap();
        assert_eq!(p.mean_net.layer_dims(), vec![2, 128, 64, 2]);
        assert_eq!(
            p.mean_net.activations(),
            vec![Activation::LeakyRelu, Activation::LeakyRelu, Activation::Identity]
        );
        assert!((p.std()[0] - 0.5).abs() < 1e-15);
    }

    #[test]
    fn collapsed_std_returns_mean() {
        let p = policy(1, -1e6);
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let obs = [0.1, -0.05];
        let mean = p.mean_action(&obs).unwrap();
        let (a, _) = p.sample_action(&obs, &mut rng).unwrap();
        for (x, m) in a.iter().zip(&mean) {
            assert!((x - m).abs() < 1e-7);
        }
    }

    #[test]
    fn seeded_sampling_is_reproducible() {
        let p = policy(3, 0.0);
        let draw = || {
            let mut rng = ChaCha8Rng::seed_from_u64(11);
            (0..20)
                .map(|i| p.sample_action(&[i as f64 * 0.01, 0.2], &mut rng).unwrap())
                .collect::<Vec<_>>()
        };
        assert_eq!(draw(), draw());
    }

    #[test]
    fn log_prob_matches_density_formula() {
        let p = policy(4, -0.4);
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let obs = [0.3, 0.7];
        let mean = p.mean_action(&obs).unwrap();
        let (a, lp) = p.sample_action(&obs, &mut rng).unwrap();
        let s = (-0.4f64).exp();
        let density: f64 = (0..2)
            .map(|i| (-(a[i] - mean[i]).powi(2) / (2.0 * s * s)).exp() / (s * (2.0 * std::f64::consts::PI).sqrt()))
            .product();
        assert!((lp - density.ln()).abs() < 1e-12);
    }

    #[test]
    fn mismatched_log_std_rejected() {
        let p = policy(6, 0.0);
        assert!(GaussianPolicy::new(p.mean_net.clone(), vec![0.0]).is_err());
        assert!(GaussianPolicy::new(p.mean_net, vec![0.0, f64::NAN]).is_err());
    }
}
