use serde::{Deserialize, Serialize};

use super::network::{tensor_name, GradientBundle, NetworkParams};
use crate::error::{Error, Result};

/// Adam hyper-parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdamConfig {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl AdamConfig {
    pub fn new(learning_rate: f64) -> Self {
        Self {
            learning_rate,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate > 0.0) {
            return Err(Error::Config("learning rate must be positive".into()));
        }
        if !(0.0..1.0).contains(&self.beta1) || !(0.0..1.0).contains(&self.beta2) {
            return Err(Error::Config("Adam betas must lie in [0, 1)".into()));
        }
        Ok(())
    }
}

/// One bias-corrected Adam update over a flat parameter slice. `step` is the
/// 1-based step count after incrementing.
pub fn adam_update(cfg: &AdamConfig, step: u64, params: &mut [f64], grads: &[f64], m: &mut [f64], v: &mut [f64]) {
    let t = step as i32;
    let c1 = 1.0 - cfg.beta1.powi(t);
    let c2 = 1.0 - cfg.beta2.powi(t);
    for (((p, &g), m), v) in params.iter_mut().zip(grads).zip(m.iter_mut()).zip(v.iter_mut()) {
        *m = cfg.beta1 * *m + (1.0 - cfg.beta1) * g;
        *v = cfg.beta2 * *v + (1.0 - cfg.beta2) * g * g;
        let m_hat = *m / c1;
        let v_hat = *v / c2;
        *p -= cfg.learning_rate * m_hat / (v_hat.sqrt() + cfg.eps);
    }
}

/// Adam moments for one network.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamState {
    pub config: AdamConfig,
    pub step_count: u64,
    pub first_moment: GradientBundle,
    pub second_moment: GradientBundle,
}

impl AdamState {
    pub fn new(net: &NetworkParams, config: AdamConfig) -> Self {
        Self {
            config,
            step_count: 0,
            first_moment: GradientBundle::zeros_like(net),
            second_moment: GradientBundle::zeros_like(net),
        }
    }

    /// Applies `grads` to `net`. Nothing is modified if a gradient is non-finite.
    pub fn step(&mut self, net: &mut NetworkParams, grads: &GradientBundle) -> Result<()> {
        if !grads.matches(net) || !self.first_moment.matches(net) {
            return Err(Error::InvalidNetwork("optimizer state does not match network".into()));
        }
        grads.check_finite()?;
        self.step_count += 1;
        let params = net.tensors_mut();
        let m = self.first_moment.tensors_mut();
        let v = self.second_moment.tensors_mut();
        for (i, (((p, g), m), v)) in params.zip(grads.tensors()).zip(m).zip(v).enumerate() {
            adam_update(&self.config, self.step_count, p, g, m, v);
            debug_assert!(p.iter().all(|x| x.is_finite()), "{} diverged", tensor_name(i));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::{Activation, Dense};

    fn scalar_net(w: f64) -> NetworkParams {
        NetworkParams::from_layers(vec![Dense {
            in_dim: 1,
            out_dim: 1,
            weights: vec![w],
            biases: vec![0.0],
            activation: Activation::Identity,
        }])
        .unwrap()
    }

    #[test]
    fn first_step_moves_by_learning_rate() {
        // m_hat = 1, v_hat = 1, so w <- 0 - 0.01 * 1 / (1 + 1e-8).
        let mut net = scalar_net(0.0);
        let mut state = AdamState::new(&net, AdamConfig::new(0.01));
        let mut g = GradientBundle::zeros_like(&net);
        g.layers[0].weights[0] = 1.0;
        state.step(&mut net, &g).unwrap();
        assert!((net.layers()[0].weights[0] + 0.01).abs() < 1e-9);
        assert_eq!(state.step_count, 1);
    }

    #[test]
    fn zero_gradients_leave_parameters_unchanged() {
        let mut net = scalar_net(0.42);
        let mut state = AdamState::new(&net, AdamConfig::new(0.01));
        let g = GradientBundle::zeros_like(&net);
        for k in 1..=25 {
            state.step(&mut net, &g).unwrap();
            assert_eq!(state.step_count, k);
        }
        assert_eq!(net.layers()[0].weights[0], 0.42);
    }

    #[test]
    fn identical_inputs_identical_results() {
        let net0 = scalar_net(0.3);
        let state0 = AdamState::new(&net0, AdamConfig::new(0.05));
        let mut g = GradientBundle::zeros_like(&net0);
        g.layers[0].weights[0] = -0.7;
        g.layers[0].biases[0] = 0.2;
        let run = || {
            let (mut n, mut s) = (net0.clone(), state0.clone());
            s.step(&mut n, &g).unwrap();
            (n, s)
        };
        assert_eq!(run(), run());
    }

    #[test]
    fn non_finite_gradient_is_reported_and_ignored() {
        let mut net = scalar_net(1.0);
        let mut state = AdamState::new(&net, AdamConfig::new(0.01));
        let mut g = GradientBundle::zeros_like(&net);
        g.layers[0].weights[0] = f64::INFINITY;
        let err = state.step(&mut net, &g).unwrap_err();
        assert!(err.to_string().contains("layer 0 weights"));
        assert_eq!(state.step_count, 0);
        assert_eq!(net, scalar_net(1.0));
    }
}
