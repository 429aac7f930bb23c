//! Neural Lyapunov functions for trained node policies and sampling-based
//! certification of a ball-shaped region of attraction.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::dynamics::{observation, sample_disk, StateBounds, SystemConfig, Vec2};
use crate::error::{Error, Result};
use crate::nn::{Activation, AdamConfig, AdamState, GradientBundle, NetworkParams};
use crate::ppo::GaussianPolicy;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LyapunovConfig {
    pub net_dims: Vec<usize>,
    pub activations: Vec<Activation>,
    pub learning_rate: f64,
    pub batch_size: usize,
    pub epochs: usize,
    pub n_train_points: usize,
    /// Forward-difference step, in normalized coordinates.
    pub fd_step: f64,
    pub margin_v: f64,
    pub margin_d: f64,
    pub train_sampling: TrainSampling,
}

/// Radial law of the training states drawn around the node center.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TrainSampling {
    /// Uniform in area over the band.
    Area,
    /// Radius uniform over the band, the density certification tests at.
    Radial,
}

impl Default for LyapunovConfig {
    fn default() -> Self {
        Self {
            net_dims: vec![2, 100, 100, 1],
            activations: vec![Activation::Relu, Activation::Relu, Activation::Gelu],
            learning_rate: 1e-2,
            batch_size: 32,
            epochs: 50,
            n_train_points: 10_000,
            fd_step: 1e-3,
            margin_v: 1e-2,
            margin_d: 1e-2,
            train_sampling: TrainSampling::Radial,
        }
    }
}

impl LyapunovConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.fd_step > 0.0) {
            return Err(Error::Config("fd_step must be positive".into()));
        }
        if self.batch_size == 0 || self.n_train_points == 0 {
            return Err(Error::Config("Lyapunov batch size and point count must be positive".into()));
        }
        if self.net_dims.first() != Some(&2) || self.net_dims.last() != Some(&1) {
            return Err(Error::Config(format!(
                "Lyapunov network must map 2 inputs to 1 output, got {:?}",
                self.net_dims
            )));
        }
        if self.activations.len() + 1 != self.net_dims.len() {
            return Err(Error::Config("one activation per Lyapunov layer is required".into()));
        }
        if self.margin_v < 0.0 || self.margin_d < 0.0 {
            return Err(Error::Config("Lyapunov margins must be nonnegative".into()));
        }
        AdamConfig::new(self.learning_rate).validate()
    }
}

/// Radii in original state units.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RoaConfig {
    pub eta_lb: f64,
    pub eta_ub: f64,
    pub delta_eta: f64,
    pub n_test_points: usize,
    /// Leave the innermost disk `[0, delta_eta]` untested. A learned policy
    /// settles slightly off its nominal center, so that disk always contains
    /// states where `V` is not strictly decreasing.
    pub skip_inner_disk: bool,
}

impl Default for RoaConfig {
    fn default() -> Self {
        Self {
            eta_lb: 1.3,
            eta_ub: 2.2,
            delta_eta: 0.1,
            n_test_points: 1000,
            skip_inner_disk: true,
        }
    }
}

impl RoaConfig {
    /// Radii certification actually tests; training draws from the same band.
    pub fn tested_band(&self) -> (f64, f64) {
        let inner = if self.skip_inner_disk { self.delta_eta } else { 0.0 };
        (inner, self.eta_ub)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.eta_lb > 0.0 && self.eta_lb < self.eta_ub) {
            return Err(Error::Config(format!(
                "need 0 < eta_lb < eta_ub, got {} and {}",
                self.eta_lb, self.eta_ub
            )));
        }
        if !(self.delta_eta > 0.0) || self.n_test_points == 0 {
            return Err(Error::Config("delta_eta and n_test_points must be positive".into()));
        }
        Ok(())
    }

    /// Number of annuli between the center and `eta_ub`.
    pub fn shells(&self) -> usize {
        (self.eta_ub / self.delta_eta + 1e-9).floor() as usize
    }
}

/// A Lyapunov candidate attached to a node. The network sees the offset
/// `normalize(x) − normalize(center)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LyapunovNet {
    pub net: NetworkParams,
    pub center: Vec2,
    pub bounds: StateBounds,
}

impl LyapunovNet {
    pub fn new(net: NetworkParams, center: Vec2, bounds: StateBounds) -> Result<Self> {
        if net.input_dim() != 2 || net.output_dim() != 1 {
            return Err(Error::InvalidNetwork(format!(
                "Lyapunov network must be 2 -> 1, got {} -> {}",
                net.input_dim(),
                net.output_dim()
            )));
        }
        Ok(Self { net, center, bounds })
    }

    pub fn offset(&self, x: Vec2) -> Vec2 {
        observation(&self.bounds, x, self.center)
    }

    /// Chain-rule factor from original to normalized coordinates.
    pub fn offset_rate(&self, xdot: Vec2) -> Vec2 {
        let s = self.bounds.scale();
        [xdot[0] * s[0], xdot[1] * s[1]]
    }

    pub fn value_at_offset(&self, z: Vec2) -> Result<f64> {
        self.net.forward_scalar(&z)
    }

    pub fn value(&self, x: Vec2) -> Result<f64> {
        self.value_at_offset(self.offset(x))
    }

    /// Forward-difference Lie derivative along `xdot` (original units) at `x`.
    pub fn lie_derivative(&self, x: Vec2, xdot: Vec2, h: f64) -> Result<f64> {
        let z = self.offset(x);
        let zdot = self.offset_rate(xdot);
        let mut err = None;
        let d = lie_derivative_fd(
            |p| {
                self.value_at_offset(p).unwrap_or_else(|e| {
                    err = Some(e);
                    f64::NAN
                })
            },
            z,
            zdot,
            h,
        );
        match err {
            Some(e) => Err(e),
            None => Ok(d),
        }
    }

    /// `(V, ∇V·ẋ)` for many states at once with a single batched forward pass.
    pub fn evaluate_batch(&self, states: &[Vec2], xdots: &[Vec2], h: f64) -> Result<Vec<(f64, f64)>> {
        let n = states.len();
        let mut inputs = Vec::with_capacity(6 * n);
        for &x in states {
            let z = self.offset(x);
            inputs.extend_from_slice(&z);
            inputs.extend_from_slice(&[z[0] + h, z[1]]);
            inputs.extend_from_slice(&[z[0], z[1] + h]);
        }
        let out = self.net.forward_batch(&inputs, 3 * n)?;
        Ok((0..n)
            .map(|i| {
                let zdot = self.offset_rate(xdots[i]);
                let (v, v1, v2) = (out[3 * i], out[3 * i + 1], out[3 * i + 2]);
                (v, (v1 - v) / h * zdot[0] + (v2 - v) / h * zdot[1])
            })
            .collect())
    }
}

/// `Σᵢ (V(z + h·eᵢ) − V(z))/h · żᵢ`.
pub fn lie_derivative_fd<F: FnMut(Vec2) -> f64>(mut v: F, z: Vec2, zdot: Vec2, h: f64) -> f64 {
    let base = v(z);
    let d0 = (v([z[0] + h, z[1]]) - base) / h;
    let d1 = (v([z[0], z[1] + h]) - base) / h;
    d0 * zdot[0] + d1 * zdot[1]
}

/// Lyapunov risk of precomputed values:
/// `mean(max(0, m_v − V) + max(0, L + m_d)) + V(center)²`.
pub fn lyapunov_risk(values: &[f64], lie: &[f64], center_value: f64, margin_v: f64, margin_d: f64) -> Result<f64> {
    if values.is_empty() {
        return Err(Error::EmptyBuffer);
    }
    if values.len() != lie.len() {
        return Err(Error::Shape {
            expected: values.len(),
            got: lie.len(),
        });
    }
    let hinge: f64 = values
        .iter()
        .zip(lie)
        .map(|(v, l)| (margin_v - v).max(0.0) + (l + margin_d).max(0.0))
        .sum();
    Ok(hinge / values.len() as f64 + center_value * center_value)
}

/// Closed-loop rate `f(x) + sat(π(x))` under the node's mean action.
pub fn closed_loop_derivative(system: &SystemConfig, policy: &GaussianPolicy, center: Vec2, x: Vec2) -> Result<Vec2> {
    let u = policy.mean_action(&observation(&system.state_bounds, x, center))?;
    system.state_derivative(x, [u[0], u[1]])
}

/// Draws from the disk of `radius` (original units) around `center`, rejecting
/// points that leave the state box.
fn sample_annulus_in_box<R: Rng + ?Sized>(
    bounds: &StateBounds,
    center: Vec2,
    inner: f64,
    outer: f64,
    rng: &mut R,
) -> Option<Vec2> {
    for _ in 0..1000 {
        let x = sample_disk(center, inner, outer, rng);
        if bounds.contains(x) {
            return Some(x);
        }
    }
    None
}

fn sample_radial_in_box<R: Rng + ?Sized>(
    bounds: &StateBounds,
    center: Vec2,
    inner: f64,
    outer: f64,
    rng: &mut R,
) -> Option<Vec2> {
    for _ in 0..1000 {
        let r = inner + (outer - inner) * rng.random::<f64>();
        let theta = rng.random_range(0.0..std::f64::consts::TAU);
        let x = [center[0] + r * theta.cos(), center[1] + r * theta.sin()];
        if bounds.contains(x) {
            return Some(x);
        }
    }
    None
}

/// Loss and gradient of the risk on one minibatch of offsets `z` with rates `ż`.
fn risk_gradient(
    net: &NetworkParams,
    z: &[Vec2],
    zdot: &[Vec2],
    cfg: &LyapunovConfig,
    grads: &mut GradientBundle,
) -> Result<f64> {
    let b = z.len();
    let h = cfg.fd_step;
    let mut inputs = Vec::with_capacity(2 * (3 * b + 1));
    for p in z {
        inputs.extend_from_slice(p);
    }
    for p in z {
        inputs.extend_from_slice(&[p[0] + h, p[1]]);
    }
    for p in z {
        inputs.extend_from_slice(&[p[0], p[1] + h]);
    }
    inputs.extend_from_slice(&[0.0, 0.0]);
    let tape = net.forward_tape(&inputs, 3 * b + 1)?;
    let out = tape.output();
    let v0 = out[3 * b];

    let inv_b = 1.0 / b as f64;
    let mut upstream = vec![0.0; 3 * b + 1];
    let mut loss = 0.0;
    for i in 0..b {
        let (v, v1, v2) = (out[i], out[b + i], out[2 * b + i]);
        let lie = (v1 - v) / h * zdot[i][0] + (v2 - v) / h * zdot[i][1];
        if cfg.margin_v - v > 0.0 {
            loss += (cfg.margin_v - v) * inv_b;
            upstream[i] -= inv_b;
        }
        if lie + cfg.margin_d > 0.0 {
            loss += (lie + cfg.margin_d) * inv_b;
            let (g1, g2) = (zdot[i][0] / h * inv_b, zdot[i][1] / h * inv_b);
            upstream[i] -= g1 + g2;
            upstream[b + i] += g1;
            upstream[2 * b + i] += g2;
        }
    }
    loss += v0 * v0;
    upstream[3 * b] = 2.0 * v0;
    if !loss.is_finite() {
        return Err(Error::NonFinite("Lyapunov risk".into()));
    }
    grads.fill_zero();
    net.backward_tape(&tape, &upstream, grads)?;
    Ok(loss)
}

/// Fits a Lyapunov candidate on states drawn from the annulus `[inner, outer]`
/// (original units) around `center`. Returns the net and the mean minibatch
/// risk of every epoch.
pub fn train_lyapunov<R: Rng + ?Sized>(
    system: &SystemConfig,
    policy: &GaussianPolicy,
    center: Vec2,
    (inner, outer): (f64, f64),
    cfg: &LyapunovConfig,
    rng: &mut R,
) -> Result<(LyapunovNet, Vec<f64>)> {
    cfg.validate()?;
    let bounds = system.state_bounds;
    let net = NetworkParams::init(&cfg.net_dims, &cfg.activations, rng)?;
    let mut lyap = LyapunovNet::new(net, center, bounds)?;
    if cfg.epochs == 0 {
        return Ok((lyap, Vec::new()));
    }

    let mut z = Vec::with_capacity(cfg.n_train_points);
    let mut zdot = Vec::with_capacity(cfg.n_train_points);
    while z.len() < cfg.n_train_points {
        let drawn = match cfg.train_sampling {
            TrainSampling::Area => sample_annulus_in_box(&bounds, center, inner, outer, rng),
            TrainSampling::Radial => sample_radial_in_box(&bounds, center, inner, outer, rng),
        };
        let Some(x) = drawn else {
            return Err(Error::Config(format!(
                "no state between {inner} and {outer} of ({}, {}) lies in the box",
                center[0], center[1]
            )));
        };
        z.push(lyap.offset(x));
        zdot.push(lyap.offset_rate(closed_loop_derivative(system, policy, center, x)?));
    }

    let mut opt = AdamState::new(&lyap.net, AdamConfig::new(cfg.learning_rate));
    let mut grads = GradientBundle::zeros_like(&lyap.net);
    let mut order: Vec<usize> = (0..z.len()).collect();
    let mut curve = Vec::with_capacity(cfg.epochs);
    let (mut bz, mut bzdot) = (Vec::with_capacity(cfg.batch_size), Vec::with_capacity(cfg.batch_size));
    for _ in 0..cfg.epochs {
        order.shuffle(rng);
        let mut total = 0.0;
        let mut batches = 0usize;
        for chunk in order.chunks(cfg.batch_size) {
            bz.clear();
            bzdot.clear();
            bz.extend(chunk.iter().map(|&i| z[i]));
            bzdot.extend(chunk.iter().map(|&i| zdot[i]));
            total += risk_gradient(&lyap.net, &bz, &bzdot, cfg, &mut grads)?;
            batches += 1;
            opt.step(&mut lyap.net, &grads)?;
        }
        curve.push(total / batches as f64);
    }
    Ok((lyap, curve))
}

/// Outcome of checking one annulus.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ShellResult {
    pub inner: f64,
    pub outer: f64,
    pub passed: bool,
    pub violations: usize,
}

/// Grows the certified radius one annulus at a time while every sample in the
/// annulus has `V > 0` and `∇V·ẋ < 0`. Returns the outer radius of the last
/// passing annulus (a multiple of `delta_eta`), or 0 if the first one fails.
///
/// Each annulus draws from its own ChaCha stream, so raising `n_test_points`
/// only appends samples.
pub fn certify_radius<R: Rng + ?Sized>(
    system: &SystemConfig,
    policy: &GaussianPolicy,
    lyap: &LyapunovNet,
    cfg: &RoaConfig,
    fd_step: f64,
    rng: &mut R,
) -> Result<(f64, Vec<ShellResult>)> {
    certify_with(
        system,
        lyap,
        cfg,
        fd_step,
        |x| closed_loop_derivative(system, policy, lyap.center, x),
        rng,
    )
}

/// [`certify_radius`] over an arbitrary closed-loop vector field.
pub fn certify_with<R, F>(
    system: &SystemConfig,
    lyap: &LyapunovNet,
    cfg: &RoaConfig,
    fd_step: f64,
    mut field: F,
    rng: &mut R,
) -> Result<(f64, Vec<ShellResult>)>
where
    R: Rng + ?Sized,
    F: FnMut(Vec2) -> Result<Vec2>,
{
    cfg.validate()?;
    let seed: u64 = rng.random();
    let mut shells = Vec::new();
    let mut eta = 0.0;
    let mut states = Vec::with_capacity(cfg.n_test_points);
    let mut rates = Vec::with_capacity(cfg.n_test_points);
    let first = usize::from(cfg.skip_inner_disk);
    for k in first..cfg.shells() {
        let inner = k as f64 * cfg.delta_eta;
        let outer = (k + 1) as f64 * cfg.delta_eta;
        let mut shell_rng = ChaCha8Rng::seed_from_u64(seed);
        shell_rng.set_stream(k as u64);
        states.clear();
        rates.clear();
        for _ in 0..cfg.n_test_points {
            match sample_annulus_in_box(&system.state_bounds, lyap.center, inner, outer, &mut shell_rng) {
                Some(x) => {
                    states.push(x);
                    rates.push(field(x)?);
                }
                None => break,
            }
        }
        let violations = lyap
            .evaluate_batch(&states, &rates, fd_step)?
            .iter()
            .filter(|(v, d)| !(*v > 0.0 && *d < 0.0))
            .count();
        let passed = violations == 0 && !states.is_empty();
        shells.push(ShellResult {
            inner,
            outer,
            passed,
            violations,
        });
        if !passed {
            break;
        }
        eta = outer;
    }
    Ok((eta, shells))
}

/// Fraction of deterministic closed-loop rollouts started uniformly inside the
/// disk of `radius` that come within `tol` (normalized) of `center` within
/// `max_steps`.
pub fn rollout_success_rate<R: Rng + ?Sized>(
    system: &SystemConfig,
    policy: &GaussianPolicy,
    center: Vec2,
    radius: f64,
    n_starts: usize,
    tol: f64,
    max_steps: usize,
    rng: &mut R,
) -> Result<f64> {
    if n_starts == 0 {
        return Ok(0.0);
    }
    let bounds = &system.state_bounds;
    let mut hits = 0usize;
    for _ in 0..n_starts {
        let Some(mut x) = sample_annulus_in_box(bounds, center, 0.0, radius, rng) else {
            continue;
        };
        for _ in 0..=max_steps {
            if bounds.normalized_distance(x, center) < tol {
                hits += 1;
                break;
            }
            let u = policy.mean_action(&observation(bounds, x, center))?;
            x = system.advance(x, [u[0], u[1]])?.0;
        }
    }
    Ok(hits as f64 / n_starts as f64)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn radial_draws_spread_radius_evenly() {
        let bounds = SystemConfig::default().state_bounds;
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let n = 20_000;
        let inner = (0..n)
            .map(|_| sample_radial_in_box(&bounds, [0.0, 0.0], 0.0, 2.0, &mut rng).unwrap())
            .filter(|x| x[0].hypot(x[1]) < 0.2)
            .count();
        // a tenth of the radius holds a tenth of the draws, not a hundredth
        let frac = inner as f64 / n as f64;
        assert!((frac - 0.1).abs() < 0.01, "{frac}");
    }

    #[test]
    fn radial_draws_stay_in_box() {
        let bounds = SystemConfig::default().state_bounds;
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for _ in 0..2000 {
            let x = sample_radial_in_box(&bounds, [4.8, -4.9], 0.0, 2.2, &mut rng).unwrap();
            assert!(bounds.contains(x));
            assert!((x[0] - 4.8).hypot(x[1] + 4.9) <= 2.2);
        }
    }
}
