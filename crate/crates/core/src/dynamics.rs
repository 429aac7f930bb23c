//! The planar benchmark plant `ẋ = ∇h(x) + u` with a Gaussian-sum potential,
//! its episodic environment wrapper, and circular obstacles.
//!
//! The potential is `h(x) = Σ αᵢ exp(−‖x − μᵢ‖² / (2σᵢ²))`. The exponent is
//! negative: a positive exponent would make `h` grow without bound and is
//! not a sum of Gaussians.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type Vec2 = [f64; 2];

#[inline]
pub fn distance(a: Vec2, b: Vec2) -> f64 {
    (a[0] - b[0]).hypot(a[1] - b[1])
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GaussianTerm {
    pub alpha: f64,
    pub mu: Vec2,
    pub sigma: f64,
}

impl GaussianTerm {
    #[inline]
    fn bump(&self, x: Vec2) -> f64 {
        let dx = x[0] - self.mu[0];
        let dy = x[1] - self.mu[1];
        self.alpha * (-(dx * dx + dy * dy) / (2.0 * self.sigma * self.sigma)).exp()
    }
}

/// Axis-aligned state box; also defines the `[-1, 1]²` normalization.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StateBounds {
    pub lo: Vec2,
    pub hi: Vec2,
}

impl Default for StateBounds {
    fn default() -> Self {
        Self {
            lo: [-5.0, -5.0],
            hi: [5.0, 5.0],
        }
    }
}

impl StateBounds {
    pub fn validate(&self) -> Result<()> {
        let ok = (0..2).all(|i| self.lo[i].is_finite() && self.hi[i].is_finite() && self.lo[i] < self.hi[i]);
        if ok {
            Ok(())
        } else {
            Err(Error::Config(format!("degenerate state box {:?}..{:?}", self.lo, self.hi)))
        }
    }

    /// Per-axis factor mapping original displacements to normalized ones.
    #[inline]
    pub fn scale(&self) -> Vec2 {
        [2.0 / (self.hi[0] - self.lo[0]), 2.0 / (self.hi[1] - self.lo[1])]
    }

    #[inline]
    pub fn normalize(&self, x: Vec2) -> Vec2 {
        let s = self.scale();
        [
            (x[0] - self.lo[0]) * s[0] - 1.0,
            (x[1] - self.lo[1]) * s[1] - 1.0,
        ]
    }

    #[inline]
    pub fn denormalize(&self, z: Vec2) -> Vec2 {
        [
            self.lo[0] + (z[0] + 1.0) * 0.5 * (self.hi[0] - self.lo[0]),
            self.lo[1] + (z[1] + 1.0) * 0.5 * (self.hi[1] - self.lo[1]),
        ]
    }

    /// Euclidean distance between two states measured in normalized coordinates.
    #[inline]
    pub fn normalized_distance(&self, a: Vec2, b: Vec2) -> f64 {
        let s = self.scale();
        ((a[0] - b[0]) * s[0]).hypot((a[1] - b[1]) * s[1])
    }

    #[inline]
    pub fn contains(&self, x: Vec2) -> bool {
        (0..2).all(|i| x[i] >= self.lo[i] && x[i] <= self.hi[i])
    }

    #[inline]
    pub fn clamp(&self, x: Vec2) -> Vec2 {
        [x[0].clamp(self.lo[0], self.hi[0]), x[1].clamp(self.lo[1], self.hi[1])]
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec2 {
        [
            rng.random_range(self.lo[0]..=self.hi[0]),
            rng.random_range(self.lo[1]..=self.hi[1]),
        ]
    }
}

/// Fallible normalization for callers holding an unvalidated box.
pub fn normalize(x: Vec2, bounds: &StateBounds) -> Result<Vec2> {
    bounds.validate()?;
    Ok(bounds.normalize(x))
}

pub fn denormalize(z: Vec2, bounds: &StateBounds) -> Result<Vec2> {
    bounds.validate()?;
    Ok(bounds.denormalize(z))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Integrator {
    Euler,
    #[default]
    Rk4,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SystemConfig {
    pub terms: Vec<GaussianTerm>,
    pub state_bounds: StateBounds,
    pub u_max: f64,
    pub dt: f64,
    pub integrator: Integrator,
}

impl Default for SystemConfig {
    fn default() -> Self {
        Self {
            terms: default_terms(),
            state_bounds: StateBounds::default(),
            u_max: 0.5,
            dt: 0.1,
            integrator: Integrator::Rk4,
        }
    }
}

/// The three-bump benchmark potential.
pub fn default_terms() -> Vec<GaussianTerm> {
    vec![
        GaussianTerm {
            alpha: -0.1,
            mu: [-1.4, 2.5],
            sigma: 1.8,
        },
        GaussianTerm {
            alpha: 0.2,
            mu: [1.3, 2.2],
            sigma: 1.5,
        },
        GaussianTerm {
            alpha: 0.3,
            mu: [-3.4, -2.5],
            sigma: 2.0,
        },
    ]
}

impl SystemConfig {
    pub fn validate(&self) -> Result<()> {
        self.state_bounds.validate()?;
        if !(self.u_max > 0.0) || !self.u_max.is_finite() {
            return Err(Error::Config("u_max must be positive".into()));
        }
        if !(self.dt > 0.0) || !self.dt.is_finite() {
            return Err(Error::Config("dt must be positive".into()));
        }
        if let Some(t) = self.terms.iter().find(|t| !(t.sigma > 0.0)) {
            return Err(Error::Config(format!("Gaussian width must be positive, got {}", t.sigma)));
        }
        Ok(())
    }

    pub fn potential(&self, x: Vec2) -> f64 {
        self.terms.iter().map(|t| t.bump(x)).sum()
    }

    /// Drift `f = ∇h`, in closed form.
    pub fn vector_field(&self, x: Vec2) -> Vec2 {
        let mut f = [0.0, 0.0];
        for t in &self.terms {
            let b = t.bump(x);
            let inv = 1.0 / (t.sigma * t.sigma);
            f[0] -= b * (x[0] - t.mu[0]) * inv;
            f[1] -= b * (x[1] - t.mu[1]) * inv;
        }
        f
    }

    /// Componentwise clamp to `[-u_max, u_max]`.
    pub fn saturate(&self, u: Vec2) -> Result<Vec2> {
        if !u[0].is_finite() || !u[1].is_finite() {
            return Err(Error::NonFinite(format!("control {u:?}")));
        }
        Ok([u[0].clamp(-self.u_max, self.u_max), u[1].clamp(-self.u_max, self.u_max)])
    }

    /// `ẋ = f(x) + sat(u)`.
    pub fn state_derivative(&self, x: Vec2, u: Vec2) -> Result<Vec2> {
        let u = self.saturate(u)?;
        let f = self.vector_field(x);
        Ok([f[0] + u[0], f[1] + u[1]])
    }

    /// Integrates one `dt` under zero-order hold of an already saturated `u`,
    /// without clipping.
    fn integrate(&self, x: Vec2, u: Vec2, dt: f64) -> Vec2 {
        let rate = |s: Vec2| {
            let f = self.vector_field(s);
            [f[0] + u[0], f[1] + u[1]]
        };
        match self.integrator {
            Integrator::Euler => {
                let k = rate(x);
                [x[0] + dt * k[0], x[1] + dt * k[1]]
            }
            Integrator::Rk4 => {
                let k1 = rate(x);
                let k2 = rate([x[0] + 0.5 * dt * k1[0], x[1] + 0.5 * dt * k1[1]]);
                let k3 = rate([x[0] + 0.5 * dt * k2[0], x[1] + 0.5 * dt * k2[1]]);
                let k4 = rate([x[0] + dt * k3[0], x[1] + dt * k3[1]]);
                [
                    x[0] + dt / 6.0 * (k1[0] + 2.0 * k2[0] + 2.0 * k3[0] + k4[0]),
                    x[1] + dt / 6.0 * (k1[1] + 2.0 * k2[1] + 2.0 * k3[1] + k4[1]),
                ]
            }
        }
    }

    /// Saturates `u`, integrates one step of length `dt` and clips the result
    /// into the state box. Returns the next state and the applied control.
    pub fn advance_by(&self, x: Vec2, u: Vec2, dt: f64) -> Result<(Vec2, Vec2)> {
        let u = self.saturate(u)?;
        Ok((self.state_bounds.clamp(self.integrate(x, u, dt)), u))
    }

    pub fn advance(&self, x: Vec2, u: Vec2) -> Result<(Vec2, Vec2)> {
        self.advance_by(x, u, self.dt)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Obstacle {
    pub center: Vec2,
    pub radius: f64,
}

impl Obstacle {
    pub fn validate(&self) -> Result<()> {
        if self.radius > 0.0 && self.center.iter().all(|c| c.is_finite()) {
            Ok(())
        } else {
            Err(Error::Config(format!("invalid obstacle {self:?}")))
        }
    }

    /// Strictly inside the disk.
    pub fn contains(&self, x: Vec2) -> bool {
        distance(x, self.center) < self.radius
    }
}

/// True iff `x` is at least `alpha` from every obstacle center.
pub fn obstacle_clear(x: Vec2, obstacles: &[Obstacle], alpha: f64) -> bool {
    obstacles.iter().all(|o| distance(x, o.center) >= alpha)
}

/// Frame in which the state error of the reward is measured.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum RewardFrame {
    Normalized,
    #[default]
    Original,
}

/// `R(x, u) = −state_cost·eᵀe − action_cost·uᵀu`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RewardConfig {
    pub state_cost: f64,
    pub action_cost: f64,
    pub frame: RewardFrame,
}

impl Default for RewardConfig {
    fn default() -> Self {
        Self {
            state_cost: 0.01,
            action_cost: 0.01,
            frame: RewardFrame::default(),
        }
    }
}

impl RewardConfig {
    pub fn reward(&self, bounds: &StateBounds, x: Vec2, target: Vec2, u: Vec2) -> f64 {
        let e = match self.frame {
            RewardFrame::Normalized => {
                let s = bounds.scale();
                [(x[0] - target[0]) * s[0], (x[1] - target[1]) * s[1]]
            }
            RewardFrame::Original => [x[0] - target[0], x[1] - target[1]],
        };
        -self.state_cost * (e[0] * e[0] + e[1] * e[1]) - self.action_cost * (u[0] * u[0] + u[1] * u[1])
    }
}

/// What a controller observes: the normalized state relative to its target.
#[inline]
pub fn observation(bounds: &StateBounds, x: Vec2, target: Vec2) -> Vec2 {
    let s = bounds.scale();
    [(x[0] - target[0]) * s[0], (x[1] - target[1]) * s[1]]
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Transition {
    pub next_state: Vec2,
    pub applied: Vec2,
    pub reward: f64,
    pub done: bool,
}

/// Fixed-horizon episodic environment stabilizing the plant at `target`.
#[derive(Debug, Clone)]
pub struct MdpEnv {
    pub system: SystemConfig,
    pub target: Vec2,
    pub horizon: usize,
    pub reward: RewardConfig,
    state: Vec2,
    elapsed: usize,
}

impl MdpEnv {
    pub fn new(system: SystemConfig, target: Vec2, horizon: usize, reward: RewardConfig) -> Result<Self> {
        system.validate()?;
        if horizon == 0 {
            return Err(Error::Config("horizon must be positive".into()));
        }
        let state = system.state_bounds.clamp(target);
        Ok(Self {
            system,
            target,
            horizon,
            reward,
            state,
            elapsed: 0,
        })
    }

    pub fn state(&self) -> Vec2 {
        self.state
    }

    pub fn elapsed(&self) -> usize {
        self.elapsed
    }

    /// Starts a new episode from `x` (clipped into the box).
    pub fn reset(&mut self, x: Vec2) -> Vec2 {
        self.state = self.system.state_bounds.clamp(x);
        self.elapsed = 0;
        self.observe()
    }

    /// Starts an episode uniformly (by area) inside the disk of `radius` around the target.
    pub fn reset_near_target<R: Rng + ?Sized>(&mut self, radius: f64, rng: &mut R) -> Vec2 {
        let x = sample_disk(self.target, 0.0, radius, rng);
        self.reset(x)
    }

    pub fn observe(&self) -> Vec2 {
        observation(&self.system.state_bounds, self.state, self.target)
    }

    pub fn step(&mut self, u: Vec2) -> Result<Transition> {
        let (next, applied) = self.system.advance(self.state, u)?;
        let reward = self
            .reward
            .reward(&self.system.state_bounds, self.state, self.target, applied);
        self.state = next;
        self.elapsed += 1;
        Ok(Transition {
            next_state: next,
            applied,
            reward,
            done: self.elapsed >= self.horizon,
        })
    }
}

/// Uniform-by-area sample of the annulus `inner ≤ r ≤ outer` around `center`.
pub fn sample_disk<R: Rng + ?Sized>(center: Vec2, inner: f64, outer: f64, rng: &mut R) -> Vec2 {
    let u: f64 = rng.random();
    let r = (inner * inner + u * (outer * outer - inner * inner)).sqrt();
    let theta = rng.random_range(0.0..std::f64::consts::TAU);
    [center[0] + r * theta.cos(), center[1] + r * theta.sin()]
}
