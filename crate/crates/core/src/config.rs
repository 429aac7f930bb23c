//! Run configuration loaded from TOML.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::dynamics::{Obstacle, RewardConfig, SystemConfig, Vec2};
use crate::error::{Error, Result};
use crate::executor::ExecutorConfig;
use crate::graph::GraphConfig;
use crate::lyapunov::{LyapunovConfig, RoaConfig};
use crate::nodes::{SamplingConfig, SynthesisConfig};
use crate::ppo::PpoConfig;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    #[default]
    Tpc,
    Gpc,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub seed: u64,
    pub mode: Mode,
    pub start: Vec2,
    pub goal: Vec2,
    /// Start states routed after a graph is built.
    pub starts: Vec<Vec2>,
    pub horizon: usize,
    pub system: SystemConfig,
    pub obstacles: Vec<Obstacle>,
    pub reward: RewardConfig,
    pub ppo: PpoConfig,
    pub lyapunov: LyapunovConfig,
    pub roa: RoaConfig,
    pub sampling: SamplingConfig,
    pub graph: GraphConfig,
    pub executor: ExecutorConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            mode: Mode::Tpc,
            start: [-4.0, -4.0],
            goal: [4.0, 4.0],
            starts: vec![[-4.0, -4.0], [-3.5, 2.25], [4.5, -3.0]],
            horizon: 300,
            system: SystemConfig::default(),
            obstacles: Vec::new(),
            reward: RewardConfig::default(),
            ppo: PpoConfig::default(),
            lyapunov: LyapunovConfig::default(),
            roa: RoaConfig::default(),
            sampling: SamplingConfig::default(),
            graph: GraphConfig::default(),
            executor: ExecutorConfig::default(),
        }
    }
}

impl RunConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Parse {
            path: "<config>".into(),
            message: e.to_string(),
        })
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        toml::from_str(&text).map_err(|e| Error::Parse {
            path: path.to_path_buf(),
            message: e.to_string(),
        })
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("run configuration always serializes")
    }

    pub fn synthesis(&self) -> SynthesisConfig {
        SynthesisConfig {
            ppo: self.ppo.clone(),
            lyapunov: self.lyapunov.clone(),
            roa: self.roa.clone(),
            reward: self.reward,
            horizon: self.horizon,
            settle_tol: self.executor.switch_tol,
        }
    }

    /// All single-section and cross-parameter checks.
    pub fn validate(&self) -> Result<()> {
        self.system.validate()?;
        for o in &self.obstacles {
            o.validate()?;
        }
        self.synthesis().validate()?;
        self.sampling.validate(&self.roa, &self.obstacles)?;
        if !(self.executor.switch_tol > 0.0) || self.executor.steps_per_node == 0 {
            return Err(Error::Config("switch_tol and steps_per_node must be positive".into()));
        }
        if self.graph.grid_resolution == 0 {
            return Err(Error::Config("grid_resolution must be positive".into()));
        }
        let points = [("start", self.start), ("goal", self.goal)]
            .into_iter()
            .chain(self.starts.iter().map(|&s| ("route start", s)));
        for (name, x) in points {
            if !self.system.state_bounds.contains(x) {
                return Err(Error::Config(format!("{name} ({}, {}) is outside the state box", x[0], x[1])));
            }
            if self.obstacles.iter().any(|o| o.contains(x)) {
                return Err(Error::Config(format!("{name} ({}, {}) lies inside an obstacle", x[0], x[1])));
            }
        }
        Ok(())
    }
}
