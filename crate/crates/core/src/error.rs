use std::path::PathBuf;

use thiserror::Error;

use crate::graph::ControllerGraph;
use crate::tree::ControllerTree;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("input shape mismatch: expected {expected}, got {got}")]
    Shape { expected: usize, got: usize },

    #[error("invalid network: {0}")]
    InvalidNetwork(String),

    #[error("non-finite gradient in {0}")]
    NonFiniteGradient(String),

    #[error("non-finite value: {0}")]
    NonFinite(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("rollout buffer is empty")]
    EmptyBuffer,

    #[error("timestep budget {budget} is smaller than one rollout of {rollout} steps")]
    Budget { budget: usize, rollout: usize },

    #[error("no node region contains ({0:.4}, {1:.4})")]
    Uncovered(f64, f64),

    #[error("no path from node {from} to node {to}")]
    NoPath { from: usize, to: usize },

    #[error("unknown node id {0}")]
    UnknownNode(usize),

    #[error("start state not covered after {iterations} iterations ({nodes} nodes)", nodes = .partial.nodes.len())]
    TreeCoverage {
        iterations: usize,
        partial: Box<ControllerTree>,
    },

    #[error("region not covered after {iterations} iterations ({uncovered:.4} of grid uncovered)")]
    GraphCoverage {
        iterations: usize,
        uncovered: f64,
        partial: Box<ControllerGraph>,
    },

    #[error("goal node at ({0:.3}, {1:.3}) rejected with eta {2:.3}; retry with a different seed")]
    GoalRejected(f64, f64, f64),

    #[error("state ({0:.4}, {1:.4}) lies outside the first controller's region")]
    OutsideRegion(f64, f64),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },

    #[error("{path}: {source}")]
    Json {
        path: PathBuf,
        source: serde_json::Error,
    },

    #[error("{path}: {message}")]
    Parse { path: PathBuf, message: String },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
