pub mod config;
pub mod dynamics;
pub mod error;
pub mod executor;
pub mod graph;
pub mod lyapunov;
pub mod nn;
pub mod nodes;
pub mod ppo;
pub mod run;
pub mod tree;

pub use error::{Error, Result};
