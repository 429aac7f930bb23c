//! Feed-forward networks with exact gradients and an Adam optimizer.

mod activation;
mod adam;
mod linalg;
mod network;

pub use activation::{Activation, LEAKY_RELU_SLOPE};
pub use adam::{adam_update, AdamConfig, AdamState};
pub use network::{Dense, GradientBundle, LayerGradient, NetworkParams, Tape};
