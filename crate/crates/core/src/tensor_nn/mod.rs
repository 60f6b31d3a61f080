//! Dense tensors and hand-written neural network kernels.
//!
//! Every layer has an explicit forward pass returning a cache and an explicit
//! backward pass that accumulates parameter gradients and returns the input
//! gradient. [`grad_check`] verifies backward passes against central
//! differences.
//!
//! All math is `f64`. Matrix kernels may split output rows across the rayon
//! pool sized by `LFX_THREADS`; each output element is still accumulated by a
//! single worker in a fixed order, so results do not depend on worker count.

mod activation;
mod adam;
pub mod checkpoint;
mod conv;
mod dense;
mod dropout;
pub mod grad_check;
pub mod kernels;
mod loss;
mod lstm;
mod network;
mod standardize;
mod tensor;

use thiserror::Error;

pub use activation::{relu, sigmoid, sigmoid_scalar, tanh};
pub use adam::{adam_step, AdamConfig};
pub use conv::{conv2d_forward, Conv2d};
pub use dense::{dense_forward, Dense};
pub use dropout::{dropout, Dropout};
pub use loss::{bce_loss, BCE_CLAMP};
pub use lstm::{lstm_step, Lstm, LstmParams};
pub use network::{Cache, Layer, LayerState, Mode, Network, Param};
pub use standardize::{Standardize, STD_FLOOR};
pub use tensor::Tensor;

#[derive(Debug, Error)]
pub enum NnError {
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("dropout rate must lie in [0, 1), got {0}")]
    InvalidRate(f64),
    #[error("checkpoint: {0}")]
    Checkpoint(String),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

pub(crate) fn shape_err(msg: impl Into<String>) -> NnError {
    NnError::ShapeMismatch(msg.into())
}

/// Glorot/Xavier uniform bound `sqrt(6 / (fan_in + fan_out))`.
pub fn glorot_limit(fan_in: usize, fan_out: usize) -> f64 {
    (6.0 / (fan_in + fan_out) as f64).sqrt()
}
