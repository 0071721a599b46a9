//! Small feed-forward network engine with hand-written backprop.

mod loss;
mod multitask;
mod net;
mod optim;

use thiserror::Error;

pub use loss::{ce_batch, ce_loss, contrastive_loss, mse_batch, mse_loss, ContrastiveParams};
pub use multitask::{
    total_loss, translation_loss, DaeGrads, DaeNets, LossBreakdown, LossWeights, PhraseLoss,
};
pub use net::{FeedForwardNet, Layer, NetGrads, Trace};
pub use optim::{optimize_step, AdamConfig, AdamState};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum NnError {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    Dimension { expected: usize, got: usize },
    #[error("empty batch")]
    EmptyBatch,
    #[error("incompatible layer dimensions {0:?}")]
    BadArchitecture(Vec<usize>),
    #[error("non-finite parameter")]
    NonFinite,
    #[error("parameter and gradient shapes do not match the optimizer state")]
    ShapeMismatch,
}
