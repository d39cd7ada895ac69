//! Minimal dense-tensor neural core: reverse-mode autodiff over 2-D f64
//! tensors, transformer building blocks, masked softmax, losses, Adam with
//! a warm-up schedule, and a versioned checkpoint container.
//!
//! Everything is 64-bit and single-threaded per model instance; frozen
//! parameter sets are shareable across evaluation workers.

pub mod blocks;
pub mod checkpoint;
pub mod gradcheck;
pub mod loss;
pub mod ops;
pub mod optim;
pub mod params;
pub mod tensor;

pub use blocks::{pos_encode, transformer_block, AttentionBlockParams};
pub use loss::{cross_entropy_with_label_smoothing, masked_cross_entropy};
pub use ops::masked_softmax;
pub use optim::{adam_step, adam_step_many, AdamOptions, AdamState, LrSchedule};
pub use params::{Param, ParamSet};
pub use tensor::{backward, Gradients, Tensor};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum NnError {
    #[error("width mismatch: expected {expected}, got {got} ({context})")]
    WidthMismatch {
        expected: usize,
        got: usize,
        context: String,
    },
    #[error("all entries masked in softmax input")]
    AllMasked,
    #[error("positional encoding requires an even width, got {0}")]
    OddWidth(usize),
    #[error("loss tensor is detached from any trainable parameter")]
    DetachedGraph,
    #[error("backward requires a scalar loss, got {rows}x{cols}")]
    NonScalarLoss { rows: usize, cols: usize },
    #[error("non-finite gradient for parameter {name:?}")]
    NanGradient { name: String },
    #[error("target {target} out of range for {classes} classes")]
    TargetOutOfRange { target: usize, classes: usize },
    #[error("training diverged: {0}")]
    Divergence(String),
    #[error("empty input: {0}")]
    EmptyInput(String),
    #[error("turn {turn} is not a node of the graph")]
    NodeNotInGraph { turn: usize },
}
