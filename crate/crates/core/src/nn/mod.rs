//! A small dense-tensor network engine: the layer kinds a gated recurrent
//! convolutional detector needs, exact reverse-mode gradients, mini-batch
//! training on binary cross-entropy, and a binary weight container.

mod layer;
mod model;
pub mod ops;
mod serial;
mod tensor;
mod train;

pub use layer::LayerSpec;
pub use model::{shape_trace, Gradients, Layer, LayerSummary, ModelGraph};
pub use ops::{bce_loss, conv2d_forward, dense_forward, gru_forward, Activation};
pub use serial::{deserialize, serialize, FORMAT_VERSION, MAGIC};
pub use tensor::Tensor;
pub use train::{accuracy, train, EpochStats, Optimizer, OptimizerKind, TrainConfig, TrainReport};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum NnError {
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("invalid layer: {0}")]
    InvalidLayer(String),
    #[error("non-finite value: {0}")]
    NaNDetected(String),
    #[error("empty dataset")]
    EmptyDataset,
    #[error("corrupt model: {0}")]
    CorruptModel(String),
    #[error("invalid training configuration: {0}")]
    InvalidConfig(String),
}
