//! Minimal deterministic convolutional network engine.
//!
//! Everything is generic over [`Scalar`] so the same forward/backward code can
//! run in `f32` for training and in `f64` for finite-difference checks.

pub mod checkpoint;
pub mod conv;
pub mod error;
pub mod gradcheck;
pub mod init;
pub mod layer;
pub mod loss;
pub mod model;
pub mod optim;
pub mod rng;
pub mod scalar;
pub mod tensor;

pub use checkpoint::{load_checkpoint, load_checkpoint_for, save_checkpoint, Checkpoint};
pub use conv::{conv2d, conv2d_oracle};
pub use error::{NnError, Result};
pub use init::{init_params, InitKind, InitScheme};
pub use layer::{Layer, LayerKind, Params};
pub use loss::softmax_cross_entropy;
pub use model::{Activations, Gradients, LayeredModel};
pub use optim::{optimizer_step, Optimizer, OptimizerConfig, OptimizerKind, OptimizerState};
pub use scalar::Scalar;
pub use tensor::Tensor;
