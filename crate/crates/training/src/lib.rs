//! Training procedures: pre-training on prototypes to memorization,
//! fine-tuning, layer-truncated transfer, supervised surrogate pre-training
//! and concurrent informed learning.

pub mod config;
pub mod curve;
pub mod engine;
pub mod error;
pub mod procedures;

pub use config::{scaled_epochs, MixConfig, PretrainConfig, TrainConfig};
pub use curve::TrainingCurve;
pub use engine::{evaluate, run_epochs, Stream};
pub use error::{Result, TrainError};
pub use procedures::{
    checkpoint_tag, data_pretrain_surrogate, finetune, informed_concurrent, pretrain, save_tagged_checkpoint, truncate_transfer,
    PretrainReport, Pretrained,
};
