use ipkp_nn::OptimizerConfig;

use crate::error::{Result, TrainError};

#[derive(Clone, Debug, PartialEq)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub optimizer: OptimizerConfig,
    pub seed: u64,
    pub shuffle: bool,
    /// Validation accuracy is recorded every `val_every` epochs and after the last one.
    pub val_every: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            epochs: 10,
            batch_size: 32,
            optimizer: OptimizerConfig::momentum(0.01, 0.9),
            seed: 0,
            shuffle: true,
            val_every: 1,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.epochs == 0 {
            return Err(TrainError::Config("epochs must be at least 1".into()));
        }
        self.validate_loop()
    }

    pub(crate) fn validate_loop(&self) -> Result<()> {
        if self.batch_size == 0 {
            return Err(TrainError::Config("batch_size must be at least 1".into()));
        }
        if self.val_every == 0 {
            return Err(TrainError::Config("val_every must be at least 1".into()));
        }
        self.optimizer.validate()?;
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct PretrainConfig {
    /// Batch size, optimizer, seed and shuffling; `epochs` is unused.
    pub base: TrainConfig,
    /// Stop once the epoch-mean training loss falls below this.
    pub loss_threshold: f64,
    pub max_epochs: usize,
}

impl Default for PretrainConfig {
    fn default() -> Self {
        PretrainConfig {
            base: TrainConfig::default(),
            loss_threshold: 1e-2,
            max_epochs: 500,
        }
    }
}

impl PretrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.loss_threshold > 0.0) {
            return Err(TrainError::Config(format!("loss threshold must be positive, got {}", self.loss_threshold)));
        }
        if self.max_epochs == 0 {
            return Err(TrainError::Config("max_epochs must be at least 1".into()));
        }
        self.base.validate_loop()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct MixConfig {
    /// Copies of the prototype set in every epoch's stream.
    pub prototype_weight: usize,
}

impl Default for MixConfig {
    fn default() -> Self {
        MixConfig { prototype_weight: 1 }
    }
}

/// `round(base_epochs / fraction)`: the same number of seen items at every subset size.
pub fn scaled_epochs(base_epochs: usize, fraction: f64) -> usize {
    (base_epochs as f64 / fraction).round() as usize
}
