use std::path::Path;

use ipkp_data::{LabeledDataset, PrototypeSet};
use ipkp_nn::{init_params, save_checkpoint, InitScheme, LayeredModel, NnError};

use crate::config::{MixConfig, PretrainConfig, TrainConfig};
use crate::curve::TrainingCurve;
use crate::engine::{evaluate, run_epochs, Stream};
use crate::error::{Result, TrainError};

#[derive(Clone, Debug, PartialEq)]
pub struct PretrainReport {
    pub epochs: usize,
    pub final_loss: f64,
    /// Epoch-mean loss fell below the threshold.
    pub converged: bool,
    /// Accuracy on the prototypes after training.
    pub train_accuracy: f64,
    /// Every prototype classified correctly.
    pub memorized: bool,
}

#[derive(Clone, Debug)]
pub struct Pretrained {
    pub model: LayeredModel<f32>,
    pub curve: TrainingCurve,
    pub report: PretrainReport,
}

/// Trains on prototypes only until the epoch-mean loss drops below the
/// threshold or `max_epochs` is reached.
pub fn pretrain(model: LayeredModel<f32>, protos: &PrototypeSet, cfg: &PretrainConfig) -> Result<Pretrained> {
    cfg.validate()?;
    if protos.is_empty() {
        return Err(TrainError::Config("prototype set is empty".into()));
    }
    let mut model = model;
    let mut curve = TrainingCurve::default();
    let mut converged = false;
    run_epochs(&mut model, &Stream::single(protos.dataset()), &cfg.base, cfg.max_epochs, &mut curve, |_, loss, _, _| {
        converged = loss < cfg.loss_threshold;
        Ok(converged)
    })?;
    let train_accuracy = evaluate(&model, protos.dataset())?;
    let report = PretrainReport {
        epochs: curve.epochs(),
        final_loss: curve.epoch_loss.last().copied().unwrap_or(f64::NAN),
        converged,
        train_accuracy,
        memorized: train_accuracy == 1.0,
    };
    Ok(Pretrained { model, curve, report })
}

fn train_with_validation(
    model: LayeredModel<f32>,
    stream: &Stream,
    val: Option<&LabeledDataset>,
    cfg: &TrainConfig,
) -> Result<(LayeredModel<f32>, TrainingCurve)> {
    cfg.validate()?;
    let mut model = model;
    let mut curve = TrainingCurve::default();
    run_epochs(&mut model, stream, cfg, cfg.epochs, &mut curve, |epoch, _, m, curve| {
        if let Some(val) = val {
            if epoch % cfg.val_every == 0 || epoch == cfg.epochs {
                curve.val_accuracy.push((epoch, evaluate(m, val)?));
            }
        }
        Ok(false)
    })?;
    Ok((model, curve))
}

/// Mini-batch training for exactly `cfg.epochs` epochs; no early stopping.
pub fn finetune(
    model: LayeredModel<f32>,
    train: &LabeledDataset,
    val: &LabeledDataset,
    cfg: &TrainConfig,
) -> Result<(LayeredModel<f32>, TrainingCurve)> {
    train_with_validation(model, &Stream::single(train), Some(val), cfg)
}

/// Supervised pre-training on a related source dataset.
pub fn data_pretrain_surrogate(
    model: LayeredModel<f32>,
    source: &LabeledDataset,
    cfg: &TrainConfig,
) -> Result<(LayeredModel<f32>, TrainingCurve)> {
    train_with_validation(model, &Stream::single(source), None, cfg)
}

/// As [`finetune`] with the prototypes mixed into every epoch's stream
/// `mix.prototype_weight` times.
pub fn informed_concurrent(
    model: LayeredModel<f32>,
    train: &LabeledDataset,
    val: &LabeledDataset,
    protos: &PrototypeSet,
    mix: &MixConfig,
    cfg: &TrainConfig,
) -> Result<(LayeredModel<f32>, TrainingCurve)> {
    if protos.is_empty() {
        return Err(TrainError::Config("prototype set is empty".into()));
    }
    if mix.prototype_weight == 0 {
        return Err(TrainError::Config("prototype_weight must be at least 1".into()));
    }
    let stream = Stream::single(train).with(protos.dataset(), mix.prototype_weight);
    train_with_validation(model, &stream, Some(val), cfg)
}

/// Keeps the first `k` parameterized layers of `pretrained` and re-initializes
/// the rest with `scheme`.
///
/// The whole model is initialized from `scheme` before the first `k` layers
/// are copied back, so `k = 0` equals `init_params(model, scheme)` exactly.
pub fn truncate_transfer(pretrained: &LayeredModel<f32>, k: usize, scheme: &InitScheme) -> Result<LayeredModel<f32>> {
    let layers = pretrained.num_param_layers();
    if k > layers {
        return Err(NnError::TruncationOutOfRange { k, layers }.into());
    }
    let mut out = pretrained.clone();
    init_params(&mut out, scheme)?;
    for p in 0..k {
        out.set_param_layer(p, pretrained.param_layer(p).clone())?;
    }
    Ok(out)
}

/// Checkpoint tag `<scheme>/<config hash>`.
pub fn checkpoint_tag(scheme: &str, config_hash: &str) -> String {
    format!("{scheme}/{config_hash}")
}

pub fn save_tagged_checkpoint(path: &Path, model: &LayeredModel<f32>, scheme: &str, config_hash: &str) -> Result<()> {
    Ok(save_checkpoint(path, model, &checkpoint_tag(scheme, config_hash))?)
}
