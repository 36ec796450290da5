//! Mini-batch loop shared by every procedure.

use ipkp_data::LabeledDataset;
use ipkp_nn::rng::{derive_seed, seeded};
use ipkp_nn::{softmax_cross_entropy, LayeredModel, Optimizer, Tensor};
use rand::seq::SliceRandom;

use crate::config::TrainConfig;
use crate::curve::TrainingCurve;
use crate::error::{Result, TrainError};

/// Items seen in one epoch: each dataset listed `copies` times.
pub struct Stream<'a> {
    parts: Vec<(&'a LabeledDataset, usize)>,
}

impl<'a> Stream<'a> {
    pub fn single(ds: &'a LabeledDataset) -> Self {
        Stream { parts: vec![(ds, 1)] }
    }

    pub fn with(mut self, ds: &'a LabeledDataset, copies: usize) -> Self {
        self.parts.push((ds, copies));
        self
    }

    pub fn len(&self) -> usize {
        self.parts.iter().map(|(d, c)| d.len() * c).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    fn order(&self) -> Vec<(u32, u32)> {
        let mut out = Vec::with_capacity(self.len());
        for (p, &(ds, copies)) in self.parts.iter().enumerate() {
            for _ in 0..copies {
                out.extend((0..ds.len()).map(|i| (p as u32, i as u32)));
            }
        }
        out
    }

    fn check(&self, model: &LayeredModel<f32>) -> Result<()> {
        for (ds, _) in &self.parts {
            if ds.image_shape() != model.input_shape() {
                return Err(TrainError::Config(format!(
                    "dataset `{}` has images {:?}, model expects {:?}",
                    ds.name,
                    ds.image_shape(),
                    model.input_shape()
                )));
            }
            if ds.class_count() > model.num_classes() {
                return Err(TrainError::Config(format!(
                    "dataset `{}` has {} classes, model has {}",
                    ds.name,
                    ds.class_count(),
                    model.num_classes()
                )));
            }
        }
        Ok(())
    }
}

/// Runs up to `max_epochs` epochs over `stream`. After every epoch
/// `after_epoch(epoch, mean_loss, model, curve)` is called; returning `true` stops.
pub fn run_epochs(
    model: &mut LayeredModel<f32>,
    stream: &Stream,
    cfg: &TrainConfig,
    max_epochs: usize,
    curve: &mut TrainingCurve,
    mut after_epoch: impl FnMut(usize, f64, &LayeredModel<f32>, &mut TrainingCurve) -> Result<bool>,
) -> Result<()> {
    cfg.validate_loop()?;
    stream.check(model)?;
    if stream.is_empty() {
        return Err(TrainError::Config("training stream is empty".into()));
    }
    let mut opt = Optimizer::new(cfg.optimizer)?;
    let mut rng = seeded(derive_seed(cfg.seed, "shuffle"));
    let [c, h, w] = model.input_shape();
    let item = c * h * w;
    let mut order = stream.order();
    let mut buf = Vec::with_capacity(cfg.batch_size * item);
    let mut labels = Vec::with_capacity(cfg.batch_size);
    for epoch in 1..=max_epochs {
        if cfg.shuffle {
            order.shuffle(&mut rng);
        }
        let mut total = 0.0f64;
        for chunk in order.chunks(cfg.batch_size) {
            buf.clear();
            labels.clear();
            for &(p, i) in chunk {
                let ds = stream.parts[p as usize].0;
                buf.extend_from_slice(ds.image(i as usize));
                labels.push(ds.labels()[i as usize]);
            }
            let batch = Tensor::from_vec(&[chunk.len(), c, h, w], std::mem::take(&mut buf))?;
            let acts = model.forward(&batch)?;
            let (loss, dlogits) = softmax_cross_entropy(acts.logits(), &labels)?;
            if !loss.is_finite() {
                return Err(TrainError::Diverged {
                    iteration: curve.iteration_loss.len() + 1,
                });
            }
            let grads = model.backward_params(&acts, &dlogits)?;
            opt.step(model, &grads)?;
            curve.iteration_loss.push(loss);
            total += loss as f64 * chunk.len() as f64;
            buf = batch.into_data();
        }
        let mean = total / order.len() as f64;
        curve.epoch_loss.push(mean);
        if after_epoch(epoch, mean, model, curve)? {
            break;
        }
    }
    Ok(())
}

/// Fraction of `ds` classified correctly.
pub fn evaluate(model: &LayeredModel<f32>, ds: &LabeledDataset) -> Result<f64> {
    const CHUNK: usize = 500;
    let [c, h, w] = ds.image_shape();
    let item = c * h * w;
    let mut correct = 0usize;
    for start in (0..ds.len()).step_by(CHUNK) {
        let end = (start + CHUNK).min(ds.len());
        let data = ds.images().data()[start * item..end * item].to_vec();
        let batch = Tensor::from_vec(&[end - start, c, h, w], data)?;
        let pred = model.predict(&batch)?;
        correct += pred.iter().zip(&ds.labels()[start..end]).filter(|(p, l)| p == l).count();
    }
    Ok(correct as f64 / ds.len() as f64)
}
