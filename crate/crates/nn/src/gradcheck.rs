//! Brute-force differentiation oracle.
//!
//! The analytic gradient `a` (all probed coordinates of all parameter tensors
//! and, optionally, the input) is compared with the central-difference
//! gradient `n` through the vector relative error `‖a − n‖₂ / ‖a + n‖₂`.
//!
//! The analytic side runs in the model's own precision. The differences are
//! always taken on the `f64` instantiation of the same parameters and inputs
//! (exact for `f32` values), so an `f32` check measures the error of the `f32`
//! backward pass rather than the rounding noise of `f32` loss evaluations.

use rand::seq::SliceRandom;
use rand::Rng;

use crate::error::Result;
use crate::init::{init_params, InitScheme};
use crate::layer::LayerKind;
use crate::loss::softmax_cross_entropy;
use crate::model::LayeredModel;
use crate::rng::{seeded, DetRng};
use crate::scalar::Scalar;
use crate::tensor::Tensor;

/// Outcome of one gradient comparison.
#[derive(Clone, Debug, PartialEq)]
pub struct GradCheckReport {
    /// `‖a − n‖₂ / ‖a + n‖₂` over every probed coordinate.
    pub rel_error: f64,
    /// Tensor with the largest share of `‖a − n‖₂`, e.g. `layer0.weight` or `input`.
    pub worst: String,
    /// Number of coordinates compared.
    pub checked: usize,
}

/// `‖a − n‖₂ / ‖a + n‖₂`; falls back to `‖a − n‖₂` when both vectors vanish.
pub fn relative_error(analytic: &[f64], numeric: &[f64]) -> f64 {
    let (diff, sum) = analytic.iter().zip(numeric).fold((0.0, 0.0), |(d, s), (a, n)| {
        (d + (a - n) * (a - n), s + (a + n) * (a + n))
    });
    if sum == 0.0 {
        diff.sqrt()
    } else {
        (diff / sum).sqrt()
    }
}

fn loss_of(model: &LayeredModel<f64>, batch: &Tensor<f64>, labels: &[usize]) -> Result<f64> {
    Ok(softmax_cross_entropy(&model.logits(batch)?, labels)?.0)
}

/// Central difference of `loss` along one coordinate addressed by `slot`.
fn perturb<M>(
    target: &mut M,
    slot: impl Fn(&mut M) -> &mut f64,
    eps: f64,
    loss: impl Fn(&M) -> Result<f64>,
) -> Result<f64> {
    let original = *slot(target);
    let (hi, lo) = (original + eps, original - eps);
    *slot(target) = hi;
    let plus = loss(target)?;
    *slot(target) = lo;
    let minus = loss(target)?;
    *slot(target) = original;
    Ok((plus - minus) / (hi - lo))
}

fn pick_coords(len: usize, limit: Option<usize>, rng: &mut DetRng) -> Vec<usize> {
    let mut all: Vec<usize> = (0..len).collect();
    match limit {
        Some(n) if n < len => {
            all.shuffle(rng);
            all.truncate(n);
            all.sort_unstable();
            all
        }
        _ => all,
    }
}

/// Compares backprop gradients of the mean cross-entropy loss against central
/// differences with step `eps`, for every parameter tensor and the input.
///
/// `max_coords` caps the coordinates probed per tensor (chosen at random from
/// `seed`); `None` probes all of them.
pub fn check_model_gradients<T: Scalar>(
    model: &LayeredModel<T>,
    batch: &Tensor<T>,
    labels: &[usize],
    eps: f64,
    max_coords: Option<usize>,
    seed: u64,
) -> Result<GradCheckReport> {
    check_gradients(model, batch, labels, eps, max_coords, seed, true)
}

/// As [`check_model_gradients`] but over parameter tensors only.
pub fn check_param_gradients<T: Scalar>(
    model: &LayeredModel<T>,
    batch: &Tensor<T>,
    labels: &[usize],
    eps: f64,
    max_coords: Option<usize>,
    seed: u64,
) -> Result<GradCheckReport> {
    check_gradients(model, batch, labels, eps, max_coords, seed, false)
}

fn check_gradients<T: Scalar>(
    model: &LayeredModel<T>,
    batch: &Tensor<T>,
    labels: &[usize],
    eps: f64,
    max_coords: Option<usize>,
    seed: u64,
    with_input: bool,
) -> Result<GradCheckReport> {
    let acts = model.forward(batch)?;
    let (_, dlogits) = softmax_cross_entropy(acts.logits(), labels)?;
    let grads = model.backward(&acts, &dlogits)?;
    let mut rng = seeded(seed);
    let mut all_a = Vec::new();
    let mut all_n = Vec::new();
    let mut worst = (String::new(), -1.0f64);
    let mut record = |name: String, analytic: Vec<f64>, numeric: Vec<f64>| {
        let d: f64 = analytic.iter().zip(&numeric).map(|(a, n)| (a - n) * (a - n)).sum();
        if d > worst.1 {
            worst = (name, d);
        }
        all_a.extend(analytic);
        all_n.extend(numeric);
    };

    let mut probe = model.cast::<f64>();
    let batch64 = batch.cast::<f64>();
    for p in 0..model.num_param_layers() {
        let layer = model.param_layer_indices()[p];
        for (which, name) in [(0, "weight"), (1, "bias")] {
            let g = if which == 0 { &grads.params[p].weight } else { &grads.params[p].bias };
            let coords = pick_coords(g.len(), max_coords, &mut rng);
            let mut analytic = Vec::with_capacity(coords.len());
            let mut numeric = Vec::with_capacity(coords.len());
            for &i in &coords {
                analytic.push(g.data()[i].as_f64());
                numeric.push(perturb(
                    &mut probe,
                    |m: &mut LayeredModel<f64>| {
                        let (w, b) = m.param_data_mut(p);
                        if which == 0 {
                            &mut w[i]
                        } else {
                            &mut b[i]
                        }
                    },
                    eps,
                    |m| loss_of(m, &batch64, labels),
                )?);
            }
            record(format!("layer{layer}.{name}"), analytic, numeric);
        }
    }

    if with_input {
        let gin = grads.input.as_ref().expect("backward returns the input gradient");
        let coords = pick_coords(gin.len(), max_coords, &mut rng);
        let mut x = batch64.clone();
        let mut analytic = Vec::with_capacity(coords.len());
        let mut numeric = Vec::with_capacity(coords.len());
        for &i in &coords {
            analytic.push(gin.data()[i].as_f64());
            numeric.push(perturb(
                &mut x,
                |t: &mut Tensor<f64>| &mut t.data_mut()[i],
                eps,
                |t| loss_of(&probe, t, labels),
            )?);
        }
        record("input".into(), analytic, numeric);
    }
    drop(record);
    Ok(GradCheckReport {
        rel_error: relative_error(&all_a, &all_n),
        worst: worst.0,
        checked: all_a.len(),
    })
}

/// Checks `softmax_cross_entropy`'s logit gradient against central differences.
pub fn check_loss_gradient<T: Scalar>(logits: &Tensor<T>, labels: &[usize], eps: f64) -> Result<GradCheckReport> {
    let (_, grad) = softmax_cross_entropy(logits, labels)?;
    let mut z = logits.cast::<f64>();
    let mut numeric = Vec::with_capacity(z.len());
    for i in 0..z.len() {
        numeric.push(perturb(
            &mut z,
            |t: &mut Tensor<f64>| &mut t.data_mut()[i],
            eps,
            |t| Ok(softmax_cross_entropy(t, labels)?.0),
        )?);
    }
    let analytic: Vec<f64> = grad.data().iter().map(|v| v.as_f64()).collect();
    Ok(GradCheckReport {
        rel_error: relative_error(&analytic, &numeric),
        worst: "logits".into(),
        checked: analytic.len(),
    })
}

/// Layer kind exercised by a randomized gradient-check trial.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum TrialKind {
    Conv2d,
    MaxPool,
    Relu,
    Tanh,
    Flatten,
    Dense,
}

impl TrialKind {
    pub const ALL: [TrialKind; 6] = [
        TrialKind::Conv2d,
        TrialKind::MaxPool,
        TrialKind::Relu,
        TrialKind::Tanh,
        TrialKind::Flatten,
        TrialKind::Dense,
    ];
}

/// A small random model, batch and label vector.
#[derive(Clone, Debug)]
pub struct Trial<T> {
    pub model: LayeredModel<T>,
    pub batch: Tensor<T>,
    pub labels: Vec<usize>,
}

/// Builds a randomized trial around one layer kind: `[layer] → flatten → dense`.

/// Inputs avoid the non-differentiable points of the piecewise layers by more
/// than `margin`: ReLU inputs stay away from 0 and max-pool inputs are
/// pairwise distinct by more than `4·margin`.
pub fn layer_trial<T: Scalar>(kind: TrialKind, seed: u64, margin: f64) -> Trial<T> {
    let mut rng = seeded(seed);
    let classes = rng.random_range(2..=4);
    let batch = rng.random_range(1..=3);
    let c = rng.random_range(1..=3);
    let h = rng.random_range(4..=7);
    let w = rng.random_range(4..=7);
    let mut kinds = Vec::new();
    match kind {
        TrialKind::Conv2d => {
            let k = rng.random_range(1..=3);
            kinds.push(LayerKind::Conv2d {
                out_channels: rng.random_range(1..=3),
                kernel_h: k,
                kernel_w: rng.random_range(1..=3),
                stride: rng.random_range(1..=2),
                padding: rng.random_range(0..=1),
            });
        }
        TrialKind::MaxPool => {
            let window = rng.random_range(1..=3);
            kinds.push(LayerKind::MaxPool {
                window,
                stride: rng.random_range(1..=window),
            });
        }
        TrialKind::Relu => kinds.push(LayerKind::Relu),
        TrialKind::Tanh => kinds.push(LayerKind::Tanh),
        TrialKind::Flatten => {}
        TrialKind::Dense => {
            kinds.push(LayerKind::Flatten);
            kinds.push(LayerKind::Dense {
                out_features: rng.random_range(1..=5),
            });
        }
    }
    kinds.push(LayerKind::Flatten);
    kinds.push(LayerKind::Dense { out_features: classes });
    let mut model = LayeredModel::<T>::new([c, h, w], &kinds, classes).expect("trial shapes are valid");
    init_params(&mut model, &InitScheme::glorot(rng.random())).expect("trial model initializes");
    for p in 0..model.num_param_layers() {
        let (_, b) = model.param_data_mut(p);
        for v in b.iter_mut() {
            *v = T::from_f64(rng.random_range(-0.5..0.5));
        }
    }
    let n = batch * c * h * w;
    let data: Vec<f64> = match kind {
        TrialKind::MaxPool => {
            // a shuffled even grid over [-1, 1]; neighbours differ by 2/n
            assert!(2.0 / n as f64 > 4.0 * margin, "max-pool trial too large for margin {margin}");
            let mut v: Vec<f64> = (0..n).map(|i| (2 * i + 1) as f64 / n as f64 - 1.0).collect();
            v.shuffle(&mut rng);
            v
        }
        TrialKind::Relu => (0..n)
            .map(|_| {
                let m = rng.random_range(10.0 * margin..1.0);
                if rng.random::<bool>() {
                    m
                } else {
                    -m
                }
            })
            .collect(),
        _ => (0..n).map(|_| rng.random_range(-1.0..1.0)).collect(),
    };
    let batch_t = Tensor::from_vec(&[batch, c, h, w], data.into_iter().map(T::from_f64).collect())
        .expect("trial batch shape");
    let labels = (0..batch).map(|_| rng.random_range(0..classes)).collect();
    Trial {
        model,
        batch: batch_t,
        labels,
    }
}
