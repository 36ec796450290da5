use rand::Rng;
use rand_distr::{Distribution, Normal};

use crate::error::{NnError, Result};
use crate::model::LayeredModel;
use crate::rng::seeded;
use crate::scalar::Scalar;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum InitKind {
    GlorotUniform,
    HeNormal,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct InitScheme {
    pub kind: InitKind,
    pub seed: u64,
}

impl InitScheme {
    pub fn glorot(seed: u64) -> Self {
        InitScheme {
            kind: InitKind::GlorotUniform,
            seed,
        }
    }

    pub fn he(seed: u64) -> Self {
        InitScheme {
            kind: InitKind::HeNormal,
            seed,
        }
    }
}

/// Redraws every parameter of `model` from `scheme`; biases become zero.
///
/// Values are drawn in `f64` and rounded, so an `f32` and an `f64` model
/// initialized from the same scheme agree up to that rounding.
pub fn init_params<T: Scalar>(model: &mut LayeredModel<T>, scheme: &InitScheme) -> Result<()> {
    let mut rng = seeded(scheme.seed);
    for p in 0..model.num_param_layers() {
        let layer_index = model.param_layer_indices()[p];
        let layer = &model.layers()[layer_index];
        let (_, _, fan_in, fan_out) = layer
            .kind
            .param_shapes(layer.input_shape())
            .ok_or_else(|| NnError::InvalidLayer {
                layer: layer_index,
                reason: format!("{} has no initializable parameters", layer.kind),
            })?;
        let (w, b) = model.param_data_mut(p);
        match scheme.kind {
            InitKind::GlorotUniform => {
                let a = (6.0 / (fan_in + fan_out) as f64).sqrt();
                for v in w.iter_mut() {
                    *v = T::from_f64(rng.random_range(-a..a));
                }
            }
            InitKind::HeNormal => {
                let dist = Normal::new(0.0, (2.0 / fan_in as f64).sqrt()).map_err(|e| NnError::InvalidLayer {
                    layer: layer_index,
                    reason: e.to_string(),
                })?;
                for v in w.iter_mut() {
                    *v = T::from_f64(dist.sample(&mut rng));
                }
            }
        }
        b.fill(T::zero());
    }
    Ok(())
}
