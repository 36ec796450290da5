use crate::error::{NnError, Result};
use crate::model::{Gradients, LayeredModel};
use crate::scalar::Scalar;

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum OptimizerKind {
    Sgd,
    SgdMomentum { momentum: f64 },
    Adam { beta1: f64, beta2: f64, eps: f64 },
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct OptimizerConfig {
    pub kind: OptimizerKind,
    pub learning_rate: f64,
}

impl OptimizerConfig {
    pub fn sgd(learning_rate: f64) -> Self {
        OptimizerConfig {
            kind: OptimizerKind::Sgd,
            learning_rate,
        }
    }

    pub fn momentum(learning_rate: f64, momentum: f64) -> Self {
        OptimizerConfig {
            kind: OptimizerKind::SgdMomentum { momentum },
            learning_rate,
        }
    }

    pub fn adam(learning_rate: f64) -> Self {
        OptimizerConfig {
            kind: OptimizerKind::Adam {
                beta1: 0.9,
                beta2: 0.999,
                eps: 1e-8,
            },
            learning_rate,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let unit = |name: &str, v: f64| {
            if (0.0..1.0).contains(&v) {
                Ok(())
            } else {
                Err(NnError::InvalidConfig(format!("{name} must be in [0, 1), got {v}")))
            }
        };
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(NnError::InvalidConfig(format!(
                "learning rate must be positive, got {}",
                self.learning_rate
            )));
        }
        match self.kind {
            OptimizerKind::Sgd => Ok(()),
            OptimizerKind::SgdMomentum { momentum } => unit("momentum", momentum),
            OptimizerKind::Adam { beta1, beta2, eps } => {
                unit("adam_beta1", beta1)?;
                unit("adam_beta2", beta2)?;
                if eps > 0.0 {
                    Ok(())
                } else {
                    Err(NnError::InvalidConfig(format!("adam_eps must be positive, got {eps}")))
                }
            }
        }
    }
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        OptimizerConfig::momentum(0.01, 0.9)
    }
}

/// Per-tensor optimizer state: velocity (momentum) or first/second moments (Adam).
#[derive(Clone, Debug, Default, PartialEq)]
pub struct OptimizerState<T = f32> {
    pub step: u64,
    first: Vec<Vec<T>>,
    second: Vec<Vec<T>>,
}

impl<T: Scalar> OptimizerState<T> {
    pub fn new() -> Self {
        OptimizerState {
            step: 0,
            first: Vec::new(),
            second: Vec::new(),
        }
    }
}

/// One optimizer update over a list of parameter slices and matching gradients.
pub fn optimizer_step<T: Scalar>(
    params: &mut [&mut [T]],
    grads: &[&[T]],
    state: &mut OptimizerState<T>,
    config: &OptimizerConfig,
) -> Result<()> {
    if params.len() != grads.len() {
        return Err(NnError::InvalidConfig(format!(
            "{} parameter tensors but {} gradients",
            params.len(),
            grads.len()
        )));
    }
    for (i, (p, g)) in params.iter().zip(grads).enumerate() {
        if p.len() != g.len() {
            return Err(NnError::ShapeMismatch {
                layer: i,
                expected: vec![p.len()],
                found: vec![g.len()],
            });
        }
    }
    let needs_first = !matches!(config.kind, OptimizerKind::Sgd);
    let needs_second = matches!(config.kind, OptimizerKind::Adam { .. });
    if needs_first && state.first.is_empty() {
        state.first = params.iter().map(|p| vec![T::zero(); p.len()]).collect();
    }
    if needs_second && state.second.is_empty() {
        state.second = params.iter().map(|p| vec![T::zero(); p.len()]).collect();
    }
    if (needs_first && state.first.len() != params.len())
        || state.first.iter().zip(params.iter()).any(|(s, p)| s.len() != p.len())
    {
        return Err(NnError::InvalidConfig("optimizer state does not match parameters".into()));
    }
    state.step += 1;
    let lr = T::from_f64(config.learning_rate);
    match config.kind {
        OptimizerKind::Sgd => {
            for (p, g) in params.iter_mut().zip(grads) {
                for (pv, &gv) in p.iter_mut().zip(g.iter()) {
                    *pv -= lr * gv;
                }
            }
        }
        OptimizerKind::SgdMomentum { momentum } => {
            let m = T::from_f64(momentum);
            for ((p, g), v) in params.iter_mut().zip(grads).zip(state.first.iter_mut()) {
                for ((pv, &gv), vv) in p.iter_mut().zip(g.iter()).zip(v.iter_mut()) {
                    *vv = m * *vv + gv;
                    *pv -= lr * *vv;
                }
            }
        }
        OptimizerKind::Adam { beta1, beta2, eps } => {
            let t = state.step as i32;
            let c1 = T::from_f64(1.0 - beta1.powi(t));
            let c2 = T::from_f64(1.0 - beta2.powi(t));
            let (b1, b2, eps) = (T::from_f64(beta1), T::from_f64(beta2), T::from_f64(eps));
            for (i, (p, g)) in params.iter_mut().zip(grads).enumerate() {
                let (m, v) = (&mut state.first[i], &mut state.second[i]);
                for j in 0..p.len() {
                    let gv = g[j];
                    m[j] = b1 * m[j] + (T::one() - b1) * gv;
                    v[j] = b2 * v[j] + (T::one() - b2) * gv * gv;
                    let mhat = m[j] / c1;
                    let vhat = v[j] / c2;
                    p[j] -= lr * mhat / (vhat.sqrt() + eps);
                }
            }
        }
    }
    Ok(())
}

/// Optimizer bound to one model's parameter list.
#[derive(Clone, Debug)]
pub struct Optimizer<T = f32> {
    pub config: OptimizerConfig,
    pub state: OptimizerState<T>,
}

impl<T: Scalar> Optimizer<T> {
    pub fn new(config: OptimizerConfig) -> Result<Self> {
        config.validate()?;
        Ok(Optimizer {
            config,
            state: OptimizerState::new(),
        })
    }

    pub fn step(&mut self, model: &mut LayeredModel<T>, grads: &Gradients<T>) -> Result<()> {
        let n = model.num_param_layers();
        if grads.params.len() != n {
            return Err(NnError::InvalidConfig(format!(
                "expected gradients for {n} layers, got {}",
                grads.params.len()
            )));
        }
        let gs: Vec<&[T]> = grads
            .params
            .iter()
            .flat_map(|g| [g.weight.data(), g.bias.data()])
            .collect();
        let mut slots = model.param_slices_mut();
        optimizer_step(&mut slots, &gs, &mut self.state, &self.config)
    }
}
