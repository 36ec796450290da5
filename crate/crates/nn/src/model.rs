use crate::conv;
use crate::error::{NnError, Result};
use crate::layer::{Layer, LayerKind, Params};
use crate::scalar::{gemm, Op, Scalar};
use crate::tensor::Tensor;

/// Ordered stack of layers with statically propagated shapes.
#[derive(Clone, Debug, PartialEq)]
pub struct LayeredModel<T = f32> {
    layers: Vec<Layer<T>>,
    input_shape: [usize; 3],
    num_classes: usize,
    param_layer_indices: Vec<usize>,
}

/// Every intermediate tensor of one forward pass.
///
/// `outputs[0]` is the input batch and `outputs[i + 1]` the output of layer `i`,
/// so the last entry holds the logits.
#[derive(Clone, Debug)]
pub struct Activations<T = f32> {
    pub outputs: Vec<Tensor<T>>,
}

impl<T: Scalar> Activations<T> {
    pub fn logits(&self) -> &Tensor<T> {
        self.outputs.last().expect("activations are never empty")
    }
}

/// Parameter gradients in parameter-layer order, plus the input gradient when requested.
#[derive(Clone, Debug)]
pub struct Gradients<T = f32> {
    pub params: Vec<Params<T>>,
    pub input: Option<Tensor<T>>,
}

impl<T: Scalar> LayeredModel<T> {
    /// Builds a zero-initialized model, checking that shapes propagate from
    /// `input_shape` to `[num_classes]`.
    pub fn new(input_shape: [usize; 3], kinds: &[LayerKind], num_classes: usize) -> Result<Self> {
        let mut shape = input_shape.to_vec();
        let mut layers = Vec::with_capacity(kinds.len());
        let mut param_layer_indices = Vec::new();
        for (i, kind) in kinds.iter().enumerate() {
            let out = kind.output_shape(&shape).ok_or_else(|| NnError::InvalidLayer {
                layer: i,
                reason: format!("{kind} cannot consume input of shape {shape:?}"),
            })?;
            let params = kind.param_shapes(&shape).map(|(w, b, _, _)| {
                param_layer_indices.push(i);
                Params {
                    weight: Tensor::zeros(&w),
                    bias: Tensor::zeros(&b),
                }
            });
            layers.push(Layer {
                kind: *kind,
                params,
                input_shape: shape,
                output_shape: out.clone(),
            });
            shape = out;
        }
        if shape != [num_classes] {
            return Err(NnError::ShapeMismatch {
                layer: kinds.len().saturating_sub(1),
                expected: vec![num_classes],
                found: shape,
            });
        }
        Ok(LayeredModel {
            layers,
            input_shape,
            num_classes,
            param_layer_indices,
        })
    }

    /// LeNet-5 with tanh activations and 2×2 max pooling on 1×28×28 inputs.
    pub fn lenet5(num_classes: usize) -> Self {
        Self::new([1, 28, 28], &lenet5_layers(num_classes), num_classes)
            .expect("LeNet-5 shapes are consistent")
    }

    /// Rebuilds a zero-initialized model from [`LayeredModel::descriptor`] output.
    pub fn from_descriptor(descriptor: &str) -> Result<Self> {
        let bad = || NnError::BadDescriptor(descriptor.to_string());
        let mut parts = descriptor.split('|');
        let dims: Vec<usize> = parts
            .next()
            .ok_or_else(bad)?
            .split('x')
            .map(|d| d.parse().map_err(|_| bad()))
            .collect::<Result<_>>()?;
        let [c, h, w] = dims[..] else { return Err(bad()) };
        let kinds = parts.map(str::parse).collect::<Result<Vec<LayerKind>>>()?;
        let mut shape = vec![c, h, w];
        for (i, k) in kinds.iter().enumerate() {
            shape = k.output_shape(&shape).ok_or_else(|| NnError::InvalidLayer {
                layer: i,
                reason: format!("{k} cannot consume input of shape {shape:?}"),
            })?;
        }
        let [classes] = shape[..] else { return Err(bad()) };
        Self::new([c, h, w], &kinds, classes)
    }

    /// Textual architecture descriptor, e.g. `1x28x28|conv2d:6:5x5:s1:p2|tanh|…`.
    pub fn descriptor(&self) -> String {
        let [c, h, w] = self.input_shape;
        let mut s = format!("{c}x{h}x{w}");
        for l in &self.layers {
            s.push('|');
            s.push_str(&l.kind.to_string());
        }
        s
    }

    pub fn layers(&self) -> &[Layer<T>] {
        &self.layers
    }

    pub fn input_shape(&self) -> [usize; 3] {
        self.input_shape
    }

    pub fn num_classes(&self) -> usize {
        self.num_classes
    }

    pub fn param_layer_indices(&self) -> &[usize] {
        &self.param_layer_indices
    }

    /// Number of parameterized layers, the upper bound of the transfer index `k`.
    pub fn num_param_layers(&self) -> usize {
        self.param_layer_indices.len()
    }

    pub fn param_count(&self) -> usize {
        self.param_layers().map(|p| p.len()).sum()
    }

    /// Parameters of the parameterized layers, in order.
    pub fn param_layers(&self) -> impl Iterator<Item = &Params<T>> {
        self.param_layer_indices
            .iter()
            .map(move |&i| self.layers[i].params.as_ref().expect("indexed layers carry params"))
    }

    pub fn param_layer(&self, p: usize) -> &Params<T> {
        self.layers[self.param_layer_indices[p]]
            .params
            .as_ref()
            .expect("indexed layers carry params")
    }

    /// Mutable `(weight, bias)` data of parameterized layer `p`.
    pub fn param_data_mut(&mut self, p: usize) -> (&mut [T], &mut [T]) {
        let params = self.layers[self.param_layer_indices[p]]
            .params
            .as_mut()
            .expect("indexed layers carry params");
        (params.weight.data_mut(), params.bias.data_mut())
    }

    /// Weight and bias data of every parameterized layer, interleaved in layer order.
    pub fn param_slices_mut(&mut self) -> Vec<&mut [T]> {
        let mut out = Vec::with_capacity(2 * self.param_layer_indices.len());
        for layer in &mut self.layers {
            if let Some(Params { weight, bias }) = layer.params.as_mut() {
                out.push(weight.data_mut());
                out.push(bias.data_mut());
            }
        }
        out
    }

    /// Replaces parameterized layer `p`, keeping shapes fixed.
    pub fn set_param_layer(&mut self, p: usize, params: Params<T>) -> Result<()> {
        let idx = *self
            .param_layer_indices
            .get(p)
            .ok_or(NnError::TruncationOutOfRange {
                k: p,
                layers: self.num_param_layers(),
            })?;
        let current = self.layers[idx].params.as_mut().expect("indexed layers carry params");
        if current.weight.shape() != params.weight.shape() || current.bias.shape() != params.bias.shape() {
            return Err(NnError::ShapeMismatch {
                layer: idx,
                expected: current.weight.shape().to_vec(),
                found: params.weight.shape().to_vec(),
            });
        }
        *current = params;
        Ok(())
    }

    pub fn cast<U: Scalar>(&self) -> LayeredModel<U> {
        LayeredModel {
            layers: self
                .layers
                .iter()
                .map(|l| Layer {
                    kind: l.kind,
                    params: l.params.as_ref().map(Params::cast),
                    input_shape: l.input_shape.clone(),
                    output_shape: l.output_shape.clone(),
                })
                .collect(),
            input_shape: self.input_shape,
            num_classes: self.num_classes,
            param_layer_indices: self.param_layer_indices.clone(),
        }
    }

    /// FNV-1a digest of the bit patterns of each parameterized layer.
    pub fn param_fingerprints(&self) -> Vec<u64> {
        self.param_layers()
            .map(|p| {
                let mut h: u64 = 0xcbf2_9ce4_8422_2325;
                for v in p.weight.data().iter().chain(p.bias.data()) {
                    for byte in v.as_f64().to_bits().to_le_bytes() {
                        h ^= byte as u64;
                        h = h.wrapping_mul(0x0100_0000_01b3);
                    }
                }
                h
            })
            .collect()
    }

    fn check_batch(&self, batch: &Tensor<T>) -> Result<usize> {
        let s = batch.shape();
        if s.len() != 4 || s[1..] != self.input_shape {
            let mut expected = vec![s.first().copied().unwrap_or(1)];
            expected.extend_from_slice(&self.input_shape);
            return Err(NnError::ShapeMismatch {
                layer: 0,
                expected,
                found: s.to_vec(),
            });
        }
        Ok(s[0])
    }

    /// Full forward pass keeping every intermediate activation.
    pub fn forward(&self, batch: &Tensor<T>) -> Result<Activations<T>> {
        let b = self.check_batch(batch)?;
        let mut outputs = Vec::with_capacity(self.layers.len() + 1);
        outputs.push(batch.clone());
        for layer in &self.layers {
            let next = layer_forward(layer, b, outputs.last().expect("non-empty"))?;
            outputs.push(next);
        }
        Ok(Activations { outputs })
    }

    /// Forward pass returning only the logits `[B, num_classes]`.
    pub fn logits(&self, batch: &Tensor<T>) -> Result<Tensor<T>> {
        let b = self.check_batch(batch)?;
        let mut x = batch.clone();
        for layer in &self.layers {
            x = layer_forward(layer, b, &x)?;
        }
        Ok(x)
    }

    /// Class predictions (first maximal logit wins).
    pub fn predict(&self, batch: &Tensor<T>) -> Result<Vec<usize>> {
        let logits = self.logits(batch)?;
        Ok(logits.data().chunks_exact(self.num_classes).map(argmax).collect())
    }

    /// Reverse-mode gradients for all parameters and the input.
    pub fn backward(&self, acts: &Activations<T>, dlogits: &Tensor<T>) -> Result<Gradients<T>> {
        self.backward_impl(acts, dlogits, true)
    }

    /// As [`LayeredModel::backward`] but skips the gradient with respect to the input batch.
    pub fn backward_params(&self, acts: &Activations<T>, dlogits: &Tensor<T>) -> Result<Gradients<T>> {
        self.backward_impl(acts, dlogits, false)
    }

    fn backward_impl(&self, acts: &Activations<T>, dlogits: &Tensor<T>, want_input: bool) -> Result<Gradients<T>> {
        if acts.outputs.len() != self.layers.len() + 1 {
            return Err(NnError::MissingActivation {
                layer: acts.outputs.len().saturating_sub(1).min(self.layers.len()),
            });
        }
        let last = acts.logits();
        if last.shape() != dlogits.shape() {
            return Err(NnError::ShapeMismatch {
                layer: self.layers.len() - 1,
                expected: last.shape().to_vec(),
                found: dlogits.shape().to_vec(),
            });
        }
        let b = last.shape()[0];
        let mut grads: Vec<Option<Params<T>>> = vec![None; self.layers.len()];
        let mut upstream = dlogits.data().to_vec();
        for (i, layer) in self.layers.iter().enumerate().rev() {
            let input = &acts.outputs[i];
            let output = &acts.outputs[i + 1];
            let need_dx = i > 0 || want_input;
            let (dx, dp) = layer_backward(layer, b, input, output, &upstream, need_dx);
            grads[i] = dp;
            match dx {
                Some(dx) => upstream = dx,
                None => break,
            }
        }
        let input = want_input
            .then(|| Tensor::from_vec(acts.outputs[0].shape(), upstream))
            .transpose()?;
        Ok(Gradients {
            params: grads.into_iter().flatten().collect(),
            input,
        })
    }
}

pub fn lenet5_layers(num_classes: usize) -> Vec<LayerKind> {
    vec![
        LayerKind::Conv2d {
            out_channels: 6,
            kernel_h: 5,
            kernel_w: 5,
            stride: 1,
            padding: 2,
        },
        LayerKind::Tanh,
        LayerKind::MaxPool { window: 2, stride: 2 },
        LayerKind::Conv2d {
            out_channels: 16,
            kernel_h: 5,
            kernel_w: 5,
            stride: 1,
            padding: 0,
        },
        LayerKind::Tanh,
        LayerKind::MaxPool { window: 2, stride: 2 },
        LayerKind::Flatten,
        LayerKind::Dense { out_features: 120 },
        LayerKind::Tanh,
        LayerKind::Dense { out_features: 84 },
        LayerKind::Tanh,
        LayerKind::Dense {
            out_features: num_classes,
        },
    ]
}

pub(crate) fn argmax<T: Scalar>(row: &[T]) -> usize {
    let mut best = 0;
    for (i, &v) in row.iter().enumerate() {
        if v > row[best] {
            best = i;
        }
    }
    best
}

fn batch_shape(b: usize, per_sample: &[usize]) -> Vec<usize> {
    let mut s = Vec::with_capacity(per_sample.len() + 1);
    s.push(b);
    s.extend_from_slice(per_sample);
    s
}

fn layer_forward<T: Scalar>(layer: &Layer<T>, b: usize, x: &Tensor<T>) -> Result<Tensor<T>> {
    let out_shape = batch_shape(b, &layer.output_shape);
    let data = match layer.kind {
        LayerKind::Conv2d { .. } => {
            let g = layer
                .kind
                .conv_geometry(&layer.input_shape)
                .expect("validated at construction");
            let p = layer.params.as_ref().expect("conv carries params");
            conv::forward_batch(&g, b, x.data(), p.weight.data(), p.bias.data())
        }
        LayerKind::MaxPool { window, stride } => maxpool_forward(&layer.input_shape, window, stride, b, x.data()),
        LayerKind::Relu => x.data().iter().map(|&v| v.max(T::zero())).collect(),
        LayerKind::Tanh => x.data().iter().map(|&v| v.activation_tanh()).collect(),
        LayerKind::Flatten => x.data().to_vec(),
        LayerKind::Dense { out_features } => {
            let p = layer.params.as_ref().expect("dense carries params");
            let inf = layer.input_shape[0];
            let mut out = Vec::with_capacity(b * out_features);
            for _ in 0..b {
                out.extend_from_slice(p.bias.data());
            }
            // Y[B, out] = X[B, in] · Wᵀ[in, out] + bias
            gemm(b, inf, out_features, x.data(), Op::N, p.weight.data(), Op::T, &mut out, true);
            out
        }
    };
    Tensor::from_vec(&out_shape, data)
}

fn maxpool_forward<T: Scalar>(input: &[usize], window: usize, stride: usize, b: usize, x: &[T]) -> Vec<T> {
    let (c, h, w) = (input[0], input[1], input[2]);
    let (oh, ow) = ((h - window) / stride + 1, (w - window) / stride + 1);
    let mut out = Vec::with_capacity(b * c * oh * ow);
    for plane in x.chunks_exact(h * w).take(b * c) {
        for oy in 0..oh {
            for ox in 0..ow {
                out.push(plane[window_argmax(plane, w, oy * stride, ox * stride, window)]);
            }
        }
    }
    out
}

/// Flat index of the first maximal element of a pooling window, row-major.
fn window_argmax<T: Scalar>(plane: &[T], w: usize, y0: usize, x0: usize, window: usize) -> usize {
    let mut best = y0 * w + x0;
    for y in y0..y0 + window {
        for x in x0..x0 + window {
            let i = y * w + x;
            if plane[i] > plane[best] {
                best = i;
            }
        }
    }
    best
}

fn layer_backward<T: Scalar>(
    layer: &Layer<T>,
    b: usize,
    input: &Tensor<T>,
    output: &Tensor<T>,
    upstream: &[T],
    need_dx: bool,
) -> (Option<Vec<T>>, Option<Params<T>>) {
    match layer.kind {
        LayerKind::Conv2d { .. } => {
            let g = layer
                .kind
                .conv_geometry(&layer.input_shape)
                .expect("validated at construction");
            let p = layer.params.as_ref().expect("conv carries params");
            let (dw, db, dx) = conv::backward_batch(&g, b, input.data(), p.weight.data(), upstream, need_dx);
            let params = Params {
                weight: Tensor::from_vec(p.weight.shape(), dw).expect("shape preserved"),
                bias: Tensor::from_vec(p.bias.shape(), db).expect("shape preserved"),
            };
            (dx, Some(params))
        }
        LayerKind::Dense { out_features } => {
            let p = layer.params.as_ref().expect("dense carries params");
            let inf = layer.input_shape[0];
            // dW[out, in] = dYᵀ[out, B] · X[B, in]
            let mut dw = vec![T::zero(); out_features * inf];
            gemm(out_features, b, inf, upstream, Op::T, input.data(), Op::N, &mut dw, false);
            let mut db = vec![T::zero(); out_features];
            for row in upstream.chunks_exact(out_features) {
                for (acc, &g) in db.iter_mut().zip(row) {
                    *acc += g;
                }
            }
            let dx = need_dx.then(|| {
                // dX[B, in] = dY[B, out] · W[out, in]
                let mut dx = vec![T::zero(); b * inf];
                gemm(b, out_features, inf, upstream, Op::N, p.weight.data(), Op::N, &mut dx, false);
                dx
            });
            let params = Params {
                weight: Tensor::from_vec(p.weight.shape(), dw).expect("shape preserved"),
                bias: Tensor::from_vec(p.bias.shape(), db).expect("shape preserved"),
            };
            (dx, Some(params))
        }
        _ if !need_dx => (None, None),
        LayerKind::MaxPool { window, stride } => {
            let (c, h, w) = (layer.input_shape[0], layer.input_shape[1], layer.input_shape[2]);
            let (oh, ow) = (layer.output_shape[1], layer.output_shape[2]);
            let mut dx = vec![T::zero(); b * c * h * w];
            for (pi, plane) in input.data().chunks_exact(h * w).take(b * c).enumerate() {
                let dplane = &mut dx[pi * h * w..(pi + 1) * h * w];
                let up = &upstream[pi * oh * ow..(pi + 1) * oh * ow];
                for oy in 0..oh {
                    for ox in 0..ow {
                        let i = window_argmax(plane, w, oy * stride, ox * stride, window);
                        dplane[i] += up[oy * ow + ox];
                    }
                }
            }
            (Some(dx), None)
        }
        LayerKind::Relu => {
            let dx = input
                .data()
                .iter()
                .zip(upstream)
                .map(|(&x, &g)| if x > T::zero() { g } else { T::zero() })
                .collect();
            (Some(dx), None)
        }
        LayerKind::Tanh => {
            let dx = output
                .data()
                .iter()
                .zip(upstream)
                .map(|(&y, &g)| g * (T::one() - y * y))
                .collect();
            (Some(dx), None)
        }
        LayerKind::Flatten => (Some(upstream.to_vec()), None),
    }
}
