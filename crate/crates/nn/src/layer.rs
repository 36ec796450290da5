use std::fmt;
use std::str::FromStr;

use crate::conv::ConvGeometry;
use crate::error::NnError;
use crate::scalar::Scalar;
use crate::tensor::Tensor;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum LayerKind {
    Conv2d {
        out_channels: usize,
        kernel_h: usize,
        kernel_w: usize,
        stride: usize,
        padding: usize,
    },
    MaxPool {
        window: usize,
        stride: usize,
    },
    Relu,
    Tanh,
    Flatten,
    Dense {
        out_features: usize,
    },
}

impl LayerKind {
    pub fn has_params(&self) -> bool {
        matches!(self, LayerKind::Conv2d { .. } | LayerKind::Dense { .. })
    }

    /// Per-sample output shape, or `None` if this kind cannot consume `input`.
    pub fn output_shape(&self, input: &[usize]) -> Option<Vec<usize>> {
        match *self {
            LayerKind::Conv2d { .. } => {
                let g = self.conv_geometry(input)?;
                Some(vec![g.out_channels, g.out_h(), g.out_w()])
            }
            LayerKind::MaxPool { window, stride } => {
                let [c, h, w] = *input else { return None };
                if window == 0 || stride == 0 || h < window || w < window {
                    return None;
                }
                Some(vec![c, (h - window) / stride + 1, (w - window) / stride + 1])
            }
            LayerKind::Relu | LayerKind::Tanh => Some(input.to_vec()),
            LayerKind::Flatten => Some(vec![input.iter().product()]),
            LayerKind::Dense { out_features } => {
                if input.len() != 1 || out_features == 0 {
                    return None;
                }
                Some(vec![out_features])
            }
        }
    }

    pub(crate) fn conv_geometry(&self, input: &[usize]) -> Option<ConvGeometry> {
        let LayerKind::Conv2d {
            out_channels,
            kernel_h,
            kernel_w,
            stride,
            padding,
        } = *self
        else {
            return None;
        };
        let [c, h, w] = *input else { return None };
        let g = ConvGeometry {
            in_channels: c,
            in_h: h,
            in_w: w,
            out_channels,
            kernel_h,
            kernel_w,
            stride,
            padding,
        };
        (g.is_valid() && out_channels > 0).then_some(g)
    }

    /// `(weight shape, bias shape, fan_in, fan_out)` for parameterized kinds.
    pub(crate) fn param_shapes(&self, input: &[usize]) -> Option<(Vec<usize>, Vec<usize>, usize, usize)> {
        match *self {
            LayerKind::Conv2d {
                out_channels,
                kernel_h,
                kernel_w,
                ..
            } => {
                let c = input[0];
                let area = kernel_h * kernel_w;
                Some((
                    vec![out_channels, c, kernel_h, kernel_w],
                    vec![out_channels],
                    c * area,
                    out_channels * area,
                ))
            }
            LayerKind::Dense { out_features } => {
                let inf = input[0];
                Some((vec![out_features, inf], vec![out_features], inf, out_features))
            }
            _ => None,
        }
    }
}

impl fmt::Display for LayerKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            LayerKind::Conv2d {
                out_channels,
                kernel_h,
                kernel_w,
                stride,
                padding,
            } => write!(f, "conv2d:{out_channels}:{kernel_h}x{kernel_w}:s{stride}:p{padding}"),
            LayerKind::MaxPool { window, stride } => write!(f, "maxpool:{window}:s{stride}"),
            LayerKind::Relu => f.write_str("relu"),
            LayerKind::Tanh => f.write_str("tanh"),
            LayerKind::Flatten => f.write_str("flatten"),
            LayerKind::Dense { out_features } => write!(f, "dense:{out_features}"),
        }
    }
}

impl FromStr for LayerKind {
    type Err = NnError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let bad = || NnError::BadDescriptor(s.to_string());
        let num = |t: &str| t.parse::<usize>().map_err(|_| bad());
        let parts: Vec<&str> = s.split(':').collect();
        match parts.as_slice() {
            ["relu"] => Ok(LayerKind::Relu),
            ["tanh"] => Ok(LayerKind::Tanh),
            ["flatten"] => Ok(LayerKind::Flatten),
            ["dense", n] => Ok(LayerKind::Dense { out_features: num(n)? }),
            ["maxpool", w, s] => Ok(LayerKind::MaxPool {
                window: num(w)?,
                stride: num(s.strip_prefix('s').ok_or_else(bad)?)?,
            }),
            ["conv2d", oc, k, s, p] => {
                let (kh, kw) = k.split_once('x').ok_or_else(bad)?;
                Ok(LayerKind::Conv2d {
                    out_channels: num(oc)?,
                    kernel_h: num(kh)?,
                    kernel_w: num(kw)?,
                    stride: num(s.strip_prefix('s').ok_or_else(bad)?)?,
                    padding: num(p.strip_prefix('p').ok_or_else(bad)?)?,
                })
            }
            _ => Err(bad()),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Params<T = f32> {
    pub weight: Tensor<T>,
    pub bias: Tensor<T>,
}

impl<T: Scalar> Params<T> {
    pub fn len(&self) -> usize {
        self.weight.len() + self.bias.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn cast<U: Scalar>(&self) -> Params<U> {
        Params {
            weight: self.weight.cast(),
            bias: self.bias.cast(),
        }
    }
}

/// One layer together with its static per-sample shapes.
#[derive(Clone, Debug, PartialEq)]
pub struct Layer<T = f32> {
    pub kind: LayerKind,
    pub params: Option<Params<T>>,
    pub(crate) input_shape: Vec<usize>,
    pub(crate) output_shape: Vec<usize>,
}

impl<T: Scalar> Layer<T> {
    pub fn input_shape(&self) -> &[usize] {
        &self.input_shape
    }

    pub fn output_shape(&self) -> &[usize] {
        &self.output_shape
    }
}
