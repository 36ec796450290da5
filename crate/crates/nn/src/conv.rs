//! 2-D convolution: the im2col/GEMM production path and the direct-loop
//! reference it is checked against.

use crate::error::{NnError, Result};
use crate::scalar::{gemm, Op, Scalar};
use crate::tensor::Tensor;

/// Static geometry of one convolution over a `[C, H, W]` sample.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ConvGeometry {
    pub in_channels: usize,
    pub in_h: usize,
    pub in_w: usize,
    pub out_channels: usize,
    pub kernel_h: usize,
    pub kernel_w: usize,
    pub stride: usize,
    pub padding: usize,
}

impl ConvGeometry {
    pub fn out_h(&self) -> usize {
        (self.in_h + 2 * self.padding - self.kernel_h) / self.stride + 1
    }

    pub fn out_w(&self) -> usize {
        (self.in_w + 2 * self.padding - self.kernel_w) / self.stride + 1
    }

    /// Rows of the unrolled patch matrix.
    pub fn patch_len(&self) -> usize {
        self.in_channels * self.kernel_h * self.kernel_w
    }

    pub fn out_positions(&self) -> usize {
        self.out_h() * self.out_w()
    }

    pub fn is_valid(&self) -> bool {
        self.stride > 0
            && self.kernel_h > 0
            && self.kernel_w > 0
            && self.in_h + 2 * self.padding >= self.kernel_h
            && self.in_w + 2 * self.padding >= self.kernel_w
    }

    fn from_tensors<T: Scalar>(
        input: &Tensor<T>,
        weight: &Tensor<T>,
        bias: &Tensor<T>,
        stride: usize,
        padding: usize,
    ) -> Result<Self> {
        let bad = |reason: String| NnError::InvalidLayer { layer: 0, reason };
        if input.shape().len() != 4 {
            return Err(bad(format!("conv input must be [B, C, H, W], got {:?}", input.shape())));
        }
        if weight.shape().len() != 4 {
            return Err(bad(format!("conv weight must be 4-D, got {:?}", weight.shape())));
        }
        let (c, h, w) = (input.shape()[1], input.shape()[2], input.shape()[3]);
        let ws = weight.shape();
        if ws[1] != c {
            return Err(bad(format!("weight expects {} input channels, input has {c}", ws[1])));
        }
        if bias.shape() != [ws[0]] {
            return Err(bad(format!("bias shape {:?} != [{}]", bias.shape(), ws[0])));
        }
        let g = ConvGeometry {
            in_channels: c,
            in_h: h,
            in_w: w,
            out_channels: ws[0],
            kernel_h: ws[2],
            kernel_w: ws[3],
            stride,
            padding,
        };
        if !g.is_valid() {
            return Err(bad(format!("kernel does not fit input: {g:?}")));
        }
        Ok(g)
    }
}

/// Output columns `lo..hi` whose input column for kernel offset `kj` lies
/// inside the image.
fn valid_columns(g: &ConvGeometry, kj: usize) -> (usize, usize) {
    let ow = g.out_w();
    let lo = if g.padding > kj {
        (g.padding - kj).div_ceil(g.stride)
    } else {
        0
    };
    let hi = if g.in_w + g.padding > kj {
        ((g.in_w + g.padding - kj - 1) / g.stride + 1).min(ow)
    } else {
        0
    };
    (lo.min(ow), hi.max(lo.min(ow)))
}

/// Unrolls one `[C, H, W]` sample into a `[C·kh·kw, OH·OW]` patch matrix.
pub fn im2col<T: Scalar>(g: &ConvGeometry, input: &[T], col: &mut [T]) {
    im2col_into(g, input, col, g.out_positions(), 0);
}

/// Writes the patch matrix of one sample into columns `offset..offset + OH·OW`
/// of a matrix with row stride `ld`.
fn im2col_into<T: Scalar>(g: &ConvGeometry, input: &[T], col: &mut [T], ld: usize, offset: usize) {
    let (oh, ow) = (g.out_h(), g.out_w());
    let positions = oh * ow;
    let (s, p) = (g.stride as isize, g.padding as isize);
    let mut row = 0;
    for c in 0..g.in_channels {
        let plane = &input[c * g.in_h * g.in_w..(c + 1) * g.in_h * g.in_w];
        for ki in 0..g.kernel_h {
            for kj in 0..g.kernel_w {
                let dst = &mut col[row * ld + offset..row * ld + offset + positions];
                let (lo, hi) = valid_columns(g, kj);
                for oy in 0..oh {
                    let y = oy as isize * s + ki as isize - p;
                    let out_row = &mut dst[oy * ow..(oy + 1) * ow];
                    if y < 0 || y >= g.in_h as isize {
                        out_row.fill(T::zero());
                        continue;
                    }
                    let src = &plane[y as usize * g.in_w..(y as usize + 1) * g.in_w];
                    out_row[..lo].fill(T::zero());
                    out_row[hi..].fill(T::zero());
                    if lo < hi {
                        let x0 = lo * g.stride + kj - g.padding;
                        if g.stride == 1 {
                            out_row[lo..hi].copy_from_slice(&src[x0..x0 + hi - lo]);
                        } else {
                            for (v, &x) in out_row[lo..hi].iter_mut().zip(src[x0..].iter().step_by(g.stride)) {
                                *v = x;
                            }
                        }
                    }
                }
                row += 1;
            }
        }
    }
}

/// Scatter-adds a patch-matrix gradient back onto a `[C, H, W]` sample.
pub fn col2im<T: Scalar>(g: &ConvGeometry, col: &[T], grad_input: &mut [T]) {
    col2im_from(g, col, grad_input, g.out_positions(), 0);
}

fn col2im_from<T: Scalar>(g: &ConvGeometry, col: &[T], grad_input: &mut [T], ld: usize, offset: usize) {
    let (oh, ow) = (g.out_h(), g.out_w());
    let positions = oh * ow;
    let (s, p) = (g.stride as isize, g.padding as isize);
    let mut row = 0;
    for c in 0..g.in_channels {
        let plane = &mut grad_input[c * g.in_h * g.in_w..(c + 1) * g.in_h * g.in_w];
        for ki in 0..g.kernel_h {
            for kj in 0..g.kernel_w {
                let src = &col[row * ld + offset..row * ld + offset + positions];
                let (lo, hi) = valid_columns(g, kj);
                for oy in 0..oh {
                    let y = oy as isize * s + ki as isize - p;
                    if y < 0 || y >= g.in_h as isize {
                        continue;
                    }
                    let dst = &mut plane[y as usize * g.in_w..(y as usize + 1) * g.in_w];
                    if lo < hi {
                        let x0 = lo * g.stride + kj - g.padding;
                        let src_row = &src[oy * ow + lo..oy * ow + hi];
                        for (d, &v) in dst[x0..].iter_mut().step_by(g.stride).zip(src_row) {
                            *d += v;
                        }
                    }
                }
                row += 1;
            }
        }
    }
}

/// Patch-matrix budget per GEMM, in elements; batches are processed in
/// groups of samples whose unrolled patches fit in it.
const COL_BUDGET: usize = 1 << 14;

fn group_size(g: &ConvGeometry, batch: usize) -> usize {
    let per_sample = g.patch_len() * g.out_positions();
    (COL_BUDGET / per_sample).clamp(1, batch.max(1))
}

/// Batched forward pass through im2col + GEMM. `input` is `[B, C·H·W]` flat.
pub(crate) fn forward_batch<T: Scalar>(
    g: &ConvGeometry,
    batch: usize,
    input: &[T],
    weight: &[T],
    bias: &[T],
) -> Vec<T> {
    let in_len = g.in_channels * g.in_h * g.in_w;
    let k = g.patch_len();
    let positions = g.out_positions();
    let out_len = g.out_channels * positions;
    let group = group_size(g, batch);
    let mut col = vec![T::zero(); k * group * positions];
    let mut y = vec![T::zero(); g.out_channels * group * positions];
    let mut out = vec![T::zero(); batch * out_len];
    for start in (0..batch).step_by(group) {
        let n = group.min(batch - start);
        let ld = n * positions;
        for i in 0..n {
            let b = start + i;
            im2col_into(g, &input[b * in_len..(b + 1) * in_len], &mut col, ld, i * positions);
        }
        // y[OC, n·P] = W[OC, K] · col[K, n·P]
        gemm(g.out_channels, k, ld, weight, Op::N, &col, Op::N, &mut y, false);
        for oc in 0..g.out_channels {
            for i in 0..n {
                let src = &y[oc * ld + i * positions..oc * ld + (i + 1) * positions];
                let o = (start + i) * out_len + oc * positions;
                for (d, &v) in out[o..o + positions].iter_mut().zip(src) {
                    *d = v + bias[oc];
                }
            }
        }
    }
    out
}

/// Gradients of a convolution given the upstream gradient `grad_out` (`[B, OC·OH·OW]`).
///
/// Returns `(dW, db, dX)`; `dX` is only computed when `want_input` is set.
pub(crate) fn backward_batch<T: Scalar>(
    g: &ConvGeometry,
    batch: usize,
    input: &[T],
    weight: &[T],
    grad_out: &[T],
    want_input: bool,
) -> (Vec<T>, Vec<T>, Option<Vec<T>>) {
    let in_len = g.in_channels * g.in_h * g.in_w;
    let k = g.patch_len();
    let positions = g.out_positions();
    let out_len = g.out_channels * positions;
    let group = group_size(g, batch);
    let mut col = vec![T::zero(); k * group * positions];
    let mut dy = vec![T::zero(); g.out_channels * group * positions];
    let mut dw = vec![T::zero(); g.out_channels * k];
    let mut db = vec![T::zero(); g.out_channels];
    let mut dx = want_input.then(|| vec![T::zero(); batch * in_len]);
    for start in (0..batch).step_by(group) {
        let n = group.min(batch - start);
        let ld = n * positions;
        for i in 0..n {
            let b = start + i;
            im2col_into(g, &input[b * in_len..(b + 1) * in_len], &mut col, ld, i * positions);
            for oc in 0..g.out_channels {
                let src = &grad_out[b * out_len + oc * positions..b * out_len + (oc + 1) * positions];
                db[oc] += src.iter().copied().sum::<T>();
                dy[oc * ld + i * positions..oc * ld + (i + 1) * positions].copy_from_slice(src);
            }
        }
        // dW[OC, K] += dY[OC, n·P] · colᵀ[n·P, K]
        gemm(g.out_channels, ld, k, &dy, Op::N, &col, Op::T, &mut dw, true);
        if let Some(dx) = dx.as_mut() {
            // dcol[K, n·P] = Wᵀ[K, OC] · dY[OC, n·P]
            gemm(k, g.out_channels, ld, weight, Op::T, &dy, Op::N, &mut col, false);
            for i in 0..n {
                let b = start + i;
                col2im_from(g, &col, &mut dx[b * in_len..(b + 1) * in_len], ld, i * positions);
            }
        }
    }
    (dw, db, dx)
}

/// Production convolution on a `[B, C, H, W]` batch.
pub fn conv2d<T: Scalar>(
    input: &Tensor<T>,
    weight: &Tensor<T>,
    bias: &Tensor<T>,
    stride: usize,
    padding: usize,
) -> Result<Tensor<T>> {
    let g = ConvGeometry::from_tensors(input, weight, bias, stride, padding)?;
    let batch = input.shape()[0];
    let out = forward_batch(&g, batch, input.data(), weight.data(), bias.data());
    Tensor::from_vec(&[batch, g.out_channels, g.out_h(), g.out_w()], out)
}

/// Reference convolution written as direct nested loops over
/// batch, output channel, output row, output column, input channel and kernel offsets.
pub fn conv2d_oracle<T: Scalar>(
    input: &Tensor<T>,
    weight: &Tensor<T>,
    bias: &Tensor<T>,
    stride: usize,
    padding: usize,
) -> Result<Tensor<T>> {
    let g = ConvGeometry::from_tensors(input, weight, bias, stride, padding)?;
    let batch = input.shape()[0];
    let (oh, ow) = (g.out_h(), g.out_w());
    let x = input.data();
    let w = weight.data();
    let mut out = vec![T::zero(); batch * g.out_channels * oh * ow];
    for b in 0..batch {
        for oc in 0..g.out_channels {
            for oy in 0..oh {
                for ox in 0..ow {
                    let mut acc = bias.data()[oc];
                    for c in 0..g.in_channels {
                        for ki in 0..g.kernel_h {
                            for kj in 0..g.kernel_w {
                                let y = (oy * stride + ki) as isize - padding as isize;
                                let xx = (ox * stride + kj) as isize - padding as isize;
                                if y < 0 || xx < 0 || y >= g.in_h as isize || xx >= g.in_w as isize {
                                    continue;
                                }
                                let xi = ((b * g.in_channels + c) * g.in_h + y as usize) * g.in_w
                                    + xx as usize;
                                let wi = ((oc * g.in_channels + c) * g.kernel_h + ki) * g.kernel_w + kj;
                                acc += x[xi] * w[wi];
                            }
                        }
                    }
                    out[((b * g.out_channels + oc) * oh + oy) * ow + ox] = acc;
                }
            }
        }
    }
    Tensor::from_vec(&[batch, g.out_channels, oh, ow], out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn all_ones_kernel_sums_window() {
        let x = Tensor::<f32>::full(&[1, 1, 5, 5], 1.0);
        let w = Tensor::<f32>::full(&[1, 1, 3, 3], 1.0);
        let b = Tensor::<f32>::zeros(&[1]);
        for out in [conv2d(&x, &w, &b, 1, 0).unwrap(), conv2d_oracle(&x, &w, &b, 1, 0).unwrap()] {
            assert_eq!(out.shape(), &[1, 1, 3, 3]);
            assert!(out.data().iter().all(|&v| v == 9.0));
        }
    }

    #[test]
    fn identity_kernel_preserves_input() {
        let data: Vec<f32> = (0..2 * 6 * 6).map(|i| (i as f32 * 0.37).sin()).collect();
        let x = Tensor::from_vec(&[2, 1, 6, 6], data).unwrap();
        let mut w = Tensor::<f32>::zeros(&[1, 1, 3, 3]);
        w.data_mut()[4] = 1.0;
        let b = Tensor::<f32>::zeros(&[1]);
        assert_eq!(conv2d(&x, &w, &b, 1, 1).unwrap().data(), x.data());
        assert_eq!(conv2d_oracle(&x, &w, &b, 1, 1).unwrap().data(), x.data());
    }

    #[test]
    fn zero_kernel_gives_zero_output() {
        let x = Tensor::<f32>::full(&[1, 1, 7, 7], 3.0);
        let w = Tensor::<f32>::zeros(&[1, 1, 3, 3]);
        let b = Tensor::<f32>::zeros(&[1]);
        assert!(conv2d(&x, &w, &b, 1, 0).unwrap().data().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn lenet_first_layer_geometry() {
        let x = Tensor::<f32>::zeros(&[1, 1, 28, 28]);
        let w = Tensor::<f32>::zeros(&[6, 1, 5, 5]);
        let b = Tensor::<f32>::zeros(&[6]);
        assert_eq!(conv2d(&x, &w, &b, 1, 0).unwrap().shape(), &[1, 6, 24, 24]);
        assert_eq!(conv2d(&x, &w, &b, 1, 2).unwrap().shape(), &[1, 6, 28, 28]);
    }

    #[test]
    fn rejects_channel_mismatch() {
        let x = Tensor::<f32>::zeros(&[1, 2, 5, 5]);
        let w = Tensor::<f32>::zeros(&[1, 1, 3, 3]);
        let b = Tensor::<f32>::zeros(&[1]);
        assert!(conv2d(&x, &w, &b, 1, 0).is_err());
        assert!(conv2d_oracle(&x, &w, &b, 1, 0).is_err());
    }
}
