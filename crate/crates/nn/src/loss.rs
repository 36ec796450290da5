use crate::error::{NnError, Result};
use crate::scalar::Scalar;
use crate::tensor::Tensor;

/// Mean softmax cross-entropy over a `[B, C]` batch and its gradient
/// `(softmax − one_hot) / B`.
pub fn softmax_cross_entropy<T: Scalar>(logits: &Tensor<T>, labels: &[usize]) -> Result<(T, Tensor<T>)> {
    let shape = logits.shape();
    if shape.len() != 2 || shape[0] != labels.len() {
        return Err(NnError::ShapeMismatch {
            layer: 0,
            expected: vec![labels.len(), shape.last().copied().unwrap_or(0)],
            found: shape.to_vec(),
        });
    }
    let (b, c) = (shape[0], shape[1]);
    if let Some((index, &label)) = labels.iter().enumerate().find(|(_, &l)| l >= c) {
        return Err(NnError::LabelOutOfRange {
            index,
            label,
            classes: c,
        });
    }
    let inv_b = T::one() / T::from_f64(b as f64);
    let mut grad = vec![T::zero(); b * c];
    let mut total = T::zero();
    for (i, (row, g)) in logits.data().chunks_exact(c).zip(grad.chunks_exact_mut(c)).enumerate() {
        let max = row.iter().copied().fold(T::neg_infinity(), T::max);
        let mut sum = T::zero();
        for (gv, &z) in g.iter_mut().zip(row) {
            let e = (z - max).exp();
            *gv = e;
            sum += e;
        }
        let label = labels[i];
        // -log softmax = log Σ exp(z - max) - (z_label - max)
        total += sum.ln() - (row[label] - max);
        for gv in g.iter_mut() {
            *gv = *gv / sum * inv_b;
        }
        g[label] -= inv_b;
    }
    Ok((total * inv_b, Tensor::from_vec(shape, grad)?))
}
