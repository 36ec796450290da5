use ipkp_nn::Tensor;

use crate::dataset::{LabeledDataset, PrototypeSet, PrototypeSource};
use crate::error::{DataError, Result};

/// One pixel-wise mean image per class.
pub fn mean_image_per_class(ds: &LabeledDataset) -> Result<PrototypeSet> {
    let [c, h, w] = ds.image_shape();
    let len = c * h * w;
    let mut sums = vec![vec![0.0f64; len]; ds.class_count()];
    for (i, &l) in ds.labels().iter().enumerate() {
        for (s, &v) in sums[l].iter_mut().zip(ds.image(i)) {
            *s += v as f64;
        }
    }
    let counts = ds.class_counts();
    if let Some(class) = counts.iter().position(|&n| n == 0) {
        return Err(DataError::EmptyClass { class });
    }
    let mut data = Vec::with_capacity(ds.class_count() * len);
    for (s, &n) in sums.iter().zip(&counts) {
        data.extend(s.iter().map(|v| (v / n as f64) as f32));
    }
    let images = Tensor::from_vec(&[ds.class_count(), c, h, w], data).expect("mean image shape");
    let labels = (0..ds.class_count()).collect();
    let set = LabeledDataset::new(format!("{}-mean", ds.name), images, labels, ds.class_count())?;
    PrototypeSet::new(PrototypeSource::MeanImage, set, 1)
}
