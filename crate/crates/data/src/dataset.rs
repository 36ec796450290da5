use ipkp_nn::Tensor;

use crate::error::{DataError, Result};

/// Labeled image collection with images stored as one `[N, C, H, W]` tensor
/// of values in `[0, 1]`.
#[derive(Clone, Debug, PartialEq)]
pub struct LabeledDataset {
    pub name: String,
    images: Tensor<f32>,
    labels: Vec<usize>,
    class_count: usize,
}

impl LabeledDataset {
    pub fn new(name: impl Into<String>, images: Tensor<f32>, labels: Vec<usize>, class_count: usize) -> Result<Self> {
        let shape = images.shape();
        if shape.len() != 4 {
            return Err(DataError::Invalid(format!("images must be [N, C, H, W], got {shape:?}")));
        }
        if shape[0] != labels.len() {
            return Err(DataError::CountMismatch {
                images: shape[0],
                labels: labels.len(),
            });
        }
        if let Some(&l) = labels.iter().find(|&&l| l >= class_count) {
            return Err(DataError::Invalid(format!("label {l} outside {class_count} classes")));
        }
        if let Some(v) = images.data().iter().find(|v| !(0.0..=1.0).contains(*v)) {
            return Err(DataError::Invalid(format!("pixel value {v} outside [0, 1]")));
        }
        Ok(LabeledDataset {
            name: name.into(),
            images,
            labels,
            class_count,
        })
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn images(&self) -> &Tensor<f32> {
        &self.images
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn class_count(&self) -> usize {
        self.class_count
    }

    /// `[C, H, W]` of one image.
    pub fn image_shape(&self) -> [usize; 3] {
        let s = self.images.shape();
        [s[1], s[2], s[3]]
    }

    pub fn image(&self, i: usize) -> &[f32] {
        self.images.item(i)
    }

    /// Item indices of every class, in dataset order.
    pub fn class_indices(&self) -> Vec<Vec<usize>> {
        let mut by_class = vec![Vec::new(); self.class_count];
        for (i, &l) in self.labels.iter().enumerate() {
            by_class[l].push(i);
        }
        by_class
    }

    pub fn class_counts(&self) -> Vec<usize> {
        let mut counts = vec![0; self.class_count];
        for &l in &self.labels {
            counts[l] += 1;
        }
        counts
    }

    /// New dataset holding the given items in the given order.
    pub fn select(&self, indices: &[usize]) -> LabeledDataset {
        let (images, labels) = self.gather(indices);
        LabeledDataset {
            name: self.name.clone(),
            images,
            labels,
            class_count: self.class_count,
        }
    }

    /// Batch tensor and labels for the given items.
    pub fn gather(&self, indices: &[usize]) -> (Tensor<f32>, Vec<usize>) {
        let [c, h, w] = self.image_shape();
        let mut data = Vec::with_capacity(indices.len() * c * h * w);
        for &i in indices {
            data.extend_from_slice(self.image(i));
        }
        let labels = indices.iter().map(|&i| self.labels[i]).collect();
        if indices.is_empty() {
            return (Tensor::zeros(&[0, c, h, w]), labels);
        }
        let images = Tensor::from_vec(&[indices.len(), c, h, w], data).expect("gathered shape");
        (images, labels)
    }

    /// Appends `other` after `self`; image shapes and class counts must agree.
    pub fn concat(&self, other: &LabeledDataset) -> Result<LabeledDataset> {
        if self.image_shape() != other.image_shape() || self.class_count != other.class_count {
            return Err(DataError::Invalid(format!(
                "cannot concatenate {:?}/{} with {:?}/{}",
                self.image_shape(),
                self.class_count,
                other.image_shape(),
                other.class_count
            )));
        }
        let [c, h, w] = self.image_shape();
        let mut data = self.images.data().to_vec();
        data.extend_from_slice(other.images.data());
        let mut labels = self.labels.clone();
        labels.extend_from_slice(&other.labels);
        let images = Tensor::from_vec(&[labels.len(), c, h, w], data).expect("concatenated shape");
        Ok(LabeledDataset {
            name: self.name.clone(),
            images,
            labels,
            class_count: self.class_count,
        })
    }
}

/// Where the items of a [`PrototypeSet`] came from.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PrototypeSource {
    Knowledge,
    MeanImage,
    RandomSample,
}

/// Class-balanced synthetic training set: `per_class_count` items per class,
/// stored class by class.
#[derive(Clone, Debug, PartialEq)]
pub struct PrototypeSet {
    pub source: PrototypeSource,
    data: LabeledDataset,
    per_class_count: usize,
}

impl PrototypeSet {
    /// Builds a set from class-ordered items; checks the class balance.
    pub fn new(source: PrototypeSource, data: LabeledDataset, per_class_count: usize) -> Result<Self> {
        if per_class_count == 0 || data.len() != per_class_count * data.class_count() {
            return Err(DataError::Invalid(format!(
                "{} items cannot hold {per_class_count} per class for {} classes",
                data.len(),
                data.class_count()
            )));
        }
        for (i, &l) in data.labels().iter().enumerate() {
            if l != i / per_class_count {
                return Err(DataError::Invalid(format!("item {i} has label {l}, expected class-ordered blocks")));
            }
        }
        Ok(PrototypeSet {
            source,
            data,
            per_class_count,
        })
    }

    pub fn per_class_count(&self) -> usize {
        self.per_class_count
    }

    pub fn class_count(&self) -> usize {
        self.data.class_count()
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn dataset(&self) -> &LabeledDataset {
        &self.data
    }

    pub fn into_dataset(self) -> LabeledDataset {
        self.data
    }

    /// Item `j` of class `class`.
    pub fn item(&self, class: usize, j: usize) -> &[f32] {
        self.data.image(class * self.per_class_count + j)
    }
}
