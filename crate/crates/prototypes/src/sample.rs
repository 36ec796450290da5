use ipkp_data::{DataError, LabeledDataset, PrototypeSet, PrototypeSource};
use ipkp_nn::rng::seeded;
use rand::seq::IndexedRandom;

use crate::error::Result;

/// One uniformly drawn real image per class.
pub fn random_sample_prototypes(ds: &LabeledDataset, seed: u64) -> Result<PrototypeSet> {
    let mut rng = seeded(seed);
    let mut picks = Vec::with_capacity(ds.class_count());
    for (class, idx) in ds.class_indices().iter().enumerate() {
        picks.push(*idx.choose(&mut rng).ok_or(DataError::EmptyClass { class })?);
    }
    let mut set = ds.select(&picks);
    set.name = format!("{}-sample", ds.name);
    Ok(PrototypeSet::new(PrototypeSource::RandomSample, set, 1)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use ipkp_nn::Tensor;

    fn ds(per_class: usize) -> LabeledDataset {
        let n = 3 * per_class;
        let images = Tensor::from_vec(&[n, 1, 1, 1], (0..n).map(|i| i as f32 / n as f32).collect()).unwrap();
        LabeledDataset::new("s", images, (0..n).map(|i| i % 3).collect(), 3).unwrap()
    }

    #[test]
    fn one_image_per_class_is_that_image() {
        let d = ds(1);
        let p = random_sample_prototypes(&d, 4).unwrap();
        assert_eq!(p.dataset().images(), d.images());
    }

    #[test]
    fn seeds_change_picks_not_labels() {
        let d = ds(50);
        let a = random_sample_prototypes(&d, 1).unwrap();
        let b = random_sample_prototypes(&d, 2).unwrap();
        assert_eq!(a.len(), 3);
        assert_eq!(a.dataset().labels(), b.dataset().labels());
        assert_ne!(a.dataset().images(), b.dataset().images());
        assert_eq!(a, random_sample_prototypes(&d, 1).unwrap());
    }

    #[test]
    fn empty_class_is_an_error() {
        let images = Tensor::from_vec(&[1, 1, 1, 1], vec![0.0]).unwrap();
        let d = LabeledDataset::new("s", images, vec![0], 2).unwrap();
        assert!(random_sample_prototypes(&d, 0).is_err());
    }
}
