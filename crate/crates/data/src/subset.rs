//! Stratified subsets and train/validation splits.

use ipkp_nn::rng::seeded;
use rand::seq::SliceRandom;

use crate::dataset::LabeledDataset;
use crate::error::{DataError, Result};

/// Size of a stratified subset.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum SubsetSize {
    /// Fraction of every class, `0 < f ≤ 1`.
    Fraction(f64),
    /// The same absolute count from every class.
    PerClass(usize),
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SubsetSpec {
    pub size: SubsetSize,
    pub seed: u64,
}

impl SubsetSpec {
    pub fn fraction(fraction: f64, seed: u64) -> Self {
        SubsetSpec {
            size: SubsetSize::Fraction(fraction),
            seed,
        }
    }
}

const ROUNDING_SLACK: f64 = 1e-9;

/// Per-class counts for a fraction of each class.
///
/// Class `c` receives `floor(f·N_c)` or `ceil(f·N_c)` items and the total is
/// `round(f·N)`. The units above the floors go to the classes with the
/// smallest floor first, then the largest remainder, then the lower class
/// index, which levels near-equal classes (0.1% of a 50,000-item MNIST split
/// gives 5 per class).
pub fn allocate(counts: &[usize], fraction: f64) -> Vec<usize> {
    let quotas: Vec<f64> = counts.iter().map(|&n| n as f64 * fraction).collect();
    let total = (counts.iter().sum::<usize>() as f64 * fraction).round() as usize;
    let mut out: Vec<usize> = quotas.iter().map(|q| (q + ROUNDING_SLACK).floor() as usize).collect();
    let assigned: usize = out.iter().sum();
    let mut candidates: Vec<usize> = (0..counts.len())
        .filter(|&c| ((quotas[c] - ROUNDING_SLACK).ceil() as usize) > out[c])
        .collect();
    candidates.sort_by(|&a, &b| {
        out[a]
            .cmp(&out[b])
            .then((quotas[b] - quotas[b].floor()).total_cmp(&(quotas[a] - quotas[a].floor())))
            .then(a.cmp(&b))
    });
    for &c in candidates.iter().take(total.saturating_sub(assigned)) {
        out[c] += 1;
    }
    out
}

/// Stratified, seeded subsample; the result is in a seeded random order.
pub fn stratified_subsample(ds: &LabeledDataset, spec: &SubsetSpec) -> Result<LabeledDataset> {
    Ok(ds.select(&subsample_positions(ds.labels(), ds.class_count(), spec)?))
}

/// Index form of [`stratified_subsample`] over a bare label vector.
pub fn subsample_positions(labels: &[usize], class_count: usize, spec: &SubsetSpec) -> Result<Vec<usize>> {
    let mut by_class = vec![Vec::new(); class_count];
    for (i, &l) in labels.iter().enumerate() {
        by_class[l].push(i);
    }
    let counts: Vec<usize> = by_class.iter().map(Vec::len).collect();
    let take = match spec.size {
        SubsetSize::Fraction(f) => {
            if !(f > 0.0 && f <= 1.0) {
                return Err(DataError::BadFraction(f));
            }
            let take = allocate(&counts, f);
            if let Some(class) = take.iter().position(|&t| t == 0) {
                return Err(DataError::SubsetTooSmall { class, fraction: f });
            }
            take
        }
        SubsetSize::PerClass(n) => {
            if let Some(class) = counts.iter().position(|&c| c < n) {
                return Err(DataError::NotEnoughItems {
                    class,
                    available: counts[class],
                    requested: n,
                });
            }
            if n == 0 {
                return Err(DataError::SubsetTooSmall { class: 0, fraction: 0.0 });
            }
            vec![n; counts.len()]
        }
    };
    let mut rng = seeded(spec.seed);
    let mut chosen = Vec::with_capacity(take.iter().sum());
    for (class, mut idx) in by_class.into_iter().enumerate() {
        idx.shuffle(&mut rng);
        chosen.extend_from_slice(&idx[..take[class]]);
    }
    chosen.shuffle(&mut rng);
    Ok(chosen)
}

/// Disjoint stratified split; `val` receives `round(val_fraction·N)` items.
pub fn train_val_split(ds: &LabeledDataset, val_fraction: f64, seed: u64) -> Result<(LabeledDataset, LabeledDataset)> {
    let (train, val) = split_indices(ds, val_fraction, seed)?;
    Ok((ds.select(&train), ds.select(&val)))
}

/// Index form of [`train_val_split`].
pub fn split_indices(ds: &LabeledDataset, val_fraction: f64, seed: u64) -> Result<(Vec<usize>, Vec<usize>)> {
    if !(val_fraction > 0.0 && val_fraction < 1.0) {
        return Err(DataError::BadFraction(val_fraction));
    }
    let counts = ds.class_counts();
    let val_take = allocate(&counts, val_fraction);
    let mut rng = seeded(seed);
    let (mut train, mut val) = (Vec::new(), Vec::new());
    for (class, mut idx) in ds.class_indices().into_iter().enumerate() {
        idx.shuffle(&mut rng);
        val.extend_from_slice(&idx[..val_take[class]]);
        train.extend_from_slice(&idx[val_take[class]..]);
    }
    if train.is_empty() || val.is_empty() {
        return Err(DataError::BadFraction(val_fraction));
    }
    train.shuffle(&mut rng);
    val.shuffle(&mut rng);
    Ok((train, val))
}
