//! Checks against real MNIST; skipped when the files are absent.

use std::path::PathBuf;

use ipkp_data::{load_idx, stratified_subsample, train_val_split, LabeledDataset, SubsetSpec};
use ipkp_nn::rng::derive_seed;
use ipkp_nn::{init_params, InitScheme, LayeredModel};
use ipkp_training::*;

fn mnist() -> Option<(LabeledDataset, LabeledDataset)> {
    let dir = std::env::var_os("IPKP_DATA_DIR")
        .map(PathBuf::from)
        .unwrap_or_else(|| PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../data"))
        .join("mnist");
    if !dir.join("train-images-idx3-ubyte").exists() {
        eprintln!("MNIST not found under {}; skipping", dir.display());
        return None;
    }
    let load = |stem: &str| load_idx(&dir.join(format!("{stem}-images-idx3-ubyte")), &dir.join(format!("{stem}-labels-idx1-ubyte"))).unwrap();
    Some((load("train"), load("t10k")))
}

fn fresh(seed: u64) -> LayeredModel<f32> {
    let mut m = LayeredModel::<f32>::lenet5(10);
    init_params(&mut m, &InitScheme::glorot(seed)).unwrap();
    m
}

/// Items whose label lies in `classes`, relabeled to `0..classes.len()`.
fn only(ds: &LabeledDataset, classes: std::ops::Range<usize>) -> LabeledDataset {
    let idx: Vec<usize> = (0..ds.len()).filter(|&i| classes.contains(&ds.labels()[i])).collect();
    let (images, labels) = ds.gather(&idx);
    let labels = labels.into_iter().map(|l| l - classes.start).collect();
    LabeledDataset::new(ds.name.clone(), images, labels, classes.len()).unwrap()
}

#[test]
fn fifty_item_baseline_is_pinned() {
    let Some((pool, test)) = mnist() else { return };
    let (train, val) = train_val_split(&pool, 1.0 / 6.0, 11).unwrap();
    let sub = stratified_subsample(&train, &SubsetSpec::fraction(0.001, 12)).unwrap();
    assert_eq!(sub.len(), 50);
    let cfg = TrainConfig {
        epochs: scaled_epochs(10, 0.001),
        seed: 13,
        val_every: scaled_epochs(1, 0.001),
        ..Default::default()
    };
    let (model, curve) = finetune(fresh(14), &sub, &val, &cfg).unwrap();
    let acc = evaluate(&model, &test).unwrap();
    assert_eq!(curve.iteration_loss.len(), 10_000 * 2);
    // first measurement: 0.7498
    assert!((acc - 0.7498).abs() < 0.005, "test accuracy {acc}");
}

#[test]
fn class_disjoint_surrogate_helps_one_percent_finetuning() {
    let Some((pool, test)) = mnist() else { return };
    let (source, target_test) = (only(&pool, 0..5), only(&test, 5..10));
    let target_pool = only(&pool, 5..10);
    let mut gains = Vec::new();
    for seed in 0..5u64 {
        let (train, val) = train_val_split(&target_pool, 1.0 / 6.0, derive_seed(seed, "split")).unwrap();
        let sub = stratified_subsample(&train, &SubsetSpec::fraction(0.01, derive_seed(seed, "subset"))).unwrap();
        // one full-data-equivalent epoch on the subset
        let cfg = TrainConfig {
            epochs: scaled_epochs(1, 0.01),
            seed: derive_seed(seed, "train"),
            val_every: scaled_epochs(1, 0.01),
            ..Default::default()
        };
        let init = fresh(derive_seed(seed, "init"));
        let (base, _) = finetune(init.clone(), &sub, &val, &cfg).unwrap();
        let sur_cfg = TrainConfig {
            epochs: 1,
            seed: derive_seed(seed, "surrogate"),
            ..Default::default()
        };
        let (sur, _) = data_pretrain_surrogate(init, &source, &sur_cfg).unwrap();
        let (tuned, _) = finetune(sur, &sub, &val, &cfg).unwrap();
        gains.push(evaluate(&tuned, &target_test).unwrap() - evaluate(&base, &target_test).unwrap());
    }
    let mean = gains.iter().sum::<f64>() / gains.len() as f64;
    assert!(mean > 0.0, "gains {gains:?}");
}
