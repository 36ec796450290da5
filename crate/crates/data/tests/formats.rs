use std::path::PathBuf;

use ipkp_data::{load_dataset, load_idx, mean_image_per_class, parse_usps, save_dataset, stratified_subsample, train_val_split, write_idx, LabeledDataset, SubsetSpec};
use ipkp_nn::Tensor;
use proptest::prelude::*;

fn data_dir() -> PathBuf {
    std::env::var_os("IPKP_DATA_DIR")
        .map(PathBuf::from)
        .unwrap_or_else(|| PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../data"))
}

fn mnist_train() -> Option<LabeledDataset> {
    let dir = data_dir().join("mnist");
    let images = dir.join("train-images-idx3-ubyte");
    if !images.exists() {
        eprintln!("MNIST not found under {}; skipping", dir.display());
        return None;
    }
    Some(load_idx(&images, &dir.join("train-labels-idx1-ubyte")).unwrap())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(50))]

    #[test]
    fn idx_and_cache_round_trip(bytes in prop::collection::vec(any::<u8>(), 12..=12 * 6), seed in any::<u64>()) {
        let n = bytes.len() / 12;
        let pixels: Vec<f32> = bytes[..n * 12].iter().map(|&b| b as f32 / 255.0).collect();
        let labels: Vec<usize> = (0..n).map(|i| ((seed >> (i % 60)) % 3) as usize).collect();
        let classes = labels.iter().max().unwrap() + 1;
        let ds = LabeledDataset::new("rt", Tensor::from_vec(&[n, 1, 3, 4], pixels).unwrap(), labels, classes).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let (ip, lp) = (dir.path().join("i"), dir.path().join("l"));
        write_idx(&ds, &ip, &lp).unwrap();
        let back = load_idx(&ip, &lp).unwrap();
        prop_assert_eq!(back.images(), ds.images());
        prop_assert_eq!(back.labels(), ds.labels());
        let cache = dir.path().join("c.ipds");
        save_dataset(&back, &cache).unwrap();
        prop_assert_eq!(load_dataset(&cache).unwrap(), back);
    }

    #[test]
    fn usps_rescaling_preserves_order(a in -1.0f64..=1.0, b in -1.0f64..=1.0) {
        let line = |v: f64| format!("0 {}\n", vec![format!("{v}"); 256].join(" "));
        let da = parse_usps(&line(a), 16).unwrap();
        let db = parse_usps(&line(b), 16).unwrap();
        let (pa, pb) = (da.image(0)[0], db.image(0)[0]);
        prop_assert!((0.0..=1.0).contains(&pa));
        if a < b { prop_assert!(pa <= pb); }
        if a > b { prop_assert!(pa >= pb); }
    }
}

#[test]
fn mnist_pool_sizes_and_split() {
    let Some(ds) = mnist_train() else { return };
    assert_eq!(ds.len(), 60_000);
    assert_eq!(ds.image_shape(), [1, 28, 28]);
    assert_eq!(ds.class_count(), 10);
    let (train, val) = train_val_split(&ds, 1.0 / 6.0, 0).unwrap();
    assert_eq!((train.len(), val.len()), (50_000, 10_000));
    for (f, n) in [(1.0, 50_000), (0.1, 5_000), (0.01, 500), (0.001, 50)] {
        let sub = stratified_subsample(&train, &SubsetSpec::fraction(f, 3)).unwrap();
        assert_eq!(sub.len(), n, "fraction {f}");
    }
    let tiny = stratified_subsample(&train, &SubsetSpec::fraction(0.001, 3)).unwrap();
    assert_eq!(tiny.class_counts(), vec![5; 10]);
}

#[test]
fn mnist_mean_images_match_reference() {
    let Some(ds) = mnist_train() else { return };
    let m = mean_image_per_class(&ds).unwrap();
    assert_eq!(m.len(), 10);
    // per-class (pixel sum, max) of the mean image, from an independent float64 reduction
    let want = [
        (135.945_070_893_460_3, 0.790_602_271_636_334_7),
        (59.582_935_767_009_644, 0.965_883_167_268_697_9),
        (116.796_500_997_176_85, 0.690_974_731_618_063_8),
        (110.959_632_340_948_64, 0.779_501_792_561_757_4),
        (95.150_623_275_671_5, 0.842_091_413_765_104),
        (100.939_524_941_133_41, 0.683_563_194_693_120_3),
        (107.644_591_773_850_98, 0.836_893_094_513_921_8),
        (89.789_715_036_853_18, 0.768_191_790_682_761_3),
        (117.722_289_804_659_43, 0.834_090_368_329_876),
        (96.110_515_196_161_29, 0.822_755_513_366_896_8),
    ];
    for (c, (sum, max)) in want.iter().enumerate() {
        let img = m.item(c, 0);
        let s: f64 = img.iter().map(|&v| v as f64).sum();
        let mx = img.iter().fold(0.0f32, |a, &b| a.max(b)) as f64;
        assert!((s - sum).abs() < 1e-3, "class {c}: sum {s}");
        assert!((mx - max).abs() < 1e-6, "class {c}: max {mx}");
    }
}
