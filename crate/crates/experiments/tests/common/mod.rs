use ipkp_data::LabeledDataset;
use ipkp_experiments::{Config, DataContext};
use ipkp_nn::rng::derive_seed;
use ipkp_nn::Tensor;
use ipkp_prototypes::builtin_digit_prototypes;

fn noise(seed: u64, tag: u64) -> f32 {
    (derive_seed(seed, &tag.to_string()) >> 11) as f32 / (1u64 << 53) as f32 - 0.5
}

/// `per_class` noisy copies of every shipped digit prototype.
pub fn noisy_digits(name: &str, per_class: usize, seed: u64, mirror: bool) -> LabeledDataset {
    let protos = builtin_digit_prototypes(28, 28).unwrap();
    let mut data = Vec::new();
    let mut labels = Vec::new();
    for i in 0..per_class * 10 {
        let c = i % 10;
        let base = protos.item(c, 0);
        let item_seed = derive_seed(seed, &i.to_string());
        for y in 0..28 {
            for x in 0..28 {
                let src = if mirror { base[y * 28 + 27 - x] } else { base[y * 28 + x] };
                data.push((src + 0.6 * noise(item_seed, (y * 28 + x) as u64)).clamp(0.0, 1.0));
            }
        }
        labels.push(c);
    }
    let n = labels.len();
    LabeledDataset::new(name, Tensor::from_vec(&[n, 1, 28, 28], data).unwrap(), labels, 10).unwrap()
}

pub fn context() -> DataContext {
    let test = noisy_digits("test", 6, 2, false);
    DataContext {
        pool: noisy_digits("pool", 24, 1, false),
        ood: Some(test.clone()),
        test,
        surrogate: Some(noisy_digits("surrogate", 12, 3, true)),
        prototypes: builtin_digit_prototypes(28, 28).unwrap(),
    }
}

/// Small, fast plan over the synthetic context.
pub fn config(extra: &str) -> Config {
    let base = "[train]\nepochs = 2\n[pretrain]\nmax_epochs = 40\n[augment]\nper_class_count = 3\n\
                [experiment]\nrepetitions = 2\nfractions = [1.0, 0.5]\naugment_counts = [1, 3]\n";
    let mut doc: toml::Table = toml::from_str(base).unwrap();
    let over: toml::Table = toml::from_str(extra).unwrap();
    for (section, table) in over {
        let dst = doc.entry(section).or_insert_with(|| toml::Value::Table(Default::default()));
        for (k, v) in table.as_table().unwrap() {
            dst.as_table_mut().unwrap().insert(k.clone(), v.clone());
        }
    }
    Config::from_toml_str(&toml::to_string(&doc).unwrap()).unwrap()
}
