//! TOML configuration with sections `[dataset]`, `[model]`, `[pretrain]`,
//! `[train]`, `[augment]` and `[experiment]`. Every key is optional; unknown
//! keys are rejected.

use std::path::{Path, PathBuf};

use ipkp_nn::{InitScheme, OptimizerConfig, OptimizerKind};
use ipkp_prototypes::{AugmentMode, AugmentationConfig};
use ipkp_training::{PretrainConfig, TrainConfig};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{io_err, ExpError, Result};
use crate::scheme::Scheme;

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Config {
    pub dataset: DatasetSection,
    pub model: ModelSection,
    pub pretrain: PretrainSection,
    pub train: TrainSection,
    pub augment: AugmentSection,
    pub experiment: ExperimentSection,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DatasetSection {
    /// Base for relative paths; empty means `$IPKP_DATA_DIR`, else `data`.
    pub root: String,
    pub train_images: String,
    pub train_labels: String,
    pub test_images: String,
    pub test_labels: String,
    /// USPS text file for out-of-distribution evaluation; empty disables it.
    pub usps: String,
    /// Source for supervised surrogate pre-training; empty disables it.
    pub surrogate_images: String,
    pub surrogate_labels: String,
    /// Graph prototype spec file, or `builtin`.
    pub prototypes: String,
    pub resolution: usize,
    pub val_fraction: f64,
}

impl Default for DatasetSection {
    fn default() -> Self {
        DatasetSection {
            root: String::new(),
            train_images: "mnist/train-images-idx3-ubyte".into(),
            train_labels: "mnist/train-labels-idx1-ubyte".into(),
            test_images: "mnist/t10k-images-idx3-ubyte".into(),
            test_labels: "mnist/t10k-labels-idx1-ubyte".into(),
            usps: "usps/zip.test".into(),
            surrogate_images: "fashion/fashion-images-idx3-ubyte".into(),
            surrogate_labels: "fashion/fashion-labels-idx1-ubyte".into(),
            prototypes: "builtin".into(),
            resolution: 28,
            val_fraction: 1.0 / 6.0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelSection {
    pub architecture: String,
    pub classes: usize,
    /// `glorot` or `he`.
    pub init: String,
}

impl Default for ModelSection {
    fn default() -> Self {
        ModelSection {
            architecture: "lenet5".into(),
            classes: 10,
            init: "glorot".into(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PretrainSection {
    pub loss_threshold: f64,
    pub max_epochs: usize,
}

impl Default for PretrainSection {
    fn default() -> Self {
        PretrainSection {
            loss_threshold: 1e-2,
            max_epochs: 500,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainSection {
    /// Epochs at fraction 1.0; subsets train `round(epochs / fraction)`.
    pub epochs: usize,
    pub batch_size: usize,
    /// `sgd`, `momentum` or `adam`.
    pub optimizer: String,
    pub learning_rate: f64,
    pub momentum: f64,
    pub adam_beta1: f64,
    pub adam_beta2: f64,
    pub adam_eps: f64,
    pub shuffle: bool,
}

impl Default for TrainSection {
    fn default() -> Self {
        TrainSection {
            epochs: 10,
            batch_size: 32,
            optimizer: "momentum".into(),
            learning_rate: 0.01,
            momentum: 0.9,
            adam_beta1: 0.9,
            adam_beta2: 0.999,
            adam_eps: 1e-8,
            shuffle: true,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AugmentSection {
    /// `perspective` or `affine`.
    pub mode: String,
    pub per_class_count: usize,
    pub scale_range: [f64; 2],
    pub translate_range: [f64; 2],
    pub rotate_degrees_max: f64,
    pub perspective_distortion: f64,
}

impl Default for AugmentSection {
    fn default() -> Self {
        let d = AugmentationConfig::default();
        AugmentSection {
            mode: "perspective".into(),
            per_class_count: d.per_class_count,
            scale_range: d.scale_range,
            translate_range: d.translate_range,
            rotate_degrees_max: d.rotate_degrees_max,
            perspective_distortion: d.perspective_distortion,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentSection {
    pub schemes: Vec<String>,
    pub fractions: Vec<f64>,
    pub repetitions: usize,
    pub seed: u64,
    /// Per-class prototype counts of the augmentation sweep.
    pub augment_counts: Vec<usize>,
    pub augment_schemes: Vec<String>,
    pub augment_fraction: f64,
    pub layer_schemes: Vec<String>,
    pub layer_fraction: f64,
    pub informed_schemes: Vec<String>,
    /// Copies of the prototypes per epoch in concurrent schemes.
    pub prototype_weight: usize,
    /// Epochs of supervised surrogate pre-training.
    pub surrogate_epochs: usize,
    /// Write wall-clock seconds into results; off keeps reruns byte-identical.
    pub record_wallclock: bool,
    /// Keep every run's final model under `<out>/checkpoints`.
    pub keep_checkpoints: bool,
}

impl Default for ExperimentSection {
    fn default() -> Self {
        ExperimentSection {
            schemes: vec!["none".into(), "knowledge".into(), "knowledge_aug".into()],
            fractions: vec![1.0, 0.1, 0.01, 0.001],
            repetitions: 10,
            seed: 0,
            augment_counts: vec![1, 10, 100],
            augment_schemes: vec!["knowledge".into(), "sample".into()],
            augment_fraction: 0.001,
            layer_schemes: vec!["knowledge".into(), "data_surrogate".into(), "data_plus_knowledge".into()],
            layer_fraction: 0.01,
            informed_schemes: vec!["none".into(), "knowledge".into(), "concurrent".into(), "pretrain_plus_concurrent".into()],
            prototype_weight: 1,
            surrogate_epochs: 1,
            record_wallclock: false,
            keep_checkpoints: false,
        }
    }
}

fn parse_schemes(names: &[String], key: &str) -> Result<Vec<Scheme>> {
    if names.is_empty() {
        return Err(ExpError::Config(format!("{key} must not be empty")));
    }
    names.iter().map(|n| n.parse()).collect()
}

fn check_fraction(f: f64, key: &str) -> Result<()> {
    if f > 0.0 && f <= 1.0 {
        Ok(())
    } else {
        Err(ExpError::Config(format!("{key}: fraction {f} outside (0, 1]")))
    }
}

impl Config {
    pub fn from_toml_str(text: &str) -> Result<Config> {
        let cfg: Config = toml::from_str(text).map_err(|e| ExpError::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Config> {
        Config::from_toml_str(&std::fs::read_to_string(path).map_err(io_err(path))?)
    }

    /// Fills an empty `dataset.root` from `$IPKP_DATA_DIR` or `data`.
    pub fn resolve_root(mut self) -> Config {
        if self.dataset.root.is_empty() {
            self.dataset.root = std::env::var("IPKP_DATA_DIR").unwrap_or_else(|_| "data".into());
        }
        self
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(ExpError::Config(m));
        if self.model.architecture != "lenet5" {
            return bad(format!("model.architecture `{}` (only lenet5)", self.model.architecture));
        }
        if self.model.classes < 2 {
            return bad("model.classes must be at least 2".into());
        }
        if !matches!(self.model.init.as_str(), "glorot" | "he") {
            return bad(format!("model.init `{}` (glorot or he)", self.model.init));
        }
        if !(self.dataset.val_fraction > 0.0 && self.dataset.val_fraction < 1.0) {
            return bad(format!("dataset.val_fraction {}", self.dataset.val_fraction));
        }
        if self.dataset.resolution != 28 {
            return bad(format!("dataset.resolution {} (lenet5 takes 28)", self.dataset.resolution));
        }
        if self.train.epochs == 0 {
            return bad("train.epochs must be at least 1".into());
        }
        self.optimizer()?.validate()?;
        self.pretrain_config(0).validate()?;
        self.augment_config(0, self.augment.per_class_count)?.validate()?;
        let e = &self.experiment;
        if e.repetitions == 0 {
            return bad("experiment.repetitions must be at least 1".into());
        }
        if e.fractions.is_empty() {
            return bad("experiment.fractions must not be empty".into());
        }
        for &f in &e.fractions {
            check_fraction(f, "experiment.fractions")?;
        }
        check_fraction(e.augment_fraction, "experiment.augment_fraction")?;
        check_fraction(e.layer_fraction, "experiment.layer_fraction")?;
        self.schemes()?;
        parse_schemes(&e.augment_schemes, "experiment.augment_schemes")?;
        parse_schemes(&e.layer_schemes, "experiment.layer_schemes")?;
        parse_schemes(&e.informed_schemes, "experiment.informed_schemes")?;
        if e.augment_counts.first() != Some(&1) || e.augment_counts.windows(2).any(|w| w[1] <= w[0]) {
            return bad("experiment.augment_counts must start at 1 and increase".into());
        }
        if e.prototype_weight == 0 {
            return bad("experiment.prototype_weight must be at least 1".into());
        }
        if e.surrogate_epochs == 0 {
            return bad("experiment.surrogate_epochs must be at least 1".into());
        }
        Ok(())
    }

    pub fn schemes(&self) -> Result<Vec<Scheme>> {
        parse_schemes(&self.experiment.schemes, "experiment.schemes")
    }

    pub fn augment_schemes(&self) -> Result<Vec<Scheme>> {
        parse_schemes(&self.experiment.augment_schemes, "experiment.augment_schemes")
    }

    pub fn layer_schemes(&self) -> Result<Vec<Scheme>> {
        parse_schemes(&self.experiment.layer_schemes, "experiment.layer_schemes")
    }

    pub fn informed_schemes(&self) -> Result<Vec<Scheme>> {
        parse_schemes(&self.experiment.informed_schemes, "experiment.informed_schemes")
    }

    /// The fully resolved document; every key present.
    pub fn resolved_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    /// First 16 hex digits of SHA-256 over [`Config::resolved_toml`].
    pub fn hash(&self) -> String {
        let digest = Sha256::digest(self.resolved_toml().as_bytes());
        digest.iter().take(8).map(|b| format!("{b:02x}")).collect()
    }

    pub fn path(&self, rel: &str) -> PathBuf {
        Path::new(&self.dataset.root).join(rel)
    }

    pub fn optimizer(&self) -> Result<OptimizerConfig> {
        let t = &self.train;
        let kind = match t.optimizer.as_str() {
            "sgd" => OptimizerKind::Sgd,
            "momentum" => OptimizerKind::SgdMomentum { momentum: t.momentum },
            "adam" => OptimizerKind::Adam {
                beta1: t.adam_beta1,
                beta2: t.adam_beta2,
                eps: t.adam_eps,
            },
            other => return Err(ExpError::Config(format!("train.optimizer `{other}` (sgd, momentum or adam)"))),
        };
        Ok(OptimizerConfig {
            kind,
            learning_rate: t.learning_rate,
        })
    }

    pub fn train_config(&self, seed: u64, epochs: usize, val_every: usize) -> TrainConfig {
        TrainConfig {
            epochs,
            batch_size: self.train.batch_size,
            optimizer: self.optimizer().expect("validated optimizer"),
            seed,
            shuffle: self.train.shuffle,
            val_every: val_every.max(1),
        }
    }

    pub fn pretrain_config(&self, seed: u64) -> PretrainConfig {
        PretrainConfig {
            base: TrainConfig {
                seed,
                batch_size: self.train.batch_size,
                optimizer: self.optimizer().unwrap_or_default(),
                shuffle: self.train.shuffle,
                ..TrainConfig::default()
            },
            loss_threshold: self.pretrain.loss_threshold,
            max_epochs: self.pretrain.max_epochs,
        }
    }

    pub fn augment_config(&self, seed: u64, per_class_count: usize) -> Result<AugmentationConfig> {
        let a = &self.augment;
        let mode = match a.mode.as_str() {
            "perspective" => AugmentMode::Perspective,
            "affine" => AugmentMode::Affine,
            other => return Err(ExpError::Config(format!("augment.mode `{other}` (perspective or affine)"))),
        };
        Ok(AugmentationConfig {
            mode,
            per_class_count,
            scale_range: a.scale_range,
            translate_range: a.translate_range,
            rotate_degrees_max: a.rotate_degrees_max,
            perspective_distortion: a.perspective_distortion,
            seed,
        })
    }

    pub fn init_scheme(&self, seed: u64) -> InitScheme {
        if self.model.init == "he" {
            InitScheme::he(seed)
        } else {
            InitScheme::glorot(seed)
        }
    }
}
