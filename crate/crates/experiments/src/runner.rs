//! Seeded per-run pipelines and the worker pool that executes them.
//!
//! Repetition `r` draws every random choice from `derive_seed(seed, "rep<r>")`
//! through named sub-streams (`split`, `subset`, `init`, `augment`, `sample`,
//! `pretrain`, `surrogate`, `train`), so a run depends only on its own
//! coordinates and never on which other runs execute or in which order.

use std::collections::HashMap;
use std::path::{Path, PathBuf};
use std::sync::{Arc, Mutex, OnceLock};
use std::time::Instant;

use ipkp_data::{mean_image_per_class, subsample_positions, subset::split_indices, LabeledDataset, PrototypeSet, SubsetSpec};
use ipkp_nn::rng::derive_seed;
use ipkp_nn::{init_params, LayeredModel};
use ipkp_prototypes::{augment, random_sample_prototypes};
use ipkp_training::{
    data_pretrain_surrogate, evaluate, finetune, informed_concurrent, pretrain, save_tagged_checkpoint, scaled_epochs,
    truncate_transfer, MixConfig, TrainingCurve,
};
use rayon::prelude::*;

use crate::config::Config;
use crate::context::DataContext;
use crate::error::{io_err, ExpError, Result};
use crate::record::RunRecord;
use crate::scheme::Scheme;

/// Coordinates of one fine-tuning run.
#[derive(Clone, Debug, PartialEq)]
pub struct RunSpec {
    pub label: String,
    pub scheme: Scheme,
    pub fraction: f64,
    pub repetition: usize,
    /// Per-class prototype count for prototype pre-training; `None` keeps the
    /// scheme's default (1 for `knowledge`/`sample`, `augment.per_class_count`
    /// for the `_aug` variants).
    pub count: Option<usize>,
    /// Truncation depth; `None` transfers the whole pre-trained model.
    pub truncate_k: Option<usize>,
    pub epochs: usize,
    pub val_every: usize,
}

/// Seed of repetition `r`: `derive_seed(seed, "rep<r>")`.
pub fn repetition_seed(seed: u64, repetition: usize) -> u64 {
    derive_seed(seed, &format!("rep{repetition}"))
}

impl RunSpec {
    /// Plain `scheme` run trained for `scaled_epochs(base_epochs, fraction)`
    /// epochs, validated every `scaled_epochs(1, fraction)`.
    pub fn standard(scheme: Scheme, fraction: f64, repetition: usize, base_epochs: usize) -> RunSpec {
        RunSpec {
            label: scheme.to_string(),
            scheme,
            fraction,
            repetition,
            count: None,
            truncate_k: None,
            epochs: scaled_epochs(base_epochs, fraction),
            val_every: scaled_epochs(1, fraction),
        }
    }
}

type Shared<T> = Arc<OnceLock<std::result::Result<T, String>>>;

/// A configured experiment bound to its data.
pub struct Experiment {
    pub cfg: Config,
    pub hash: String,
    pub ctx: DataContext,
    out: Option<PathBuf>,
    pool: rayon::ThreadPool,
    models: Mutex<HashMap<String, Shared<LayeredModel<f32>>>>,
}

struct RepData {
    subset: LabeledDataset,
    val: LabeledDataset,
}

impl Experiment {
    /// `jobs` caps parallel runs; `out` receives checkpoints when
    /// `experiment.keep_checkpoints` is set.
    pub fn new(cfg: Config, ctx: DataContext, jobs: usize, out: Option<PathBuf>) -> Result<Experiment> {
        cfg.validate()?;
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(jobs.max(1))
            .build()
            .map_err(|e| ExpError::Config(format!("worker pool: {e}")))?;
        Ok(Experiment {
            hash: cfg.hash(),
            cfg,
            ctx,
            out,
            pool,
            models: Mutex::new(HashMap::new()),
        })
    }

    pub fn rep_seed(&self, repetition: usize) -> u64 {
        repetition_seed(self.cfg.experiment.seed, repetition)
    }

    fn sub_seed(&self, repetition: usize, tag: &str) -> u64 {
        derive_seed(self.rep_seed(repetition), tag)
    }

    pub fn checkpoint_path(&self, out: &Path, label: &str, fraction: f64, repetition: usize) -> PathBuf {
        out.join("checkpoints").join(format!("{label}_f{fraction}_r{repetition}.ipkp"))
    }

    fn rep_data(&self, fraction: f64, repetition: usize) -> Result<RepData> {
        let pool = &self.ctx.pool;
        let (train_idx, val_idx) = split_indices(pool, self.cfg.dataset.val_fraction, self.sub_seed(repetition, "split"))?;
        let train_labels: Vec<usize> = train_idx.iter().map(|&i| pool.labels()[i]).collect();
        let spec = SubsetSpec::fraction(fraction, self.sub_seed(repetition, "subset"));
        let picked: Vec<usize> = subsample_positions(&train_labels, pool.class_count(), &spec)?
            .into_iter()
            .map(|p| train_idx[p])
            .collect();
        Ok(RepData {
            subset: pool.select(&picked),
            val: pool.select(&val_idx),
        })
    }

    /// The fine-tuning subset and validation split of one repetition.
    pub fn subset_and_val(&self, fraction: f64, repetition: usize) -> Result<(LabeledDataset, LabeledDataset)> {
        let d = self.rep_data(fraction, repetition)?;
        Ok((d.subset, d.val))
    }

    pub fn fresh_model(&self, repetition: usize) -> Result<LayeredModel<f32>> {
        let mut m = LayeredModel::lenet5(self.cfg.model.classes);
        init_params(&mut m, &self.cfg.init_scheme(self.sub_seed(repetition, "init")))?;
        Ok(m)
    }

    fn augmented(&self, set: PrototypeSet, count: usize, repetition: usize) -> Result<PrototypeSet> {
        if count <= set.per_class_count() {
            return Ok(set);
        }
        Ok(augment(&set, &self.cfg.augment_config(self.sub_seed(repetition, "augment"), count)?)?)
    }

    /// Prototype set a scheme pre-trains on (before any fine-tuning).
    pub fn pretrain_set(
        &self,
        scheme: Scheme,
        count: Option<usize>,
        repetition: usize,
        subset: &LabeledDataset,
    ) -> Result<Option<PrototypeSet>> {
        let aug = self.cfg.augment.per_class_count;
        let set = match scheme {
            Scheme::Knowledge | Scheme::PretrainPlusConcurrent => {
                self.augmented(self.ctx.prototypes.clone(), count.unwrap_or(1), repetition)?
            }
            Scheme::KnowledgeAug | Scheme::DataPlusKnowledge => {
                self.augmented(self.ctx.prototypes.clone(), count.unwrap_or(aug), repetition)?
            }
            Scheme::Sample => {
                let s = random_sample_prototypes(subset, self.sub_seed(repetition, "sample"))?;
                self.augmented(s, count.unwrap_or(1), repetition)?
            }
            Scheme::SampleAug => {
                let s = random_sample_prototypes(subset, self.sub_seed(repetition, "sample"))?;
                self.augmented(s, count.unwrap_or(aug), repetition)?
            }
            Scheme::MeanImage => self.augmented(mean_image_per_class(subset)?, count.unwrap_or(1), repetition)?,
            Scheme::None | Scheme::DataSurrogate | Scheme::Concurrent => return Ok(None),
        };
        Ok(Some(set))
    }

    fn cached(&self, key: String, build: impl FnOnce() -> Result<LayeredModel<f32>>) -> Result<LayeredModel<f32>> {
        let cell = self.models.lock().expect("model cache lock").entry(key).or_default().clone();
        cell.get_or_init(|| build().map_err(|e| e.to_string()))
            .clone()
            .map_err(ExpError::Config)
    }

    fn surrogate_model(&self, repetition: usize) -> Result<LayeredModel<f32>> {
        self.cached(format!("surrogate/r{repetition}"), || {
            let source = self
                .ctx
                .surrogate
                .as_ref()
                .ok_or_else(|| ExpError::Config("no surrogate dataset loaded".into()))?;
            let cfg = self.cfg.train_config(
                self.sub_seed(repetition, "surrogate"),
                self.cfg.experiment.surrogate_epochs,
                self.cfg.experiment.surrogate_epochs,
            );
            Ok(data_pretrain_surrogate(self.fresh_model(repetition)?, source, &cfg)?.0)
        })
    }

    /// Model after the scheme's pre-training phase; `None` for schemes
    /// without one.
    pub fn pretrained(
        &self,
        scheme: Scheme,
        count: Option<usize>,
        fraction: f64,
        repetition: usize,
        subset: &LabeledDataset,
    ) -> Result<Option<LayeredModel<f32>>> {
        if scheme == Scheme::DataSurrogate {
            return self.surrogate_model(repetition).map(Some);
        }
        let Some(protos) = self.pretrain_set(scheme, count, repetition, subset)? else {
            return Ok(None);
        };
        let n = protos.per_class_count();
        let key = match scheme {
            Scheme::Knowledge | Scheme::KnowledgeAug | Scheme::PretrainPlusConcurrent => format!("knowledge/n{n}/r{repetition}"),
            Scheme::DataPlusKnowledge => format!("data_plus_knowledge/n{n}/r{repetition}"),
            _ => format!("{scheme}/n{n}/f{fraction}/r{repetition}"),
        };
        let pcfg = self.cfg.pretrain_config(self.sub_seed(repetition, "pretrain"));
        self.cached(key, || {
            let start = if scheme == Scheme::DataPlusKnowledge {
                self.surrogate_model(repetition)?
            } else {
                self.fresh_model(repetition)?
            };
            Ok(pretrain(start, &protos, &pcfg)?.model)
        })
        .map(Some)
    }

    /// Fine-tunes `model` on the run's subset with the scheme's stream.
    pub fn train_model(&self, spec: &RunSpec, model: LayeredModel<f32>) -> Result<(LayeredModel<f32>, TrainingCurve)> {
        let data = self.rep_data(spec.fraction, spec.repetition)?;
        self.finetune_from(spec, model, &data)
    }

    fn finetune_from(
        &self,
        spec: &RunSpec,
        model: LayeredModel<f32>,
        data: &RepData,
    ) -> Result<(LayeredModel<f32>, TrainingCurve)> {
        let cfg = self.cfg.train_config(self.sub_seed(spec.repetition, "train"), spec.epochs, spec.val_every);
        Ok(match spec.scheme {
            Scheme::Concurrent | Scheme::PretrainPlusConcurrent => {
                let mix = MixConfig {
                    prototype_weight: self.cfg.experiment.prototype_weight,
                };
                informed_concurrent(model, &data.subset, &data.val, &self.ctx.prototypes, &mix, &cfg)?
            }
            _ => finetune(model, &data.subset, &data.val, &cfg)?,
        })
    }

    /// Evaluates a finished run into its record, saving the checkpoint when
    /// configured.
    pub fn score(&self, spec: &RunSpec, started: Instant, outcome: Result<(LayeredModel<f32>, TrainingCurve)>) -> RunRecord {
        let mut rec = RunRecord {
            label: spec.label.clone(),
            scheme: spec.scheme,
            fraction: spec.fraction,
            repetition: spec.repetition,
            seed: self.rep_seed(spec.repetition),
            test_accuracy: f64::NAN,
            ood_accuracy: None,
            wallclock_s: None,
            config_hash: self.hash.clone(),
            curve: None,
            curve_ref: None,
            checkpoint: None,
            error: None,
        };
        let scored = outcome.and_then(|(model, curve)| {
            let test = evaluate(&model, &self.ctx.test)?;
            let ood = self.ctx.ood.as_ref().map(|d| evaluate(&model, d)).transpose()?;
            let ckpt = match (&self.out, self.cfg.experiment.keep_checkpoints) {
                (Some(out), true) => {
                    let path = self.checkpoint_path(out, &spec.label, spec.fraction, spec.repetition);
                    let dir = path.parent().expect("checkpoint dir");
                    std::fs::create_dir_all(dir).map_err(io_err(dir))?;
                    save_tagged_checkpoint(&path, &model, &spec.label, &self.hash)?;
                    Some(path)
                }
                _ => None,
            };
            Ok((test, ood, curve, ckpt))
        });
        match scored {
            Ok((test, ood, curve, ckpt)) => {
                rec.test_accuracy = test;
                rec.ood_accuracy = ood;
                rec.curve = Some(curve);
                rec.checkpoint = ckpt;
            }
            Err(e) => rec.error = Some(e.to_string()),
        }
        if self.cfg.experiment.record_wallclock {
            rec.wallclock_s = Some(started.elapsed().as_secs_f64());
        }
        rec
    }

    /// Executes one run; failures are captured in the record.
    pub fn run(&self, spec: &RunSpec) -> RunRecord {
        let started = Instant::now();
        let outcome = (|| {
            let data = self.rep_data(spec.fraction, spec.repetition)?;
            let pre = self.pretrained(spec.scheme, spec.count, spec.fraction, spec.repetition, &data.subset)?;
            let model = match (pre, spec.truncate_k) {
                (None, _) => self.fresh_model(spec.repetition)?,
                (Some(p), None) => p,
                (Some(p), Some(k)) => self.truncated(&p, k, spec.repetition)?,
            };
            self.finetune_from(spec, model, &data)
        })();
        self.score(spec, started, outcome)
    }

    /// `truncate_transfer` with the repetition's initialization seed.
    pub fn truncated(&self, pretrained: &LayeredModel<f32>, k: usize, repetition: usize) -> Result<LayeredModel<f32>> {
        Ok(truncate_transfer(pretrained, k, &self.cfg.init_scheme(self.sub_seed(repetition, "init")))?)
    }

    /// Fine-tunes a given initial model on the run's subset; the scheme's own
    /// pre-training phase is skipped.
    pub fn run_with_model(&self, spec: &RunSpec, model: LayeredModel<f32>) -> RunRecord {
        let started = Instant::now();
        let outcome = self.train_model(spec, model);
        self.score(spec, started, outcome)
    }

    /// Executes runs on the worker pool; records come back in `specs` order.
    pub fn run_all(&self, specs: &[RunSpec]) -> Vec<RunRecord> {
        self.pool.install(|| specs.par_iter().map(|s| self.run(s)).collect())
    }
}
