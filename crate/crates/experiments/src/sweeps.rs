use std::path::Path;

use ipkp_data::LabeledDataset;
use ipkp_nn::load_checkpoint;
use ipkp_training::evaluate;

use crate::config::Config;
use crate::error::{ExpError, Result};
use crate::metrics::{Metric, MetricsTable};
use crate::record::RunRecord;
use crate::runner::{Experiment, RunSpec};
use crate::scheme::Scheme;

/// Parameterized layers of LeNet-5.
pub const LENET5_PARAM_LAYERS: usize = 5;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SweepKind {
    /// Schemes × training-set fractions.
    Size,
    /// Per-class prototype counts at a fixed fraction.
    Augment,
    /// Truncation depth `k = 0..=L` at a fixed fraction.
    Layers,
    /// Pre-training versus concurrent use of the prototypes.
    Informed,
}

impl SweepKind {
    pub fn as_str(self) -> &'static str {
        match self {
            SweepKind::Size => "size",
            SweepKind::Augment => "augment",
            SweepKind::Layers => "layers",
            SweepKind::Informed => "informed",
        }
    }

    /// Schemes the sweep runs under `cfg`.
    pub fn schemes(self, cfg: &Config) -> Result<Vec<Scheme>> {
        match self {
            SweepKind::Size => cfg.schemes(),
            SweepKind::Augment => cfg.augment_schemes(),
            SweepKind::Layers => cfg.layer_schemes(),
            SweepKind::Informed => cfg.informed_schemes(),
        }
    }
}

#[derive(Clone, Debug)]
pub struct SweepResult {
    pub kind: SweepKind,
    pub records: Vec<RunRecord>,
    pub test: MetricsTable,
    /// Present when an out-of-distribution test set was evaluated.
    pub ood: Option<MetricsTable>,
}

impl SweepResult {
    pub fn new(kind: SweepKind, records: Vec<RunRecord>) -> SweepResult {
        let test = MetricsTable::from_records(&records, Metric::Test);
        let ood = MetricsTable::from_records(&records, Metric::Ood);
        SweepResult {
            kind,
            records,
            test,
            ood: (!ood.is_empty()).then_some(ood),
        }
    }

    pub fn failed(&self) -> usize {
        self.records.iter().filter(|r| r.failed()).count()
    }
}

fn spec(scheme: Scheme, label: String, fraction: f64, repetition: usize, base_epochs: usize) -> RunSpec {
    RunSpec {
        label,
        ..RunSpec::standard(scheme, fraction, repetition, base_epochs)
    }
}

impl Experiment {
    /// Every (scheme, fraction, repetition) of `schemes × experiment.fractions`.
    pub fn size_specs(&self, schemes: &[Scheme]) -> Vec<RunSpec> {
        let e = &self.cfg.experiment;
        let mut out = Vec::new();
        for &s in schemes {
            for &f in &e.fractions {
                for r in 0..e.repetitions {
                    out.push(spec(s, s.to_string(), f, r, self.cfg.train.epochs));
                }
            }
        }
        out
    }

    /// Labels `<scheme>@n<count>` at `experiment.augment_fraction`.
    pub fn augment_specs(&self, schemes: &[Scheme]) -> Vec<RunSpec> {
        let e = &self.cfg.experiment;
        let mut out = Vec::new();
        for &s in schemes {
            for &n in &e.augment_counts {
                for r in 0..e.repetitions {
                    let mut sp = spec(s, format!("{s}@n{n}"), e.augment_fraction, r, self.cfg.train.epochs);
                    sp.count = Some(n);
                    out.push(sp);
                }
            }
        }
        out
    }

    /// Labels `<scheme>@k<k>` at `experiment.layer_fraction`, trained for the
    /// first full-data-equivalent epoch, `scaled_epochs(1, fraction)`.
    pub fn layer_specs(&self, schemes: &[Scheme]) -> Vec<RunSpec> {
        let e = &self.cfg.experiment;
        let f = e.layer_fraction;
        let mut out = Vec::new();
        for &s in schemes {
            for k in 0..=LENET5_PARAM_LAYERS {
                for r in 0..e.repetitions {
                    let mut sp = spec(s, format!("{s}@k{k}"), f, r, 1);
                    sp.truncate_k = Some(k);
                    out.push(sp);
                }
            }
        }
        out
    }

    pub fn specs(&self, kind: SweepKind) -> Result<Vec<RunSpec>> {
        let schemes = kind.schemes(&self.cfg)?;
        Ok(match kind {
            SweepKind::Size | SweepKind::Informed => self.size_specs(&schemes),
            SweepKind::Augment => self.augment_specs(&schemes),
            SweepKind::Layers => self.layer_specs(&schemes),
        })
    }

    pub fn run_sweep(&self, kind: SweepKind) -> Result<SweepResult> {
        Ok(SweepResult::new(kind, self.run_all(&self.specs(kind)?)))
    }

    pub fn run_size_sweep(&self) -> Result<SweepResult> {
        self.run_sweep(SweepKind::Size)
    }

    pub fn run_augmentation_sweep(&self) -> Result<SweepResult> {
        self.run_sweep(SweepKind::Augment)
    }

    pub fn run_layer_sweep(&self) -> Result<SweepResult> {
        self.run_sweep(SweepKind::Layers)
    }

    pub fn run_informed_sweep(&self) -> Result<SweepResult> {
        self.run_sweep(SweepKind::Informed)
    }
}

/// Re-evaluates every record's retained final model on `ood`.
///
/// Records whose checkpoint is missing or unreadable get `ood_accuracy = NaN`
/// and a matching entry in the returned error list.
pub fn run_ood_eval(records: &[RunRecord], ood: &LabeledDataset, out: Option<&Path>) -> (Vec<RunRecord>, MetricsTable, Vec<String>) {
    let mut errors = Vec::new();
    let evaluated: Vec<RunRecord> = records
        .iter()
        .map(|r| {
            let mut r = r.clone();
            if r.failed() {
                return r;
            }
            let path = r
                .checkpoint
                .clone()
                .or_else(|| out.map(|o| o.join("checkpoints").join(format!("{}.ipkp", r.stem()))));
            let acc = match path {
                Some(p) if p.is_file() => load_checkpoint(&p)
                    .map_err(ExpError::from)
                    .and_then(|c| Ok(evaluate(&c.model, ood)?)),
                _ => Err(ExpError::MissingCheckpoint(r.stem())),
            };
            r.ood_accuracy = Some(acc.unwrap_or_else(|e| {
                errors.push(format!("{}: {e}", r.stem()));
                f64::NAN
            }));
            r
        })
        .collect();
    let table = MetricsTable::from_records(&evaluated, Metric::Ood);
    (evaluated, table, errors)
}
