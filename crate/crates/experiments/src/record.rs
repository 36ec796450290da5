//! Per-run results and the results CSV
//! `scheme,fraction,repetition,seed,test_accuracy,ood_accuracy,wallclock_s,config_hash`.

use std::path::PathBuf;

use ipkp_training::TrainingCurve;
use serde::{Deserialize, Serialize};

use crate::error::{ExpError, Result};
use crate::scheme::Scheme;

/// Outcome of one (scheme, fraction, repetition) run.
#[derive(Clone, Debug)]
pub struct RunRecord {
    /// Scheme name, optionally suffixed `@n<count>` or `@k<depth>` by sweeps.
    pub label: String,
    pub scheme: Scheme,
    pub fraction: f64,
    pub repetition: usize,
    /// Repetition seed all sub-seeds derive from.
    pub seed: u64,
    /// NaN when the run failed.
    pub test_accuracy: f64,
    pub ood_accuracy: Option<f64>,
    pub wallclock_s: Option<f64>,
    pub config_hash: String,
    pub curve: Option<TrainingCurve>,
    /// Stem of the curve CSV files, relative to the report directory.
    pub curve_ref: Option<String>,
    pub checkpoint: Option<PathBuf>,
    pub error: Option<String>,
}

impl RunRecord {
    pub fn failed(&self) -> bool {
        self.error.is_some() || self.test_accuracy.is_nan()
    }

    /// File-name stem unique within a sweep, e.g. `knowledge@k3_f0.01_r2`.
    pub fn stem(&self) -> String {
        format!("{}_f{}_r{}", self.label, self.fraction, self.repetition)
    }
}

#[derive(Serialize, Deserialize)]
struct Row {
    scheme: String,
    fraction: f64,
    repetition: usize,
    seed: u64,
    test_accuracy: f64,
    ood_accuracy: Option<f64>,
    wallclock_s: Option<f64>,
    config_hash: String,
}

pub const CSV_VERSION_LINE: &str = concat!("# ipkp-experiments ", env!("CARGO_PKG_VERSION"));

fn csv_err(e: impl std::fmt::Display) -> ExpError {
    ExpError::Csv(e.to_string())
}

/// Emits the results CSV; `meta` lines are added to the `#` header.
pub fn records_to_csv(records: &[RunRecord], meta: &[String]) -> Result<String> {
    let mut out = format!("{CSV_VERSION_LINE}\n# std: sample (n-1)\n# failed runs: test_accuracy = NaN\n");
    for m in meta {
        out.push_str(&format!("# {m}\n"));
    }
    let mut w = csv::Writer::from_writer(Vec::new());
    for r in records {
        w.serialize(Row {
            scheme: r.label.clone(),
            fraction: r.fraction,
            repetition: r.repetition,
            seed: r.seed,
            test_accuracy: r.test_accuracy,
            ood_accuracy: r.ood_accuracy,
            wallclock_s: r.wallclock_s,
            config_hash: r.config_hash.clone(),
        })
        .map_err(csv_err)?;
    }
    if records.is_empty() {
        w.write_record(["scheme", "fraction", "repetition", "seed", "test_accuracy", "ood_accuracy", "wallclock_s", "config_hash"])
            .map_err(csv_err)?;
    }
    out.push_str(&String::from_utf8(w.into_inner().map_err(csv_err)?).map_err(csv_err)?);
    Ok(out)
}

/// Parses a results CSV; curves, checkpoints and error texts are not part of it.
pub fn records_from_csv(text: &str) -> Result<Vec<RunRecord>> {
    let mut rdr = csv::ReaderBuilder::new().comment(Some(b'#')).from_reader(text.as_bytes());
    let mut out = Vec::new();
    for row in rdr.deserialize::<Row>() {
        let row = row.map_err(csv_err)?;
        let scheme = row.scheme.split('@').next().unwrap_or_default().parse()?;
        out.push(RunRecord {
            label: row.scheme,
            scheme,
            fraction: row.fraction,
            repetition: row.repetition,
            seed: row.seed,
            test_accuracy: row.test_accuracy,
            ood_accuracy: row.ood_accuracy,
            wallclock_s: row.wallclock_s,
            config_hash: row.config_hash,
            curve: None,
            curve_ref: None,
            checkpoint: None,
            error: row.test_accuracy.is_nan().then(|| "failed".to_string()),
        });
    }
    Ok(out)
}
