//! Aggregation of run records into (scheme, fraction) cells.

use serde::{Deserialize, Serialize};

use crate::error::{ExpError, Result};
use crate::record::RunRecord;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Metric {
    Test,
    Ood,
}

impl Metric {
    pub fn as_str(self) -> &'static str {
        match self {
            Metric::Test => "test_accuracy",
            Metric::Ood => "ood_accuracy",
        }
    }

    fn of(self, r: &RunRecord) -> Option<f64> {
        if r.failed() {
            return Some(f64::NAN);
        }
        match self {
            Metric::Test => Some(r.test_accuracy),
            Metric::Ood => r.ood_accuracy,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricsRow {
    pub scheme: String,
    pub fraction: f64,
    pub mean: f64,
    /// Sample standard deviation; 0 for a single value.
    pub std: f64,
    /// Completed runs.
    pub n: usize,
    pub failed: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct MetricsTable {
    pub metric: Metric,
    pub rows: Vec<MetricsRow>,
}

/// Rounds to the 6 decimals the tables carry.
pub fn round6(v: f64) -> f64 {
    if v.is_finite() {
        format!("{v:.6}").parse().expect("formatted float parses")
    } else {
        v
    }
}

/// Mean and sample standard deviation, two passes.
pub fn mean_std(values: &[f64]) -> (f64, f64) {
    let n = values.len();
    if n == 0 {
        return (f64::NAN, f64::NAN);
    }
    let mean = values.iter().sum::<f64>() / n as f64;
    if n == 1 {
        return (mean, 0.0);
    }
    let ss: f64 = values.iter().map(|v| (v - mean) * (v - mean)).sum();
    (mean, (ss / (n - 1) as f64).sqrt())
}

impl MetricsTable {
    /// One row per distinct (label, fraction), in order of first appearance.
    /// Failed runs count in `failed` and are excluded from mean and std.
    pub fn from_records(records: &[RunRecord], metric: Metric) -> MetricsTable {
        let mut keys: Vec<(String, f64)> = Vec::new();
        let mut values: Vec<(Vec<f64>, usize)> = Vec::new();
        for r in records {
            let Some(v) = metric.of(r) else { continue };
            let i = match keys.iter().position(|(s, f)| *s == r.label && *f == r.fraction) {
                Some(i) => i,
                None => {
                    keys.push((r.label.clone(), r.fraction));
                    values.push((Vec::new(), 0));
                    keys.len() - 1
                }
            };
            if v.is_nan() {
                values[i].1 += 1;
            } else {
                values[i].0.push(v);
            }
        }
        let rows = keys
            .into_iter()
            .zip(values)
            .map(|((scheme, fraction), (vals, failed))| {
                let (mean, std) = mean_std(&vals);
                MetricsRow {
                    scheme,
                    fraction,
                    mean: round6(mean),
                    std: round6(std),
                    n: vals.len(),
                    failed,
                }
            })
            .collect();
        MetricsTable { metric, rows }
    }

    /// Same rows relabelled as another metric.
    pub fn with_metric(mut self, metric: Metric) -> MetricsTable {
        self.metric = metric;
        self
    }

    pub fn get(&self, scheme: &str, fraction: f64) -> Option<&MetricsRow> {
        self.rows.iter().find(|r| r.scheme == scheme && r.fraction == fraction)
    }

    pub fn mean(&self, scheme: &str, fraction: f64) -> Option<f64> {
        self.get(scheme, fraction).map(|r| r.mean)
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn to_csv(&self) -> Result<String> {
        let mut out = format!(
            "{}\n# metric: {}\n# std: sample (n-1)\n",
            crate::record::CSV_VERSION_LINE,
            self.metric.as_str()
        );
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(["scheme", "fraction", "mean", "std", "n", "failed"])
            .map_err(|e| ExpError::Csv(e.to_string()))?;
        for r in &self.rows {
            w.write_record([
                r.scheme.clone(),
                r.fraction.to_string(),
                format!("{:.6}", r.mean),
                format!("{:.6}", r.std),
                r.n.to_string(),
                r.failed.to_string(),
            ])
            .map_err(|e| ExpError::Csv(e.to_string()))?;
        }
        let body = w.into_inner().map_err(|e| ExpError::Csv(e.to_string()))?;
        out.push_str(&String::from_utf8(body).map_err(|e| ExpError::Csv(e.to_string()))?);
        Ok(out)
    }

    pub fn from_csv(text: &str) -> Result<MetricsTable> {
        let metric = if text.lines().any(|l| l == "# metric: ood_accuracy") {
            Metric::Ood
        } else {
            Metric::Test
        };
        let mut rdr = csv::ReaderBuilder::new().comment(Some(b'#')).from_reader(text.as_bytes());
        let rows = rdr
            .deserialize::<MetricsRow>()
            .collect::<std::result::Result<Vec<_>, _>>()
            .map_err(|e| ExpError::Csv(e.to_string()))?;
        Ok(MetricsTable { metric, rows })
    }
}

/// Mean accuracy per truncation depth `k = 0..=layers` for one scheme of a
/// layer sweep (rows labelled `<scheme>@k<k>`).
pub fn accuracy_by_depth(table: &MetricsTable, scheme: &str, layers: usize) -> Option<Vec<f64>> {
    (0..=layers)
        .map(|k| table.rows.iter().find(|r| r.scheme == format!("{scheme}@k{k}")).map(|r| r.mean))
        .collect()
}

/// `Δ(k) = acc(k) − acc(k−1)` for `k = 1..=L`.
pub fn layer_gains(acc: &[f64]) -> Vec<f64> {
    acc.windows(2).map(|w| w[1] - w[0]).collect()
}

/// Summed gains over the earlier `⌊L/2⌋` layers and over the remaining later ones.
pub fn half_gains(acc: &[f64]) -> (f64, f64) {
    let gains = layer_gains(acc);
    let half = gains.len() / 2;
    (gains[..half].iter().sum(), gains[half..].iter().sum())
}
