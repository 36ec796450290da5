//! Report directory: results and table CSVs, per-run curves, failure log and
//! SVG charts.

use std::path::{Path, PathBuf};

use crate::chart::{BarPanel, LineChart, Series};
use crate::error::{io_err, Result};
use crate::metrics::{accuracy_by_depth, layer_gains, MetricsTable};
use crate::record::{records_to_csv, RunRecord};
use crate::sweeps::{SweepKind, SweepResult, LENET5_PARAM_LAYERS};

const MAX_CURVE_POINTS: usize = 400;

fn write(path: &Path, text: &str, written: &mut Vec<PathBuf>) -> Result<()> {
    std::fs::write(path, text).map_err(io_err(path))?;
    written.push(path.to_path_buf());
    Ok(())
}

/// Window means of `v` down to at most `MAX_CURVE_POINTS` points at 1-based positions.
fn downsample(v: &[f32]) -> Vec<(f64, f64)> {
    let w = v.len().div_ceil(MAX_CURVE_POINTS).max(1);
    v.chunks(w)
        .enumerate()
        .map(|(i, c)| {
            let mean = c.iter().map(|&x| x as f64).sum::<f64>() / c.len() as f64;
            ((i * w + c.len()) as f64, mean)
        })
        .collect()
}

/// Iteration loss of the first repetition of every (label, fraction).
pub fn loss_chart(records: &[RunRecord]) -> Option<LineChart> {
    let mut series: Vec<Series> = Vec::new();
    let mut seen: Vec<(String, f64)> = Vec::new();
    for r in records {
        let Some(curve) = r.curve.as_ref().filter(|c| !c.iteration_loss.is_empty()) else { continue };
        if seen.iter().any(|(l, f)| *l == r.label && *f == r.fraction) {
            continue;
        }
        seen.push((r.label.clone(), r.fraction));
        series.push(Series {
            name: format!("{} f={}", r.label, r.fraction),
            points: downsample(&curve.iteration_loss),
            err: Vec::new(),
        });
    }
    (!series.is_empty()).then(|| LineChart {
        title: "Training loss (first repetition)".into(),
        x_label: "iteration".into(),
        y_label: "loss".into(),
        series,
        ..Default::default()
    })
}

fn base_label(label: &str) -> &str {
    label.split('@').next().unwrap_or(label)
}

fn grouped(table: &MetricsTable, x_of: impl Fn(&str, f64) -> Option<f64>) -> Vec<Series> {
    let mut out: Vec<Series> = Vec::new();
    for row in &table.rows {
        let Some(x) = x_of(&row.scheme, row.fraction) else { continue };
        let name = base_label(&row.scheme);
        let idx = match out.iter().position(|s| s.name == name) {
            Some(i) => i,
            None => {
                out.push(Series {
                    name: name.into(),
                    ..Default::default()
                });
                out.len() - 1
            }
        };
        out[idx].points.push((x, row.mean));
        out[idx].err.push(row.std);
    }
    out
}

fn suffix_value(label: &str, tag: char) -> Option<f64> {
    label.split_once('@')?.1.strip_prefix(tag)?.parse().ok()
}

pub fn accuracy_chart(kind: SweepKind, table: &MetricsTable) -> LineChart {
    let metric = table.metric.as_str().replace('_', " ");
    match kind {
        SweepKind::Size | SweepKind::Informed => LineChart {
            title: format!("{metric} vs training fraction"),
            x_label: "fraction of training data".into(),
            y_label: metric,
            log_x: true,
            series: grouped(table, |_, f| Some(f)),
            bars: None,
        },
        SweepKind::Augment => LineChart {
            title: format!("{metric} vs prototypes per class"),
            x_label: "prototypes per class".into(),
            y_label: metric,
            log_x: true,
            series: grouped(table, |l, _| suffix_value(l, 'n')),
            bars: None,
        },
        SweepKind::Layers => {
            let series = grouped(table, |l, _| suffix_value(l, 'k'));
            let values = series
                .iter()
                .map(|s| accuracy_by_depth(table, &s.name, LENET5_PARAM_LAYERS).map(|a| layer_gains(&a)).unwrap_or_default())
                .collect();
            LineChart {
                title: format!("{metric} vs transferred layers k"),
                x_label: "k".into(),
                y_label: metric,
                log_x: false,
                series,
                bars: Some(BarPanel {
                    title: "gain Δ(k)".into(),
                    categories: (1..=LENET5_PARAM_LAYERS).map(|k| k.to_string()).collect(),
                    values,
                }),
            }
        }
    }
}

fn chart_name(kind: SweepKind) -> &'static str {
    match kind {
        SweepKind::Size | SweepKind::Informed => "accuracy_vs_fraction",
        SweepKind::Augment => "accuracy_vs_count",
        SweepKind::Layers => "accuracy_vs_k",
    }
}

/// Writes the report for one sweep into `outdir` and returns the files written.
///
/// Charts are emitted only when at least one record carries a curve.
pub fn emit_report(result: &SweepResult, outdir: &Path, meta: &[String]) -> Result<Vec<PathBuf>> {
    std::fs::create_dir_all(outdir).map_err(io_err(outdir))?;
    let mut written = Vec::new();
    let mut meta = meta.to_vec();
    meta.insert(0, format!("kind: {}", result.kind.as_str()));
    write(&outdir.join("results.csv"), &records_to_csv(&result.records, &meta)?, &mut written)?;
    write(&outdir.join("table_test_accuracy.csv"), &result.test.to_csv()?, &mut written)?;
    if let Some(ood) = &result.ood {
        write(&outdir.join("table_ood_accuracy.csv"), &ood.to_csv()?, &mut written)?;
    }
    let failures: String = result
        .records
        .iter()
        .filter_map(|r| r.error.as_ref().map(|e| format!("{}: {e}\n", r.stem())))
        .collect();
    if !failures.is_empty() {
        write(&outdir.join("failures.log"), &failures, &mut written)?;
    }
    let with_curves: Vec<&RunRecord> = result.records.iter().filter(|r| r.curve.is_some()).collect();
    if with_curves.is_empty() {
        return Ok(written);
    }
    let curves = outdir.join("curves");
    std::fs::create_dir_all(&curves).map_err(io_err(&curves))?;
    for r in &with_curves {
        let c = r.curve.as_ref().expect("filtered");
        write(&curves.join(format!("{}_loss.csv", r.stem())), &c.loss_csv(), &mut written)?;
        write(&curves.join(format!("{}_val.csv", r.stem())), &c.val_csv(), &mut written)?;
    }
    if let Some(chart) = loss_chart(&result.records) {
        write(&outdir.join("loss_curves.svg"), &chart.render(), &mut written)?;
    }
    let name = chart_name(result.kind);
    write(&outdir.join(format!("{name}.svg")), &accuracy_chart(result.kind, &result.test).render(), &mut written)?;
    if let Some(ood) = &result.ood {
        write(
            &outdir.join(format!("{name}_ood.svg")),
            &accuracy_chart(result.kind, ood).render(),
            &mut written,
        )?;
    }
    Ok(written)
}
