use ipkp_experiments::metrics::round6;
use ipkp_experiments::{records_from_csv, records_to_csv, Metric, MetricsTable, RunRecord, Scheme};
use proptest::prelude::*;

fn record(scheme: Scheme, fraction: f64, repetition: usize, acc: f64) -> RunRecord {
    RunRecord {
        label: scheme.to_string(),
        scheme,
        fraction,
        repetition,
        seed: repetition as u64 * 7919,
        test_accuracy: acc,
        ood_accuracy: None,
        wallclock_s: None,
        config_hash: "abc123".into(),
        curve: None,
        curve_ref: None,
        checkpoint: None,
        error: acc.is_nan().then(|| "diverged".into()),
    }
}

/// Welford single-pass mean and sample standard deviation.
fn welford(values: impl Iterator<Item = f64>) -> (usize, f64, f64) {
    let (mut n, mut mean, mut m2) = (0usize, 0.0f64, 0.0f64);
    for x in values {
        n += 1;
        let d = x - mean;
        mean += d / n as f64;
        m2 += d * (x - mean);
    }
    let std = if n > 1 { (m2 / (n - 1) as f64).sqrt() } else { 0.0 };
    (n, mean, std)
}

/// Equal once rounded to the 6 emitted decimals; a reference lying within
/// 1e-9 of a rounding tie may round either way.
fn same_at_6(emitted: f64, reference: f64) -> bool {
    if emitted == round6(reference) {
        return true;
    }
    let scaled = reference * 1e6;
    ((scaled - scaled.floor()) - 0.5).abs() < 1e-9 * 1e6 && (emitted - reference).abs() <= 5e-7 + 1e-9
}

fn arb_records() -> impl Strategy<Value = Vec<RunRecord>> {
    let cell = (0usize..4, 0usize..3, prop::collection::vec(prop_oneof![9 => (0u32..=10_000).prop_map(|k| k as f64 / 10_000.0), 1 => Just(f64::NAN)], 1..12));
    prop::collection::vec(cell, 1..6).prop_map(|cells| {
        let schemes = [Scheme::None, Scheme::Knowledge, Scheme::KnowledgeAug, Scheme::Sample];
        let fractions = [1.0, 0.1, 0.001];
        let mut out = Vec::new();
        for (s, f, accs) in cells {
            if out.iter().any(|r: &RunRecord| r.scheme == schemes[s] && r.fraction == fractions[f]) {
                continue;
            }
            for (rep, a) in accs.into_iter().enumerate() {
                out.push(record(schemes[s], fractions[f], rep, a));
            }
        }
        out
    })
}

proptest! {
    #[test]
    fn aggregation_matches_single_pass_reference(records in arb_records()) {
        let table = MetricsTable::from_records(&records, Metric::Test);
        for row in &table.rows {
            let cell: Vec<&RunRecord> = records.iter().filter(|r| r.label == row.scheme && r.fraction == row.fraction).collect();
            let (n, mean, std) = welford(cell.iter().map(|r| r.test_accuracy).filter(|a| !a.is_nan()));
            prop_assert_eq!(row.n, n);
            prop_assert_eq!(row.failed, cell.len() - n);
            prop_assert!(row.std >= 0.0 || n == 0);
            if n > 0 {
                prop_assert!(same_at_6(row.mean, mean), "mean {} vs {}", row.mean, mean);
                prop_assert!(same_at_6(row.std, std), "std {} vs {}", row.std, std);
            } else {
                prop_assert!(row.mean.is_nan());
            }
        }
        let cells: std::collections::HashSet<(String, u64)> = records.iter().map(|r| (r.label.clone(), r.fraction.to_bits())).collect();
        prop_assert_eq!(table.rows.len(), cells.len());
    }

    #[test]
    fn table_csv_round_trips(records in arb_records()) {
        let table = MetricsTable::from_records(&records, Metric::Test);
        let text = table.to_csv().unwrap();
        let back = MetricsTable::from_csv(&text).unwrap();
        prop_assert_eq!(back.rows.len(), table.rows.len());
        for (a, b) in table.rows.iter().zip(&back.rows) {
            prop_assert_eq!(&a.scheme, &b.scheme);
            prop_assert_eq!(a.fraction, b.fraction);
            prop_assert!(a.mean == b.mean || (a.mean.is_nan() && b.mean.is_nan()));
            prop_assert!(a.std == b.std || (a.std.is_nan() && b.std.is_nan()));
            prop_assert_eq!((a.n, a.failed), (b.n, b.failed));
        }
        prop_assert_eq!(back.to_csv().unwrap(), text);
    }

    #[test]
    fn results_csv_round_trips(records in arb_records(), meta in "[a-z ]{0,20}") {
        let text = records_to_csv(&records, &[meta]).unwrap();
        let back = records_from_csv(&text).unwrap();
        prop_assert_eq!(back.len(), records.len());
        for (a, b) in records.iter().zip(&back) {
            prop_assert_eq!(&a.label, &b.label);
            prop_assert_eq!(a.scheme, b.scheme);
            prop_assert_eq!(a.repetition, b.repetition);
            prop_assert_eq!(a.seed, b.seed);
            prop_assert_eq!(a.failed(), b.failed());
            prop_assert!(a.test_accuracy == b.test_accuracy || a.failed());
        }
        prop_assert_eq!(records_to_csv(&back, &[]).unwrap(), records_to_csv(&records, &[]).unwrap());
    }
}

#[test]
fn ood_table_ignores_records_without_ood() {
    let mut a = record(Scheme::None, 1.0, 0, 0.9);
    a.ood_accuracy = Some(0.7);
    let b = record(Scheme::None, 1.0, 1, 0.8);
    let t = MetricsTable::from_records(&[a, b], Metric::Ood);
    assert_eq!(t.rows.len(), 1);
    assert_eq!((t.rows[0].n, t.rows[0].mean), (1, 0.7));
    assert!(MetricsTable::from_csv(&t.to_csv().unwrap()).unwrap().metric == Metric::Ood);
}
