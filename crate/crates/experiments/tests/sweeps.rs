mod common;

use ipkp_experiments::{
    emit_report, records_to_csv, run_ood_eval, Experiment, Metric, MetricsTable, RunSpec, Scheme, SweepKind,
    SweepResult, LENET5_PARAM_LAYERS,
};
use ipkp_training::{evaluate, finetune};

fn experiment(extra: &str, jobs: usize) -> Experiment {
    Experiment::new(common::config(extra), common::context(), jobs, None).unwrap()
}

#[test]
fn degenerate_plan_is_one_standard_training_run() {
    let exp = experiment("[experiment]\nschemes = [\"none\"]\nfractions = [1.0]\nrepetitions = 1", 1);
    let res = exp.run_size_sweep().unwrap();
    assert_eq!(res.records.len(), 1);
    assert_eq!(res.test.rows.len(), 1);
    let row = &res.test.rows[0];
    assert_eq!((row.n, row.failed, row.std), (1, 0, 0.0));

    let (subset, val) = exp.subset_and_val(1.0, 0).unwrap();
    assert_eq!(subset.len() + val.len(), exp.ctx.pool.len());
    let seed = ipkp_nn::rng::derive_seed(exp.rep_seed(0), "train");
    let cfg = exp.cfg.train_config(seed, exp.cfg.train.epochs, 1);
    let (model, curve) = finetune(exp.fresh_model(0).unwrap(), &subset, &val, &cfg).unwrap();
    assert_eq!(evaluate(&model, &exp.ctx.test).unwrap(), res.records[0].test_accuracy);
    assert_eq!(Some(&curve), res.records[0].curve.as_ref());
}

#[test]
fn table_has_one_cell_per_scheme_and_fraction() {
    let exp = experiment("[experiment]\nschemes = [\"none\", \"knowledge\", \"mean_image\"]", 1);
    let res = exp.run_size_sweep().unwrap();
    assert_eq!(res.records.len(), 3 * 2 * 2);
    assert_eq!(res.test.rows.len(), 3 * 2);
    assert!(res.test.rows.iter().all(|r| r.n == 2 && r.failed == 0 && r.std >= 0.0));
    assert!(res.records.iter().all(|r| (0.0..=1.0).contains(&r.test_accuracy)));
    assert_eq!(res.ood.as_ref().unwrap().rows.len(), 6);
}

#[test]
fn repetitions_are_independent_of_each_other_and_of_parallelism() {
    let extra = "[experiment]\nschemes = [\"none\", \"sample_aug\"]\nfractions = [0.5]\nrepetitions = 3";
    let serial = experiment(extra, 1);
    let all = serial.run_all(&serial.size_specs(&[Scheme::None, Scheme::SampleAug]));
    let parallel = experiment(extra, 3).run_size_sweep().unwrap();
    assert_eq!(
        records_to_csv(&all, &[]).unwrap(),
        records_to_csv(&parallel.records, &[]).unwrap()
    );
    let alone = experiment(extra, 1);
    let spec = RunSpec::standard(Scheme::SampleAug, 0.5, 2, alone.cfg.train.epochs);
    let solo = alone.run(&spec);
    let joint = all.iter().find(|r| r.label == "sample_aug" && r.repetition == 2).unwrap();
    assert_eq!(solo.test_accuracy, joint.test_accuracy);
    assert_eq!(solo.curve, joint.curve);
}

#[test]
fn layer_sweep_k0_is_the_fresh_baseline_and_has_l_plus_1_rows() {
    let extra = "[experiment]\nlayer_schemes = [\"knowledge\", \"data_surrogate\"]\nlayer_fraction = 0.5\nrepetitions = 1";
    let exp = experiment(extra, 1);
    let res = exp.run_layer_sweep().unwrap();
    assert_eq!(res.test.rows.len(), 2 * (LENET5_PARAM_LAYERS + 1));
    let baseline = exp.run(&RunSpec::standard(Scheme::None, 0.5, 0, 1));
    for scheme in ["knowledge", "data_surrogate"] {
        let k0 = res.records.iter().find(|r| r.label == format!("{scheme}@k0")).unwrap();
        assert_eq!(k0.test_accuracy, baseline.test_accuracy, "{scheme}");
        assert_eq!(k0.curve, baseline.curve);
    }
    let full = res.records.iter().find(|r| r.label == "knowledge@k5").unwrap();
    let mut spec = RunSpec::standard(Scheme::Knowledge, 0.5, 0, 1);
    spec.label = "knowledge@k5".into();
    assert_eq!(exp.run(&spec).test_accuracy, full.test_accuracy);
}

#[test]
fn augmentation_count_one_matches_unaugmented_scheme() {
    let exp = experiment("[experiment]\naugment_fraction = 1.0\naugment_schemes = [\"knowledge\"]\nrepetitions = 1", 1);
    let res = exp.run_augmentation_sweep().unwrap();
    assert_eq!(res.test.rows.len(), 2);
    let plain = exp.run(&RunSpec::standard(Scheme::Knowledge, 1.0, 0, exp.cfg.train.epochs));
    let aug = exp.run(&RunSpec::standard(Scheme::KnowledgeAug, 1.0, 0, exp.cfg.train.epochs));
    assert_eq!(res.test.mean("knowledge@n1", 1.0).unwrap(), ipkp_experiments::metrics::round6(plain.test_accuracy));
    assert_eq!(res.test.mean("knowledge@n3", 1.0).unwrap(), ipkp_experiments::metrics::round6(aug.test_accuracy));
}

#[test]
fn every_scheme_runs() {
    let exp = experiment("[experiment]\nfractions = [0.5]\nrepetitions = 1", 1);
    let specs: Vec<RunSpec> = Scheme::ALL.iter().map(|&s| RunSpec::standard(s, 0.5, 0, 2)).collect();
    for r in exp.run_all(&specs) {
        assert!(!r.failed(), "{}: {:?}", r.label, r.error);
    }
}

#[test]
fn diverged_runs_become_nan_cells() {
    let exp = experiment("[train]\nlearning_rate = 1e300\n[experiment]\nschemes = [\"none\"]\nfractions = [1.0]", 1);
    let res = exp.run_size_sweep().unwrap();
    assert_eq!(res.failed(), 2);
    let row = &res.test.rows[0];
    assert_eq!((row.n, row.failed), (0, 2));
    assert!(row.mean.is_nan());
    assert!(res.records.iter().all(|r| r.error.as_deref().unwrap().contains("diverged")));
    let dir = tempfile::tempdir().unwrap();
    emit_report(&res, dir.path(), &[]).unwrap();
    let csv = std::fs::read_to_string(dir.path().join("results.csv")).unwrap();
    assert!(csv.contains(",NaN,"));
    assert!(std::fs::read_to_string(dir.path().join("failures.log")).unwrap().lines().count() == 2);
}

#[test]
fn reruns_write_byte_identical_results() {
    let extra = "[experiment]\nschemes = [\"none\", \"knowledge_aug\"]\nfractions = [0.5]";
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    for (dir, jobs) in [(&a, 1), (&b, 2)] {
        let res = experiment(extra, jobs).run_size_sweep().unwrap();
        emit_report(&res, dir.path(), &[]).unwrap();
    }
    for f in ["results.csv", "table_test_accuracy.csv", "accuracy_vs_fraction.svg", "loss_curves.svg"] {
        assert_eq!(
            std::fs::read(a.path().join(f)).unwrap(),
            std::fs::read(b.path().join(f)).unwrap(),
            "{f}"
        );
    }
}

#[test]
fn report_charts_are_standalone_xml() {
    let exp = experiment("[experiment]\nlayer_schemes = [\"knowledge\"]\nlayer_fraction = 0.5\nrepetitions = 1", 1);
    let layers = exp.run_layer_sweep().unwrap();
    let size = experiment("[experiment]\nschemes = [\"none\"]", 1).run_size_sweep().unwrap();
    let dir = tempfile::tempdir().unwrap();
    let mut svgs = Vec::new();
    for (res, sub) in [(&layers, "layers"), (&size, "size")] {
        let files = emit_report(res, &dir.path().join(sub), &["note: test".into()]).unwrap();
        svgs.extend(files.into_iter().filter(|p| p.extension().is_some_and(|e| e == "svg")));
    }
    let names: Vec<String> = svgs.iter().map(|p| p.file_name().unwrap().to_string_lossy().into()).collect();
    for want in ["accuracy_vs_k.svg", "accuracy_vs_fraction.svg", "loss_curves.svg"] {
        assert!(names.iter().any(|n| n == want), "{names:?}");
    }
    for path in &svgs {
        let text = std::fs::read_to_string(path).unwrap();
        let doc = roxmltree::Document::parse(&text).unwrap_or_else(|e| panic!("{}: {e}", path.display()));
        assert_eq!(doc.root_element().tag_name().name(), "svg");
        for node in doc.descendants() {
            for attr in node.attributes() {
                assert!(!attr.name().contains("href"), "{}: external reference", path.display());
            }
        }
        assert!(!text.contains("url("));
    }
}

#[test]
fn report_without_curves_is_table_only() {
    let exp = experiment("[experiment]\nschemes = [\"none\"]\nfractions = [1.0]\nrepetitions = 1", 1);
    let mut res = exp.run_size_sweep().unwrap();
    for r in &mut res.records {
        r.curve = None;
    }
    let res = SweepResult::new(SweepKind::Size, res.records);
    let dir = tempfile::tempdir().unwrap();
    let files = emit_report(&res, dir.path(), &[]).unwrap();
    assert!(files.iter().all(|p| p.extension().unwrap() == "csv"), "{files:?}");
}

#[test]
fn ood_eval_from_checkpoints_matches_inline_evaluation() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = common::config("[experiment]\nschemes = [\"none\", \"knowledge\"]\nfractions = [1.0]\nkeep_checkpoints = true");
    let exp = Experiment::new(cfg, common::context(), 1, Some(dir.path().to_path_buf())).unwrap();
    let res = exp.run_size_sweep().unwrap();
    let ood = exp.ctx.ood.clone().unwrap();
    let (evaluated, table, errors) = run_ood_eval(&res.records, &ood, Some(dir.path()));
    assert!(errors.is_empty(), "{errors:?}");
    for (a, b) in res.records.iter().zip(&evaluated) {
        assert_eq!(b.ood_accuracy, Some(a.test_accuracy));
        assert_eq!(b.ood_accuracy, a.ood_accuracy);
    }
    assert_eq!(table, MetricsTable::from_records(&res.records, Metric::Test).with_metric(Metric::Ood));

    let mut stripped = res.records.clone();
    for r in &mut stripped {
        r.checkpoint = None;
    }
    std::fs::remove_file(exp.checkpoint_path(dir.path(), "none", 1.0, 1)).unwrap();
    let (evaluated, table, errors) = run_ood_eval(&stripped, &ood, Some(dir.path()));
    assert_eq!(errors.len(), 1);
    assert!(errors[0].contains("none_f1_r1"), "{errors:?}");
    assert!(evaluated[1].ood_accuracy.unwrap().is_nan());
    assert_eq!(table.get("none", 1.0).unwrap().failed, 1);
}
