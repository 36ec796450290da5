//! Acceptance run: one PASS/FAIL line per criterion.
//!
//! Criteria whose input data is absent print FAIL with the missing path; they
//! make the process exit nonzero only with `IPKP_ACCEPTANCE_STRICT=1`. Any
//! other FAIL always exits nonzero. `IPKP_ACCEPTANCE_ONLY=1,2,3` restricts the
//! run to the listed criteria.

use std::path::PathBuf;
use std::time::Instant;

use ipkp_experiments::{
    emit_report, half_gains, metrics::accuracy_by_depth, Config, DataContext, Experiment, Metric, MetricsTable, RunRecord,
    RunSpec, Scheme, SweepKind, SweepResult, LENET5_PARAM_LAYERS,
};
use ipkp_nn::gradcheck::{check_loss_gradient, check_model_gradients, layer_trial, TrialKind};
use ipkp_nn::rng::{derive_seed, seeded};
use ipkp_nn::{conv2d, conv2d_oracle, init_params, InitScheme, LayeredModel, Scalar, Tensor};
use ipkp_prototypes::builtin_digit_prototypes;
use ipkp_training::{pretrain, PretrainConfig, TrainConfig};
use rand::Rng;

const REPS: usize = 10;
const LAYER_REPS: usize = 5;

enum Verdict {
    Pass,
    Fail,
    /// Required data is missing.
    Missing,
}

struct Outcome {
    verdict: Verdict,
    detail: String,
}

impl Outcome {
    fn check(ok: bool, detail: String) -> Outcome {
        Outcome {
            verdict: if ok { Verdict::Pass } else { Verdict::Fail },
            detail,
        }
    }

    fn missing(detail: String) -> Outcome {
        Outcome {
            verdict: Verdict::Missing,
            detail,
        }
    }
}

struct Harness {
    only: Option<Vec<u32>>,
    passed: usize,
    failed: usize,
    missing: usize,
}

impl Harness {
    fn wants(&self, id: u32) -> bool {
        self.only.as_ref().is_none_or(|o| o.contains(&id))
    }

    fn report(&mut self, id: u32, name: &str, started: Instant, outcome: Outcome) {
        let tag = match outcome.verdict {
            Verdict::Pass => {
                self.passed += 1;
                "PASS"
            }
            Verdict::Fail => {
                self.failed += 1;
                "FAIL"
            }
            Verdict::Missing => {
                self.missing += 1;
                "FAIL"
            }
        };
        println!(
            "[{tag}] criterion {id:>2} {name}: {} [{:.1}s]",
            outcome.detail,
            started.elapsed().as_secs_f64()
        );
    }
}

fn within(started: Instant, limit_s: f64) -> (bool, String) {
    let t = started.elapsed().as_secs_f64();
    (t < limit_s, format!("runtime {t:.1}s < {limit_s}s"))
}

fn criterion_1() -> Outcome {
    let started = Instant::now();
    let mut worst = [0.0f64; 2];
    let mut failures = Vec::new();
    fn kind_trials<T: Scalar>(eps: f64, tol: f64, worst: &mut f64, failures: &mut Vec<String>) {
        for kind in TrialKind::ALL {
            for seed in 0..100u64 {
                let t = layer_trial::<T>(kind, seed, eps);
                let r = check_model_gradients(&t.model, &t.batch, &t.labels, eps, None, seed).expect("gradient check");
                *worst = worst.max(r.rel_error);
                if r.rel_error >= tol {
                    failures.push(format!("{kind:?}/{seed}: {:.2e}", r.rel_error));
                }
            }
        }
        for seed in 0..100u64 {
            let mut rng = seeded(derive_seed(seed, "logits"));
            let (b, c) = (rng.random_range(1..=4), rng.random_range(2..=6));
            let z: Vec<T> = (0..b * c).map(|_| T::from_f64(rng.random_range(-3.0..3.0))).collect();
            let y: Vec<usize> = (0..b).map(|_| rng.random_range(0..c)).collect();
            let r = check_loss_gradient(&Tensor::from_vec(&[b, c], z).expect("logits"), &y, eps).expect("loss check");
            *worst = worst.max(r.rel_error);
            if r.rel_error >= tol {
                failures.push(format!("loss/{seed}: {:.2e}", r.rel_error));
            }
        }
    }
    kind_trials::<f32>(1e-3, 1e-3, &mut worst[0], &mut failures);
    kind_trials::<f64>(1e-6, 1e-6, &mut worst[1], &mut failures);
    let (fast, rt) = within(started, 60.0);
    Outcome::check(
        failures.is_empty() && fast,
        format!(
            "6 layer kinds + loss x 100 instances; worst rel err f32 {:.2e} (< 1e-3), f64 {:.2e} (< 1e-6); {} failing; {rt}",
            worst[0],
            worst[1],
            failures.len()
        ),
    )
}

fn criterion_2() -> Outcome {
    let started = Instant::now();
    let mut rng = seeded(derive_seed(2, "conv"));
    let mut worst = 0.0f64;
    for _ in 0..1000 {
        let (b, c, oc) = (rng.random_range(1..=3), rng.random_range(1..=4), rng.random_range(1..=6));
        let (kh, kw): (usize, usize) = (rng.random_range(1..=5), rng.random_range(1..=5));
        let (stride, padding): (usize, usize) = (rng.random_range(1..=3), rng.random_range(0..=2));
        let h = rng.random_range(kh.saturating_sub(2 * padding).max(1)..=16);
        let w = rng.random_range(kw.saturating_sub(2 * padding).max(1)..=16);
        let mut fill = |shape: &[usize]| {
            let n = shape.iter().product();
            Tensor::<f32>::from_vec(shape, (0..n).map(|_| rng.random_range(-1.0f32..1.0)).collect()).expect("shape")
        };
        let x = fill(&[b, c, h, w]);
        let wt = fill(&[oc, c, kh, kw]);
        let bias = fill(&[oc]);
        let fast = conv2d(&x, &wt, &bias, stride, padding).expect("conv2d");
        let slow = conv2d_oracle(&x, &wt, &bias, stride, padding).expect("oracle");
        assert_eq!(fast.shape(), slow.shape());
        worst = worst.max(fast.max_abs_diff(&slow));
    }
    let (fast, rt) = within(started, 60.0);
    Outcome::check(
        worst <= 1e-5 && fast,
        format!("1000 random instances, max abs diff {worst:.2e} (<= 1e-5); {rt}"),
    )
}

fn criterion_3() -> Outcome {
    let started = Instant::now();
    let protos = builtin_digit_prototypes(28, 28).expect("shipped prototypes");
    let mut ok = 0;
    let mut epochs = Vec::new();
    for seed in 0..10u64 {
        let mut model = LayeredModel::lenet5(10);
        init_params(&mut model, &InitScheme::glorot(derive_seed(seed, "init"))).expect("init");
        let cfg = PretrainConfig {
            base: TrainConfig {
                seed: derive_seed(seed, "pretrain"),
                ..TrainConfig::default()
            },
            ..PretrainConfig::default()
        };
        let r = pretrain(model, &protos, &cfg).expect("pretrain").report;
        if r.memorized && r.final_loss < 1e-2 && r.epochs <= 500 {
            ok += 1;
        }
        epochs.push(r.epochs);
    }
    let (fast, rt) = within(started, 300.0);
    Outcome::check(
        ok == 10 && fast,
        format!("{ok}/10 seeds reach 100% prototype accuracy and loss < 1e-2; epochs used {epochs:?}; {rt}"),
    )
}

fn data_root() -> PathBuf {
    std::env::var_os("IPKP_DATA_DIR")
        .map(PathBuf::from)
        .unwrap_or_else(|| PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../data"))
}

/// The acceptance plan: defaults plus the sweep lists the criteria need.
fn plan() -> Config {
    let mut cfg = Config::default();
    cfg.dataset.root = data_root().display().to_string();
    let e = &mut cfg.experiment;
    e.schemes = vec!["none".into(), "knowledge_aug".into()];
    e.fractions = vec![0.001];
    e.repetitions = REPS;
    e.augment_schemes = vec!["knowledge".into()];
    e.augment_counts = vec![1, 100];
    e.augment_fraction = 0.001;
    e.layer_schemes = vec!["knowledge".into(), "data_surrogate".into()];
    e.layer_fraction = 0.01;
    cfg.validate().expect("acceptance plan is valid");
    cfg
}

fn mean_of(records: &[RunRecord], label: &str, fraction: f64, metric: Metric) -> Option<(f64, usize)> {
    let t = MetricsTable::from_records(records, metric);
    t.get(label, fraction).map(|r| (r.mean, r.failed))
}

fn specs(scheme: Scheme, label: &str, fraction: f64, reps: usize, epochs: usize) -> Vec<RunSpec> {
    (0..reps)
        .map(|r| RunSpec {
            label: label.into(),
            ..RunSpec::standard(scheme, fraction, r, epochs)
        })
        .collect()
}

fn report_bytes(res: &SweepResult, hash: &str) -> Vec<u8> {
    let dir = tempfile::tempdir().expect("temp dir");
    emit_report(res, dir.path(), &[format!("config_hash: {hash}")]).expect("report");
    std::fs::read(dir.path().join("results.csv")).expect("results.csv")
}

fn main() {
    let only = std::env::var("IPKP_ACCEPTANCE_ONLY")
        .ok()
        .map(|s| s.split(',').filter_map(|t| t.trim().parse().ok()).collect());
    let strict = std::env::var("IPKP_ACCEPTANCE_STRICT").is_ok_and(|v| v == "1");
    let mut h = Harness {
        only,
        passed: 0,
        failed: 0,
        missing: 0,
    };
    println!("acceptance: criteria 1-10");

    type Fast = (u32, &'static str, fn() -> Outcome);
    let fast: [Fast; 3] = [
        (1, "gradient oracle", criterion_1),
        (2, "convolution oracle", criterion_2),
        (3, "prototype memorization", criterion_3),
    ];
    for (id, name, f) in fast {
        if h.wants(id) {
            let t = Instant::now();
            let o = f();
            h.report(id, name, t, o);
        }
    }

    let data_ids = [4u32, 5, 6, 7, 8, 9, 10];
    if data_ids.iter().any(|&i| h.wants(i)) {
        run_data_criteria(&mut h);
    }

    println!(
        "acceptance: {} passed, {} failed, {} failed for missing data",
        h.passed, h.failed, h.missing
    );
    if h.failed > 0 || (strict && h.missing > 0) {
        std::process::exit(1);
    }
}

fn run_data_criteria(h: &mut Harness) {
    let cfg = plan();
    let ctx = match DataContext::load(&cfg, h.wants(6) || h.wants(7)) {
        Ok(ctx) => ctx,
        Err(e) => {
            let t = Instant::now();
            for (id, name) in [
                (4, "small-data generalization"),
                (5, "out-of-distribution robustness"),
                (6, "layer-transfer contrast"),
                (7, "data+knowledge additivity"),
                (8, "augmentation benefit"),
                (9, "learning speed-up"),
                (10, "determinism"),
            ] {
                if h.wants(id) {
                    h.report(id, name, t, Outcome::missing(format!("dataset unavailable: {e}")));
                }
            }
            return;
        }
    };
    let ood_path = cfg.path(&cfg.dataset.usps);
    let exp = Experiment::new(cfg.clone(), ctx.clone(), 1, None).expect("experiment");

    // 4: size sweep at 0.1%
    let mut size: Option<(SweepResult, f64)> = None;
    if h.wants(4) || h.wants(5) || h.wants(8) || h.wants(10) {
        let t = Instant::now();
        let res = exp.run_size_sweep().expect("size sweep");
        let secs = t.elapsed().as_secs_f64();
        if h.wants(4) {
            let none = res.test.get("none", 0.001).expect("none cell");
            let know = res.test.get("knowledge_aug", 0.001).expect("knowledge_aug cell");
            let gain = (know.mean - none.mean) * 100.0;
            h.report(
                4,
                "small-data generalization",
                t,
                Outcome::check(
                    gain >= 2.0 && none.failed == 0 && know.failed == 0 && secs < 3600.0,
                    format!(
                        "fraction 0.001, {REPS} reps: knowledge_aug {:.4} vs none {:.4} ({gain:+.2} pts, need >= +2); runtime {secs:.0}s < 3600s",
                        know.mean, none.mean
                    ),
                ),
            );
        }
        size = Some((res, secs));
    }

    // 7: data+knowledge vs data surrogate at 0.1%
    if h.wants(7) {
        let t = Instant::now();
        let mut s = specs(Scheme::DataSurrogate, "data_surrogate", 0.001, REPS, cfg.train.epochs);
        s.extend(specs(Scheme::DataPlusKnowledge, "data_plus_knowledge", 0.001, REPS, cfg.train.epochs));
        let recs = exp.run_all(&s);
        let ds = mean_of(&recs, "data_surrogate", 0.001, Metric::Test).expect("cell");
        let dk = mean_of(&recs, "data_plus_knowledge", 0.001, Metric::Test).expect("cell");
        h.report(
            7,
            "data+knowledge additivity",
            t,
            Outcome::check(
                dk.0 >= ds.0 && ds.1 == 0 && dk.1 == 0,
                format!(
                    "fraction 0.001, {REPS} reps: data_plus_knowledge {:.4} vs data_surrogate {:.4} ({:+.2} pts, need >= 0)",
                    dk.0,
                    ds.0,
                    (dk.0 - ds.0) * 100.0
                ),
            ),
        );
    }

    // 8: 100 vs 1 prototypes per class; 100/class is the knowledge_aug run of criterion 4
    if h.wants(8) {
        let t = Instant::now();
        let (res, _) = size.as_ref().expect("size sweep ran");
        let one = exp.run_all(&specs(Scheme::Knowledge, "knowledge@n1", 0.001, REPS, cfg.train.epochs));
        let m1 = mean_of(&one, "knowledge@n1", 0.001, Metric::Test).expect("cell");
        let m100 = res.test.get("knowledge_aug", 0.001).expect("cell");
        h.report(
            8,
            "augmentation benefit",
            t,
            Outcome::check(
                m100.mean >= m1.0 && m1.1 == 0 && m100.failed == 0,
                format!(
                    "fraction 0.001, {REPS} reps: knowledge@n100 {:.4} vs knowledge@n1 {:.4} ({:+.2} pts, need >= 0)",
                    m100.mean,
                    m1.0,
                    (m100.mean - m1.0) * 100.0
                ),
            ),
        );
    }

    // 6: layer sweep at 1%
    if h.wants(6) {
        let t = Instant::now();
        let s: Vec<RunSpec> = exp
            .layer_specs(&[Scheme::Knowledge, Scheme::DataSurrogate])
            .into_iter()
            .filter(|s| s.repetition < LAYER_REPS)
            .collect();
        let res = SweepResult::new(SweepKind::Layers, exp.run_all(&s));
        let secs = t.elapsed().as_secs_f64();
        let halves = |scheme: &str| {
            accuracy_by_depth(&res.test, scheme, LENET5_PARAM_LAYERS)
                .map(|a| half_gains(&a))
                .unwrap_or((f64::NAN, f64::NAN))
        };
        let (ke, kl) = halves("knowledge");
        let (de, dl) = halves("data_surrogate");
        h.report(
            6,
            "layer-transfer contrast",
            t,
            Outcome::check(
                kl > ke && de > dl && res.failed() == 0 && secs < 7200.0,
                format!(
                    "fraction 0.01, {LAYER_REPS} reps, k=0..5: knowledge early {ke:+.4} late {kl:+.4} (need late > early); \
                     data_surrogate early {de:+.4} late {dl:+.4} (need early > late); runtime {secs:.0}s"
                ),
            ),
        );
    }

    // 9 (and the full-data half of 5): full data, 10 epochs
    let mut full: Option<Vec<RunRecord>> = None;
    if h.wants(9) || (h.wants(5) && ctx.ood.is_some()) {
        let t = Instant::now();
        let mut s = specs(Scheme::None, "none", 1.0, REPS, cfg.train.epochs);
        s.extend(specs(Scheme::KnowledgeAug, "knowledge_aug", 1.0, REPS, cfg.train.epochs));
        let recs = exp.run_all(&s);
        if h.wants(9) {
            let mut hits = 0;
            let mut reached = Vec::new();
            for r in 0..REPS {
                let base = recs.iter().find(|x| x.label == "none" && x.repetition == r).expect("none run");
                let know = recs.iter().find(|x| x.label == "knowledge_aug" && x.repetition == r).expect("knowledge run");
                let target = base.curve.as_ref().and_then(|c| c.val_at(cfg.train.epochs));
                let epoch = match (target, know.curve.as_ref()) {
                    (Some(target), Some(c)) => c.first_epoch_reaching(target),
                    _ => None,
                };
                if epoch.is_some_and(|e| e <= 5) {
                    hits += 1;
                }
                reached.push(epoch.map_or("-".to_string(), |e| e.to_string()));
            }
            h.report(
                9,
                "learning speed-up",
                t,
                Outcome::check(
                    hits >= 8,
                    format!(
                        "fraction 1.0: knowledge_aug reaches the fresh run's epoch-10 validation accuracy within 5 epochs in {hits}/{REPS} seeds (need >= 8); epochs [{}]",
                        reached.join(" ")
                    ),
                ),
            );
        }
        full = Some(recs);
    }

    // 5: out-of-distribution
    if h.wants(5) {
        let t = Instant::now();
        if ctx.ood.is_none() {
            h.report(
                5,
                "out-of-distribution robustness",
                t,
                Outcome::missing(format!("USPS test set not found at {}; criterion not evaluated", ood_path.display())),
            );
        } else {
            let (res, _) = size.as_ref().expect("size sweep ran");
            let full = full.as_ref().expect("full-data runs ran");
            let small = |l| mean_of(&res.records, l, 0.001, Metric::Ood).expect("ood cell").0;
            let large = |l| mean_of(full, l, 1.0, Metric::Ood).expect("ood cell").0;
            let g_small = (small("knowledge_aug") - small("none")) * 100.0;
            let g_large = (large("knowledge_aug") - large("none")) * 100.0;
            h.report(
                5,
                "out-of-distribution robustness",
                t,
                Outcome::check(
                    g_small >= 5.0 && g_large >= 0.0,
                    format!("MNIST->USPS: fraction 0.001 gain {g_small:+.2} pts (need >= +5); fraction 1.0 gain {g_large:+.2} pts (need >= 0)"),
                ),
            );
        }
    }

    // 10: rerun criterion 4's sweep from scratch
    if h.wants(10) {
        let t = Instant::now();
        let (res, _) = size.as_ref().expect("size sweep ran");
        let first = report_bytes(res, &exp.hash);
        let again = Experiment::new(cfg.clone(), ctx, 2, None).expect("experiment");
        let rerun = again.run_size_sweep().expect("size sweep");
        let second = report_bytes(&rerun, &again.hash);
        h.report(
            10,
            "determinism",
            t,
            Outcome::check(
                first == second,
                format!(
                    "criterion 4 sweep re-run with identical config (2 workers): results.csv {} ({} bytes)",
                    if first == second { "byte-identical" } else { "differs" },
                    first.len()
                ),
            ),
        );
    }
}
