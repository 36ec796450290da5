use std::path::{Path, PathBuf};
use std::time::Instant;

use ipkp_data::{load_usps, write_idx};
use ipkp_experiments::context::load_prototypes;
use ipkp_experiments::{
    emit_report, half_gains, layer_gains, records_from_csv, records_to_csv, repetition_seed, run_ood_eval, Config,
    DataContext, Experiment, MetricsTable, RunSpec, Scheme, SweepKind, SweepResult, LENET5_PARAM_LAYERS,
};
use ipkp_nn::rng::derive_seed;
use ipkp_nn::{init_params, load_checkpoint_for, LayeredModel};
use ipkp_prototypes::{augment, render_spec, DIGITS_SPEC};
use ipkp_training::{checkpoint_tag, pretrain, save_tagged_checkpoint, TrainingCurve};

use crate::error::{CliError, Result};
use crate::preview::write_gray_png;
use crate::{Cli, Command, Kind};

pub fn run(cli: &Cli) -> Result<()> {
    let cfg = load_config(cli)?;
    match &cli.command {
        Command::RenderProtos { spec, resolution } => render_protos(cli, &cfg, spec.as_deref(), *resolution),
        Command::Pretrain { count } => cmd_pretrain(cli, &cfg, *count),
        Command::Finetune {
            init,
            truncate_k,
            fraction,
            repetition,
        } => cmd_finetune(cli, cfg, init, *truncate_k, *fraction, *repetition),
        Command::Sweep { kind } => cmd_sweep(cli, cfg, sweep_kind(*kind)),
        Command::Report { dir, ood } => cmd_report(cli, &cfg, dir, *ood),
    }
}

fn sweep_kind(k: Kind) -> SweepKind {
    match k {
        Kind::Size => SweepKind::Size,
        Kind::Augment => SweepKind::Augment,
        Kind::Layers => SweepKind::Layers,
        Kind::Informed => SweepKind::Informed,
    }
}

/// Loads, overrides and echoes the resolved config.
fn load_config(cli: &Cli) -> Result<Config> {
    let mut cfg = match &cli.config {
        Some(p) if !p.is_file() => return Err(CliError::Config(format!("config file {} not found", p.display()))),
        Some(p) => Config::load(p)?,
        None => Config::default(),
    };
    if let Some(seed) = cli.seed {
        cfg.experiment.seed = seed;
    }
    let cfg = cfg.resolve_root();
    cfg.validate()?;
    println!("# config_hash: {}", cfg.hash());
    print!("{}", cfg.resolved_toml());
    println!("# end config");
    Ok(cfg)
}

fn prepare_out(cli: &Cli) -> Result<&Path> {
    let out = cli.out.as_path();
    if out.is_file() {
        return Err(CliError::Config(format!("output path {} is a file", out.display())));
    }
    let occupied = out.is_dir() && std::fs::read_dir(out)?.next().is_some();
    if occupied && !cli.force {
        return Err(CliError::Config(format!(
            "output directory {} is not empty; pass --force to overwrite",
            out.display()
        )));
    }
    std::fs::create_dir_all(out)?;
    Ok(out)
}

fn write_config(out: &Path, cfg: &Config) -> Result<()> {
    std::fs::write(out.join("config.toml"), cfg.resolved_toml())?;
    Ok(())
}

fn render_protos(cli: &Cli, cfg: &Config, spec: Option<&Path>, resolution: Option<usize>) -> Result<()> {
    let text = match spec {
        Some(p) => read_spec(p)?,
        None if cfg.dataset.prototypes == "builtin" => DIGITS_SPEC.to_string(),
        None => read_spec(&cfg.path(&cfg.dataset.prototypes))?,
    };
    let r = resolution.unwrap_or(cfg.dataset.resolution);
    if r == 0 {
        return Err(CliError::Config("resolution must be positive".into()));
    }
    let set = render_spec(&text, r, r)?;
    let out = prepare_out(cli)?;
    let ds = set.dataset();
    write_idx(ds, &out.join("prototypes-images-idx3-ubyte"), &out.join("prototypes-labels-idx1-ubyte"))?;
    for class in 0..set.class_count() {
        write_gray_png(&out.join(format!("proto_{class}.png")), set.item(class, 0), r, r)?;
    }
    println!("rendered {} prototypes at {r}x{r} into {}", set.len(), out.display());
    Ok(())
}

fn read_spec(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|e| CliError::Config(format!("prototype spec {}: {e}", path.display())))
}

fn cmd_pretrain(cli: &Cli, cfg: &Config, count: usize) -> Result<()> {
    if count == 0 {
        return Err(CliError::Config("--count must be at least 1".into()));
    }
    let rep = repetition_seed(cfg.experiment.seed, 0);
    let mut protos = load_prototypes(cfg)?;
    if count > protos.per_class_count() {
        protos = augment(&protos, &cfg.augment_config(derive_seed(rep, "augment"), count)?)?;
    }
    let mut model = LayeredModel::lenet5(cfg.model.classes);
    init_params(&mut model, &cfg.init_scheme(derive_seed(rep, "init")))?;
    let out = prepare_out(cli)?;
    write_config(out, cfg)?;
    let pre = pretrain(model, &protos, &cfg.pretrain_config(derive_seed(rep, "pretrain")))?;
    let r = &pre.report;
    println!("prototypes={} epochs={} final_loss={:.6} converged={} train_accuracy={:.4} memorized={}",
        protos.len(), r.epochs, r.final_loss, r.converged, r.train_accuracy, r.memorized);
    if !r.memorized {
        println!("warning: prototypes not memorized within {} epochs", cfg.pretrain.max_epochs);
    }
    let label = if count > 1 { format!("knowledge@n{count}") } else { "knowledge".to_string() };
    let path = out.join("pretrained.ipkp");
    save_tagged_checkpoint(&path, &pre.model, &label, &cfg.hash())?;
    pre.curve.write_csv(out, "pretrain")?;
    println!("checkpoint {} tag {}", path.display(), checkpoint_tag(&label, &cfg.hash()));
    Ok(())
}

fn cmd_finetune(
    cli: &Cli,
    cfg: Config,
    init: &str,
    truncate_k: Option<usize>,
    fraction: Option<f64>,
    repetition: usize,
) -> Result<()> {
    let fraction = fraction.unwrap_or(cfg.experiment.fractions[0]);
    if !(fraction > 0.0 && fraction <= 1.0) {
        return Err(CliError::Config(format!("--fraction {fraction} outside (0, 1]")));
    }
    let checkpoint = match init {
        "fresh" => None,
        other => match other.strip_prefix("checkpoint:") {
            Some(p) if !p.is_empty() => Some(PathBuf::from(p)),
            _ => return Err(CliError::Config(format!("--init `{other}` (fresh or checkpoint:<path>)"))),
        },
    };
    let reference = LayeredModel::lenet5(cfg.model.classes);
    let loaded = match &checkpoint {
        Some(p) if !p.is_file() => return Err(CliError::Config(format!("checkpoint {} not found", p.display()))),
        Some(p) => Some(load_checkpoint_for(p, &reference)?),
        None => None,
    };
    if let Some(k) = truncate_k {
        if k > reference.num_param_layers() {
            return Err(ipkp_nn::NnError::TruncationOutOfRange {
                k,
                layers: reference.num_param_layers(),
            }
            .into());
        }
    }
    let ctx = DataContext::load(&cfg, false)?;
    let out = prepare_out(cli)?;
    write_config(out, &cfg)?;
    let exp = Experiment::new(cfg, ctx, cli.jobs, None)?;
    let start = match (&loaded, truncate_k) {
        (None, _) => exp.fresh_model(repetition)?,
        (Some(c), None) => c.model.clone(),
        (Some(c), Some(k)) => exp.truncated(&c.model, k, repetition)?,
    };
    if let Some(c) = &loaded {
        println!("initialized from {} (tag {})", checkpoint.as_ref().expect("loaded").display(), c.tag);
    }
    let mut spec = RunSpec::standard(Scheme::None, fraction, repetition, exp.cfg.train.epochs);
    spec.label = "finetune".into();
    let started = Instant::now();
    let (model, curve) = exp.train_model(&spec, start)?;
    let rec = exp.score(&spec, started, Ok((model.clone(), curve.clone())));
    if let Some(e) = &rec.error {
        return Err(CliError::Failed(e.clone()));
    }
    println!("fraction={fraction} repetition={repetition} epochs={} test_accuracy={:.4}", spec.epochs, rec.test_accuracy);
    match rec.ood_accuracy {
        Some(o) => println!("ood_accuracy={o:.4}"),
        None => println!("ood_accuracy=n/a (no out-of-distribution test set found)"),
    }
    save_tagged_checkpoint(&out.join("finetuned.ipkp"), &model, &spec.label, &exp.hash)?;
    curve.write_csv(out, "finetune")?;
    std::fs::write(
        out.join("results.csv"),
        records_to_csv(&[rec], &[format!("config_hash: {}", exp.hash)])?,
    )?;
    Ok(())
}

fn print_table(title: &str, t: &MetricsTable) {
    println!("{title}");
    println!("{:<32} {:>9} {:>9} {:>9} {:>4} {:>6}", "scheme", "fraction", "mean", "std", "n", "failed");
    for r in &t.rows {
        println!(
            "{:<32} {:>9} {:>9.4} {:>9.4} {:>4} {:>6}",
            r.scheme, r.fraction, r.mean, r.std, r.n, r.failed
        );
    }
}

fn summarize(res: &SweepResult) -> Result<()> {
    print_table("test accuracy", &res.test);
    match &res.ood {
        Some(o) => print_table("out-of-distribution accuracy", o),
        None => println!("no out-of-distribution test set; ood_accuracy left empty"),
    }
    if res.kind == SweepKind::Layers {
        let mut bases: Vec<&str> = Vec::new();
        for r in &res.test.rows {
            let b = r.scheme.split('@').next().unwrap_or_default();
            if !bases.contains(&b) {
                bases.push(b);
            }
        }
        for b in bases {
            if let Some(acc) = ipkp_experiments::metrics::accuracy_by_depth(&res.test, b, LENET5_PARAM_LAYERS) {
                let gains: Vec<String> = layer_gains(&acc).iter().map(|g| format!("{g:+.4}")).collect();
                let (early, late) = half_gains(&acc);
                println!("{b}: gain by k [{}] early={early:+.4} late={late:+.4}", gains.join(" "));
            }
        }
    }
    for r in res.test.rows.iter().filter(|r| r.failed > 0) {
        eprintln!(
            "cell {} f={}: {} of {} runs failed (see failures.log)",
            r.scheme,
            r.fraction,
            r.failed,
            r.failed + r.n
        );
    }
    if !res.test.rows.is_empty() && res.test.rows.iter().all(|r| r.n == 0) {
        return Err(CliError::Failed("every cell failed".into()));
    }
    Ok(())
}

fn cmd_sweep(cli: &Cli, cfg: Config, kind: SweepKind) -> Result<()> {
    let needs_surrogate = kind.schemes(&cfg)?.iter().any(|s| s.needs_surrogate());
    let ctx = DataContext::load(&cfg, needs_surrogate)?;
    let out = prepare_out(cli)?.to_path_buf();
    write_config(&out, &cfg)?;
    let exp = Experiment::new(cfg, ctx, cli.jobs, Some(out.clone()))?;
    let res = exp.run_sweep(kind)?;
    let files = emit_report(&res, &out, &[format!("config_hash: {}", exp.hash)])?;
    println!("wrote {} files to {}", files.len(), out.display());
    summarize(&res)
}

fn cmd_report(cli: &Cli, cfg: &Config, dir: &Path, ood: bool) -> Result<()> {
    let path = dir.join("results.csv");
    let text = std::fs::read_to_string(&path).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
    let kind = text
        .lines()
        .find_map(|l| l.strip_prefix("# kind: "))
        .and_then(|k| match k {
            "size" => Some(SweepKind::Size),
            "augment" => Some(SweepKind::Augment),
            "layers" => Some(SweepKind::Layers),
            "informed" => Some(SweepKind::Informed),
            _ => None,
        })
        .ok_or_else(|| CliError::Config(format!("{}: missing `# kind:` header", path.display())))?;
    let meta: Vec<String> = text
        .lines()
        .filter_map(|l| l.strip_prefix("# config_hash: "))
        .map(|h| format!("config_hash: {h}"))
        .take(1)
        .collect();
    let mut records = records_from_csv(&text)?;
    for r in &mut records {
        let stem = dir.join("curves").join(r.stem());
        let read = |suffix: &str| std::fs::read_to_string(format!("{}_{suffix}.csv", stem.display())).ok();
        if let (Some(loss), Some(val)) = (read("loss"), read("val")) {
            r.curve = TrainingCurve::from_csv(&loss, &val);
        }
    }
    if ood {
        let usps = cfg.path(&cfg.dataset.usps);
        if cfg.dataset.usps.is_empty() || !usps.is_file() {
            return Err(CliError::Config(format!("out-of-distribution set {} not found", usps.display())));
        }
        let set = load_usps(&usps)?;
        let (evaluated, _, errors) = run_ood_eval(&records, &set, Some(dir));
        for e in &errors {
            eprintln!("ood: {e}");
        }
        records = evaluated;
    }
    let out = prepare_out(cli)?;
    let res = SweepResult::new(kind, records);
    let files = emit_report(&res, out, &meta)?;
    println!("wrote {} files to {}", files.len(), out.display());
    summarize(&res)
}
