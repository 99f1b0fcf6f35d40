use super::args::{Cli, Command, EvaluateArgs, GenerateArgs, Mode, SplitArg};
use super::manifest::{hash_inputs, now, sha256_hex, FileHash, RunManifest, RUN_MANIFEST};
use super::{data_dir, Failure, Output, EXIT_DOMAIN, EXIT_NOT_CONVERGED};
use crate::generator::{
    generate_realistic_testset, generate_snapshots, read_dataset, shift_report, write_dataset,
    GeneratorError, Normalization, SnapshotDataset,
};
use crate::gnn::{read_checkpoint, write_checkpoint, Checkpoint, GnnError, ModelConfig};
use crate::hydraulics::{ControlSettings, HydraulicState, SolverError, HydraulicSolver};
use crate::inp::{parse_inp, InpError};
use crate::network::NetworkModel;
use crate::training::{
    evaluate, fine_tune, pretrain_multi, EvalConfig, Gatres, HarmonicBaseline, Metrics,
    TrainConfig, TrainOutcome, TrainingError,
};
use crate::validate::validate;
use clap::Parser;
use serde::Serialize;
use serde_json::{json, Value};
use std::collections::BTreeMap;
use std::io::Write;
use std::path::{Path, PathBuf};

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure {
            code: super::EXIT_USAGE,
            kind: "io",
            message: e.to_string(),
            detail: None,
        }
    }
}

impl From<InpError> for Failure {
    fn from(e: InpError) -> Self {
        Failure {
            code: super::EXIT_USAGE,
            kind: "parse",
            message: e.to_string(),
            detail: None,
        }
    }
}

impl From<GeneratorError> for Failure {
    fn from(e: GeneratorError) -> Self {
        match e {
            GeneratorError::Io(e) => e.into(),
            GeneratorError::Manifest(m) => Failure {
                code: super::EXIT_USAGE,
                kind: "dataset",
                message: m,
                detail: None,
            },
            GeneratorError::InvalidModel(report) => Failure {
                detail: serde_json::to_value(&report).ok(),
                ..Failure::domain("invalid_model", "the network failed validation")
            },
            other => Failure::domain("generation", other.to_string()),
        }
    }
}

impl From<GnnError> for Failure {
    fn from(e: GnnError) -> Self {
        match e {
            GnnError::Io(e) => e.into(),
            GnnError::Checkpoint(m) => Failure {
                code: super::EXIT_USAGE,
                kind: "checkpoint",
                message: m,
                detail: None,
            },
            other => Failure::domain("model", other.to_string()),
        }
    }
}

impl From<TrainingError> for Failure {
    fn from(e: TrainingError) -> Self {
        let kind = match &e {
            TrainingError::Gnn(_) => "model",
            TrainingError::EmptyDataset(_) => "empty_dataset",
            TrainingError::DivergedTraining { .. } => "diverged_training",
            TrainingError::SchemaMismatch(_) => "schema_mismatch",
            TrainingError::InvalidConfig(_) => "invalid_config",
            TrainingError::NoSensors => "no_sensors",
        };
        match e {
            TrainingError::Gnn(g) => g.into(),
            other => Failure::domain(kind, other.to_string()),
        }
    }
}

fn json_of<T: Serialize>(v: &T) -> Value {
    serde_json::to_value(v).expect("plain data serializes")
}

/// A network argument is a path, or a name resolved inside the data
/// directory with or without the `.inp` extension.
fn resolve_network(arg: &str) -> PathBuf {
    let direct = PathBuf::from(arg);
    if direct.exists() {
        return direct;
    }
    let dir = data_dir();
    for candidate in [dir.join(arg), dir.join(format!("{arg}.inp"))] {
        if candidate.exists() {
            return candidate;
        }
    }
    direct
}

fn load_network(arg: &str) -> Result<(NetworkModel, PathBuf, String), Failure> {
    let path = resolve_network(arg);
    let text = std::fs::read_to_string(&path)
        .map_err(|e| Failure::from(std::io::Error::new(e.kind(), format!("{}: {e}", path.display()))))?;
    let model = parse_inp(&text)?;
    Ok((model, path, text))
}

fn load_dataset(dir: &Path) -> Result<SnapshotDataset, Failure> {
    if !dir.join("manifest.json").is_file() {
        return Err(Failure::domain(
            "empty_dataset",
            format!("{} holds no dataset", dir.display()),
        ));
    }
    Ok(read_dataset(dir)?)
}

/// Shared bookkeeping for commands that write an artifact directory.
struct Run {
    manifest: RunManifest,
    out: PathBuf,
}

impl Run {
    fn start(command: &str, argv: &[String], out: &Path) -> Result<Run, Failure> {
        std::fs::create_dir_all(out)?;
        Ok(Run {
            manifest: RunManifest {
                command: command.to_string(),
                argv: argv.to_vec(),
                config: Value::Null,
                seeds: Value::Null,
                inputs: Vec::new(),
                artifacts: Vec::new(),
                started_at: now(),
                finished_at: 0.0,
                tool_version: env!("CARGO_PKG_VERSION").to_string(),
                timing: Value::Null,
            },
            out: out.to_path_buf(),
        })
    }

    fn input(&mut self, path: &Path) -> Result<(), Failure> {
        self.manifest.inputs.extend(hash_inputs(path)?);
        Ok(())
    }

    fn write(&mut self, name: &str, bytes: &[u8]) -> Result<PathBuf, Failure> {
        let path = self.out.join(name);
        std::fs::write(&path, bytes)?;
        self.artifact(&path);
        Ok(path)
    }

    fn artifact(&mut self, path: &Path) {
        self.manifest.artifacts.push(path.display().to_string());
    }

    fn finish(mut self) -> Result<PathBuf, Failure> {
        self.manifest.finished_at = now();
        let path = self.out.join(RUN_MANIFEST);
        let text = serde_json::to_string_pretty(&self.manifest).expect("manifest serializes");
        std::fs::write(&path, text + "\n")?;
        Ok(path)
    }
}

fn pretty_bytes<T: Serialize>(v: &T) -> Vec<u8> {
    let mut s = serde_json::to_string_pretty(v).expect("plain data serializes");
    s.push('\n');
    s.into_bytes()
}

pub(crate) fn dispatch(cli: Cli, argv: Vec<String>, stderr: &mut dyn Write) -> Result<Output, Failure> {
    match cli.command {
        Command::Validate { network } => cmd_validate(&network),
        Command::Simulate {
            network,
            controls,
            demand_scale,
            solver,
        } => cmd_simulate(&network, controls.as_deref(), demand_scale, &solver.config()),
        Command::Generate(args) => cmd_generate(&args, &argv, stderr),
        Command::Train {
            dataset,
            out,
            train,
            model,
        } => cmd_pretrain("train", &[dataset], &out, train.config(), model.config(), &argv, stderr),
        Command::Pretrain {
            datasets,
            out,
            train,
            model,
        } => cmd_pretrain("pretrain", &datasets, &out, train.config(), model.config(), &argv, stderr),
        Command::Finetune {
            dataset,
            checkpoint,
            out,
            train,
            lr_factor,
        } => {
            let config = TrainConfig {
                fine_tune_factor: lr_factor,
                ..train.config()
            };
            cmd_finetune(&dataset, &checkpoint, &out, config, &argv, stderr)
        }
        Command::Evaluate(args) => cmd_evaluate(&args, &argv, stderr),
        Command::Report {
            train,
            test,
            out,
            bins,
            metrics,
        } => cmd_report(&train, &test, &out, bins, &metrics, &argv),
        Command::Rerun { manifest, out } => cmd_rerun(&manifest, out.as_deref(), stderr),
    }
}

fn cmd_validate(network: &str) -> Result<Output, Failure> {
    let (model, _, _) = load_network(network)?;
    let report = validate(&model);
    Ok(Output {
        code: if report.is_empty() { 0 } else { EXIT_DOMAIN },
        document: json_of(&report),
    })
}

fn state_document(model: &NetworkModel, state: &HydraulicState) -> Value {
    let mut doc = json_of(state);
    doc["node_ids"] = json!(model.node_ids().collect::<Vec<_>>());
    doc["link_ids"] = json!(model.links().map(|l| l.id).collect::<Vec<_>>());
    doc
}

fn cmd_simulate(
    network: &str,
    controls: Option<&Path>,
    demand_scale: f64,
    solver: &crate::hydraulics::SolverConfig,
) -> Result<Output, Failure> {
    let (model, _, _) = load_network(network)?;
    let mut settings = match controls {
        Some(path) => {
            let text = std::fs::read_to_string(path)?;
            serde_json::from_str::<ControlSettings>(&text)
                .map_err(|e| Failure::usage(format!("controls file: {e}")))?
        }
        None => ControlSettings::base(&model),
    };
    settings.demands.iter_mut().for_each(|d| *d *= demand_scale);
    let solver = HydraulicSolver::new(&model, *solver).map_err(solver_failure)?;
    match solver.solve(&settings) {
        Ok(state) => Ok(Output::ok(state_document(&model, &state))),
        Err(SolverError::NotConverged(state)) => Ok(Output {
            code: EXIT_NOT_CONVERGED,
            document: state_document(&model, &state),
        }),
        Err(e) => Err(solver_failure(e)),
    }
}

fn solver_failure(e: SolverError) -> Failure {
    match e {
        SolverError::InvalidModel(report) => Failure {
            detail: Some(json_of(&report)),
            ..Failure::domain("invalid_model", "the network failed validation")
        },
        SolverError::ControlMismatch(m) => Failure::usage(m),
        other => Failure::domain("solver", other.to_string()),
    }
}

fn cmd_generate(args: &GenerateArgs, argv: &[String], stderr: &mut dyn Write) -> Result<Output, Failure> {
    let (model, path, text) = load_network(&args.network)?;
    let mut run = Run::start("generate", argv, &args.out)?;
    run.input(&path)?;
    let solver = args.solver.config();
    let mut ds = match args.mode {
        Mode::Random => generate_snapshots(&model, &args.sampling(), args.count, &solver, args.workers)?,
        Mode::Realistic => {
            generate_realistic_testset(&model, &args.patterns(), &args.noise(), &solver, args.workers)?
        }
    };
    ds.manifest.input_sha256 = Some(sha256_hex(text.as_bytes()));
    write_dataset(&args.out, &ds)?;
    for spec in ds.manifest.arrays.values() {
        run.artifact(&args.out.join(&spec.file));
    }
    run.artifact(&args.out.join("manifest.json"));
    run.manifest.config = json!({
        "mode": format!("{:?}", args.mode).to_lowercase(),
        "sampling": args.sampling(),
        "patterns": args.patterns(),
        "noise": args.noise(),
        "solver": solver,
        "count": args.count,
        "workers": args.workers,
    });
    run.manifest.seeds = json!({"seed": args.seed});
    let _ = writeln!(
        stderr,
        "wrote {} snapshots ({} discarded) to {}",
        ds.len(),
        ds.manifest.discarded,
        args.out.display()
    );
    run.finish()?;
    Ok(Output::ok(json!({
        "out": args.out.display().to_string(),
        "network": ds.manifest.network,
        "realistic": ds.manifest.realistic,
        "snapshots": ds.manifest.snapshots,
        "attempts": ds.manifest.attempts,
        "discarded": ds.manifest.discarded,
        "normalization": ds.manifest.normalization,
    })))
}

/// Key for each dataset's normalization in a checkpoint: the network name,
/// suffixed when two datasets share one.
fn normalization_keys(datasets: &[SnapshotDataset]) -> Vec<String> {
    let mut seen: BTreeMap<&str, usize> = BTreeMap::new();
    datasets
        .iter()
        .map(|ds| {
            let n = seen.entry(ds.manifest.network.as_str()).or_default();
            *n += 1;
            if *n == 1 {
                ds.manifest.network.clone()
            } else {
                format!("{}#{}", ds.manifest.network, n)
            }
        })
        .collect()
}

#[allow(clippy::too_many_arguments)]
fn save_training(
    mut run: Run,
    outcome: &TrainOutcome,
    model: &ModelConfig,
    config: &TrainConfig,
    normalization: BTreeMap<String, Normalization>,
    provenance: Value,
    stderr: &mut dyn Write,
) -> Result<Output, Failure> {
    let ckpt = Checkpoint {
        config: model.clone(),
        weights: outcome.weights.clone(),
        normalization,
        provenance,
    };
    let ckpt_path = run.out.join("model.ckpt");
    write_checkpoint(&ckpt_path, &ckpt)?;
    run.artifact(&ckpt_path);
    run.write("history.json", &pretty_bytes(&outcome.history))?;
    run.manifest.config = json!({"train": config, "model": model});
    run.manifest.seeds = json!({"seed": config.seed});
    run.manifest.timing = json_of(&outcome.timing);
    let h = &outcome.history;
    let _ = writeln!(
        stderr,
        "{} epochs, best validation MAE {:.4} mH2O",
        h.epochs_run(),
        h.best_val_mae
    );
    let out = run.out.display().to_string();
    run.finish()?;
    Ok(Output::ok(json!({
        "out": out,
        "checkpoint": ckpt_path.display().to_string(),
        "epochs_run": h.epochs_run(),
        "best_epoch": h.best_epoch,
        "best_val_mae": h.best_val_mae,
        "initial_val_mae": h.initial_val_mae,
        "history": h,
    })))
}

fn cmd_pretrain(
    command: &str,
    dirs: &[PathBuf],
    out: &Path,
    config: TrainConfig,
    model: ModelConfig,
    argv: &[String],
    stderr: &mut dyn Write,
) -> Result<Output, Failure> {
    let datasets: Vec<SnapshotDataset> = dirs.iter().map(|d| load_dataset(d)).collect::<Result<_, _>>()?;
    let mut run = Run::start(command, argv, out)?;
    for d in dirs {
        run.input(d)?;
    }
    let refs: Vec<&SnapshotDataset> = datasets.iter().collect();
    let outcome = pretrain_multi(&refs, &config, &model)?;
    let keys = normalization_keys(&datasets);
    let normalization = keys
        .iter()
        .cloned()
        .zip(datasets.iter().map(|d| d.manifest.normalization))
        .collect();
    let provenance = json!({
        "command": command,
        "datasets": keys,
        "train": config,
        "best_epoch": outcome.history.best_epoch,
    });
    save_training(run, &outcome, &model, &config, normalization, provenance, stderr)
}

fn cmd_finetune(
    dir: &Path,
    checkpoint: &Path,
    out: &Path,
    config: TrainConfig,
    argv: &[String],
    stderr: &mut dyn Write,
) -> Result<Output, Failure> {
    let ckpt = read_checkpoint(checkpoint)?;
    let dataset = load_dataset(dir)?;
    let mut run = Run::start("finetune", argv, out)?;
    run.input(checkpoint)?;
    run.input(dir)?;
    let outcome = fine_tune(&ckpt.weights, &ckpt.config, &dataset, &config)?;
    let mut normalization = ckpt.normalization.clone();
    normalization.insert(dataset.manifest.network.clone(), dataset.manifest.normalization);
    let provenance = json!({
        "command": "finetune",
        "base": ckpt.provenance,
        "target": dataset.manifest.network,
        "train": config,
        "best_epoch": outcome.history.best_epoch,
    });
    save_training(run, &outcome, &ckpt.config, &config, normalization, provenance, stderr)
}

fn cmd_evaluate(args: &EvaluateArgs, argv: &[String], stderr: &mut dyn Write) -> Result<Output, Failure> {
    let dataset = load_dataset(&args.dataset)?;
    let eval = EvalConfig {
        masking_ratio: args.ratio,
        mask_seed: args.seed,
        trials: args.trials,
    };
    let rows: Option<&[usize]> = match args.split {
        SplitArg::All => None,
        SplitArg::Train => Some(&dataset.manifest.split.train),
        SplitArg::Validation => Some(&dataset.manifest.split.validation),
    };
    let mut run = match &args.out {
        Some(out) => Some(Run::start("evaluate", argv, out)?),
        None => None,
    };
    let (metrics, source): (Metrics, &str) = match &args.checkpoint {
        None => {
            let norm = dataset.manifest.normalization;
            (evaluate(&HarmonicBaseline, &dataset, rows, &norm, &eval)?, "dataset")
        }
        Some(path) => {
            let ckpt = read_checkpoint(path)?;
            if let Some(run) = run.as_mut() {
                run.input(path)?;
            }
            // Scaling learned in training wins; an unseen network falls back
            // to its own training-split scaling.
            let (norm, source) = match ckpt.normalization.get(&dataset.manifest.network) {
                Some(n) => (*n, "checkpoint"),
                None => (dataset.manifest.normalization, "dataset"),
            };
            if source == "dataset" {
                let _ = writeln!(
                    stderr,
                    "network {} not seen in training; using the dataset's own scaling",
                    dataset.manifest.network
                );
            }
            let est = Gatres {
                config: &ckpt.config,
                weights: &ckpt.weights,
            };
            (evaluate(&est, &dataset, rows, &norm, &eval)?, source)
        }
    };
    if let Some(mut run) = run {
        run.input(&args.dataset)?;
        run.write("metrics.json", &pretty_bytes(&metrics))?;
        run.write("node_errors.csv", metrics.node_csv().as_bytes())?;
        run.manifest.config = json!({
            "evaluation": eval,
            "split": format!("{:?}", args.split).to_lowercase(),
            "estimator": if args.baseline { "harmonic_baseline" } else { "gatres" },
            "normalization_source": source,
        });
        run.manifest.seeds = json!({"mask_seed": args.seed});
        run.finish()?;
    }
    Ok(Output::ok(json_of(&metrics)))
}

fn cmd_report(
    train: &Path,
    test: &Path,
    out: &Path,
    bins: usize,
    metrics: &[PathBuf],
    argv: &[String],
) -> Result<Output, Failure> {
    let a = load_dataset(train)?;
    let b = load_dataset(test)?;
    if !crate::generator::same_topology(&a.topology, &b.topology) {
        return Err(GeneratorError::TopologyMismatch.into());
    }
    if bins == 0 {
        return Err(Failure::usage("--bins must be positive"));
    }
    let mut run = Run::start("report", argv, out)?;
    run.input(train)?;
    run.input(test)?;
    let report = shift_report(&a.pooled_junction_pressures(None), &b.pooled_junction_pressures(None), bins);
    run.write("shift.json", &pretty_bytes(&report))?;
    let mut csv = String::from("bin_low,bin_high,density_train,density_test\n");
    for i in 0..report.density_a.len() {
        csv.push_str(&format!(
            "{},{},{},{}\n",
            report.edges[i],
            report.edges[i + 1],
            report.density_a[i],
            report.density_b[i]
        ));
    }
    run.write("histogram.csv", csv.as_bytes())?;
    let mut rows = Vec::new();
    if !metrics.is_empty() {
        let mut table = String::from("source,dataset,masking_ratio,trials,snapshots,mae,mape\n");
        for path in metrics {
            run.input(path)?;
            let m: Metrics = serde_json::from_str(&std::fs::read_to_string(path)?)
                .map_err(|e| Failure::usage(format!("{}: {e}", path.display())))?;
            table.push_str(&format!(
                "{},{},{},{},{},{},{}\n",
                path.display(),
                m.dataset,
                m.masking_ratio,
                m.trials,
                m.snapshots,
                m.mae,
                m.mape
            ));
            rows.push(json!({"source": path.display().to_string(), "dataset": m.dataset,
                "masking_ratio": m.masking_ratio, "mae": m.mae, "mape": m.mape}));
        }
        run.write("metrics.csv", table.as_bytes())?;
    }
    run.manifest.config = json!({"bins": bins});
    run.manifest.seeds = json!({});
    let artifacts = run.manifest.artifacts.clone();
    run.finish()?;
    Ok(Output::ok(json!({
        "ks": report.ks,
        "count_train": report.count_a,
        "count_test": report.count_b,
        "mean_train": report.mean_a,
        "mean_test": report.mean_b,
        "variance_train": report.variance_a,
        "variance_test": report.variance_b,
        "metrics": rows,
        "artifacts": artifacts,
    })))
}

/// Swap the value of `--out`/`-o` in recorded arguments.
fn replace_out(argv: &[String], out: &Path) -> Vec<String> {
    let out = out.display().to_string();
    let mut result = Vec::with_capacity(argv.len());
    let mut iter = argv.iter();
    while let Some(a) = iter.next() {
        if a == "--out" || a == "-o" {
            result.push(a.clone());
            result.push(out.clone());
            iter.next();
        } else if a.starts_with("--out=") {
            result.push(format!("--out={out}"));
        } else {
            result.push(a.clone());
        }
    }
    result
}

fn cmd_rerun(manifest: &Path, out: Option<&Path>, stderr: &mut dyn Write) -> Result<Output, Failure> {
    let text = std::fs::read_to_string(manifest)?;
    let recorded: RunManifest =
        serde_json::from_str(&text).map_err(|e| Failure::usage(format!("run manifest: {e}")))?;
    let argv = match out {
        Some(out) => replace_out(&recorded.argv, out),
        None => recorded.argv.clone(),
    };
    if argv.first().is_some_and(|c| c == "rerun") {
        return Err(Failure::usage("a run manifest cannot record a rerun"));
    }
    let cli = Cli::try_parse_from(std::iter::once("gatres".to_string()).chain(argv.iter().cloned()))
        .map_err(|e| Failure::usage(e.to_string()))?;
    let _ = writeln!(stderr, "re-running: gatres {}", argv.join(" "));
    for FileHash { path, sha256 } in &recorded.inputs {
        match super::manifest::sha256_file(Path::new(path)) {
            Ok(h) if &h == sha256 => {}
            Ok(_) => {
                let _ = writeln!(stderr, "warning: {path} changed since the recorded run");
            }
            Err(e) => {
                let _ = writeln!(stderr, "warning: {path}: {e}");
            }
        }
    }
    dispatch(cli, argv, stderr)
}
