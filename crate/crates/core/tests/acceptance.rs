//! Acceptance suite. Runs every criterion, prints one PASS/FAIL line for
//! each and a summary. Failures are reported but only fail the process when
//! `GATRES_ACCEPTANCE_STRICT` is set, so the measured outcome stays visible
//! in an otherwise green test run.

mod common;

use common::bundled;
use common::gnn::{attention_row_gap, gradient_gap, identity_gap, permutation_gap};
use gatres_core::cli::{run_with, RUN_MANIFEST};
use gatres_core::generator::*;
use gatres_core::gnn::{ModelConfig, ModelWeights};
use gatres_core::hydraulics::*;
use gatres_core::inp::parse_inp;
use gatres_core::network::NetworkModel;
use gatres_core::training::*;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::time::{Duration, Instant};

struct Verdict {
    pass: bool,
    detail: String,
}

fn verdict(pass: bool, detail: impl Into<String>) -> Verdict {
    Verdict {
        pass,
        detail: detail.into(),
    }
}

/// Run one criterion, timing it and turning a panic into a failure.
fn criterion(number: u32, title: &str, limit: Option<Duration>, f: impl FnOnce() -> Verdict) -> bool {
    let start = Instant::now();
    let result = catch_unwind(AssertUnwindSafe(f));
    let elapsed = start.elapsed();
    let mut v = result.unwrap_or_else(|e| {
        let msg = e
            .downcast_ref::<String>()
            .cloned()
            .or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()))
            .unwrap_or_else(|| "panic".into());
        verdict(false, format!("panicked: {msg}"))
    });
    if let Some(limit) = limit {
        if elapsed > limit {
            v.pass = false;
            v.detail += &format!("; over the {}s limit", limit.as_secs());
        }
    }
    println!(
        "criterion {number} {}: {title}: {} ({:.1}s)",
        if v.pass { "PASS" } else { "FAIL" },
        v.detail,
        elapsed.as_secs_f64()
    );
    v.pass
}

fn snapshots(model: &NetworkModel, count: usize, seed: u64, workers: usize) -> SnapshotDataset {
    let cfg = SamplingConfig {
        seed,
        ..SamplingConfig::default()
    };
    generate_snapshots(model, &cfg, count, &SolverConfig::default(), workers).unwrap()
}

fn hw_headloss(q: f64, c: f64, d: f64, l: f64) -> f64 {
    10.667 * c.powf(-1.852) * d.powf(-4.871) * l * q.powf(1.852)
}

fn hydraulic_oracles() -> Verdict {
    let solve = |text: &str| {
        let m = parse_inp(text).unwrap();
        solve_steady_state(&m, &ControlSettings::base(&m), &SolverConfig::default()).unwrap()
    };
    let two = solve("[JUNCTIONS]\nJ1 10 50\n[RESERVOIRS]\nR1 50\n[PIPES]\nP1 R1 J1 1000 300 100\n[OPTIONS]\nUnits LPS\n");
    let three = solve(
        "[JUNCTIONS]\nJ1 5 30\nJ2 8 20\n[RESERVOIRS]\nR1 60\n[PIPES]\nP1 R1 J1 800 250 120\nP2 J1 J2 600 200 110\n[OPTIONS]\nUnits LPS\n",
    );
    let h1 = 60.0 - hw_headloss(0.05, 120.0, 0.25, 800.0);
    let h2 = h1 - hw_headloss(0.02, 110.0, 0.2, 600.0);
    let gaps = [
        (two.pressures[0] - (40.0 - hw_headloss(0.05, 100.0, 0.3, 1000.0))).abs(),
        (three.pressures[0] - (h1 - 5.0)).abs(),
        (three.pressures[1] - (h2 - 8.0)).abs(),
    ];
    let worst = gaps.iter().copied().fold(0.0, f64::max);
    verdict(worst <= 1e-6, format!("max pressure gap {worst:.2e} m (bound 1e-6)"))
}

/// Re-solve every stored snapshot from its controls and check the balance
/// independently.
fn balance_of(model: &NetworkModel, ds: &SnapshotDataset) -> (f64, f64, f64) {
    let solver = HydraulicSolver::new(model, SolverConfig::default()).unwrap();
    let (nj, nr) = (model.junctions.len(), model.reservoirs.len());
    let (mut mass, mut energy, mut drift) = (0.0f64, 0.0f64, 0.0f64);
    for s in 0..ds.len() {
        let row = ds.controls.row(s).to_vec();
        let controls = ControlSettings {
            demands: row[..nj].to_vec(),
            reservoir_heads: row[nj..nj + nr].to_vec(),
            pump_speeds: row[nj + nr..].to_vec(),
            link_status: Vec::new(),
        };
        let state = solver.solve(&controls).unwrap();
        for (a, b) in state.heads.iter().zip(ds.heads.row(s)) {
            drift = drift.max((a - b).abs());
        }
        let r = check_balance(model, &controls, &state);
        mass = mass.max(r.max_mass_residual);
        energy = energy.max(r.max_energy_residual);
    }
    (mass, energy, drift)
}

fn conservation() -> Verdict {
    let mut detail = Vec::new();
    let mut pass = true;
    for (name, count) in [("anytown", 1000), ("net3", 100)] {
        let model = bundled(name);
        let ds = snapshots(&model, count, 21, 1);
        let (mass, energy, drift) = balance_of(&model, &ds);
        pass &= ds.len() == count && mass <= 1e-6 && energy <= 1e-4 && drift == 0.0;
        detail.push(format!("{name} x{count}: mass {mass:.2e} m3/s, energy {energy:.3e} m"));
    }
    verdict(pass, detail.join("; ") + " (bounds 1e-6, 1e-4)")
}

fn gradients() -> Verdict {
    let (mut worst, mut at) = (0.0, String::new());
    for seed in 0..12 {
        let (gap, where_) = gradient_gap(1000 + seed);
        if gap > worst {
            (worst, at) = (gap, where_);
        }
    }
    verdict(worst < 1e-4, format!("12 instances, worst relative gap {worst:.2e} (bound 1e-4) at {at}"))
}

fn structure() -> Verdict {
    let perm = (0..5).map(|s| permutation_gap(200 + s, 25)).fold(0.0, f64::max);
    let ident = (0..5).map(|s| identity_gap(300 + s)).fold(0.0, f64::max);
    let rows = (0..5).map(|s| attention_row_gap(400 + s, 40)).fold(0.0, f64::max);
    verdict(
        perm <= 1e-10 && ident == 0.0 && rows <= 1e-6,
        format!("permutation {perm:.1e} (1e-10), identity {ident:.1e} (exact), attention rows {rows:.1e} (1e-6)"),
    )
}

struct Anytown {
    train: SnapshotDataset,
    test: SnapshotDataset,
    model: ModelConfig,
    weights: ModelWeights,
}

impl Anytown {
    fn mae(&self, est: &impl Estimator, ratio: f64, trials: usize) -> f64 {
        let cfg = EvalConfig {
            masking_ratio: ratio,
            mask_seed: 99,
            trials,
        };
        evaluate(est, &self.test, None, &self.train.manifest.normalization, &cfg)
            .unwrap()
            .mae
    }

    fn gatres(&self) -> Gatres<'_> {
        Gatres {
            config: &self.model,
            weights: &self.weights,
        }
    }
}

fn learning_signal(slot: &mut Option<Anytown>) -> Verdict {
    let net = bundled("anytown");
    let train_set = snapshots(&net, 5000, 1, 1);
    let test = snapshots(&net, 500, 2, 1);
    let model = ModelConfig::default();
    let out = train(&train_set, &TrainConfig::default(), &model).unwrap();
    let a = slot.insert(Anytown {
        train: train_set,
        test,
        model,
        weights: out.weights,
    });
    let g = a.mae(&a.gatres(), 0.95, 10);
    let b = a.mae(&HarmonicBaseline, 0.95, 10);
    verdict(
        g <= 0.7 * b,
        format!(
            "test MAE {g:.3} vs baseline {b:.3} mH2O, {:.0}% lower (needs >= 30%), {} epochs",
            100.0 * (1.0 - g / b),
            out.history.epochs_run()
        ),
    )
}

fn distribution_shift() -> Verdict {
    let net = bundled("net3");
    let random = snapshots(&net, 2000, 5, 1);
    let rows: Vec<usize> = (0..random.len()).collect();
    let (first, second) = rows.split_at(rows.len() / 2);
    let within = ks_statistic(
        &random.pooled_junction_pressures(Some(first)),
        &random.pooled_junction_pressures(Some(second)),
    );
    let noise = NoiseConfig {
        sigma_demand: 0.05,
        sigma_head: 0.0,
        seed: 6,
    };
    let realistic =
        generate_realistic_testset(&net, &PatternConfig::default(), &noise, &SolverConfig::default(), 1).unwrap();
    let across = ks_statistic(
        &random.pooled_junction_pressures(Some(first)),
        &realistic.pooled_junction_pressures(None),
    );
    verdict(
        realistic.len() == 24 && within < across,
        format!("KS between random halves {within:.4} vs random against realistic {across:.4}"),
    )
}

fn masking_trend(slot: &Option<Anytown>) -> Verdict {
    let a = slot.as_ref().expect("trained Anytown model");
    let ratios = [0.90, 0.95, 0.98];
    let m: Vec<f64> = ratios.iter().map(|&r| a.mae(&a.gatres(), r, 20)).collect();
    // The baseline on the same masks, for context only.
    let b: Vec<f64> = ratios.iter().map(|&r| a.mae(&HarmonicBaseline, r, 20)).collect();
    verdict(
        m[0] <= m[1] && m[1] <= m[2],
        format!(
            "MAE at 0.90/0.95/0.98 = {:.3}/{:.3}/{:.3} mH2O over 20 trials (baseline {:.2}/{:.2}/{:.2})",
            m[0], m[1], m[2], b[0], b[1], b[2]
        ),
    )
}

fn generalization(slot: &Option<Anytown>) -> Verdict {
    let a = slot.as_ref().expect("trained Anytown model");
    let sources = [snapshots(&bundled("net1"), 2500, 11, 1), snapshots(&bundled("net3"), 2500, 12, 1)];
    let config = TrainConfig::default();
    let pre = pretrain_multi(&[&sources[0], &sources[1]], &config, &a.model).unwrap();
    let zero = Gatres {
        config: &a.model,
        weights: &pre.weights,
    };
    let zero_shot = a.mae(&zero, 0.95, 10);
    let direct = a.mae(&a.gatres(), 0.95, 10);
    let tuned = fine_tune(&pre.weights, &a.model, &a.train, &config).unwrap();
    let h = &tuned.history;
    let ratio = zero_shot / direct;
    verdict(
        ratio <= 2.0 && h.best_val_mae <= h.initial_val_mae,
        format!(
            "pretrained on net1+net3, zero-shot anytown MAE {zero_shot:.3} vs direct {direct:.3} mH2O \
             ({ratio:.2}x, bound 2x); fine-tune validation {:.3} -> {:.3}",
            h.initial_val_mae, h.best_val_mae
        ),
    )
}

fn cli(args: &[&str]) -> i32 {
    let (mut out, mut err) = (Vec::new(), Vec::new());
    let code = run_with(std::iter::once("gatres").chain(args.iter().copied()), &mut out, &mut err);
    if code != 0 {
        eprintln!("gatres {}: {}", args.join(" "), String::from_utf8_lossy(&err));
    }
    code
}

fn artifacts(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut files: Vec<_> = std::fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.file_name().unwrap() != RUN_MANIFEST)
        .map(|p| (p.file_name().unwrap().to_string_lossy().into_owned(), std::fs::read(&p).unwrap()))
        .collect();
    files.sort();
    files
}

fn determinism() -> Verdict {
    let tmp = tempfile::tempdir().unwrap();
    let p = |name: &str| tmp.path().join(name).display().to_string();
    let small = ["--epochs", "2", "--blocks", "2", "--hidden", "8", "--heads", "2", "--decoder-width", "8"];
    let mut runs: Vec<(String, Vec<String>)> = vec![
        ("gen1".into(), vec!["generate", "anytown", "--count", "300", "--seed", "4", "--workers", "1"].into_iter().map(String::from).collect()),
        ("gen8".into(), vec!["generate", "anytown", "--count", "300", "--seed", "4", "--workers", "8"].into_iter().map(String::from).collect()),
        ("net1".into(), vec!["generate", "net1", "--count", "200", "--seed", "5", "--workers", "8"].into_iter().map(String::from).collect()),
        ("real".into(), vec!["generate", "anytown", "--mode", "realistic", "--seed", "6", "--workers", "8"].into_iter().map(String::from).collect()),
    ];
    let mut train_args: Vec<String> = vec!["train".into(), p("gen1")];
    train_args.extend(small.iter().map(|s| s.to_string()));
    runs.push(("train".into(), train_args));
    let mut pre_args: Vec<String> = vec!["pretrain".into(), p("gen8"), p("net1")];
    pre_args.extend(small.iter().map(|s| s.to_string()));
    runs.push(("pretrain".into(), pre_args));
    runs.push(("finetune".into(), vec!["finetune".into(), p("real"), "--checkpoint".into(), p("pretrain") + "/model.ckpt", "--epochs".into(), "2".into()]));
    runs.push(("evaluate".into(), vec!["evaluate".into(), p("real"), "--checkpoint".into(), p("train") + "/model.ckpt", "--trials".into(), "3".into()]));
    runs.push(("baseline".into(), vec!["evaluate".into(), p("real"), "--baseline".into()]));
    runs.push(("report".into(), vec!["report".into(), p("gen1"), p("real"), "--metrics".into(), p("evaluate") + "/metrics.json"]));

    let mut failures = Vec::new();
    for (name, mut args) in runs {
        args.extend(["--out".to_string(), p(&name)]);
        let refs: Vec<&str> = args.iter().map(String::as_str).collect();
        if cli(&refs) != 0 {
            failures.push(format!("{name} failed"));
            continue;
        }
        let again = format!("{name}-rerun");
        let manifest = format!("{}/{RUN_MANIFEST}", p(&name));
        if cli(&["rerun", &manifest, "--out", &p(&again)]) != 0 {
            failures.push(format!("{name} rerun failed"));
        } else if artifacts(Path::new(&p(&name))) != artifacts(Path::new(&p(&again))) {
            failures.push(format!("{name} rerun differs"));
        }
    }
    if artifacts(Path::new(&p("gen1"))) != artifacts(Path::new(&p("gen8"))) {
        failures.push("--workers 8 output differs from --workers 1".into());
    }
    if failures.is_empty() {
        verdict(true, "10 commands re-run byte-identical; 1 and 8 workers agree")
    } else {
        verdict(false, failures.join("; "))
    }
}

fn main() {
    let wanted: Vec<u32> = std::env::args().skip(1).filter_map(|a| a.parse().ok()).collect();
    let on = |n: u32| wanted.is_empty() || wanted.contains(&n);
    let mut results = Vec::new();
    let secs = Duration::from_secs;
    let mut anytown = None;
    if on(1) {
        results.push(criterion(1, "hydraulic oracles", Some(secs(1)), hydraulic_oracles));
    }
    if on(2) {
        results.push(criterion(2, "conservation", Some(secs(120)), conservation));
    }
    if on(3) {
        results.push(criterion(3, "gradient check", Some(secs(60)), gradients));
    }
    if on(4) {
        results.push(criterion(4, "equivariance, identity, attention", None, structure));
    }
    if on(5) || on(7) || on(8) {
        results.push(criterion(5, "learning signal on anytown", Some(secs(900)), || learning_signal(&mut anytown)));
    }
    if on(6) {
        results.push(criterion(6, "distribution shift on net3", Some(secs(300)), distribution_shift));
    }
    if on(7) {
        results.push(criterion(7, "masking-ratio trend", None, || masking_trend(&anytown)));
    }
    if on(8) {
        results.push(criterion(8, "zero-shot and fine-tuning", None, || generalization(&anytown)));
    }
    if on(9) {
        results.push(criterion(9, "re-run determinism", None, determinism));
    }
    let failed = results.iter().filter(|p| !**p).count();
    println!("acceptance: {} passed, {failed} failed", results.len() - failed);
    if failed > 0 && std::env::var_os("GATRES_ACCEPTANCE_STRICT").is_some() {
        std::process::exit(1);
    }
}
