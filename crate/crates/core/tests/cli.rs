use gatres_core::cli::{run_with, RUN_MANIFEST};
use serde_json::Value;
use std::path::Path;

struct Outcome {
    code: i32,
    json: Value,
    stderr: String,
}

fn gatres(args: &[&str]) -> Outcome {
    let (mut out, mut err) = (Vec::new(), Vec::new());
    let code = run_with(std::iter::once("gatres").chain(args.iter().copied()), &mut out, &mut err);
    let text = String::from_utf8(out).unwrap();
    Outcome {
        code,
        json: serde_json::from_str(&text).unwrap_or(Value::Null),
        stderr: String::from_utf8(err).unwrap(),
    }
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn write(dir: &Path, name: &str, text: &str) -> String {
    let path = dir.join(name);
    std::fs::write(&path, text).unwrap();
    path.display().to_string()
}

/// Every file of `dir` except the run manifest, by name.
fn contents(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut files: Vec<_> = std::fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.file_name().unwrap() != RUN_MANIFEST)
        .map(|p| (p.file_name().unwrap().to_string_lossy().into_owned(), std::fs::read(&p).unwrap()))
        .collect();
    files.sort();
    files
}

const TWO_NODE: &str = "[JUNCTIONS]\nJ1 10 5\n[RESERVOIRS]\nR1 50\n[PIPES]\nP1 R1 J1 1000 300 100\n[OPTIONS]\nUnits LPS\n";

#[test]
fn validate_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let ok = gatres(&["validate", "anytown"]);
    assert_eq!(ok.code, 0, "{}", ok.stderr);
    assert!(ok.json["issues"].as_array().unwrap().is_empty());

    let island = write(
        dir.path(),
        "island.inp",
        "[JUNCTIONS]\nJ1 10\nJ2 10\n[RESERVOIRS]\nR1 50\n[PIPES]\nP1 R1 J1 100 100 100\n",
    );
    let bad = gatres(&["validate", &island]);
    assert_eq!(bad.code, 1);
    assert!(!bad.json["issues"].as_array().unwrap().is_empty());

    let broken = write(dir.path(), "broken.inp", "[PIPES]\nP1 A B 100 100 100\n");
    let parse = gatres(&["validate", &broken]);
    assert_eq!(parse.code, 2);
    assert!(parse.json["error"].is_string());

    assert_eq!(gatres(&["validate", "/no/such/file.inp"]).code, 2);
    assert_eq!(gatres(&["validate", "anytown", "--frobnicate"]).code, 2);
    assert_eq!(gatres(&["--help"]).code, 0);
}

#[test]
fn simulate_reports_pressures() {
    let dir = tempfile::tempdir().unwrap();
    let net = write(dir.path(), "two.inp", TWO_NODE);
    let still = gatres(&["simulate", &net, "--demand-scale", "0"]);
    assert_eq!(still.code, 0, "{}", still.stderr);
    assert!((still.json["pressures"][0].as_f64().unwrap() - 40.0).abs() < 1e-6);
    assert!(still.json["flows"][0].as_f64().unwrap().abs() < 1e-9);
    assert_eq!(still.json["node_ids"][0], "J1");

    let flowing = gatres(&["simulate", &net]);
    assert_eq!(flowing.code, 0);
    assert!((flowing.json["flows"][0].as_f64().unwrap() - 0.005).abs() < 1e-9);
    assert!(flowing.json["pressures"][0].as_f64().unwrap() < 40.0);

    let starved = gatres(&["simulate", &net, "--max-iterations", "1"]);
    assert_eq!(starved.code, 3);
    assert_eq!(starved.json["converged"], false);
}

#[test]
fn pipeline_is_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let p = |name: &str| dir.path().join(name);
    let gen = |out: &Path, workers: &str| {
        gatres(&["generate", "net1", "--out", s(out), "--count", "60", "--seed", "3", "--workers", workers])
    };
    let a = gen(&p("a"), "1");
    assert_eq!(a.code, 0, "{}", a.stderr);
    assert_eq!(a.json["snapshots"], 60);
    assert_eq!(gen(&p("b"), "4").code, 0);
    assert_eq!(contents(&p("a")), contents(&p("b")));
    assert!(p("a").join(RUN_MANIFEST).is_file());

    let trained = gatres(&[
        "train", s(&p("a")), "--out", s(&p("model")), "--epochs", "2", "--blocks", "1", "--hidden", "8",
        "--heads", "2", "--decoder-width", "8", "--seed", "4",
    ]);
    assert_eq!(trained.code, 0, "{}", trained.stderr);
    assert_eq!(trained.json["epochs_run"], 2);

    let again = gatres(&["rerun", s(&p("model").join(RUN_MANIFEST)), "--out", s(&p("model2"))]);
    assert_eq!(again.code, 0, "{}", again.stderr);
    assert_eq!(contents(&p("model")), contents(&p("model2")));

    let ckpt = p("model").join("model.ckpt");
    let eval = gatres(&["evaluate", s(&p("a")), "--checkpoint", s(&ckpt), "--trials", "2", "--out", s(&p("eval"))]);
    assert_eq!(eval.code, 0, "{}", eval.stderr);
    assert_eq!(eval.json["masking_ratio"], 0.95);
    assert_eq!(eval.json["trial_mae"].as_array().unwrap().len(), 2);
    assert!(p("eval").join("metrics.json").is_file());
    assert!(p("eval").join("node_errors.csv").is_file());

    let base = gatres(&["evaluate", s(&p("a")), "--baseline", "--split", "validation"]);
    assert_eq!(base.code, 0, "{}", base.stderr);
    assert_eq!(base.json["snapshots"], 6);

    let real = gatres(&["generate", "net1", "--mode", "realistic", "--out", s(&p("real")), "--timesteps", "24"]);
    assert_eq!(real.code, 0, "{}", real.stderr);
    assert_eq!(real.json["realistic"], true);
    let report = gatres(&[
        "report", s(&p("a")), s(&p("real")), "--out", s(&p("report")), "--metrics", s(&p("eval").join("metrics.json")),
    ]);
    assert_eq!(report.code, 0, "{}", report.stderr);
    let ks = report.json["ks"].as_f64().unwrap();
    assert!((0.0..=1.0).contains(&ks));
    for f in ["shift.json", "histogram.csv", "metrics.csv"] {
        assert!(p("report").join(f).is_file(), "{f}");
    }

    let tuned = gatres(&[
        "finetune", s(&p("real")), "--checkpoint", s(&ckpt), "--out", s(&p("tuned")), "--epochs", "1",
    ]);
    assert_eq!(tuned.code, 0, "{}", tuned.stderr);
    assert!(tuned.json["best_val_mae"].as_f64().unwrap() <= tuned.json["initial_val_mae"].as_f64().unwrap());
}

#[test]
fn training_on_nothing_is_a_domain_error() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    let r = gatres(&["train", s(dir.path()), "--out", s(&out)]);
    assert_eq!(r.code, 1);
    assert_eq!(r.json["error"], "empty_dataset");
}

#[test]
fn mismatched_report_is_refused() {
    let dir = tempfile::tempdir().unwrap();
    let p = |name: &str| dir.path().join(name);
    assert_eq!(gatres(&["generate", "net1", "-o", s(&p("a")), "--count", "5"]).code, 0);
    assert_eq!(gatres(&["generate", "anytown", "-o", s(&p("b")), "--count", "5"]).code, 0);
    let r = gatres(&["report", s(&p("a")), s(&p("b")), "-o", s(&p("r"))]);
    assert_eq!(r.code, 1, "{}", r.stderr);
}
