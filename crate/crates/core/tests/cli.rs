use std::path::Path;
use std::process::{Command, Output};

use hsketch::bench::{read_report, ExperimentKind, Series};
use serde_json::Value;

fn hsketch(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_hsketch"))
        .args(args)
        .env_remove("HS_SEED")
        .output()
        .unwrap()
}

fn stdout_json(out: &Output) -> Value {
    assert!(out.status.success(), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    serde_json::from_slice(&out.stdout).unwrap()
}

fn floats(v: &Value) -> Vec<f64> {
    v.as_array().unwrap().iter().map(|x| x.as_f64().unwrap()).collect()
}

const SOLVE: &[&str] = &[
    "solve", "--synthetic", "n=2048,d=16", "--lasso", "5.0", "--sketch", "countsketch", "--gamma", "10", "--iters", "20",
    "--seed", "7", "--output", "-",
];

#[test]
fn solve_trace_decreases_to_floor() {
    let v = stdout_json(&hsketch(SOLVE));
    let records = v["trace"]["records"].as_array().unwrap();
    assert!(records.len() >= 2);
    let errs: Vec<f64> = records.iter().map(|r| r["prediction_error"].as_f64().unwrap()).collect();
    let floor = 1e-12 * errs[0];
    for w in errs.windows(2) {
        assert!(w[1] <= w[0] || w[1] <= floor, "{errs:?}");
    }
    assert!(v["relative_error"].as_f64().unwrap() <= 1e-8);
}

#[test]
fn solve_is_deterministic() {
    let a = stdout_json(&hsketch(SOLVE));
    let b = stdout_json(&hsketch(SOLVE));
    assert_eq!(a["x"], b["x"]);
    let errs = |v: &Value| -> Vec<Value> {
        v["trace"]["records"].as_array().unwrap().iter().map(|r| r["prediction_error"].clone()).collect()
    };
    assert_eq!(errs(&a), errs(&b));
}

#[test]
fn seed_falls_back_to_environment() {
    let with_flag = stdout_json(&hsketch(SOLVE));
    let args: Vec<&str> = SOLVE.iter().copied().filter(|a| *a != "--seed" && *a != "7").collect();
    let out = Command::new(env!("CARGO_BIN_EXE_hsketch")).args(&args).env("HS_SEED", "7").output().unwrap();
    assert_eq!(stdout_json(&out)["x"], with_flag["x"]);
}

#[test]
fn exact_and_solve_agree() {
    let base = ["--synthetic", "n=1024,d=12,density=0.3", "--lasso", "2", "--seed", "3", "--output", "-"];
    let exact = stdout_json(&hsketch(&[&["exact"][..], &base].concat()));
    let solve = stdout_json(&hsketch(&[&["solve", "--iters", "40"][..], &base].concat()));
    let (xe, xs) = (floats(&exact["x"]), floats(&solve["x"]));
    let norm = xe.iter().map(|v| v * v).sum::<f64>().sqrt();
    let diff = xe.iter().zip(&xs).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt();
    assert!(diff <= 1e-8 * norm, "{diff} vs {norm}");
    assert_eq!(exact["converged"], Value::Bool(true));
}

#[test]
fn generate_then_load() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("g.svm");
    let truth = dir.path().join("t.txt");
    let out = hsketch(&[
        "generate", "--synthetic", "n=300,d=6,density=0.5,sigma=0", "--seed", "1", "--output",
        data.to_str().unwrap(), "--truth", truth.to_str().unwrap(),
    ]);
    assert!(out.status.success());
    let exact = stdout_json(&hsketch(&["exact", "--input", data.to_str().unwrap(), "--features", "6"]));
    let x = floats(&exact["x"]);
    let t: Vec<f64> = std::fs::read_to_string(&truth).unwrap().lines().map(|l| l.parse().unwrap()).collect();
    // noiseless instance: least squares recovers the ground truth
    assert!(x.iter().zip(&t).all(|(a, b)| (a - b).abs() < 1e-9), "{x:?} vs {t:?}");
}

#[test]
fn csv_input_and_column_scaling() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("d.csv");
    let mut text = String::from("y,a,b\n");
    for i in 0..20 {
        let (a, b) = (i as f64, ((i * 7) % 5) as f64 * 100.0);
        text += &format!("{},{a},{b}\n", 2.0 * a - 0.01 * b);
    }
    std::fs::write(&path, text).unwrap();
    for extra in [&[][..], &["--scale-columns"][..]] {
        let args = [&["exact", "--input", path.to_str().unwrap()][..], extra].concat();
        let x = floats(&stdout_json(&hsketch(&args))["x"]);
        assert!((x[0] - 2.0).abs() < 1e-9 && (x[1] + 0.01).abs() < 1e-9, "{x:?}");
    }
}

#[test]
fn benches_write_reports() {
    let dir = tempfile::tempdir().unwrap();
    let json = dir.path().join("b.json");
    let csv = dir.path().join("b.csv");
    let out = hsketch(&[
        "sketch-bench", "--synthetic", "n=512,d=8,density=0.2", "--gammas", "2,4", "--families", "countsketch,sjlt",
        "--trials", "3", "--output", json.to_str().unwrap(), "--csv", csv.to_str().unwrap(),
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let r = read_report(&json).unwrap();
    assert_eq!(r.kind, ExperimentKind::SketchBaseline);
    assert_eq!(r.series.len(), 4);
    assert_eq!(std::fs::read_to_string(&csv).unwrap().lines().count(), 1 + 4 * 3);

    let out = hsketch(&[
        "converge-bench", "--synthetic", "n=512,d=8", "--lasso", "5", "--methods", "exact,countsketch:10,sjlt:10:4",
        "--trials", "2", "--time-budget", "5", "--max-iters", "30", "--output", json.to_str().unwrap(),
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let r = read_report(&json).unwrap();
    assert_eq!(r.kind, ExperimentKind::Convergence);
    let labels: Vec<&str> = r.series.iter().map(Series::method).collect();
    assert_eq!(labels, ["Exact", "CountSketch(10)", "SJLT(10, s=4)"]);
}

#[test]
fn config_file_supplies_defaults() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("c.json");
    std::fs::write(&cfg, r#"{"seed": 7, "iters": 20}"#).unwrap();
    let args: Vec<&str> = SOLVE.iter().copied().filter(|a| *a != "--seed" && *a != "7").collect();
    let args = [&args[..], &["--config", cfg.to_str().unwrap()]].concat();
    assert_eq!(stdout_json(&hsketch(&args))["x"], stdout_json(&hsketch(SOLVE))["x"]);
}

#[test]
fn diagnose_prints_table() {
    let out = hsketch(&["diagnose", "--trials", "500", "--synthetic", "n=1024,d=8", "--seeds", "3"]);
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.contains("CountSketch lemmas"));
    assert!(text.contains("Subspace embedding"));
    assert_eq!(text.matches("PASS").count() + text.matches("FAIL").count(), 7 + 3);
}

#[test]
fn exit_codes() {
    let out = hsketch(&["solve", "--bogus"]);
    assert_eq!(out.status.code(), Some(1));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.starts_with("hsketch: error: "), "{err}");
    assert!(err.contains("Usage"));

    assert_eq!(hsketch(&["exact"]).status.code(), Some(1));
    assert_eq!(hsketch(&["exact", "--synthetic", "n=10"]).status.code(), Some(1));
    assert_eq!(hsketch(&["exact", "--synthetic", "n=100,d=4", "--lasso", "1", "--l2-ball", "1"]).status.code(), Some(1));
    assert_eq!(hsketch(&["solve", "--synthetic", "n=100,d=4", "--sketch", "nope"]).status.code(), Some(1));

    let missing = hsketch(&["exact", "--input", "/nonexistent/file.svm"]);
    assert_eq!(missing.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&missing.stderr).starts_with("hsketch: error: "));

    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.svm");
    std::fs::write(&bad, "1 0:1.0\n").unwrap();
    assert_eq!(hsketch(&["exact", "--input", bad.to_str().unwrap()]).status.code(), Some(2));

    // two identical columns: the least-squares Hessian is singular
    let sing = dir.path().join("sing.svm");
    std::fs::write(&sing, "1 1:1 2:1\n2 1:2 2:2\n3 1:3 2:3\n").unwrap();
    let out = hsketch(&["diagnose", "--trials", "10", "--input", sing.to_str().unwrap(), "--seeds", "1"]);
    assert_eq!(out.status.code(), Some(3), "{}", String::from_utf8_lossy(&out.stderr));

    assert_eq!(hsketch(&["--help"]).status.code(), Some(0));
    assert!(Path::new(env!("CARGO_BIN_EXE_hsketch")).exists());
}
