//! End-to-end tests of the `permrank` binary.

use std::fs;
use std::path::Path;
use std::process::{Command, Output};
use std::time::{Duration, Instant};

use permrank::game::{RegretTrace, CSV_HEADER};
use serde_json::Value;

fn permrank(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_permrank"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn run_into(dir: &Path, extra: &[&str]) -> Output {
    let out = dir.to_str().unwrap();
    let mut args = vec!["run", "--out", out];
    args.extend_from_slice(extra);
    permrank(&args)
}

fn read_json(path: &Path) -> Value {
    serde_json::from_slice(&fs::read(path).unwrap()).unwrap()
}

const BASIC: &[&str] = &["--algo", "banditrank", "--n", "3", "--t", "100", "--adversary", "fixed", "--seed", "7"];

#[test]
fn run_writes_trace_with_one_row_per_round() {
    let dir = tempfile::tempdir().unwrap();
    let out = run_into(dir.path(), BASIC);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let csv = fs::read_to_string(dir.path().join("trace.csv")).unwrap();
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines[0], CSV_HEADER);
    assert_eq!(lines[0], "t,loss,cum_loss,cum_opt,regret");
    assert_eq!(lines.len(), 101);

    let summary = read_json(&dir.path().join("summary.json"));
    for key in [
        "n",
        "t_horizon",
        "algo",
        "adversary",
        "seed",
        "gamma",
        "eta",
        "final_regret",
        "steps_per_second",
        "clip_events",
    ] {
        assert!(summary.get(key).is_some(), "summary lacks {key}");
    }
    assert_eq!(summary["t_horizon"], 100);
    assert_eq!(summary["algo"], "banditrank");

    let trace = RegretTrace::read_csv(csv.as_bytes()).unwrap();
    assert_eq!(summary["final_regret"].as_f64().unwrap(), trace.final_regret());

    let manifest = read_json(&dir.path().join("manifest.json"));
    assert_eq!(manifest["seed"], 7);
    assert!(manifest["rng"].as_str().unwrap().contains("ChaCha8"));
    assert!(manifest["resolved"]["gamma"].as_f64().is_some());
    assert!(manifest["timing"]["median_step_seconds"].as_f64().unwrap() >= 0.0);
    assert!(manifest["timing"]["p95_step_seconds"].as_f64().is_some());
}

#[test]
fn repeated_run_is_byte_identical() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    assert!(run_into(a.path(), BASIC).status.success());
    assert!(run_into(b.path(), BASIC).status.success());
    let read = |d: &Path| fs::read(d.join("trace.csv")).unwrap();
    assert_eq!(read(a.path()), read(b.path()));
}

#[test]
fn json_trace_round_trips() {
    let dir = tempfile::tempdir().unwrap();
    let mut args = vec!["--format", "json"];
    args.extend_from_slice(&["--algo", "osmdrank", "--n", "4", "--t", "50", "--adversary", "seasonal:5", "--seed", "3"]);
    assert!(run_into(dir.path(), &args).status.success());
    let bytes = fs::read(dir.path().join("trace.json")).unwrap();
    let trace = RegretTrace::read_json(bytes.as_slice()).unwrap();
    assert_eq!(trace.len(), 50);
    let mut again = Vec::new();
    trace.write_json(&mut again).unwrap();
    assert_eq!(RegretTrace::read_json(again.as_slice()).unwrap(), trace);
    assert!(!dir.path().join("trace.csv").exists());
}

#[test]
fn invalid_gamma_is_a_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    let mut args = BASIC.to_vec();
    args.extend_from_slice(&["--gamma", "2.0"]);
    let out = run_into(dir.path(), &args);
    assert_eq!(out.status.code(), Some(2));
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert_eq!(stderr.trim_end().lines().count(), 1, "diagnostic: {stderr}");
    assert!(stderr.contains("gamma"));
    assert!(!dir.path().join("trace.csv").exists());
}

#[test]
fn unknown_values_are_usage_errors() {
    let dir = tempfile::tempdir().unwrap();
    for args in [
        vec!["--algo", "exp3", "--n", "3", "--t", "10"],
        vec!["--algo", "banditrank", "--n", "3", "--t", "10", "--adversary", "wild"],
        vec!["--algo", "banditrank", "--n", "1", "--t", "10"],
        vec!["--algo", "uniform", "--n", "3", "--t", "10", "--eta", "0.1"],
        vec!["--algo", "banditrank", "--n", "3", "--t", "10", "--adversary", "fixed:1,1,1"],
    ] {
        let out = run_into(dir.path(), &args);
        assert_eq!(out.status.code(), Some(2), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
    }
    // clap's own parse errors use the same code
    assert_eq!(permrank(&["run", "--n", "three"]).status.code(), Some(2));
}

#[test]
fn sweep_runs_every_child_and_lists_its_seed() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    let result = permrank(&[
        "sweep", "--algo", "banditrank", "--n", "3", "--adversary", "noisy-fixed", "--t-grid", "50,100,200",
        "--seeds", "10", "--seed", "5", "--jobs", "2", "--out", out,
    ]);
    assert!(result.status.success(), "{}", String::from_utf8_lossy(&result.stderr));
    let manifest = read_json(&dir.path().join("manifest.json"));
    let children = manifest["children"].as_array().unwrap();
    assert_eq!(children.len(), 30);
    for t in [50, 100, 200] {
        let seeds: Vec<u64> = children
            .iter()
            .filter(|c| c["t"] == t)
            .map(|c| c["seed"].as_u64().unwrap())
            .collect();
        assert_eq!(seeds, (0..10u64).map(|k| 5 ^ k).collect::<Vec<_>>());
    }
    let aggregate = read_json(&dir.path().join("sweep.json"));
    let horizons = aggregate["horizons"].as_array().unwrap();
    assert_eq!(horizons.len(), 3);
    for h in horizons {
        assert_eq!(h["replicas"], 10);
        assert!(h["mean_regret"].as_f64().is_some() && h["std_regret"].as_f64().is_some());
    }
    assert!(aggregate["slope"].as_f64().is_some());
    // only the two aggregate files are written
    let mut names: Vec<String> = fs::read_dir(dir.path())
        .unwrap()
        .map(|e| e.unwrap().file_name().into_string().unwrap())
        .collect();
    names.sort();
    assert_eq!(names, ["manifest.json", "sweep.json"]);
}

#[test]
fn sweep_is_independent_of_job_count() {
    let one = tempfile::tempdir().unwrap();
    let three = tempfile::tempdir().unwrap();
    for (dir, jobs) in [(&one, "1"), (&three, "3")] {
        let out = permrank(&[
            "sweep", "--algo", "osmdrank", "--n", "4", "--t-grid", "30,60,90", "--seeds", "10", "--seed", "9",
            "--jobs", jobs, "--out", dir.path().to_str().unwrap(),
        ]);
        assert!(out.status.success());
    }
    let read = |d: &Path| fs::read(d.join("sweep.json")).unwrap();
    assert_eq!(read(one.path()), read(three.path()));
}

#[test]
fn synthetic_sweep_recovers_known_slopes() {
    for (curve, slope) in [("sqrt", 0.5), ("linear", 1.0)] {
        let dir = tempfile::tempdir().unwrap();
        let out = permrank(&[
            "sweep", "--algo", "banditrank", "--n", "3", "--t-grid", "100,1000,10000,100000", "--seeds", "10",
            "--synthetic", curve, "--out", dir.path().to_str().unwrap(),
        ]);
        assert!(out.status.success());
        let fitted = read_json(&dir.path().join("sweep.json"))["slope"].as_f64().unwrap();
        assert!((fitted - slope).abs() <= 1e-9, "{curve}: {fitted}");
    }
}

#[test]
fn sweep_with_too_few_seeds_reports_failure() {
    let dir = tempfile::tempdir().unwrap();
    let out = permrank(&[
        "sweep", "--algo", "banditrank", "--n", "3", "--t-grid", "20,40,80", "--seeds", "2", "--out",
        dir.path().to_str().unwrap(),
    ]);
    // the per-horizon points are still written; only the slope needs 10 seeds
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(read_json(&dir.path().join("sweep.json"))["slope"].is_null());
}

#[test]
fn verify_small_suite_passes_quickly() {
    let start = Instant::now();
    let out = permrank(&["verify", "--max-n", "3"]);
    assert!(start.elapsed() < Duration::from_secs(10));
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stdout));
    let table = String::from_utf8(out.stdout).unwrap();
    let header = table.lines().next().unwrap();
    for column in ["formula", "max_residual", "tolerance", "status"] {
        assert!(header.contains(column));
    }
    for id in ["pair_prob", "triple_order_prob", "mixture_pair_marginal", "h_matrix", "lemma1_inequality", "uniform_covariance"] {
        assert!(table.lines().any(|l| l.starts_with(id) && l.contains("PASS")), "row {id}");
    }
}

#[test]
fn verify_rejects_degenerate_sizes() {
    assert_eq!(permrank(&["verify", "--max-n", "1"]).status.code(), Some(2));
}
