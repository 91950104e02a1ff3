use std::path::Path;
use std::process::{Command, Output};

use ising_relax_harness::metrics::{RunMetrics, StepRecord};
use serde_json::Value;

fn cli(args: &[&str], out: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_ising-relax"))
        .args(args)
        .env_remove("ISING_RELAX_OUT")
        .current_dir(out)
        .output()
        .expect("binary runs")
}

fn json(path: &Path) -> Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

fn jsonl(path: &Path) -> Vec<Value> {
    std::fs::read_to_string(path).unwrap().lines().map(|l| serde_json::from_str(l).unwrap()).collect()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

#[test]
fn relax_writes_metrics_summary_and_history() {
    let dir = tempfile::tempdir().unwrap();
    let o = cli(&["relax", "--lattice", "16x16", "--pes", "2x2", "--beta", "0.4", "--seed", "7", "--steps", "30", "--out", "run"], dir.path());
    assert!(o.status.success(), "{}", stderr(&o));
    let run = dir.path().join("run");
    let summary = json(&run.join("summary.json"));
    assert_eq!(summary["seed"], 7);
    assert_eq!(summary["generator"], ising_relax::rngstream::GENERATOR_NAME);
    assert_eq!(summary["config"]["width"], 16);
    assert_eq!(summary["config"]["sources"]["beta"], "flag");

    let lines = jsonl(&run.join("metrics.jsonl"));
    let steps: Vec<StepRecord> =
        lines.iter().filter(|v| v["kind"] == "step").map(|v| serde_json::from_value(v.clone()).unwrap()).collect();
    assert_eq!(steps.len(), 30);
    assert_eq!(lines.last().unwrap()["kind"], "summary");
    let tmax = summary["results"]["tmax"].as_f64().unwrap();
    let recomputed = RunMetrics::from_records(steps, tmax).aggregates;
    let reported: ising_relax_harness::metrics::Aggregates =
        serde_json::from_value(summary["results"]["aggregates"].clone()).unwrap();
    assert_eq!(recomputed, reported);

    let history = std::fs::read_to_string(run.join("history.txt")).unwrap();
    assert!(history.starts_with(ising_relax::oracle::HISTORY_HEADER));
    assert_eq!(history.lines().count() - 1, reported.events);
}

#[test]
fn relax_and_oracle_histories_compare_equal() {
    let dir = tempfile::tempdir().unwrap();
    let common = ["--lattice", "12x12", "--pes", "2x3", "--beta", "0.5", "--seed", "2", "--steps", "25"];
    for (cmd, out) in [("relax", "a"), ("oracle", "b")] {
        let mut args = vec![cmd];
        args.extend_from_slice(&common);
        args.extend_from_slice(&["--out", out]);
        let o = cli(&args, dir.path());
        assert!(o.status.success(), "{}", stderr(&o));
    }
    let o = cli(&["compare", "a/history.txt", "b/history.txt"], dir.path());
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(String::from_utf8_lossy(&o.stdout).contains("equal"));

    let o = cli(&["relax", "--lattice", "12x12", "--pes", "2x3", "--beta", "0.5", "--seed", "3", "--steps", "25", "--out", "c"], dir.path());
    assert!(o.status.success());
    let o = cli(&["compare", "a/history.txt", "c/history.txt"], dir.path());
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("differ at event"));
}

#[test]
fn partition_error_before_simulation() {
    let dir = tempfile::tempdir().unwrap();
    let o = cli(&["relax", "--pes", "3x3", "--lattice", "16x16", "--beta", "0.4", "--steps", "5", "--out", "x"], dir.path());
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("partition"), "{}", stderr(&o));
    assert!(!dir.path().join("x").exists());
}

#[test]
fn usage_errors_exit_with_two() {
    let dir = tempfile::tempdir().unwrap();
    for args in [
        vec!["relax", "--lattice", "8x8", "--beta", "0.4", "--bogus"],
        vec!["relax", "--lattice", "8x8", "--pes", "2x2", "--steps", "2"],
        vec!["frobnicate"],
    ] {
        let o = cli(&args, dir.path());
        assert_eq!(o.status.code(), Some(2), "{args:?}: {}", stderr(&o));
    }
    assert!(cli(&["--help"], dir.path()).status.success());
}

#[test]
fn config_file_with_overriding_flag() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(
        dir.path().join("run.json"),
        r#"{"lattice": "8x8", "pes": "2x2", "beta": 0.2, "seed": 4, "steps": 5, "out": "from-file"}"#,
    )
    .unwrap();
    let o = cli(&["relax", "--config", "run.json", "--beta", "0.6"], dir.path());
    assert!(o.status.success(), "{}", stderr(&o));
    let summary = json(&dir.path().join("from-file/summary.json"));
    assert_eq!(summary["config"]["params"]["beta"], 0.6);
    assert_eq!(summary["config"]["sources"]["beta"], "flag");
    assert_eq!(summary["config"]["sources"]["seed"], "file");
    assert_eq!(summary["seed"], 4);

    std::fs::write(dir.path().join("bad.json"), r#"{"lattice": "8x8", "temperature": 3}"#).unwrap();
    let o = cli(&["relax", "--config", "bad.json"], dir.path());
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("temperature"));
}

#[test]
fn output_directory_from_environment() {
    let dir = tempfile::tempdir().unwrap();
    let o = Command::new(env!("CARGO_BIN_EXE_ising-relax"))
        .args(["enumerate", "--lattice", "3x3", "--beta", "0.3"])
        .env("ISING_RELAX_OUT", dir.path().join("env-out"))
        .output()
        .unwrap();
    assert!(o.status.success(), "{}", stderr(&o));
    let summary = json(&dir.path().join("env-out/summary.json"));
    assert_eq!(summary["config"]["sources"]["out"], "env");
    assert!(summary["results"]["exact"]["log_partition"].as_f64().unwrap() > 0.0);
}

#[test]
fn divergence_exits_nonzero() {
    let dir = tempfile::tempdir().unwrap();
    let o = cli(
        &["relax", "--lattice", "16x16", "--pes", "2x2", "--beta", "0", "--tmax", "5", "--max-iterations", "1", "--steps", "3"],
        dir.path(),
    );
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("iterations"), "{}", stderr(&o));
}

#[test]
fn bench_writes_sweep_table() {
    let dir = tempfile::tempdir().unwrap();
    let o = cli(&["bench", "--beta", "0.4", "--block", "4x4", "--sweep", "2x2,4x4", "--steps", "20", "--out", "b"], dir.path());
    assert!(o.status.success(), "{}", stderr(&o));
    let mut reader = csv::Reader::from_path(dir.path().join("b/sweep.csv")).unwrap();
    let headers = reader.headers().unwrap().clone();
    assert!(headers.iter().any(|h| h == "mean_g"));
    let rows: Vec<_> = reader.records().map(Result::unwrap).collect();
    assert_eq!(rows.len(), 2);
    assert_eq!(&rows[1][1], "16");
    let steps = jsonl(&dir.path().join("b/metrics.jsonl")).iter().filter(|v| v["kind"] == "step").count();
    assert_eq!(steps, 40);
}

#[test]
fn sequential_engines_run_from_cli() {
    let dir = tempfile::tempdir().unwrap();
    let o = cli(&["nfold", "--lattice", "4x4", "--beta", "0.3", "--time", "200", "--out", "n"], dir.path());
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(dir.path().join("n/history.txt").exists());
    let o = cli(&["metropolis", "--lattice", "4x4", "--beta", "0.3", "--updates", "5000", "--out", "m"], dir.path());
    assert!(o.status.success(), "{}", stderr(&o));
    let s = json(&dir.path().join("m/summary.json"));
    assert!(s["results"]["measured"]["exact"]["mean_energy"].is_number());
}
