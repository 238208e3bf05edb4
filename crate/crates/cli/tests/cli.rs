//! End-to-end checks of the command-line interface: schemas, exit codes,
//! and byte-level determinism of report files.

use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_catdcov"))
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn stdout_json(out: &Output) -> serde_json::Value {
    serde_json::from_slice(&out.stdout).unwrap_or_else(|e| {
        panic!(
            "stdout is not json ({e}): {:?}\nstderr: {}",
            String::from_utf8_lossy(&out.stdout),
            String::from_utf8_lossy(&out.stderr)
        )
    })
}

fn write_assoc_csv(path: &Path) {
    let mut text = String::from("x,y\n");
    for _ in 0..10 {
        text.push_str("1,1\n2,2\n");
    }
    fs::write(path, text).unwrap();
}

#[test]
fn test_subcommand_emits_outcome_schema() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("data.csv");
    write_assoc_csv(&csv);

    let out = run(&[
        "test",
        "--method",
        "weighted",
        "--draws",
        "10000",
        "--seed",
        "7",
        csv.to_str().unwrap(),
    ]);
    assert!(out.status.success());
    let v = stdout_json(&out);
    for key in ["method", "statistic", "pvalue", "n", "I", "J"] {
        assert!(v.get(key).is_some(), "missing key {key} in {v}");
    }
    assert_eq!(v["method"], "weighted_chisq");
    assert_eq!(v["n"], 20);
}

#[test]
fn permutation_on_perfect_association() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("data.csv");
    write_assoc_csv(&csv);

    let args = [
        "test",
        "--method",
        "permutation",
        "--b",
        "999",
        "--seed",
        "2",
        csv.to_str().unwrap(),
    ];
    let out = run(&args);
    assert!(out.status.success());
    let v = stdout_json(&out);
    assert_eq!(v["pvalue"], 0.001);
    assert_eq!(v["statistic"], 0.25);
    // same arguments and seed: byte-identical stdout
    assert_eq!(out.stdout, run(&args).stdout);
}

#[test]
fn stochastic_method_without_seed_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("data.csv");
    write_assoc_csv(&csv);
    let out = run(&["test", "--method", "permutation", csv.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn malformed_csv_exits_2_naming_the_line() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("bad.csv");
    fs::write(&csv, "x,y\n1,1\n1,oops\n").unwrap();
    let out = run(&["test", "--method", "chi1", csv.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("line 3"), "stderr: {err}");
}

#[test]
fn screen_selects_the_identity_feature() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("panel.csv");
    let mut text = String::from("y,noise,copy,other,more\n");
    let noise = [2, 1, 1, 2, 2, 1, 2, 2, 1, 2, 1, 1];
    let other = [1, 2, 2, 1, 1, 2, 1, 2, 2, 1, 2, 1];
    let more = [2, 2, 1, 1, 2, 1, 1, 2, 1, 2, 2, 1];
    for i in 0..12 {
        let y = i % 3 + 1;
        text.push_str(&format!("{y},{},{y},{},{}\n", noise[i], other[i], more[i]));
    }
    fs::write(&csv, text).unwrap();

    let report_path = dir.path().join("report.json");
    let out = run(&[
        "screen",
        "--estimator",
        "dcov",
        "--selector",
        "changepoint",
        "--output",
        report_path.to_str().unwrap(),
        csv.to_str().unwrap(),
    ]);
    assert!(out.status.success());
    let summary = stdout_json(&out);
    let selected: Vec<u64> = summary["selected"]
        .as_array()
        .unwrap()
        .iter()
        .map(|v| v.as_u64().unwrap())
        .collect();
    assert!(selected.contains(&1), "summary: {summary}");
    assert!(summary["selected_names"]
        .as_array()
        .unwrap()
        .iter()
        .any(|v| v == "copy"));

    let report: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(&report_path).unwrap()).unwrap();
    assert!(report["threshold_changepoint"].is_number());
    assert_eq!(report["stats"].as_array().unwrap().len(), 4);
}

#[test]
fn screen_rejects_empty_input() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("empty.csv");
    fs::write(&csv, "").unwrap();
    let out = run(&["screen", csv.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn influence_grid_for_independence_pmf_is_zero() {
    let dir = tempfile::tempdir().unwrap();
    let pmf = dir.path().join("pmf.json");
    fs::write(&pmf, r#"{"probs": [[0.25, 0.25], [0.25, 0.25]]}"#).unwrap();
    let grid = dir.path().join("grid.csv");

    let out = run(&[
        "influence",
        "--functional",
        "dcov",
        "--pmf",
        pmf.to_str().unwrap(),
        "--out",
        grid.to_str().unwrap(),
    ]);
    assert!(out.status.success());
    let v = stdout_json(&out);
    assert!(v["gamma"].as_f64().unwrap().abs() < 1e-12);

    let text = fs::read_to_string(&grid).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("x,y,value"));
    for line in lines {
        let value: f64 = line.rsplit(',').next().unwrap().parse().unwrap();
        assert!(value.abs() < 1e-12, "line: {line}");
    }
}

#[test]
fn influence_blowup_for_vanishing_corner_pmf() {
    // corner mass beta with both corner margins 2*beta drives the
    // chi-squared influence past 0.99/(4 beta)
    let beta = 1e-3;
    let rows = 4;
    let mut grid = vec![vec![(1.0 - 3.0 * beta) / 9.0; rows]; rows];
    grid[0][0] = beta;
    for k in 1..rows {
        grid[0][k] = beta / 3.0;
        grid[k][0] = beta / 3.0;
    }
    let dir = tempfile::tempdir().unwrap();
    let pmf = dir.path().join("pmf.json");
    fs::write(
        &pmf,
        serde_json::to_string(&serde_json::json!({ "probs": grid })).unwrap(),
    )
    .unwrap();

    let out = run(&[
        "influence",
        "--functional",
        "chisq",
        "--pmf",
        pmf.to_str().unwrap(),
        "--out",
        dir.path().join("grid.csv").to_str().unwrap(),
    ]);
    assert!(out.status.success());
    let v = stdout_json(&out);
    assert!(v["gamma"].as_f64().unwrap() >= 0.99 / (4.0 * beta));
}

#[test]
fn influence_rejects_malformed_json() {
    let dir = tempfile::tempdir().unwrap();
    let pmf = dir.path().join("pmf.json");
    fs::write(&pmf, "not json").unwrap();
    let out = run(&[
        "influence",
        "--functional",
        "dcov",
        "--pmf",
        pmf.to_str().unwrap(),
        "--out",
        dir.path().join("grid.csv").to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn simulate_unknown_setting_exits_2() {
    let out = run(&["simulate", "--setting", "setting9", "--seed", "1"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn simulate_null_run_reports_rates() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(&[
        "simulate",
        "--setting",
        "null1",
        "--n",
        "32",
        "--replicates",
        "60",
        "--seed",
        "11",
        "--methods",
        "chi1",
        "--out-dir",
        dir.path().to_str().unwrap(),
    ]);
    assert!(
        out.status.success(),
        "stderr: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    let v = stdout_json(&out);
    assert!(v["rejection_rates"]["chisq_df1"]["rate"].is_number());
    assert!(dir.path().join("report.json").exists());
    assert!(dir.path().join("qq.csv").exists());
    let qq = fs::read_to_string(dir.path().join("qq.csv")).unwrap();
    assert!(qq.starts_with("theoretical,empirical\n"));
}

#[test]
fn simulate_is_byte_identical_across_workers_and_runs() {
    let base = tempfile::tempdir().unwrap();
    let mut outputs = Vec::new();
    for (idx, workers) in ["1", "4", "1"].iter().enumerate() {
        let dir = base.path().join(format!("run{idx}"));
        let out = run(&[
            "simulate",
            "--setting",
            "setting1",
            "--n",
            "25",
            "--K",
            "40",
            "--replicates",
            "4",
            "--seed",
            "3",
            "--workers",
            workers,
            "--out-dir",
            dir.to_str().unwrap(),
        ]);
        assert!(
            out.status.success(),
            "stderr: {}",
            String::from_utf8_lossy(&out.stderr)
        );
        outputs.push((
            fs::read(dir.join("report.json")).unwrap(),
            fs::read(dir.join("roc_dcov.csv")).unwrap(),
            out.stdout,
        ));
    }
    assert_eq!(outputs[0].0, outputs[1].0, "report.json differs across workers");
    assert_eq!(outputs[0].1, outputs[1].1, "roc csv differs across workers");
    assert_eq!(outputs[0].2, outputs[1].2, "stdout differs across workers");
    assert_eq!(outputs[0].0, outputs[2].0, "report.json differs across runs");
}

#[test]
fn simulate_accepts_a_spec_config_file() {
    let dir = tempfile::tempdir().unwrap();
    let spec = serde_json::json!({
        "kind": "null",
        "name": "custom-null",
        "feature_cats": 4,
        "response_cats": 4,
        "sample_size": 40,
        "replicates": 30,
        "low_cell_prob": 0.0625,
        "seed": 0
    });
    let path = dir.path().join("spec.json");
    fs::write(&path, serde_json::to_string(&spec).unwrap()).unwrap();
    let out = run(&[
        "simulate",
        "--config",
        path.to_str().unwrap(),
        "--seed",
        "5",
        "--methods",
        "chi1,pearson",
    ]);
    assert!(
        out.status.success(),
        "stderr: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    let v = stdout_json(&out);
    assert_eq!(v["setting"], "custom-null");
}
