use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use fpp_lab::emit::{self, Format};
use fpp_lab::report::ExperimentReport;
use fpp_lab::{ConfigError, ExperimentConfig, RunOptions, BUDGET_VAR};

fn fpp_lab(args: &[&str], budget: Option<&str>) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_fpp-lab"));
    cmd.args(args).env_remove(BUDGET_VAR);
    if let Some(b) = budget {
        cmd.env(BUDGET_VAR, b);
    }
    cmd.output().expect("binary runs")
}

fn write_config(dir: &Path, text: &str) -> String {
    let path = dir.join("config.json");
    fs::write(&path, text).unwrap();
    path.to_str().unwrap().to_string()
}

const SMALL_TREE: &str = r#"{"kind": "tree-convergence", "n_list": [3, 6], "replicas": 6, "seed": 9,
    "thresholds": {"wasserstein_max": 10.0}}"#;

const SMALL_LATTICE: &str = r#"{"kind": "lattice-supercritical-zero",
    "weight_spec": {"kind": "piecewise", "probs": [0.6, 0.4], "values": [0.0, 1.0]},
    "n_list": [8, 16], "xi": [1.0, 0.0], "replicas": 5, "seed": 4,
    "length_extremes": true, "dump_edges": true}"#;

fn small(text: &str) -> ExperimentConfig {
    ExperimentConfig::from_json(text).unwrap()
}

#[test]
fn validation_lists_every_violated_field() {
    let err = ExperimentConfig::from_json(
        r#"{"kind": "lattice-length-ratio", "n_list": [3, 2], "replicas": 0, "xi": [0.6, 0.6],
            "box_factor": 0.0, "quadrature_cells": 2, "weight_spec": {"kind": "piecewise", "probs": [0.5, 0.5], "values": [0.0, 1.0]},
            "thresholds": {"confidence": 1.5}}"#,
    )
    .unwrap_err();
    let ConfigError::Invalid(v) = err else {
        panic!("expected a validation error, got {err}");
    };
    let fields: Vec<&str> = v.iter().map(|v| v.field.as_str()).collect();
    for f in [
        "replicas",
        "n_list",
        "xi",
        "box_factor",
        "quadrature_cells",
        "weight_spec",
        "thresholds.confidence",
    ] {
        assert!(fields.contains(&f), "{f} not reported in {fields:?}");
    }
}

#[test]
fn length_extremes_rejected_outside_lattice() {
    let err = ExperimentConfig::from_json(
        r#"{"kind": "tree-variational", "n_list": [4], "replicas": 2, "length_extremes": true}"#,
    );
    assert!(
        matches!(err, Err(ConfigError::Invalid(v)) if v.iter().any(|v| v.field == "length_extremes"))
    );
}

#[test]
fn exit_code_zero_on_pass() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(dir.path(), SMALL_TREE);
    let out = dir.path().join("out");
    let o = fpp_lab(
        &["run", "--config", &config, "--out", out.to_str().unwrap()],
        None,
    );
    assert_eq!(
        o.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&o.stderr)
    );
    let stdout = String::from_utf8_lossy(&o.stdout);
    assert!(stdout.lines().all(|l| l.starts_with("[PASS]")), "{stdout}");
    for f in [
        "report.json",
        "aggregates.csv",
        "replicas.csv",
        "verdicts.csv",
        "limit_measure.csv",
    ] {
        assert!(out.join(f).exists(), "{f} missing");
    }
}

#[test]
fn exit_code_one_on_verdict_failure() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(
        dir.path(),
        r#"{"kind": "tree-convergence", "n_list": [3, 6], "replicas": 6, "thresholds": {"wasserstein_max": 0.0}}"#,
    );
    let out = dir.path().join("out");
    let o = fpp_lab(
        &["run", "--config", &config, "--out", out.to_str().unwrap()],
        None,
    );
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stdout)
        .contains("[FAIL] tree-convergence/wasserstein-at-largest-n"));
}

#[test]
fn exit_code_two_on_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(
        dir.path(),
        r#"{"kind": "tree-convergence", "n_list": [], "replicas": 0}"#,
    );
    let o = fpp_lab(&["run", "--config", &config], None);
    assert_eq!(o.status.code(), Some(2));
    let stderr = String::from_utf8_lossy(&o.stderr);
    assert!(
        stderr.contains("replicas") && stderr.contains("n_list"),
        "{stderr}"
    );

    let o = fpp_lab(&["run", "--config", &config], Some("lots"));
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn budget_override_records_failures_per_replica() {
    let report = fpp_lab::run(
        &small(SMALL_TREE),
        &RunOptions {
            budget_override: Some(3),
        },
    )
    .unwrap();
    let t = &report.telemetry;
    assert_eq!(t.budget, 3);
    assert_eq!(t.budget_failures, 12);
    assert_eq!(t.failures.len(), 12);
    assert!(
        t.failures.iter().all(|f| f.error.contains("budget")),
        "{:?}",
        t.failures
    );

    let dir = tempfile::tempdir().unwrap();
    let config = write_config(dir.path(), SMALL_TREE);
    let out = dir.path().join("out");
    let o = fpp_lab(
        &["run", "--config", &config, "--out", out.to_str().unwrap()],
        Some("3"),
    );
    assert!(String::from_utf8_lossy(&o.stdout).contains("12 replica failures"));
    let json: serde_json::Value =
        serde_json::from_slice(&fs::read(out.join("report.json")).unwrap()).unwrap();
    assert_eq!(json["telemetry"]["budget_failures"], 12);
}

#[test]
fn empty_report_gives_header_only_csv() {
    let mut report = fpp_lab::run(&small(SMALL_TREE), &RunOptions::default()).unwrap();
    report.aggregates.clear();
    report.replicas.clear();
    report.verdicts.clear();
    report.tables.clear();
    let files = emit::to_csv(&report).unwrap();
    let get = |name: &str| {
        String::from_utf8(files.iter().find(|f| f.0 == name).unwrap().1.clone()).unwrap()
    };
    assert_eq!(
        get("aggregates.csv"),
        "n,metric,count,mean,sd,ci_lo,ci_hi\n"
    );
    assert_eq!(get("replicas.csv"), "n,replica,seed,metric,value\n");
    assert_eq!(
        get("verdicts.csv"),
        "rule,passed,observed,threshold,detail\n"
    );
}

#[test]
fn json_round_trip_reproduces_report() {
    for text in [SMALL_TREE, SMALL_LATTICE] {
        let mut report = fpp_lab::run(&small(text), &RunOptions::default()).unwrap();
        report.results.insert("not_a_number".into(), f64::NAN);
        let first = emit::to_json(&report).unwrap();
        let back: ExperimentReport = serde_json::from_str(&first).unwrap();
        assert!(back.results["not_a_number"].is_nan());
        assert_eq!(back.config, report.config);
        assert_eq!(back.verdicts.len(), report.verdicts.len());
        assert_eq!(emit::to_json(&back).unwrap(), first);
        assert_eq!(emit::to_csv(&back).unwrap(), emit::to_csv(&report).unwrap());
    }
}

#[test]
fn identical_runs_give_identical_files() {
    let dir = tempfile::tempdir().unwrap();
    for text in [SMALL_TREE, SMALL_LATTICE] {
        let config = small(text);
        let a = dir.path().join("a");
        let b = dir.path().join("b");
        for out in [&a, &b] {
            let report = fpp_lab::run(&config, &RunOptions::default()).unwrap();
            emit::emit(&report, out, &[Format::Json, Format::Csv]).unwrap();
        }
        let names: Vec<_> = fs::read_dir(&a)
            .unwrap()
            .map(|e| e.unwrap().file_name())
            .collect();
        assert!(!names.is_empty());
        for name in names {
            assert_eq!(
                fs::read(a.join(&name)).unwrap(),
                fs::read(b.join(&name)).unwrap(),
                "{name:?} differs"
            );
        }
    }
}

#[test]
fn lattice_runs_emit_geodesic_summaries_and_edges() {
    let report = fpp_lab::run(&small(SMALL_LATTICE), &RunOptions::default()).unwrap();
    assert_eq!(report.geodesics.len(), 10);
    for g in &report.geodesics {
        assert_eq!(g.length, g.zero_count + g.positive_count);
        let (lo, hi) = (g.n_min.unwrap(), g.n_max.unwrap());
        assert!(lo <= g.length && (g.length <= hi || !g.n_max_exact.unwrap()));
    }
    let edges = &report.tables["geodesic_edges"];
    assert_eq!(
        edges.columns,
        ["step", "from_0", "from_1", "to_0", "to_1", "uniform", "weight"]
    );
    let last = report.geodesics.iter().find(|g| g.n == Some(16.0)).unwrap();
    assert_eq!(edges.rows.len(), last.length);
    let total: f64 = edges.rows.iter().map(|r| r[6]).sum();
    assert!((total - last.passage_time).abs() < 1e-12);

    let files = emit::to_csv(&report).unwrap();
    let geodesics = files.iter().find(|f| f.0 == "geodesics.csv").unwrap();
    assert_eq!(String::from_utf8_lossy(&geodesics.1).lines().count(), 11);
}

#[test]
fn tree_edge_dump_matches_minimum() {
    let mut config = small(SMALL_TREE);
    config.dump_edges = true;
    let report = fpp_lab::run(&config, &RunOptions::default()).unwrap();
    let table = &report.tables["tree_geodesic"];
    assert_eq!(table.rows.len(), 6);
    let t_n: f64 = table.rows.iter().map(|r| r[3]).sum();
    let first = report
        .replicas
        .iter()
        .find(|r| r.n == 6.0 && r.replica == 0 && r.metric == "t_over_n")
        .unwrap();
    assert!((t_n / 6.0 - first.value).abs() < 1e-12);
}

#[test]
fn selftest_passes() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("st");
    let o = fpp_lab(&["selftest", "--out", out.to_str().unwrap()], None);
    assert_eq!(
        o.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&o.stdout)
    );
    assert!(out.join("verdicts.csv").exists());
}

#[test]
fn describe_weights_lists_families() {
    let o = fpp_lab(&["describe-weights"], None);
    assert_eq!(o.status.code(), Some(0));
    let text = String::from_utf8_lossy(&o.stdout);
    assert!(
        text.contains("identity") && text.contains("tree time constant (arity 2): 0.18482"),
        "{text}"
    );

    let o = fpp_lab(
        &[
            "describe-weights",
            "--weight",
            r#"{"kind": "piecewise", "probs": [0.6, 0.4], "values": [0.0, 1.0]}"#,
        ],
        None,
    );
    assert_eq!(o.status.code(), Some(0));
    assert!(String::from_utf8_lossy(&o.stdout).contains("atom case"));

    let o = fpp_lab(&["describe-weights", "--arity", "1"], None);
    assert_eq!(o.status.code(), Some(2));
}
