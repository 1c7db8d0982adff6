use std::path::Path;
use std::process::Command;

use causal_compare::po::Method;
use causal_compare::report::{OracleSidecar, ResultBundle};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_causal-compare"))
}

fn simulate(dir: &Path, n: usize, seed: u64) {
    let status = bin()
        .args(["simulate", "--n", &n.to_string(), "--seed", &seed.to_string(), "--out"])
        .arg(dir)
        .status()
        .unwrap();
    assert!(status.success());
}

fn write_config(dir: &Path, extra: &str) -> std::path::PathBuf {
    let path = dir.join("study.json");
    let text = format!(
        r#"{{
  "data": "data.csv", "schema": "schema.json", "output_dir": "out",
  "propensity": {{"max_trees": 300, "shrinkage": 0.1}},
  "outcome": {{"max_trees": 200, "shrinkage": 0.1, "cv_folds": 0}},
  "bootstrap": 4, "posterior_draws": 50, "permutations": 50,
  "structure": {{"k": 3, "schedule": {{"steps": 500}}}},
  {extra}
}}"#
    );
    std::fs::write(&path, text).unwrap();
    path
}

#[test]
fn simulate_is_byte_identical_and_has_oracle() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    simulate(a.path(), 500, 9);
    simulate(b.path(), 500, 9);
    for f in ["data.csv", "schema.json", "oracle.json", "truth.json"] {
        assert_eq!(
            std::fs::read(a.path().join(f)).unwrap(),
            std::fs::read(b.path().join(f)).unwrap(),
            "{f} differs"
        );
    }
    let rows = std::fs::read_to_string(a.path().join("data.csv")).unwrap().lines().count();
    assert_eq!(rows, 501);
    let oracle: OracleSidecar =
        serde_json::from_str(&std::fs::read_to_string(a.path().join("oracle.json")).unwrap()).unwrap();
    assert_eq!(oracle.effects.len(), 6);
    assert!((oracle.effect("Low", "High").unwrap().risk_ratio - 3.0).abs() < 1e-12);
}

#[test]
fn zero_rows_is_an_error() {
    let dir = tempfile::tempdir().unwrap();
    let out = bin().args(["simulate", "--n", "0", "--out"]).arg(dir.path()).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
    assert!(!out.stderr.is_empty());
}

#[test]
fn missing_data_exits_with_two() {
    let dir = tempfile::tempdir().unwrap();
    simulate(dir.path(), 100, 1);
    std::fs::remove_file(dir.path().join("data.csv")).unwrap();
    let cfg = write_config(
        dir.path(),
        r#""comparisons": [{"treated": "Low", "control": "High"}], "methods": ["ipw_combined"], "seed": 1"#,
    );
    let out = bin().args(["estimate", "--config"]).arg(&cfg).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("data.csv"));
}

#[test]
fn malformed_config_exits_with_two() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("study.json");
    std::fs::write(&path, "{ not json").unwrap();
    let out = bin().args(["estimate", "--config"]).arg(&path).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn method_subset_yields_one_estimate_per_comparison() {
    let dir = tempfile::tempdir().unwrap();
    simulate(dir.path(), 2000, 3);
    let cfg = write_config(
        dir.path(),
        r#""comparisons": [{"treated": "Low", "control": "High"}, {"treated": "Medium", "control": "High"}],
  "methods": ["ipw_combined"], "seed": 5"#,
    );
    let status = bin().args(["estimate", "--config"]).arg(&cfg).status().unwrap();
    assert_eq!(status.code(), Some(0));
    let out = dir.path().join("out");
    let bundle = ResultBundle::from_file(out.join("bundle.json")).unwrap();
    assert_eq!(bundle.estimates.len(), 2);
    assert!(bundle.failures.is_empty());
    assert!(bundle.estimates.iter().all(|e| e.method == Method::IpwCombined));
    assert!(bundle.networks.is_empty());
    for f in ["ci_overlap.svg", "balance_High_to_Low.svg", "balance_High_to_Medium.svg"] {
        assert!(out.join(f).exists(), "{f} missing");
    }
}

#[test]
fn failed_cells_are_recorded_and_exit_partial() {
    let dir = tempfile::tempdir().unwrap();
    simulate(dir.path(), 2000, 4);
    let cfg = write_config(
        dir.path(),
        r#""comparisons": [{"treated": "Low", "control": "High"}, {"treated": "Low", "control": "Extreme"}],
  "methods": ["ipw_combined", "cbn"], "seed": 5"#,
    );
    let status = bin().args(["estimate", "--config"]).arg(&cfg).status().unwrap();
    assert_eq!(status.code(), Some(1));
    let bundle = ResultBundle::from_file(dir.path().join("out/bundle.json")).unwrap();
    let comparisons: Vec<_> = [("Low", "High"), ("Low", "Extreme")]
        .iter()
        .map(|(t, c)| causal_compare::po::Comparison::new(t, c))
        .collect();
    assert!(bundle.is_complete(&comparisons, &[Method::IpwCombined, Method::Cbn]));
    assert_eq!(bundle.failures.len(), 2);
    assert!(bundle.failures.iter().all(|f| f.comparison.control == "Extreme"));
    assert!(!bundle.networks.is_empty());
    assert!(dir.path().join("out/dag_1.dot").exists());
}

#[test]
fn render_reproduces_estimate_figures() {
    let dir = tempfile::tempdir().unwrap();
    simulate(dir.path(), 1500, 6);
    let cfg = write_config(
        dir.path(),
        r#""comparisons": [{"treated": "Low", "control": "High"}], "methods": ["ipw_combined", "match_combined", "cbn"], "seed": 2"#,
    );
    assert_eq!(bin().args(["estimate", "--config"]).arg(&cfg).status().unwrap().code(), Some(0));
    let out = dir.path().join("out");
    let again = dir.path().join("again");
    let status = bin()
        .args(["render", "--bundle"])
        .arg(out.join("bundle.json"))
        .arg("--out")
        .arg(&again)
        .status()
        .unwrap();
    assert!(status.success());
    for f in ["ci_overlap.svg", "balance_High_to_Low.svg", "dag_1.dot"] {
        assert_eq!(std::fs::read(out.join(f)).unwrap(), std::fs::read(again.join(f)).unwrap(), "{f}");
    }
}

#[test]
fn learn_structure_writes_ranked_networks() {
    let dir = tempfile::tempdir().unwrap();
    simulate(dir.path(), 3000, 8);
    let out = dir.path().join("learned");
    let status = bin()
        .args(["learn-structure", "--k", "3", "--data"])
        .arg(dir.path().join("data.csv"))
        .arg("--schema")
        .arg(dir.path().join("schema.json"))
        .arg("--out")
        .arg(&out)
        .status()
        .unwrap();
    assert!(status.success());
    let report: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out.join("structure.json")).unwrap()).unwrap();
    let nets = report["networks"].as_array().unwrap();
    assert!(!nets.is_empty() && nets.len() <= 3);
    let scores: Vec<f64> = nets.iter().map(|n| n["score"].as_f64().unwrap()).collect();
    assert!(scores.windows(2).all(|w| w[0] >= w[1]));
    assert!(out.join("dag_1.dot").exists());
}
