use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;
use stochkit::evt::{self, ThresholdPolicy};
use stochkit_cli::parse_csv;

fn fixture(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures").join(name)
}

fn stochkit(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_stochkit")).args(args).output().unwrap()
}

fn read_json(path: &Path) -> Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

#[test]
fn two_daily_rows() {
    let s = parse_csv("2024-01-02,100.0\n2024-01-03,101.0\n", 1.0 / 252.0).unwrap();
    assert_eq!(s.len(), 2);
    assert_eq!(s.dt(), 1.0 / 252.0);
    assert_eq!(s.values(), &[100.0, 101.0]);
}

#[test]
fn empty_file_is_a_parse_error() {
    let e = parse_csv("", 1.0 / 252.0).unwrap_err();
    assert_eq!(e.kind(), "ParseError");
}

#[test]
fn shuffled_dates_are_rejected() {
    let e = parse_csv("2024-01-03,1\n2024-01-02,2\n2024-01-04,3\n", 1.0 / 252.0).unwrap_err();
    assert_eq!(e.kind(), "NonMonotoneDates");
}

#[test]
fn error_codes_on_stderr() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.csv");
    std::fs::write(&bad, "date,value\n2024-01-02,1\n2024-01-01,2\n").unwrap();
    let o = stochkit(&["diagnose", "--input", bad.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("cli::NonMonotoneDates"), "{}", stderr(&o));

    let o = stochkit(&["diagnose", "--input", dir.path().join("missing.csv").to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(3));
    assert!(stderr(&o).contains("cli::IoError"));

    let o = stochkit(&["calibrate", "--model", "nope", "--input", "x.csv"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn nonstationary_fit_reports_library_code() {
    let dir = tempfile::tempdir().unwrap();
    let trend = dir.path().join("trend.csv");
    let mut text = String::from("date,value\n");
    for i in 0..60 {
        text.push_str(&format!("2024-01-{:02}T00:{:02}:00,{}\n", 1 + i / 60, i % 60, 1.0 + 0.01 * (i as f64).powi(2)));
    }
    std::fs::write(&trend, text).unwrap();
    let o = stochkit(&["calibrate", "--model", "vasicek", "--input", trend.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).starts_with("error: meanrev::"), "{}", stderr(&o));
}

#[test]
fn diagnose_rejects_unit_root_on_ar1() {
    let dir = tempfile::tempdir().unwrap();
    let o = stochkit(&[
        "diagnose",
        "--input",
        fixture("ar1.csv").to_str().unwrap(),
        "--freq",
        "weekly",
        "--output-dir",
        dir.path().to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let v = read_json(&dir.path().join("diagnose.json"));
    assert_eq!(v["schema_version"], 1);
    assert_eq!(v["command"], "diagnose");
    assert_eq!(v["adf"]["reject_5pct"], true);
    let b = v["ar1"]["b"].as_f64().unwrap();
    assert!((b - 0.8).abs() < 0.1, "b = {b}");
    assert!(dir.path().join("acf.csv").exists());
    assert!(dir.path().join("qq.csv").exists());
}

#[test]
fn risk_matches_library() {
    let dir = tempfile::tempdir().unwrap();
    let input = fixture("losses.csv");
    let o = stochkit(&[
        "risk",
        "--input",
        input.to_str().unwrap(),
        "--p",
        "0.01,0.005",
        "--bootstrap",
        "0",
        "--output-dir",
        dir.path().to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let v = read_json(&dir.path().join("risk.json"));

    let series = parse_csv(&std::fs::read_to_string(&input).unwrap(), 1.0 / 252.0).unwrap();
    let tail = evt::pot_pipeline(series.values(), ThresholdPolicy::Quantile(0.9), &[0.01, 0.005]).unwrap();
    assert_eq!(v["n_exceed"], tail.n_exceed);
    for (i, row) in v["levels"].as_array().unwrap().iter().enumerate() {
        let var = row["var"].as_f64().unwrap();
        let es = row["es"].as_f64().unwrap();
        assert!((var - tail.var[i]).abs() <= 1e-10 * tail.var[i]);
        assert!((es - tail.es[i].unwrap()).abs() <= 1e-10 * es);
        assert!(row["var_interval"].is_null());
    }
}

#[test]
fn simulate_from_params_shapes() {
    let dir = tempfile::tempdir().unwrap();
    let o = stochkit(&[
        "simulate",
        "--model",
        "vasicek",
        "--params",
        r#"{"alpha":3.0,"theta":0.05,"sigma":0.01}"#,
        "--s0",
        "0.03",
        "--n-paths",
        "4",
        "--horizon",
        "0.5",
        "--freq",
        "weekly",
        "--output-dir",
        dir.path().to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let paths = std::fs::read_to_string(dir.path().join("paths.csv")).unwrap();
    let lines: Vec<&str> = paths.lines().collect();
    assert_eq!(lines[0], "step,time,path_0,path_1,path_2,path_3");
    assert_eq!(lines.len(), 1 + 27);
    assert!(lines[1].starts_with("0,0,0.03,0.03"));
    let fan = std::fs::read_to_string(dir.path().join("fan.csv")).unwrap();
    assert_eq!(fan.lines().next().unwrap(), "step,time,p05,p25,p50,p75,p95");
}

#[test]
fn simulate_needs_start_level_with_params() {
    let o = stochkit(&["simulate", "--model", "gbm", "--params", r#"{"mu":0.1,"sigma":0.2}"#]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("cli::UsageError"));
}

#[test]
fn select_prints_table() {
    let dir = tempfile::tempdir().unwrap();
    let o = stochkit(&[
        "select",
        "--input",
        fixture("ar1.csv").to_str().unwrap(),
        "--freq",
        "weekly",
        "--format",
        "csv",
        "--output-dir",
        dir.path().to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let out = String::from_utf8_lossy(&o.stdout);
    assert!(out.contains("mean reversion"));
    assert!(out.contains("chosen: "));
    let csv = std::fs::read_to_string(dir.path().join("select.csv")).unwrap();
    assert!(csv.starts_with("rank,model,n_params,log_likelihood,aic,error\n1,"));
}
