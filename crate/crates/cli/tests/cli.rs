//! End-to-end runs of the `oumax` binary.

use std::path::PathBuf;
use std::process::{Command, Output};

use oumax::maximal::CertificationReport;
use serde_json::Value;

fn fixture(name: &str) -> String {
    format!("{}/tests/fixtures/{name}", env!("CARGO_MANIFEST_DIR"))
}

fn scratch(name: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("oumax-cli-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    dir.join(name)
}

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_oumax")).args(args).output().unwrap()
}

fn json(out: &Output) -> Value {
    serde_json::from_slice(&out.stdout).unwrap_or_else(|e| {
        panic!("{e}: {}\n{}", String::from_utf8_lossy(&out.stdout), String::from_utf8_lossy(&out.stderr))
    })
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

#[test]
fn kernel_prints_value_and_factors() {
    let out = run(&["kernel", "--config", &fixture("block.json"), "--t", "0.5", "--x", "1,0", "--y", "0,1"]);
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    let v = json(&out);
    let value = v["value"].as_f64().unwrap();
    let d = &v["decomposition"];
    let product = d["symmetric"].as_f64().unwrap() * d["factors"][0]["value"].as_f64().unwrap();
    assert!((product - value).abs() <= 1e-12 * value);
    assert_eq!(d["factors"][0]["theta"].as_f64(), Some(1.0));
}

#[test]
fn certify_global_passes_and_report_reparses() {
    let out = run(&["certify-global", "--theta", "1", "--smax", "0.05"]);
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    let report = CertificationReport::from_json(std::str::from_utf8(&out.stdout).unwrap()).unwrap();
    assert!(report.passed);
    assert!(report.constant.is_finite());
}

#[test]
fn normality_reports_without_certifying() {
    let out = run(&["normality", "--config", &fixture("jordan.json")]);
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    let v = json(&out);
    assert_eq!(v["report"]["normal"], Value::Bool(false));
    assert!(v["report"]["commutation_defect"].as_f64().unwrap() > 0.1);
}

#[test]
fn building_blocks_of_a_non_normal_operator_fail() {
    let out = run(&["blocks", "--config", &fixture("jordan.json")]);
    assert_eq!(out.status.code(), Some(1));
    assert!(stderr(&out).contains("not normal"));
}

#[test]
fn unknown_config_key_is_a_usage_error_naming_the_key() {
    let out = run(&["kernel", "--config", &fixture("bad_key.json"), "--t", "1"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("`tmax`"), "{}", stderr(&out));
}

#[test]
fn malformed_arguments_are_usage_errors() {
    assert_eq!(run(&["kernel", "--theta", "1,x"]).status.code(), Some(2));
    assert_eq!(run(&["no-such-command"]).status.code(), Some(2));
    assert_eq!(run(&["kernel", "--theta", "1", "--t", "1", "--x", "1,0"]).status.code(), Some(2));
    assert_eq!(run(&["certify-global", "--theta", "1", "--smax", "2"]).status.code(), Some(2));
}

#[test]
fn failed_diagnostic_exits_with_one() {
    // Growth over the running maximum is at least 1 by construction.
    let out = run(&["weak-type", "--theta", "1", "--members", "3", "--max-growth", "0.5"]);
    assert_eq!(out.status.code(), Some(1), "{}", stderr(&out));
    assert_eq!(json(&out)["passed"], Value::Bool(false));
}

#[test]
fn polynomial_certificate_passes() {
    let out = run(&["certify-regions", "--region", "r5-small-time"]);
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    let v = json(&out);
    assert_eq!(v["passed"], Value::Bool(true));
    let report: CertificationReport = serde_json::from_value(v["reports"][0].clone()).unwrap();
    assert!(report.constant <= 0.0);
}

#[test]
fn canonical_form_of_a_matrix() {
    let out = run(&["canonical", "--matrix", "[[0,2,0],[-2,0,0],[0,0,0]]"]);
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    let v = json(&out);
    assert!((v["theta"][0].as_f64().unwrap() - 2.0).abs() < 1e-12);
    assert!(v["reconstruction_residual"].as_f64().unwrap() < 1e-12);
}

#[test]
fn output_flag_writes_the_result_file() {
    let path = scratch("apply.json");
    let out = run(&["apply", "--theta", "1", "--t", "0.7", "--x", "0.3,-0.2", "--output", path.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    assert!(out.stdout.is_empty());
    let v: Value = serde_json::from_str(&std::fs::read_to_string(&path).unwrap()).unwrap();
    assert!(v["abs_error"].as_f64().unwrap() < 1e-10);
}

#[test]
fn simulation_csv_is_deterministic_across_thread_counts() {
    let mut files = Vec::new();
    for (k, threads) in ["1", "4", "4"].iter().enumerate() {
        let path = scratch(&format!("samples-{k}.csv"));
        let out = run(&[
            "simulate", "--theta", "1", "--x", "1,0", "--t", "0.7", "--n", "5000", "--seed", "9",
            "--threads", threads, "--csv", path.to_str().unwrap(),
        ]);
        assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
        files.push(std::fs::read(&path).unwrap());
    }
    assert_eq!(files[0], files[1]);
    assert_eq!(files[1], files[2]);
    let text = String::from_utf8(files[0].clone()).unwrap();
    assert_eq!(text.lines().next(), Some("x0,x1"));
    assert_eq!(text.lines().count(), 5001);
}

#[test]
fn path_csv_has_one_row_per_time() {
    let path = scratch("path.csv");
    let out = run(&["simulate", "--theta", "2", "--times", "0,0.5,1,2", "--seed", "3", "--csv", path.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    let text = std::fs::read_to_string(&path).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "t,x0,x1");
    assert_eq!(lines.len(), 5);
}

#[test]
fn ergodic_check_passes_from_the_origin() {
    let out = run(&["ergodic", "--theta", "1", "--times", "0.5,2,8", "--n", "20000", "--seed", "5"]);
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    assert_eq!(json(&out)["passed"], Value::Bool(true));
}

#[test]
fn thread_count_can_come_from_the_environment() {
    let out = Command::new(env!("CARGO_BIN_EXE_oumax"))
        .args(["l1-probe", "--theta", "1"])
        .env("OUMAX_THREADS", "2")
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    let slope = json(&out)["probe"]["slope"].as_f64().unwrap();
    assert!((slope + 2.0).abs() < 0.2, "{slope}");
}
