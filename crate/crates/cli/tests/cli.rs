//! End-to-end runs of the binary.
//!
//! Golden reports live in tests/golden; run with QUASIZEROS_REGEN=1 to rewrite them.

use std::path::PathBuf;
use std::process::{Command, Output};

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_quasizeros")).args(args).output().expect("binary runs")
}

fn stdout(args: &[&str]) -> String {
    let out = run(args);
    assert_eq!(out.status.code(), Some(0), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout).unwrap()
}

fn json(args: &[&str]) -> serde_json::Value {
    serde_json::from_str(&stdout(args)).unwrap()
}

fn golden(name: &str, args: &[&str]) {
    let path = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/golden").join(name);
    let got = stdout(args);
    if std::env::var_os("QUASIZEROS_REGEN").is_some() {
        std::fs::create_dir_all(path.parent().unwrap()).unwrap();
        std::fs::write(&path, &got).unwrap();
        return;
    }
    let want = std::fs::read_to_string(&path)
        .unwrap_or_else(|_| panic!("missing {}; regenerate with QUASIZEROS_REGEN=1", path.display()));
    assert_eq!(got, want, "{name} drifted");
}

#[test]
fn golden_reports() {
    golden("tau.json", &["tau", "--m", "2", "--nmax", "12"]);
    golden("darcais.json", &["darcais", "--n", "6"]);
    golden("gap.json", &["gap", "--k", "24", "--m", "1", "--terms", "8"]);
    golden("form.json", &["form", "DE4", "--terms", "8"]);
    golden("tau.csv", &["--format", "csv", "tau", "--m", "1", "--nmax", "10"]);
}

#[test]
fn reports_are_reproducible() {
    let args = ["perturb", "--k", "16", "--eps", "1e-6", "--draws", "2", "--seed", "5"];
    assert_eq!(run(&args).stdout, run(&args).stdout);
}

#[test]
fn report_wrapper() {
    let v = json(&["tau", "--m", "1", "--nmax", "5"]);
    assert_eq!(v["command"], "tau");
    assert_eq!(v["passed"], true);
    assert!(v["claim"].as_str().is_some_and(|s| !s.is_empty()));
    assert!(v.get("elapsed_ms").is_none());
    let v = json(&["--timings", "tau", "--m", "1", "--nmax", "5"]);
    assert!(v["elapsed_ms"].is_u64());
}

#[test]
fn csv_rows() {
    let s = stdout(&["--format", "csv", "tau", "--m", "2", "--nmax", "5"]);
    assert_eq!(s, "n,tau_m\n2,1\n3,-48\n4,1080\n5,-15040\n");
}

#[test]
fn out_file() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("r.json");
    let p = path.to_str().unwrap();
    let out = run(&["--out", p, "gap", "--k", "12", "--m", "0", "--terms", "4"]);
    assert_eq!(out.status.code(), Some(0));
    assert!(out.stdout.is_empty());
    let v: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&path).unwrap()).unwrap();
    assert_eq!(v["result"]["coefficients"][2], "196560");
}

#[test]
fn failed_assertion_exits_1() {
    let out = run(&["prop65", "--k", "24", "--b1", "1", "--bk=-2880", "--verify"]);
    assert_eq!(out.status.code(), Some(1));
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(v["passed"], false);
}

#[test]
fn bad_input_exits_2() {
    for args in [
        &["form", "E4+"][..],
        &["form", "E3"],
        &["eval", "E4", "--x", "0", "--y", "0.01"],
        &["gap", "--k", "7", "--m", "0"],
        &["--prec", "10", "tau"],
        &["nonsense"],
    ] {
        let out = run(args);
        assert_eq!(out.status.code(), Some(2), "{args:?}");
        assert!(!out.stderr.is_empty());
    }
}

#[test]
fn tau_matches_known_values() {
    let v = json(&["eval", "Delta", "--x", "0", "--y", "1"]);
    assert_eq!(v["passed"], true);
    let s = stdout(&["--format", "csv", "tau", "--m", "1", "--nmax", "6"]);
    assert!(s.ends_with("5,4830\n6,-6048\n"), "{s}");
}
