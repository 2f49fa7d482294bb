use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn menger(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_menger")).args(args).output().expect("spawn menger")
}

fn json(out: &Output) -> Value {
    assert!(out.status.success(), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    serde_json::from_slice(&out.stdout).expect("json on stdout")
}

fn write(dir: &Path, name: &str, body: &str) -> String {
    let p = dir.join(name);
    std::fs::write(&p, body).unwrap();
    p.to_str().unwrap().to_owned()
}

fn plane(dir: &Path) -> String {
    let p = dir.join("plane.csv");
    let out = menger(&[
        "generate", "--family", "plane", "--d", "1", "--n", "2", "--count", "30", "--sigma", "0.02", "--seed", "7",
        "--out", p.to_str().unwrap(),
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    p.to_str().unwrap().to_owned()
}

#[test]
fn generate_is_deterministic() {
    let args = ["generate", "--family", "sphere", "--d", "2", "--n", "3", "--count", "50", "--sigma", "0.01", "--seed", "11"];
    let a = menger(&args);
    let b = menger(&args);
    assert!(a.status.success());
    assert_eq!(a.stdout, b.stdout);
    let text = String::from_utf8(a.stdout).unwrap();
    assert_eq!(text.lines().count(), 51);
    assert!(text.starts_with("x0,x1,x2"));
    let c = menger(&["generate", "--family", "sphere", "--d", "2", "--n", "3", "--count", "50", "--sigma", "0.01", "--seed", "12"]);
    assert_ne!(text.as_bytes(), c.stdout.as_slice());
}

#[test]
fn two_atoms_have_zero_curvature() {
    let dir = tempfile::tempdir().unwrap();
    let data = write(dir.path(), "two.csv", "x0,x1\n0,0\n0.5,0.5\n");
    let v = json(&menger(&["curvature", "--kind", "mt", "--dataset", &data, "--d", "1", "--ball", "0,0:1", "--exact"]));
    assert_eq!(v["command"], "curvature");
    assert_eq!(v["result"]["value"].as_f64(), Some(0.0));
}

#[test]
fn single_simplex() {
    let v = json(&menger(&["curvature", "--kind", "mt", "--simplex", "0,0;1,0;2,0"]));
    assert_eq!(v["result"]["value"].as_f64(), Some(0.0));
    let v = json(&menger(&["curvature", "--kind", "mt", "--simplex", "0,0;1,0;0,1"]));
    assert!(v["result"]["value"].as_f64().unwrap() > 0.0);
}

#[test]
fn verify_prop11_reports_finite_ratios() {
    let dir = tempfile::tempdir().unwrap();
    let data = plane(dir.path());
    let v = json(&menger(&["verify", "--suite", "prop11", "--dataset", &data, "--d", "1", "--centers", "4", "--scales", "2"]));
    assert_eq!(v["experiment"], "prop11");
    let rows = v["rows"].as_array().unwrap();
    assert!(!rows.is_empty());
    for r in rows {
        if let Some(ratio) = r["ratio"].as_f64() {
            assert!(ratio.is_finite() && ratio >= 0.0);
        }
    }
}

#[test]
fn beta_csv_output() {
    let dir = tempfile::tempdir().unwrap();
    let data = plane(dir.path());
    let out = menger(&["beta", "--dataset", &data, "--d", "1", "--centers", "3", "--scales", "2", "--format", "csv"]);
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.lines().next().unwrap().contains("beta"));
    assert_eq!(text.lines().count(), 7);
}

#[test]
fn config_file_is_overridden_by_flags() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "run.toml", "seed = 5\nformat = \"csv\"\n");
    let a = menger(&["generate", "--family", "cantor_product", "--d", "1", "--n", "2", "--level", "3", "--config", &cfg]);
    let b = menger(&["generate", "--family", "cantor_product", "--d", "1", "--n", "2", "--level", "3", "--seed", "5"]);
    assert!(a.status.success() && b.status.success(), "{}", String::from_utf8_lossy(&a.stderr));
    assert_eq!(a.stdout, b.stdout);
    let c = menger(&["beta", "--dataset", &plane(dir.path()), "--d", "1", "--ball", "0,0:2", "--config", &cfg, "--format", "json"]);
    json(&c);
    let bad = write(dir.path(), "bad.toml", "sed = 5\n");
    let out = menger(&["generate", "--family", "plane", "--d", "1", "--n", "2", "--config", &bad]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn invalid_input_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let data = plane(dir.path());
    let out = menger(&["beta", "--dataset", &data, "--d", "1", "--ball", "0,0,0:1"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("--ball"));
    let out = menger(&["beta", "--dataset", "/nonexistent.csv", "--d", "1"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("--dataset"));
    assert_eq!(menger(&["no-such-command"]).status.code(), Some(2));
    assert_eq!(menger(&["--help"]).status.code(), Some(0));
}

#[test]
fn computation_failure_exits_3() {
    let dir = tempfile::tempdir().unwrap();
    let data = plane(dir.path());
    let out = menger(&["curvature", "--dataset", &data, "--d", "1", "--exact", "--exact-budget", "10"]);
    assert_eq!(out.status.code(), Some(3));
    let line = write(dir.path(), "line.csv", "x0,x1\n0,0\n1,0\n2,0\n3,0\n");
    let out = menger(&["separate", "--dataset", &line, "--d", "2", "--ball", "0,0:3"]);
    assert_eq!(out.status.code(), Some(3));
}
