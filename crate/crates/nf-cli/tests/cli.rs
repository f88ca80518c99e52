use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use nf_cli::presets::PRESETS;
use serde_json::Value;

/// Symmetric rotation pair threshold at g = 3, frozen from a 30-digit evaluation.
const LAMBDA_STAR_G3: f64 = 0.6437371747424248;

fn nf(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_nf")).args(args).current_dir(dir).output().expect("binary runs")
}

fn stderr_report(out: &Output) -> Value {
    let text = String::from_utf8_lossy(&out.stderr);
    serde_json::from_str(text.trim()).unwrap_or_else(|e| panic!("stderr is not JSON ({e}): {text}"))
}

fn finite_config(output: &str, theta: &str) -> String {
    format!(
        r#"kind = "finite-dde"
output = "{output}"
seed = 3
[finite]
j = [[0.0, -1.0], [1.0, 0.0]]
input = [0.0, 0.0]
noise = 0.5
tau = 0.5
theta = {theta}
[solver]
t_end = 5.0
"#
    )
}

fn manifest_files(dir: &Path) -> Vec<(String, String)> {
    let text = fs::read_to_string(dir.join("manifest")).unwrap();
    let doc: toml::Table = text.parse().unwrap();
    doc["files"]
        .as_array()
        .unwrap()
        .iter()
        .map(|f| (f["name"].as_str().unwrap().to_string(), f["sha256"].as_str().unwrap().to_string()))
        .collect()
}

#[test]
fn every_preset_validates() {
    for p in PRESETS {
        let cfg = p.config().unwrap_or_else(|e| panic!("{}: {e}", p.name));
        cfg.validate().unwrap_or_else(|e| panic!("{}: {e}", p.name));
    }
}

#[test]
fn hopf_preset_reports_the_threshold() {
    let tmp = tempfile::tempdir().unwrap();
    let out = nf(&["run", "hopf-cascade-symmetric", "--output", "hopf"], tmp.path());
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let csv = fs::read_to_string(tmp.path().join("hopf/hopf_curves.csv")).unwrap();
    let mut lines = csv.lines();
    let header: Vec<&str> = lines.next().unwrap().split(',').collect();
    let col = header.iter().position(|h| *h == "lambda_star").expect("lambda_star column");
    let mut rows = 0;
    for line in lines {
        let v: f64 = line.split(',').nth(col).unwrap().parse().unwrap();
        assert!((v - LAMBDA_STAR_G3).abs() < 1e-12, "{v}");
        rows += 1;
    }
    assert!(rows > 100);
}

#[test]
fn negative_time_constant_is_a_validation_error() {
    let tmp = tempfile::tempdir().unwrap();
    fs::write(tmp.path().join("c.toml"), finite_config("neg", "-1.0")).unwrap();
    let out = nf(&["run", "c.toml"], tmp.path());
    assert_eq!(out.status.code(), Some(2));
    let report = stderr_report(&out);
    assert_eq!(report["category"], "validation");
    assert!(report["field"].as_str().unwrap().starts_with("finite.theta"), "{report}");
    assert!(!tmp.path().join("neg").exists());
}

#[test]
fn unknown_keys_are_parse_errors() {
    let tmp = tempfile::tempdir().unwrap();
    let text = finite_config("x", "1.0").replace("noise = 0.5", "noise = 0.5\nnoize = 1.0");
    fs::write(tmp.path().join("c.toml"), text).unwrap();
    let out = nf(&["validate", "c.toml"], tmp.path());
    assert_eq!(out.status.code(), Some(2));
    assert_eq!(stderr_report(&out)["category"], "parse");
}

#[test]
fn unbounded_step_count_is_a_solver_error() {
    let tmp = tempfile::tempdir().unwrap();
    fs::write(tmp.path().join("c.toml"), finite_config("tiny", "1e-300")).unwrap();
    let out = nf(&["run", "c.toml"], tmp.path());
    assert_eq!(out.status.code(), Some(3));
    assert_eq!(stderr_report(&out)["category"], "solver");
}

#[test]
fn bad_thread_count_is_rejected() {
    let tmp = tempfile::tempdir().unwrap();
    let out = Command::new(env!("CARGO_BIN_EXE_nf"))
        .args(["presets"])
        .env("NF_THREADS", "0")
        .current_dir(tmp.path())
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
    assert_eq!(stderr_report(&out)["field"], "NF_THREADS");
}

#[test]
fn reruns_reproduce_file_checksums() {
    let tmp = tempfile::tempdir().unwrap();
    fs::write(tmp.path().join("c.toml"), finite_config("a", "1.0")).unwrap();
    assert!(nf(&["run", "c.toml"], tmp.path()).status.success());
    assert!(nf(&["run", "c.toml", "--output", "b"], tmp.path()).status.success());
    let a = manifest_files(&tmp.path().join("a"));
    let b = manifest_files(&tmp.path().join("b"));
    assert_eq!(a, b);
    for (name, sha) in &a {
        let bytes = fs::read(tmp.path().join("a").join(name)).unwrap();
        assert_eq!(&nf_cli::manifest::sha256_hex(&bytes), sha, "{name}");
    }
}

#[test]
fn network_reruns_are_bitwise_identical_across_thread_counts() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = r#"kind = "network-validate"
seed = 11
output = "net"
[finite]
j = [[0.0, -1.0], [1.0, 0.0]]
input = [0.0, 0.0]
noise = 0.5
tau = 0.5
[solver]
t_end = 2.0
[network]
sizes = [200]
trace = 3
sample_times = [1.0, 2.0]
"#;
    fs::write(tmp.path().join("n.toml"), cfg).unwrap();
    let run = |threads: &str, dir: &str| {
        let out = Command::new(env!("CARGO_BIN_EXE_nf"))
            .args(["run", "n.toml", "--output", dir])
            .env("NF_THREADS", threads)
            .current_dir(tmp.path())
            .output()
            .unwrap();
        assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
        manifest_files(&tmp.path().join(dir))
    };
    assert_eq!(run("1", "one"), run("3", "three"));
}

#[test]
fn sweeps_write_one_summary_row_per_value() {
    let tmp = tempfile::tempdir().unwrap();
    let text = finite_config("sw", "1.0")
        + r#"[sweep]
parameter = "noise"
from = 0.2
to = 1.0
steps = 5
"#;
    fs::write(tmp.path().join("c.toml"), text).unwrap();
    let out = nf(&["run", "c.toml"], tmp.path());
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let summary = fs::read_to_string(tmp.path().join("sw/summary.csv")).unwrap();
    assert_eq!(summary.lines().count(), 6);
    assert!(tmp.path().join("sw/trajectory_004.csv").exists());
}

#[test]
fn preset_listing_and_show() {
    let tmp = tempfile::tempdir().unwrap();
    let out = nf(&["presets"], tmp.path());
    assert!(out.status.success());
    assert_eq!(String::from_utf8_lossy(&out.stdout).lines().count(), PRESETS.len());
    let out = nf(&["presets", "--show", "fig-turing-reflected"], tmp.path());
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.contains("kind = \"field\""));
    assert_eq!(nf(&["presets", "--show", "nope"], tmp.path()).status.code(), Some(2));
}
