//! End-to-end checks of the command-line interface: JSON round-trips, exit
//! codes and deterministic outputs.

use std::path::PathBuf;
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_resilock"))
}

fn tmp(name: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("resilock-cli-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    dir.join(name)
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().unwrap()
}

#[test]
fn generate_then_analyze_round_trip() {
    let path = tmp("stack.json");
    let out = run(&[
        "generate",
        "--family",
        "identity-stack",
        "--n",
        "2",
        "--p",
        "2",
        "--out",
        path.to_str().unwrap(),
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));

    let out = run(&["analyze", path.to_str().unwrap(), "--p", "2", "--degree"]);
    assert!(out.status.success());
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(v["p"], 2);
    assert_eq!(v["overall"], true);
    assert_eq!(v["degree"], 2);
}

#[test]
fn analyze_reports_intolerable_losses() {
    let path = tmp("jet.json");
    let jet = serde_json::json!({
        "n": 3,
        "m": 4,
        "A": [[-0.997, 0.0, 0.618], [0.0, -0.506, 0.0], [-0.094, 0.0, -0.213]],
        "B": [[0.0, -4.242, 4.242, 1.487],
              [1.653, -1.274, -1.274, 0.002],
              [0.0, -0.281, 0.281, -0.882]],
    });
    std::fs::write(&path, serde_json::to_string(&jet).unwrap()).unwrap();
    let out = run(&["analyze", path.to_str().unwrap()]);
    assert!(out.status.success());
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(v["overall"], false);
    let verdicts = v["verdicts"].as_array().unwrap();
    assert_eq!(verdicts.len(), 4);
    assert_eq!(verdicts[0]["tolerable"], true);
    for verdict in &verdicts[1..] {
        assert_eq!(verdict["tolerable"], false);
    }
}

#[test]
fn malformed_json_is_input_error() {
    let path = tmp("broken.json");
    std::fs::write(&path, "{ not json").unwrap();
    let out = run(&["analyze", path.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    let msg = String::from_utf8_lossy(&out.stderr);
    assert!(msg.contains("parse error"), "stderr: {msg}");
}

#[test]
fn missing_file_is_input_error() {
    let out = run(&["analyze", "/nonexistent/system.json"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn unknown_fixture_is_unsupported() {
    let out = run(&["generate", "--fixture", "9x99"]);
    assert_eq!(out.status.code(), Some(4));
}

#[test]
fn simulate_is_deterministic_per_seed() {
    let a = tmp("run_a.csv");
    let b = tmp("run_b.csv");
    for path in [&a, &b] {
        let out = run(&[
            "simulate",
            "--scenario",
            "canard",
            "--controller",
            "resilient",
            "--seed",
            "11",
            "--dt",
            "0.01",
            "--out",
            path.to_str().unwrap(),
        ]);
        assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    }
    let bytes_a = std::fs::read(&a).unwrap();
    let bytes_b = std::fs::read(&b).unwrap();
    assert!(!bytes_a.is_empty());
    assert_eq!(bytes_a, bytes_b);
    let header = String::from_utf8_lossy(&bytes_a);
    assert!(header.starts_with("t,x1,x2,x3,u1,u2,u3,w1,distance"));
}

#[test]
fn simulate_rudder_loss_is_numerical_error() {
    let out = run(&[
        "simulate",
        "--scenario",
        "rudder",
        "--controller",
        "resilient",
    ]);
    assert_eq!(out.status.code(), Some(5));
    let msg = String::from_utf8_lossy(&out.stderr);
    assert!(msg.contains("not well-defined"), "stderr: {msg}");
}

#[test]
fn reach_reports_min_time() {
    let path = tmp("reach.json");
    let sys = serde_json::json!({
        "n": 1,
        "m": 3,
        "B": [[1.0, 1.0, 1.0]],
        "x0": [2.0],
        "x_goal": [0.0],
        "epsilon": 0.5,
    });
    std::fs::write(&path, serde_json::to_string(&sys).unwrap()).unwrap();
    let out = run(&["reach", path.to_str().unwrap(), "--loss", "3", "--min-time"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    // One lost of three unit actuators: worst-case speed 2 - 1 = 1, so the
    // remaining distance 1.5 needs 1.5 s; the bound uses sqrt(T) scaling.
    assert!(v["min_time"].as_f64().unwrap() > 0.0);
    assert!(v["max_g"].as_f64().unwrap() < 0.0);
}

#[test]
fn loss_index_out_of_range_is_input_error() {
    let path = tmp("range.json");
    let sys = serde_json::json!({"n": 1, "m": 3, "B": [[1.0, 1.0, 1.0]]});
    std::fs::write(&path, serde_json::to_string(&sys).unwrap()).unwrap();
    let out = run(&["reach", path.to_str().unwrap(), "--loss", "7", "--min-time"]);
    assert_eq!(out.status.code(), Some(2));
}
