use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

const TOY: &str = r#"{
  "geometry": {"cell_type": "simple_cubic"},
  "boundary": {"n_steps": 4, "strain": 0.08},
  "dataset": {"segment_scale": 2.5, "lgn1_cap": 10, "lgn2_cap": 64},
  "lgn1": {"latent": 8, "hidden_layers": 1, "message_passing_steps": 2, "steps": 20, "stress_steps": 5},
  "lgn2": {"latent": 8, "hidden_layers": 1, "message_passing_steps": 2, "batch_size": 16, "epochs": 2}
}"#;

const PIPELINE: [&str; 8] = [
    "gen-lattice",
    "simulate",
    "build-dataset",
    "train-lgn1",
    "train-lgn2",
    "rollout",
    "homogenize",
    "report",
];

fn lgn(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_lgn"))
        .current_dir(dir)
        .args(args)
        .output()
        .expect("binary runs")
}

fn ok(dir: &Path, args: &[&str]) -> String {
    let out = lgn(dir, args);
    assert!(out.status.success(), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout).unwrap()
}

fn stderr_json(out: &Output) -> Value {
    serde_json::from_slice(&out.stderr).unwrap_or_else(|_| panic!("stderr: {}", String::from_utf8_lossy(&out.stderr)))
}

fn toy_dir() -> tempfile::TempDir {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("toy.json"), TOY).unwrap();
    dir
}

fn run_pipeline(dir: &Path, out: &str) {
    for cmd in PIPELINE {
        ok(dir, &["--config", "toy.json", "--out", out, cmd]);
    }
}

fn snapshot(root: &Path) -> Vec<(String, Vec<u8>)> {
    let mut files = Vec::new();
    let mut stack = vec![root.to_path_buf()];
    while let Some(d) = stack.pop() {
        for e in fs::read_dir(&d).unwrap() {
            let p = e.unwrap().path();
            if p.is_dir() {
                stack.push(p);
            } else {
                files.push((p.strip_prefix(root).unwrap().display().to_string(), fs::read(&p).unwrap()));
            }
        }
    }
    files.sort();
    files
}

#[test]
fn gen_lattice_reports_simple_cubic_counts() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = r#"{"geometry": {"cell_type": "simple_cubic", "cells": [1, 1, 1]}}"#;
    fs::write(dir.path().join("sc.json"), cfg).unwrap();
    let summary: Value = serde_json::from_str(&ok(dir.path(), &["--config", "sc.json", "gen-lattice"])).unwrap();
    assert_eq!(summary["nodes"], 8);
    assert_eq!(summary["struts"], 12);
    assert!(dir.path().join("out/mesh.vtk").is_file());
    assert!(dir.path().join("out/graphs/graph_0.json").is_file());
    let meta: Value = serde_json::from_slice(&fs::read(dir.path().join("out/gen-lattice.meta.json")).unwrap()).unwrap();
    assert_eq!(meta["seed"], 0);
    assert_eq!(meta["config_sha256"].as_str().unwrap().len(), 64);
}

#[test]
fn invalid_cell_type_exits_2_naming_the_field() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("bad.json"), r#"{"geometry": {"cell_type": "hexagonal"}}"#).unwrap();
    let out = lgn(dir.path(), &["--config", "bad.json", "gen-lattice"]);
    assert_eq!(out.status.code(), Some(2));
    let err = stderr_json(&out);
    assert_eq!(err["exit_code"], 2);
    assert!(err["message"].as_str().unwrap().contains("geometry.cell_type"), "{err}");
    assert!(!dir.path().join("out").exists());
}

#[test]
fn missing_config_is_an_io_error() {
    let dir = tempfile::tempdir().unwrap();
    let out = lgn(dir.path(), &["--config", "absent.json", "gen-lattice"]);
    assert_eq!(out.status.code(), Some(5));
    assert_eq!(stderr_json(&out)["error"], "io");
}

#[test]
fn print_config_applies_overrides() {
    let dir = tempfile::tempdir().unwrap();
    let text = ok(dir.path(), &["--seed", "7", "--out", "elsewhere", "--print-config"]);
    let cfg: Value = serde_json::from_str(&text).unwrap();
    assert_eq!(cfg["seed"], 7);
    assert_eq!(cfg["out_dir"], "elsewhere");
    assert!(!dir.path().join("elsewhere").exists());
}

#[test]
fn simulate_records_every_step_and_detects_tampering() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("sc.json"), r#"{"geometry": {"cell_type": "simple_cubic"}}"#).unwrap();
    ok(dir.path(), &["--config", "sc.json", "gen-lattice"]);
    let table = ok(dir.path(), &["--config", "sc.json", "simulate"]);
    let rows: Vec<&str> = table.lines().skip(1).collect();
    assert_eq!(rows.len(), 13);
    let last: Vec<f64> = rows[12].split_whitespace().map(|v| v.parse().unwrap()).collect();
    assert_eq!(last[0], 12.0);
    assert!((last[1] - 0.25 * 10.0).abs() < 1e-6);
    assert!(last[2] < 0.0);

    let manifest = dir.path().join("out/trajectory/manifest.json");
    let m: Value = serde_json::from_slice(&fs::read(&manifest).unwrap()).unwrap();
    assert_eq!(m["steps"].as_array().unwrap().len(), 13);

    let text = fs::read_to_string(&manifest).unwrap().replace("\"rate\": 20.0", "\"rate\": 21.0");
    fs::write(&manifest, text).unwrap();
    let out = lgn(dir.path(), &["--config", "sc.json", "build-dataset"]);
    assert_eq!(out.status.code(), Some(4));
    assert!(stderr_json(&out)["message"].as_str().unwrap().contains("checksum"));
}

#[test]
fn full_pipeline_is_byte_identical_across_reruns() {
    let dir = toy_dir();
    run_pipeline(dir.path(), "a");
    let csv = fs::read_to_string(dir.path().join("a/report/force.csv")).unwrap();
    assert!(csv.starts_with("displacement,strain,force_mean,force_std,force_truth"));
    assert_eq!(csv.lines().count(), 1 + 5);
    let errors: Value = serde_json::from_slice(&fs::read(dir.path().join("a/report/errors.json")).unwrap()).unwrap();
    assert_eq!(errors["predictions"].as_array().unwrap().len(), 4);
    assert!(errors["aggregate"]["final_mean"].as_f64().unwrap().is_finite());
    assert!(dir.path().join("a/rollout/seg_0/step_004.vtk").is_file());
    assert!(fs::read_to_string(dir.path().join("a/report/seg_0/step_004.vtk")).unwrap().contains("SCALARS error"));

    let first = snapshot(&dir.path().join("a"));
    run_pipeline(dir.path(), "a");
    let second = snapshot(&dir.path().join("a"));
    assert_eq!(first.len(), second.len());
    for ((pa, ba), (pb, bb)) in first.iter().zip(&second) {
        assert_eq!(pa, pb);
        assert!(ba == bb, "{pa} differs between reruns");
    }
}

#[test]
fn rollout_rejects_a_swapped_checkpoint() {
    let dir = toy_dir();
    for cmd in &PIPELINE[..5] {
        ok(dir.path(), &["--config", "toy.json", cmd]);
    }
    let before = snapshot(&dir.path().join("out"));
    let out = lgn(dir.path(), &["--config", "toy.json", "rollout", "--lgn1", "out/lgn2.lgnc"]);
    assert_eq!(out.status.code(), Some(4));
    assert!(stderr_json(&out)["message"].as_str().unwrap().contains("architecture mismatch"));
    assert_eq!(snapshot(&dir.path().join("out")), before);
}

#[test]
fn report_of_the_oracle_against_itself_is_zero() {
    let dir = toy_dir();
    ok(dir.path(), &["--config", "toy.json", "gen-lattice"]);
    ok(dir.path(), &["--config", "toy.json", "simulate"]);
    let truth = dir.path().join("out/trajectory");
    let before = snapshot(&truth);
    ok(dir.path(), &["--config", "toy.json", "report", "--prediction", "out/trajectory"]);
    assert_eq!(snapshot(&truth), before);
    let errors: Value = serde_json::from_slice(&fs::read(dir.path().join("out/report/errors.json")).unwrap()).unwrap();
    let stats = &errors["predictions"][0]["stats"];
    assert_eq!(stats["mean"], 0.0);
    assert_eq!(stats["max"], 0.0);
    assert_eq!(errors["aggregate"]["final_max"], 0.0);
}
