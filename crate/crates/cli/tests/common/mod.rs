#![allow(dead_code)]

use std::path::Path;
use std::process::{Command, Output};

pub fn sigtriage(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_sigtriage"))
        .args(args)
        .current_dir(dir)
        .env("RUST_LOG", "warn")
        .env_remove("TRIAGE_ADMIN_TOKEN")
        .output()
        .expect("spawn sigtriage")
}

/// Runs the command and panics with its stderr unless it exits 0.
pub fn ok(dir: &Path, args: &[&str]) -> String {
    let out = sigtriage(dir, args);
    assert!(out.status.success(), "{args:?} exited {:?}: {}", out.status.code(), String::from_utf8_lossy(&out.stderr));
    String::from_utf8_lossy(&out.stdout).into_owned()
}

pub fn code(out: &Output) -> i32 {
    out.status.code().expect("exit code")
}

pub const STUDY_FILES: [&str; 8] =
    ["--queue", "queue.json", "--pool", "pool.jsonl", "--reports", "reports.jsonl", "--labels", "labels.log"];

/// Synthetic study pool through detect, plus a small random sample queued
/// for three annotators.
pub fn small_study(dir: &Path) {
    ok(dir, &["synth", "study", "--seed", "4", "--out", "study"]);
    ok(dir, &["ingest", "study/results", "--format", "tau-bench", "--out", "pool.jsonl"]);
    ok(dir, &["detect", "--pool", "pool.jsonl", "--out", "reports.jsonl"]);
    ok(dir, &["sample", "--pool", "pool.jsonl", "--strategy", "random", "--n", "6", "--seed", "2", "--out", "random.jsonl"]);
    ok(dir, &["queue", "--sample", "random.jsonl", "--annotators", "ann1,ann2,ann3", "--seed", "1", "--out", "queue.json"]);
}

pub fn order(dir: &Path, annotator: &str) -> Vec<String> {
    let q: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(dir.join("queue.json")).unwrap()).unwrap();
    q["orders"][annotator].as_array().unwrap().iter().map(|v| v.as_str().unwrap().to_string()).collect()
}
