mod common;

use std::fs;

use common::{code, ok, sigtriage, small_study, STUDY_FILES};
use serde_json::Value;

#[test]
fn ingest_empty_directory_gives_empty_pool() {
    let tmp = tempfile::tempdir().unwrap();
    fs::create_dir(tmp.path().join("in")).unwrap();
    ok(tmp.path(), &["ingest", "in", "--format", "tau-bench", "--out", "pool.jsonl"]);
    assert_eq!(fs::read_to_string(tmp.path().join("pool.jsonl")).unwrap(), "");
}

#[test]
fn malformed_file_is_a_validation_failure() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();
    ok(dir, &["synth", "study", "--seed", "1", "--out", "study"]);
    fs::write(dir.join("study/results/zz_broken.json"), "{\"task_id\": 3, \"traj\": [").unwrap();
    let args = ["ingest", "study/results", "--format", "tau-bench", "--out", "pool.jsonl", "--violations", "v.jsonl"];

    let out = sigtriage(dir, &args);
    assert_eq!(code(&out), 1);
    assert!(!dir.join("pool.jsonl").exists());
    let v = fs::read_to_string(dir.join("v.jsonl")).unwrap();
    assert_eq!(v.lines().count(), 1);
    assert!(v.contains("zz_broken.json"), "{v}");

    let mut lenient = args.to_vec();
    lenient.push("--lenient");
    ok(dir, &lenient);
    // Pool size equals the number of well-formed result files.
    let files = fs::read_dir(dir.join("study/results")).unwrap().count();
    assert_eq!(fs::read_to_string(dir.join("pool.jsonl")).unwrap().lines().count(), files - 1);
}

#[test]
fn usage_errors_exit_2() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();
    assert_eq!(code(&sigtriage(dir, &["detect", "--no-such-flag"])), 2);
    assert_eq!(code(&sigtriage(dir, &["ingest", "missing", "--format", "canonical", "--out", "p.jsonl"])), 2);
    fs::write(dir.join("bad.toml"), "[sample]\nsize = 3\n").unwrap();
    assert_eq!(code(&sigtriage(dir, &["--config", "bad.toml", "synth", "planted", "--seed", "1", "--out", "x"])), 2);
}

#[test]
fn detect_output_does_not_depend_on_worker_count() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();
    ok(dir, &["synth", "planted", "--seed", "3", "--out", "planted"]);
    ok(dir, &["detect", "--pool", "planted/pool.jsonl", "--out", "a.jsonl", "--workers", "1"]);
    ok(dir, &["detect", "--pool", "planted/pool.jsonl", "--out", "b.jsonl", "--workers", "3"]);
    let a = fs::read(dir.join("a.jsonl")).unwrap();
    assert_eq!(a, fs::read(dir.join("b.jsonl")).unwrap());
    assert_eq!(a.iter().filter(|b| **b == b'\n').count(), 500);
}

#[test]
fn sample_is_reproducible_and_writes_a_manifest() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();
    small_study(dir);
    for out in ["s1.jsonl", "s2.jsonl"] {
        ok(dir, &["sample", "--pool", "pool.jsonl", "--reports", "reports.jsonl", "--strategy", "signal", "--seed", "8", "--out", out]);
    }
    let s1 = fs::read_to_string(dir.join("s1.jsonl")).unwrap();
    assert_eq!(s1, fs::read_to_string(dir.join("s2.jsonl")).unwrap());
    let set: Value = serde_json::from_str(&s1).unwrap();
    assert_eq!(set["trajectory_ids"].as_array().unwrap().len(), 100);

    let manifest = fs::read_to_string(dir.join("s1.jsonl.manifest.txt")).unwrap();
    for needle in ["strategy: Signal", "seed: 8", "sample size: 100", "qualifying pool:", "reward mix:", "streams:"] {
        assert!(manifest.contains(needle), "{needle} missing from\n{manifest}");
    }

    // Signal without reports is a usage error.
    let out = sigtriage(dir, &["sample", "--pool", "pool.jsonl", "--strategy", "signal", "--seed", "8", "--out", "x.jsonl"]);
    assert_eq!(code(&out), 2);
}

#[test]
fn flags_override_config_file() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();
    small_study(dir);
    fs::write(dir.join("cfg.toml"), "[sample]\nn = 12\nheuristic_min_user_msgs = 11\n").unwrap();
    let base = ["--config", "cfg.toml", "sample", "--pool", "pool.jsonl", "--strategy", "heuristic", "--seed", "1"];

    ok(dir, &[&base[..], &["--out", "from-file.jsonl"]].concat());
    let set: Value = serde_json::from_str(&fs::read_to_string(dir.join("from-file.jsonl")).unwrap()).unwrap();
    assert_eq!(set["trajectory_ids"].as_array().unwrap().len(), 12);

    ok(dir, &[&base[..], &["--n", "5", "--out", "from-flag.jsonl"]].concat());
    let set: Value = serde_json::from_str(&fs::read_to_string(dir.join("from-flag.jsonl")).unwrap()).unwrap();
    assert_eq!(set["trajectory_ids"].as_array().unwrap().len(), 5);

    let manifest = fs::read_to_string(dir.join("from-flag.jsonl.manifest.txt")).unwrap();
    let pool_line = manifest.lines().find(|l| l.starts_with("qualifying pool")).unwrap().to_string();
    ok(dir, &["sample", "--pool", "pool.jsonl", "--strategy", "heuristic", "--seed", "1", "--n", "5", "--out", "default.jsonl"]);
    let default = fs::read_to_string(dir.join("default.jsonl.manifest.txt")).unwrap();
    // The file's stricter filter still applies when only --n is given.
    assert!(!default.contains(&pool_line), "{pool_line} vs\n{default}");
}

#[test]
fn submit_export_and_analyze_mismatch() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();
    small_study(dir);
    let mut lines = String::new();
    for ann in ["ann1", "ann2", "ann3"] {
        for id in common::order(dir, ann) {
            lines.push_str(&format!(
                "{{\"annotator_id\":\"{ann}\",\"blinded_id\":\"{id}\",\"informative\":\"YES\",\"main_reason\":\"Conversation\"}}\n"
            ));
        }
    }
    fs::write(dir.join("in.jsonl"), &lines).unwrap();
    ok(dir, &[&["submit", "--input", "in.jsonl"][..], &STUDY_FILES].concat());
    // Resubmitting hits the duplicate check.
    assert_eq!(code(&sigtriage(dir, &[&["submit", "--input", "in.jsonl"][..], &STUDY_FILES].concat())), 1);

    ok(dir, &[&["export", "--out", "export.jsonl"][..], &STUDY_FILES].concat());
    let export = fs::read_to_string(dir.join("export.jsonl")).unwrap();
    assert_eq!(export.lines().count(), 1 + 18);

    fs::write(dir.join("wrong.txt"), "Table 1.\n").unwrap();
    let out = sigtriage(dir, &["analyze", "--export", "export.jsonl", "--check-against", "wrong.txt"]);
    assert_eq!(code(&out), 1);
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(stderr.contains("line 1"), "{stderr}");
}
