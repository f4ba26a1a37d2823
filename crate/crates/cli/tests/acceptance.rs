// One PASS/FAIL line per acceptance criterion. Runs without the libtest
// harness so the lines always reach the terminal; exits non-zero when any
// criterion fails.

#[path = "../../core/tests/common/clean_oracle.rs"]
mod clean_oracle;

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::path::Path;
use std::process::Command;
use std::time::{Duration, Instant};

use serde_json::{json, Map};
use sigtriage_core::annotation::{LabelSubmission, MainReason, QueueManifest};
use sigtriage_core::signals::execution::{detect_loops, ExecutionConfig};
use sigtriage_core::stats::{
    annotation_efficiency, clopper_pearson, fisher_exact_two_sided, fleiss_kappa, gwet_ac1, standardized_rate,
    BinomialCount, RatingMatrix, Stratum, StratumRates,
};
use sigtriage_core::synth::{planted_pool, script_labels, study_pool, StrategyTargets};
use sigtriage_core::trajectory::{median_user_turns, Message, Role, ToolInvocation, Trajectory};
use sigtriage_core::triage::{sample_heuristic, sample_random, sample_signal, Stream};
use sigtriage_core::{build_reports, Category, DetectorConfig, SampleSet, Strategy, TriageConfig};

type Outcome = Result<String, String>;

fn check(ok: bool, detail: String) -> Outcome {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn bc(k: u64, n: u64) -> BinomialCount {
    BinomialCount::new(k, n).expect("valid count")
}

fn round2(x: f64) -> f64 {
    (x * 100.0).round() / 100.0
}

fn table1_intervals() -> Outcome {
    let cells: [(u64, u64, f64, f64); 9] = [
        (54, 100, 0.44, 0.64),
        (74, 100, 0.64, 0.82),
        (82, 100, 0.73, 0.89),
        (28, 37, 0.59, 0.88),
        (59, 70, 0.74, 0.92),
        (50, 52, 0.87, 1.0),
        (26, 63, 0.29, 0.54),
        (15, 30, 0.31, 0.69),
        (32, 48, 0.52, 0.80),
    ];
    let t0 = Instant::now();
    let mut bad = Vec::new();
    for (k, n, lo, hi) in cells {
        let (l, h) = clopper_pearson(bc(k, n), 0.05).map_err(|e| e.to_string())?;
        if round2(l) != lo || round2(h) != hi {
            bad.push(format!("{k}/{n} gave [{l:.4}, {h:.4}]"));
        }
    }
    let took = t0.elapsed();
    if !bad.is_empty() {
        return Err(bad.join("; "));
    }
    check(took < Duration::from_secs(1), format!("9 intervals in {took:?}"))
}

fn fisher_tests() -> Outcome {
    let vs_random = fisher_exact_two_sided(82, 18, 54, 46).map_err(|e| e.to_string())?;
    let vs_heuristic = fisher_exact_two_sided(82, 18, 74, 26).map_err(|e| e.to_string())?;
    check(
        vs_random < 0.001 && (vs_heuristic - 0.232).abs() <= 0.01,
        format!("signal vs random p = {vs_random:.2e}, signal vs heuristic p = {vs_heuristic:.4}"),
    )
}

fn standardization() -> Outcome {
    let rate = |fail: (u64, u64), success: (u64, u64)| {
        standardized_rate(&StratumRates {
            strata: vec![
                Stratum { label: "failed".into(), count: bc(fail.0, fail.1), weight: 0.37 },
                Stratum { label: "successful".into(), count: bc(success.0, success.1), weight: 0.63 },
            ],
        })
        .map_err(|e| e.to_string())
    };
    let signal = rate((50, 52), (32, 48))? * 100.0;
    let heuristic = rate((59, 70), (15, 30))? * 100.0;
    let random = rate((28, 37), (26, 63))? * 100.0;
    check(
        (signal - 77.6).abs() <= 0.2 && (heuristic - 62.7).abs() <= 0.2 && format!("{random:.1}") == "54.0"
            && (random - 54.0).abs() < 1e-9,
        format!("signal {signal:.2}%, heuristic {heuristic:.2}%, random {random:.6}%"),
    )
}

fn efficiency() -> Outcome {
    let rates = BTreeMap::from([
        ("signal".to_string(), bc(82, 100)),
        ("heuristic".to_string(), bc(74, 100)),
        ("random".to_string(), bc(54, 100)),
    ]);
    let e = annotation_efficiency(&rates).map_err(|e| e.to_string())?;
    let lpi = |s: &str| e.labels_per_informative[s];
    let gain = e.gain("signal", "random").ok_or("no signal/random gain")?;
    check(
        (lpi("signal") - 1.22).abs() <= 0.005
            && (lpi("heuristic") - 1.35).abs() <= 0.005
            && (lpi("random") - 1.85).abs() <= 0.005
            && (gain - 1.52).abs() <= 0.01,
        format!(
            "labels per informative {:.4} / {:.4} / {:.4}, gain {gain:.4}",
            lpi("signal"),
            lpi("heuristic"),
            lpi("random")
        ),
    )
}

fn agreement() -> Outcome {
    const Y: bool = true;
    const N: bool = false;
    let m = |rows: &[Vec<bool>]| RatingMatrix::binary(rows).map_err(|e| e.to_string());
    let close = |a: f64, b: f64| (a - b).abs() <= 1e-9;
    let mut notes = Vec::new();

    let perfect = m(&[vec![Y, Y, Y], vec![N, N, N], vec![Y, Y, Y]])?;
    let (a, k) = (gwet_ac1(&perfect).value, fleiss_kappa(&perfect).value);
    if a != 1.0 || k != 1.0 {
        return Err(format!("perfect agreement gave AC1 {a}, kappa {k}"));
    }
    let unanimous = m(&[vec![Y, Y], vec![Y, Y]])?;
    if gwet_ac1(&unanimous).value != 1.0 || fleiss_kappa(&unanimous).value != 1.0 {
        return Err("single-category fixture is not 1.0".into());
    }

    // Pa = 2/3 and the YES share is 1/2, so both chance terms are 1/2.
    let pinned = m(&[vec![Y, Y, Y], vec![Y, Y, N], vec![N, N, N], vec![Y, N, N]])?;
    let (a, k) = (gwet_ac1(&pinned).value, fleiss_kappa(&pinned).value);
    if !close(a, 1.0 / 3.0) || !close(k, 1.0 / 3.0) {
        return Err(format!("pinned fixture gave AC1 {a}, kappa {k}"));
    }

    // Nine unanimous YES items and one split item: Pa = 840/900, YES share
    // 29/30. Kappa chance 842/900 gives -2/58; AC1 chance 58/900 gives 782/842.
    let mut rows = vec![vec![Y, Y, Y]; 9];
    rows.push(vec![Y, Y, N]);
    let skewed = m(&rows)?;
    let (a, k) = (gwet_ac1(&skewed).value, fleiss_kappa(&skewed).value);
    if !close(a, 782.0 / 842.0) || !close(k, -2.0 / 58.0) {
        return Err(format!("skewed fixture gave AC1 {a}, kappa {k}"));
    }
    if k >= a {
        return Err(format!("skewed fixture has kappa {k} >= AC1 {a}"));
    }
    notes.push(format!("skewed fixture AC1 {a:.4} > kappa {k:.4}"));
    notes.push("published AC1 0.477 and kappa 0.662 need the unreleased labels and are not checked".into());
    Ok(notes.join("; "))
}

#[derive(Debug, PartialEq, Eq, PartialOrd, Ord)]
struct Found {
    subkind: &'static str,
    start: usize,
    end: usize,
    detail: String,
}

/// Tests every window of the stream against the three loop definitions and
/// keeps the windows no larger qualifying window of the same kind contains.
fn loop_oracle(calls: &[(u8, u8)], cfg: &ExecutionConfig) -> BTreeSet<Found> {
    let n = calls.len();
    let mut hits: Vec<Found> = Vec::new();
    for s in 0..n {
        for e in s..n {
            let w = &calls[s..=e];
            let len = w.len();
            if len >= cfg.identical_retry_min && w.iter().all(|c| *c == w[0]) {
                hits.push(Found { subkind: "identical-retry", start: s, end: e, detail: String::new() });
            }
            // One argument key, so every step must change it.
            if len >= cfg.drift_min_run && w.iter().all(|c| c.0 == w[0].0) && w.windows(2).all(|p| p[0].1 != p[1].1) {
                hits.push(Found { subkind: "parameter-drift", start: s, end: e, detail: "x".into() });
            }
            for p in 2..=cfg.cycle_period_max {
                if len < p * cfg.cycle_repeats_min {
                    continue;
                }
                let block: Vec<u8> = w[..p].iter().map(|c| c.0).collect();
                let periodic = (0..len).all(|i| w[i].0 == block[i % p]);
                let primitive = (1..p).all(|d| p % d != 0 || (0..p).any(|i| block[i] != block[i % d]));
                let mixed = block.iter().any(|t| *t != block[0]);
                if periodic && primitive && mixed {
                    hits.push(Found { subkind: "multi-tool-cycle", start: s, end: e, detail: p.to_string() });
                }
            }
        }
    }
    let mut out = BTreeSet::new();
    for h in &hits {
        let contained = hits.iter().any(|o| {
            o.subkind == h.subkind
                && o.detail == h.detail
                && o.start <= h.start
                && h.end <= o.end
                && (o.start, o.end) != (h.start, h.end)
        });
        if !contained {
            out.insert(Found { subkind: h.subkind, start: h.start, end: h.end, detail: h.detail.clone() });
        }
    }
    out
}

fn stream_trajectory(calls: &[(u8, u8)]) -> Trajectory {
    let messages = calls
        .iter()
        .enumerate()
        .map(|(i, (tool, value))| {
            let mut args = Map::new();
            args.insert("x".into(), json!(value));
            Message {
                index: i,
                role: Role::Assistant,
                text: String::new(),
                tool_calls: vec![ToolInvocation {
                    call_id: format!("c{i}"),
                    tool_name: ["alpha", "beta"][*tool as usize].into(),
                    arguments: args,
                }],
                observation: None,
            }
        })
        .collect();
    Trajectory { id: "enum".into(), domain: String::new(), reward: Some(0), meta: BTreeMap::new(), messages }
}

fn loop_oracle_equivalence() -> Outcome {
    let cfg = ExecutionConfig::default();
    let t0 = Instant::now();
    let (mut streams, mut mismatches, mut patterns) = (0usize, Vec::new(), 0usize);
    for len in 0..=8u32 {
        for code in 0..4u32.pow(len) {
            let calls: Vec<(u8, u8)> = (0..len).map(|i| ((code >> (2 * i)) & 1, (code >> (2 * i + 1)) & 1)).map(|(a, b)| (a as u8, b as u8)).collect();
            let expected = loop_oracle(&calls, &cfg);
            let actual: BTreeSet<Found> = detect_loops(&stream_trajectory(&calls), &cfg)
                .into_iter()
                .map(|inst| {
                    let subkind = match inst.subkind.as_str() {
                        "identical-retry" => "identical-retry",
                        "parameter-drift" => "parameter-drift",
                        "multi-tool-cycle" => "multi-tool-cycle",
                        other => panic!("unexpected loop subkind {other}"),
                    };
                    let (start, end) = (inst.span[0], *inst.span.last().unwrap());
                    let detail = match subkind {
                        "parameter-drift" => "x".to_string(),
                        "multi-tool-cycle" => inst.evidence.split_whitespace().nth(1).unwrap_or("").to_string(),
                        _ => String::new(),
                    };
                    Found { subkind, start, end, detail }
                })
                .collect();
            streams += 1;
            patterns += expected.len();
            if actual != expected && mismatches.len() < 3 {
                mismatches.push(format!("{calls:?}: expected {expected:?}, got {actual:?}"));
            }
        }
    }
    let took = t0.elapsed();
    if !mismatches.is_empty() {
        return Err(mismatches.join("; "));
    }
    check(took < Duration::from_secs(30), format!("{streams} streams, {patterns} patterns, 0 mismatches in {took:.1?}"))
}

fn planted_suite() -> Outcome {
    let (pool, manifest) = planted_pool(2024);
    if pool.len() != 500 || manifest.clean.len() != 100 {
        return Err(format!("pool of {} with {} clean", pool.len(), manifest.clean.len()));
    }
    let mut cfg = DetectorConfig::default();
    cfg.interaction.baseline_user_turns = median_user_turns(&pool);
    let reports = build_reports(&pool, &cfg);
    let by_id: HashMap<&str, _> = reports.iter().map(|r| (r.trajectory_id.as_str(), r)).collect();
    let trajs: HashMap<&str, &Trajectory> = pool.iter().map(|t| (t.id.as_str(), t)).collect();

    let detected = manifest
        .planted
        .iter()
        .filter(|p| {
            by_id[p.trajectory_id.as_str()].instances.iter().any(|i| i.category == p.category && i.subkind == p.subkind)
        })
        .count();
    let mut uncertified = 0;
    let mut fired = 0;
    for id in &manifest.clean {
        if !clean_oracle::uncertified_reasons(trajs[id.as_str()], cfg.interaction.baseline_user_turns).is_empty() {
            uncertified += 1;
        }
        if !by_id[id.as_str()].instances.is_empty() {
            fired += 1;
        }
    }
    check(
        detected == manifest.planted.len() && uncertified == 0 && fired == 0,
        format!(
            "recall {detected}/{}, clean set {} certified, {fired} false positives",
            manifest.planted.len(),
            manifest.clean.len() - uncertified
        ),
    )
}

fn sampling_contracts() -> Outcome {
    let (planted, _) = planted_pool(7);
    let study: Vec<Trajectory> = study_pool(7).into_iter().map(|(t, _)| t).collect();
    let mut detector = DetectorConfig::default();
    detector.interaction.baseline_user_turns = median_user_turns(&planted);
    let reports = build_reports(&planted, &detector);
    let by_id: HashMap<&str, _> = reports.iter().map(|r| (r.trajectory_id.as_str(), r)).collect();
    let cfg = TriageConfig { seed: 11, ..TriageConfig::default() };

    let draw = |which: Strategy| -> Result<(SampleSet, &[Trajectory]), String> {
        let r = match which {
            Strategy::Random => sample_random(&planted, 100, cfg.seed).map(|s| (s, planted.as_slice())),
            Strategy::Heuristic => sample_heuristic(&study, &cfg).map(|s| (s, study.as_slice())),
            Strategy::Signal => sample_signal(&planted, &reports, &cfg).map(|s| (s, planted.as_slice())),
        };
        r.map_err(|e| e.to_string())
    };
    let mut notes = Vec::new();
    for which in [Strategy::Random, Strategy::Heuristic, Strategy::Signal] {
        let (a, pool) = draw(which)?;
        let (b, _) = draw(which)?;
        if a.to_json_line() != b.to_json_line() {
            return Err(format!("{which:?} is not reproducible"));
        }
        let unique: BTreeSet<&String> = a.trajectory_ids.iter().collect();
        if a.len() != 100 || unique.len() != 100 {
            return Err(format!("{which:?} drew {} ids, {} unique", a.len(), unique.len()));
        }
        let trajs: HashMap<&str, &Trajectory> = pool.iter().map(|t| (t.id.as_str(), t)).collect();
        match which {
            Strategy::Heuristic => {
                if let Some(id) = a.trajectory_ids.iter().find(|id| trajs[id.as_str()].user_message_count() < 10) {
                    return Err(format!("heuristic drew {id} with fewer than 10 user messages"));
                }
            }
            Strategy::Signal => {
                let exhaustion_only = BTreeSet::from([Category::Exhaustion]);
                if let Some(id) = a.trajectory_ids.iter().find(|id| by_id[id.as_str()].activations == exhaustion_only) {
                    return Err(format!("signal drew exhaustion-only {id}"));
                }
                let pool_has = reports.iter().filter(|r| r.activations == exhaustion_only).count();
                notes.push(format!(
                    "signal streams {}+{}, {pool_has} exhaustion-only in pool and none drawn",
                    a.stream_count(Stream::Failure),
                    a.stream_count(Stream::Exemplar)
                ));
            }
            Strategy::Random => {}
        }
    }
    Ok(format!("100 unique ids each, reproducible, heuristic filter held; {}", notes.join("")))
}

fn sigtriage(dir: &Path, args: &[&str]) -> Result<String, String> {
    let out = Command::new(env!("CARGO_BIN_EXE_sigtriage"))
        .args(args)
        .current_dir(dir)
        .env("RUST_LOG", "warn")
        .output()
        .map_err(|e| e.to_string())?;
    if !out.status.success() {
        return Err(format!(
            "sigtriage {} exited {:?}: {}",
            args.first().unwrap_or(&""),
            out.status.code(),
            String::from_utf8_lossy(&out.stderr).trim()
        ));
    }
    Ok(String::from_utf8_lossy(&out.stdout).into_owned())
}

fn targets() -> BTreeMap<Strategy, StrategyTargets> {
    use MainReason::*;
    let t = |failed_yes, successful_yes, reasons: &[(MainReason, usize)]| StrategyTargets {
        failed_yes,
        successful_yes,
        reasons: reasons.iter().copied().collect(),
    };
    BTreeMap::from([
        (Strategy::Random, t(28, 26, &[(ActionToolUse, 31), (Conversation, 23)])),
        (Strategy::Heuristic, t(59, 15, &[(ActionToolUse, 43), (Conversation, 28), (SuccessExemplar, 3)])),
        (Strategy::Signal, t(50, 32, &[(ActionToolUse, 49), (Conversation, 31), (SuccessExemplar, 2)])),
    ])
}

fn end_to_end() -> Outcome {
    let tmp = tempfile::tempdir().map_err(|e| e.to_string())?;
    let dir = tmp.path();
    let golden = Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/golden/tables.txt");

    sigtriage(dir, &["synth", "study", "--seed", "5", "--out", "study"])?;
    sigtriage(dir, &["ingest", "study/results", "--format", "tau-bench", "--out", "pool.jsonl"])?;
    sigtriage(dir, &["detect", "--pool", "pool.jsonl", "--out", "reports.jsonl"])?;

    let pool: Vec<Trajectory> = std::fs::read_to_string(dir.join("pool.jsonl"))
        .map_err(|e| e.to_string())?
        .lines()
        .map(|l| serde_json::from_str(l).map_err(|e| e.to_string()))
        .collect::<Result<_, _>>()?;
    let rewards: HashMap<String, Option<i64>> = pool.iter().map(|t| (t.id.clone(), t.reward)).collect();

    // The first random seed whose draw has the published failed/successful split.
    let failed_in = |s: &SampleSet| s.trajectory_ids.iter().filter(|id| rewards[*id] == Some(0)).count();
    let random_seed = (0..10_000u64)
        .find(|seed| sample_random(&pool, 100, *seed).map(|s| failed_in(&s) == 37).unwrap_or(false))
        .ok_or("no random seed draws 37 failed")?
        .to_string();

    let common = ["--pool", "pool.jsonl", "--reports", "reports.jsonl", "--n", "100"];
    for (strategy, seed) in [("random", random_seed.as_str()), ("heuristic", "1"), ("signal", "1")] {
        let out = format!("{strategy}.jsonl");
        let mut args = vec!["sample", "--strategy", strategy, "--seed", seed, "--out", &out];
        args.extend(common);
        sigtriage(dir, &args)?;
    }
    sigtriage(
        dir,
        &[
            "queue", "--sample", "random.jsonl", "--sample", "heuristic.jsonl", "--sample", "signal.jsonl",
            "--annotators", "ann1,ann2,ann3", "--seed", "3", "--out", "queue.json",
        ],
    )?;
    let manifest: QueueManifest =
        serde_json::from_str(&std::fs::read_to_string(dir.join("queue.json")).map_err(|e| e.to_string())?)
            .map_err(|e| e.to_string())?;
    let labels = script_labels(&manifest, &rewards, &targets(), 9)?;
    let lines: Vec<String> = labels.iter().map(|l: &LabelSubmission| serde_json::to_string(l).unwrap()).collect();
    std::fs::write(dir.join("labels-in.jsonl"), lines.join("\n") + "\n").map_err(|e| e.to_string())?;

    let files = ["--queue", "queue.json", "--pool", "pool.jsonl", "--reports", "reports.jsonl", "--labels", "labels.log"];
    let mut submit = vec!["submit", "--input", "labels-in.jsonl"];
    submit.extend(files);
    sigtriage(dir, &submit)?;
    let mut export = vec!["export", "--out", "export.jsonl"];
    export.extend(files);
    sigtriage(dir, &export)?;
    let golden_arg = golden.to_string_lossy().into_owned();
    sigtriage(dir, &["analyze", "--export", "export.jsonl", "--tables", "tables.txt", "--check-against", &golden_arg])?;

    let expected = std::fs::read(&golden).map_err(|e| e.to_string())?;
    let actual = std::fs::read(dir.join("tables.txt")).map_err(|e| e.to_string())?;
    check(
        expected == actual,
        format!(
            "{} queue items, {} labels, random seed {random_seed}, tables {} bytes identical",
            manifest.items.len(),
            labels.len(),
            actual.len()
        ),
    )
}

fn main() {
    // libtest flags such as --nocapture are accepted and ignored.
    let filter: Vec<String> = std::env::args().skip(1).filter(|a| !a.starts_with('-')).collect();
    let criteria: [(&str, fn() -> Outcome); 9] = [
        ("table1-intervals", table1_intervals),
        ("fisher-tests", fisher_tests),
        ("standardization", standardization),
        ("efficiency", efficiency),
        ("agreement-formulas", agreement),
        ("loop-oracle-equivalence", loop_oracle_equivalence),
        ("planted-pattern-suite", planted_suite),
        ("sampling-contracts", sampling_contracts),
        ("end-to-end-dry-run", end_to_end),
    ];
    let mut failed = 0;
    for (name, f) in criteria {
        if !filter.is_empty() && !filter.iter().any(|p| name.contains(p.as_str())) {
            continue;
        }
        match f() {
            Ok(detail) => println!("PASS {name}: {detail}"),
            Err(detail) => {
                failed += 1;
                println!("FAIL {name}: {detail}");
            }
        }
    }
    if failed > 0 {
        println!("{failed} acceptance criteria failed");
        std::process::exit(1);
    }
}
