use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use anyhow::{anyhow, Context};
use serde_json::{json, Value};
use sigtriage_core::analysis::{check_against, compute_report, render_report, render_tables};
use sigtriage_core::annotation::{build_queue, LabelExport, LabelSubmission};
use sigtriage_core::synth::{planted_pool, study_pool, to_tau_json};
use sigtriage_core::trajectory::{median_user_turns, parse_document, validate_pool, SourceHint, Trajectory};
use sigtriage_core::triage::{activation_summary, sample_heuristic, sample_random, sample_signal, Stream};
use sigtriage_core::{build_reports, SampleSet, Strategy};

use crate::config::FileConfig;
use crate::files::{open_service, read, read_jsonl, read_pool, read_reports, write_atomic};
use crate::{usage, AnalyzeArgs, DetectArgs, ExportArgs, Failure, IngestArgs, QueueArgs, SampleArgs, SubmitArgs, SynthCommand};

fn source_files(inputs: &[PathBuf]) -> Result<Vec<PathBuf>, Failure> {
    let mut out = Vec::new();
    for input in inputs {
        if input.is_file() {
            out.push(input.clone());
        } else if input.is_dir() {
            let mut found = Vec::new();
            for entry in walkdir::WalkDir::new(input) {
                let entry = entry.with_context(|| format!("walking {}", input.display()))?;
                let ext = entry.path().extension().and_then(|e| e.to_str());
                if entry.file_type().is_file() && matches!(ext, Some("json" | "jsonl")) {
                    found.push(entry.into_path());
                }
            }
            found.sort();
            out.extend(found);
        } else {
            return Err(usage(format!("{} does not exist", input.display())));
        }
    }
    Ok(out)
}

fn jsonl<T: serde::Serialize>(items: &[T]) -> String {
    let mut s = String::new();
    for it in items {
        s.push_str(&serde_json::to_string(it).expect("serializable"));
        s.push('\n');
    }
    s
}

pub fn ingest(a: IngestArgs) -> Result<(), Failure> {
    let files = source_files(&a.inputs)?;
    let mut pool: Vec<Trajectory> = Vec::new();
    let mut violations: Vec<Value> = Vec::new();
    for f in &files {
        let raw = read(f)?;
        let hint = SourceHint {
            id_prefix: a.prefix_ids.then(|| f.file_stem().unwrap_or_default().to_string_lossy().into_owned()),
            domain: a.domain.clone(),
            source: Some(f.display().to_string()),
        };
        match parse_document(&raw, a.format.into(), &hint) {
            Ok(ts) => pool.extend(ts),
            Err(e) => violations.push(json!({"kind": "parse_error", "file": f.display().to_string(), "detail": e.to_string()})),
        }
    }
    for v in validate_pool(&pool) {
        eprintln!("violation: {v}");
        violations.push(serde_json::to_value(&v).expect("serializable"));
    }
    for v in violations.iter().filter(|v| v["kind"] == "parse_error") {
        eprintln!("violation: {}: {}", v["file"].as_str().unwrap_or(""), v["detail"].as_str().unwrap_or(""));
    }
    if let Some(path) = &a.violations {
        write_atomic(path, &jsonl(&violations))?;
    }
    eprintln!("{} trajectories from {} files, {} violations", pool.len(), files.len(), violations.len());
    if !violations.is_empty() && !a.lenient {
        return Err(anyhow!("{} violations (use --lenient to write the pool anyway)", violations.len()).into());
    }
    let lines: String = pool.iter().map(|t| t.to_canonical_json() + "\n").collect();
    write_atomic(&a.out, &lines)?;
    Ok(())
}

pub fn detect(a: DetectArgs, file: &FileConfig) -> Result<(), Failure> {
    let pool = read_pool(&a.pool)?;
    let mut cfg = file.detector(a.lexicons.as_deref()).map_err(Failure::Usage)?;
    let baseline = a.baseline.or(file.detect.baseline_user_turns).unwrap_or_else(|| median_user_turns(&pool));
    cfg.interaction.baseline_user_turns = baseline;
    cfg.validate().map_err(usage)?;

    let reports = match a.workers.or(file.detect.workers) {
        Some(0) => return Err(usage("--workers must be at least 1")),
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .context("starting worker pool")?
            .install(|| build_reports(&pool, &cfg)),
        None => build_reports(&pool, &cfg),
    };
    let lines: String = reports.iter().map(|r| r.to_json_line() + "\n").collect();
    write_atomic(&a.out, &lines)?;

    let summary = activation_summary(&reports);
    println!("{} trajectories, baseline {baseline} user turns", reports.len());
    println!("{:<15}{:>12}", "category", "trajectories");
    for (c, n) in summary {
        println!("{:<15}{:>12}", c.to_string(), n);
    }
    Ok(())
}

/// Strategy, seed, qualifying pool and reward mix of a drawn sample.
pub fn sample_manifest(set: &SampleSet, pool: &[Trajectory]) -> String {
    let rewards: BTreeMap<&str, Option<i64>> = pool.iter().map(|t| (t.id.as_str(), t.reward)).collect();
    let (mut failed, mut succeeded, mut unknown) = (0, 0, 0);
    for id in &set.trajectory_ids {
        match rewards.get(id.as_str()).copied().flatten() {
            Some(0) => failed += 1,
            Some(1) => succeeded += 1,
            _ => unknown += 1,
        }
    }
    let mut s = String::new();
    let _ = writeln!(s, "strategy: {}", set.strategy);
    let _ = writeln!(s, "seed: {}", set.seed);
    let _ = writeln!(s, "sample size: {}", set.len());
    let _ = writeln!(s, "qualifying pool: {} of {}", set.qualifying, pool.len());
    let share = if set.is_empty() { 0.0 } else { 100.0 * failed as f64 / set.len() as f64 };
    let _ = writeln!(s, "reward mix: {failed} failed, {succeeded} successful, {unknown} unknown ({share:.1}% failed)");
    if set.strategy == Strategy::Signal {
        let _ = writeln!(
            s,
            "streams: {} {}, {} {}",
            Stream::Failure,
            set.stream_count(Stream::Failure),
            Stream::Exemplar,
            set.stream_count(Stream::Exemplar)
        );
    }
    s
}

pub fn sample(a: SampleArgs, file: &FileConfig) -> Result<(), Failure> {
    let pool = read_pool(&a.pool)?;
    let mut cfg = file.triage();
    cfg.seed = a.seed;
    if let Some(n) = a.n {
        cfg.sample_size = n;
    }
    if let Some(f) = a.exemplar_fraction {
        cfg.exemplar_fraction = f;
    }
    if let Some(m) = a.min_user_msgs {
        cfg.heuristic_min_user_msgs = m;
    }
    cfg.validate().map_err(usage)?;

    let set = match a.strategy {
        Strategy::Random => sample_random(&pool, cfg.sample_size, cfg.seed)?,
        Strategy::Heuristic => sample_heuristic(&pool, &cfg)?,
        Strategy::Signal => {
            let path = a.reports.as_deref().ok_or_else(|| usage("--reports is required for the signal strategy"))?;
            sample_signal(&pool, &read_reports(path)?, &cfg)?
        }
    };
    write_atomic(&a.out, &(set.to_json_line() + "\n"))?;
    let manifest = sample_manifest(&set, &pool);
    let manifest_path = a.manifest.unwrap_or_else(|| {
        let mut p = a.out.clone().into_os_string();
        p.push(".manifest.txt");
        p.into()
    });
    write_atomic(&manifest_path, &manifest)?;
    print!("{manifest}");
    Ok(())
}

pub fn queue(a: QueueArgs) -> Result<(), Failure> {
    let mut samples: Vec<SampleSet> = Vec::new();
    for p in &a.samples {
        samples.extend(read_jsonl::<SampleSet>(p)?);
    }
    let manifest = build_queue(&samples, &a.annotators, a.seed, a.global_order)?;
    write_atomic(&a.out, &(serde_json::to_string_pretty(&manifest).expect("serializable") + "\n"))?;
    println!("{} items for {} annotators from {} samples", manifest.items.len(), manifest.annotators.len(), samples.len());
    Ok(())
}

pub fn submit(a: SubmitArgs) -> Result<(), Failure> {
    let mut service = open_service(&a.files)?;
    let subs: Vec<LabelSubmission> = read_jsonl(&a.input)?;
    for (i, sub) in subs.iter().enumerate() {
        if let Err(e) = service.submit(sub.clone(), chrono::Utc::now()) {
            return Err(anyhow!("submission {} of {}: {e} ({i} applied)", i + 1, subs.len()).into());
        }
    }
    println!("{} labels appended", subs.len());
    Ok(())
}

pub fn export(a: ExportArgs) -> Result<(), Failure> {
    let service = open_service(&a.files)?;
    let export = service.export();
    write_atomic(&a.out, &export.to_jsonl())?;
    println!("{} label records", export.records.len());
    Ok(())
}

fn first_difference(expected: &str, actual: &str) -> String {
    let (e, a): (Vec<&str>, Vec<&str>) = (expected.lines().collect(), actual.lines().collect());
    for i in 0..e.len().max(a.len()) {
        if e.get(i) != a.get(i) {
            return format!(
                "line {}:\n  expected: {}\n  actual:   {}",
                i + 1,
                e.get(i).unwrap_or(&"<end of file>"),
                a.get(i).unwrap_or(&"<end of file>")
            );
        }
    }
    "trailing newline differs".to_string()
}

pub fn analyze(a: AnalyzeArgs, file: &FileConfig) -> Result<(), Failure> {
    let export = LabelExport::parse(&read(&a.export)?)?;
    let alpha = a.alpha.or(file.analyze.alpha).unwrap_or(0.05);
    let report = compute_report(&export, alpha)?;
    if let Some(p) = &a.out {
        write_atomic(p, &(serde_json::to_string_pretty(&report).expect("serializable") + "\n"))?;
    }
    let tables = render_tables(&report);
    if let Some(p) = &a.tables {
        write_atomic(p, &tables)?;
    }
    print!("{}", render_report(&report));

    if let Some(golden) = &a.check_against {
        let text = read(golden)?;
        if is_json(golden) {
            let expected: Value = serde_json::from_str(&text).context("parsing expected values")?;
            let mismatches = check_against(&report, &expected).map_err(usage)?;
            for m in &mismatches {
                let actual = m.actual.as_ref().map_or_else(|| "nothing".to_string(), |v| v.to_string());
                eprintln!("mismatch at {}: expected {}, got {actual}", m.path, m.expected);
            }
            if !mismatches.is_empty() {
                return Err(anyhow!("{} values differ from {}", mismatches.len(), golden.display()).into());
            }
        } else if text != tables {
            return Err(anyhow!("tables differ from {}, {}", golden.display(), first_difference(&text, &tables)).into());
        }
        eprintln!("matches {}", golden.display());
    }
    Ok(())
}

fn is_json(p: &Path) -> bool {
    p.extension().and_then(|e| e.to_str()) == Some("json")
}

pub fn synth(c: SynthCommand) -> Result<(), Failure> {
    match c {
        SynthCommand::Planted { seed, out } => {
            let (pool, manifest) = planted_pool(seed);
            let lines: String = pool.iter().map(|t| t.to_canonical_json() + "\n").collect();
            write_atomic(&out.join("pool.jsonl"), &lines)?;
            write_atomic(&out.join("planted.json"), &(serde_json::to_string_pretty(&manifest).expect("serializable") + "\n"))?;
            println!("{} trajectories, {} planted, {} clean", pool.len(), manifest.planted.len(), manifest.clean.len());
        }
        SynthCommand::Study { seed, out } => {
            let pool = study_pool(seed);
            let mut cohorts = BTreeMap::new();
            for (t, cohort) in &pool {
                let task = t.meta.get("task_id").cloned().unwrap_or_default();
                let doc = serde_json::to_string_pretty(&to_tau_json(t)).expect("serializable");
                write_atomic(&out.join("results").join(format!("task_{task:0>4}.json")), &doc)?;
                cohorts.insert(t.id.clone(), *cohort);
            }
            write_atomic(&out.join("cohorts.json"), &(serde_json::to_string_pretty(&cohorts).expect("serializable") + "\n"))?;
            println!("{} trajectories written to {}", pool.len(), out.join("results").display());
        }
    }
    Ok(())
}
