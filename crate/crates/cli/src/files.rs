use std::fs;
use std::io::Write;
use std::path::Path;

use anyhow::{bail, Context};
use serde::de::DeserializeOwned;
use sigtriage_core::annotation::{AnnotationService, LabelStore, QueueManifest};
use sigtriage_core::trajectory::{parse_trajectory, SourceFormat, Trajectory};
use sigtriage_core::SignalReport;

use crate::StudyFiles;

/// Write through a sibling temp file and rename, so readers never see a
/// half-written output.
pub fn write_atomic(path: &Path, contents: &str) -> anyhow::Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    }
    let mut tmp = path.as_os_str().to_owned();
    tmp.push(".tmp");
    let tmp = Path::new(&tmp);
    let mut f = fs::File::create(tmp).with_context(|| format!("creating {}", tmp.display()))?;
    f.write_all(contents.as_bytes())?;
    f.sync_all()?;
    fs::rename(tmp, path).with_context(|| format!("writing {}", path.display()))?;
    Ok(())
}

pub fn read(path: &Path) -> anyhow::Result<String> {
    fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))
}

pub fn read_jsonl<T: DeserializeOwned>(path: &Path) -> anyhow::Result<Vec<T>> {
    let text = read(path)?;
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| serde_json::from_str(l).with_context(|| format!("{}:{}", path.display(), i + 1)))
        .collect()
}

pub fn read_pool(path: &Path) -> anyhow::Result<Vec<Trajectory>> {
    let text = read(path)?;
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty()) {
        out.push(
            parse_trajectory(line, SourceFormat::CanonicalV1).with_context(|| format!("{}:{}", path.display(), i + 1))?,
        );
    }
    Ok(out)
}

pub fn read_reports(path: &Path) -> anyhow::Result<Vec<SignalReport>> {
    read_jsonl(path)
}

pub fn read_manifest(path: &Path) -> anyhow::Result<QueueManifest> {
    serde_json::from_str(&read(path)?).with_context(|| format!("parsing queue manifest {}", path.display()))
}

/// Pool, reports, queue and label store opened together, as both the
/// server and the offline commands need them.
pub fn open_service(files: &StudyFiles) -> anyhow::Result<AnnotationService> {
    let manifest = read_manifest(&files.queue)?;
    let pool = read_pool(&files.pool)?;
    let reports = read_reports(&files.reports)?;
    if !files.labels.exists() {
        if let Some(dir) = files.labels.parent().filter(|d| !d.as_os_str().is_empty()) {
            fs::create_dir_all(dir)?;
        }
    }
    let store = LabelStore::open(&files.labels).with_context(|| format!("opening {}", files.labels.display()))?;
    if store.dropped_tail_bytes() > 0 {
        tracing::warn!(bytes = store.dropped_tail_bytes(), "discarded an incomplete final record in the label store");
    }
    let service = AnnotationService::new(manifest, pool, reports, store)?;
    if service.manifest().items.is_empty() {
        bail!("queue manifest {} has no items", files.queue.display());
    }
    Ok(service)
}
