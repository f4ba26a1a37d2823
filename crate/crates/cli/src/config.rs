use std::path::{Path, PathBuf};

use anyhow::Context;
use serde::Deserialize;
use sigtriage_core::signals::LexiconSet;
use sigtriage_core::triage::CategoryWeights;
use sigtriage_core::{DetectorConfig, TriageConfig};

/// Optional settings file. Anything left out falls back to built-in
/// defaults; command-line flags win over both.
#[derive(Debug, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FileConfig {
    pub detect: DetectSection,
    pub sample: SampleSection,
    pub analyze: AnalyzeSection,
    pub serve: ServeSection,
}

#[derive(Debug, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DetectSection {
    pub lexicons: Option<PathBuf>,
    pub workers: Option<usize>,
    pub baseline_user_turns: Option<f64>,
    pub rephrase_similarity_threshold: Option<f64>,
    pub rephrase_window: Option<usize>,
    pub duplicate_threshold: Option<f64>,
    pub prolonged_factor: Option<f64>,
    pub identical_retry_min: Option<usize>,
    pub drift_min_run: Option<usize>,
    pub cycle_period_max: Option<usize>,
    pub cycle_repeats_min: Option<usize>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SampleSection {
    pub n: Option<usize>,
    pub exemplar_fraction: Option<f64>,
    pub heuristic_min_user_msgs: Option<usize>,
    pub weights: Option<CategoryWeights>,
    pub ranking: Option<sigtriage_core::triage::Ranking>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AnalyzeSection {
    pub alpha: Option<f64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ServeSection {
    pub bind: Option<String>,
    pub port: Option<u16>,
    pub ui: Option<PathBuf>,
}

impl FileConfig {
    pub fn load(path: Option<&Path>) -> anyhow::Result<Self> {
        let Some(path) = path else { return Ok(FileConfig::default()) };
        let text = std::fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
        toml::from_str(&text).with_context(|| format!("parsing config {}", path.display()))
    }

    /// Detector settings from this file with `lexicons` overriding the file's
    /// lexicon directory. The baseline is left for the caller to fill.
    pub fn detector(&self, lexicons: Option<&Path>) -> anyhow::Result<DetectorConfig> {
        let d = &self.detect;
        let dir = lexicons.or(d.lexicons.as_deref());
        let lex = LexiconSet::load(dir).context("loading lexicons")?;
        let mut cfg = DetectorConfig::default().with_lexicons(lex);
        let i = &mut cfg.interaction;
        if let Some(v) = d.rephrase_similarity_threshold {
            i.rephrase_similarity_threshold = v;
        }
        if let Some(v) = d.rephrase_window {
            i.rephrase_window = v;
        }
        if let Some(v) = d.duplicate_threshold {
            i.duplicate_threshold = v;
        }
        if let Some(v) = d.prolonged_factor {
            i.prolonged_factor = v;
        }
        let e = &mut cfg.execution;
        if let Some(v) = d.identical_retry_min {
            e.identical_retry_min = v;
        }
        if let Some(v) = d.drift_min_run {
            e.drift_min_run = v;
        }
        if let Some(v) = d.cycle_period_max {
            e.cycle_period_max = v;
        }
        if let Some(v) = d.cycle_repeats_min {
            e.cycle_repeats_min = v;
        }
        Ok(cfg)
    }

    pub fn triage(&self) -> TriageConfig {
        let s = &self.sample;
        let mut cfg = TriageConfig::default();
        if let Some(v) = s.n {
            cfg.sample_size = v;
        }
        if let Some(v) = s.exemplar_fraction {
            cfg.exemplar_fraction = v;
        }
        if let Some(v) = s.heuristic_min_user_msgs {
            cfg.heuristic_min_user_msgs = v;
        }
        if let Some(v) = &s.weights {
            cfg.weights = v.clone();
        }
        if let Some(v) = s.ranking {
            cfg.ranking = v;
        }
        cfg
    }
}
