//! Per-trajectory signal reports, composite triage scores and review
//! sampling.

mod sampling;

use std::collections::{BTreeMap, BTreeSet};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::signals::execution::failures_with_observation;
use crate::signals::{
    detect_disengagement, detect_exhaustion, detect_loops, detect_misalignment, detect_satisfaction,
    detect_stagnation, Category, ExecutionConfig, ExhaustionLexicon, InteractionConfig, LexiconSet, SignalInstance,
};
use crate::trajectory::Trajectory;

pub use sampling::{
    sample_heuristic, sample_random, sample_signal, tie_key, SampleSet, SamplingError, Strategy, Stream,
};

/// Everything the seven detectors need.
#[derive(Debug, Clone, Default)]
pub struct DetectorConfig {
    pub interaction: InteractionConfig,
    pub execution: ExecutionConfig,
    pub exhaustion: ExhaustionLexicon,
}

impl DetectorConfig {
    pub fn with_lexicons(mut self, lex: LexiconSet) -> Self {
        self.interaction.misalignment = lex.misalignment;
        self.interaction.disengagement = lex.disengagement;
        self.interaction.satisfaction = lex.satisfaction;
        self.execution.empty_result_markers = lex.empty_result;
        self.execution.error_prefixes = lex.error_prefix;
        self.exhaustion = lex.exhaustion;
        self
    }

    pub fn validate(&self) -> Result<(), String> {
        self.interaction.validate()?;
        self.execution.validate()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SignalReport {
    pub trajectory_id: String,
    pub instances: Vec<SignalInstance>,
    pub activations: BTreeSet<Category>,
    pub counts: BTreeMap<Category, usize>,
}

impl SignalReport {
    pub fn from_instances(trajectory_id: impl Into<String>, mut instances: Vec<SignalInstance>) -> Self {
        instances.sort_by(|a, b| {
            (a.first_index(), a.category, &a.subkind, &a.span, &a.evidence)
                .cmp(&(b.first_index(), b.category, &b.subkind, &b.span, &b.evidence))
        });
        let mut counts = BTreeMap::new();
        for inst in &instances {
            *counts.entry(inst.category).or_insert(0) += 1;
        }
        let activations = counts.keys().copied().collect();
        SignalReport { trajectory_id: trajectory_id.into(), instances, activations, counts }
    }

    pub fn is_active(&self, c: Category) -> bool {
        self.activations.contains(&c)
    }

    pub fn to_json_line(&self) -> String {
        serde_json::to_string(self).expect("report serialization is infallible")
    }
}

/// Run every detector over one trajectory. Failures whose observation is
/// attributed to the environment are dropped; the matching exhaustion
/// instance stands in for them.
pub fn build_report(t: &Trajectory, cfg: &DetectorConfig) -> SignalReport {
    let mut instances = Vec::new();
    instances.extend(detect_misalignment(t, &cfg.interaction));
    instances.extend(detect_stagnation(t, &cfg.interaction));
    instances.extend(detect_disengagement(t, &cfg.interaction));
    instances.extend(detect_satisfaction(t, &cfg.interaction));

    let exhaustion = detect_exhaustion(t, &cfg.exhaustion);
    let environment_obs: BTreeSet<usize> = exhaustion.iter().map(|i| i.span[0]).collect();
    instances.extend(
        failures_with_observation(t, &cfg.execution)
            .into_iter()
            .filter(|(obs_index, _)| !environment_obs.contains(obs_index))
            .map(|(_, inst)| inst),
    );
    instances.extend(detect_loops(t, &cfg.execution));
    instances.extend(exhaustion);
    SignalReport::from_instances(t.id.clone(), instances)
}

/// [`build_report`] over a pool, in parallel, preserving pool order.
pub fn build_reports(pool: &[Trajectory], cfg: &DetectorConfig) -> Vec<SignalReport> {
    pool.par_iter().map(|t| build_report(t, cfg)).collect()
}

/// Per-category weights for the learning-oriented categories. Exhaustion has
/// no entry and never contributes to a score.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CategoryWeights {
    pub misalignment: f64,
    pub stagnation: f64,
    pub disengagement: f64,
    pub satisfaction: f64,
    pub failure: f64,
    #[serde(rename = "loop")]
    pub loop_: f64,
}

impl Default for CategoryWeights {
    fn default() -> Self {
        CategoryWeights {
            misalignment: 1.0,
            stagnation: 1.0,
            disengagement: 1.0,
            satisfaction: 1.0,
            failure: 1.0,
            loop_: 1.0,
        }
    }
}

impl CategoryWeights {
    pub fn get(&self, c: Category) -> f64 {
        match c {
            Category::Misalignment => self.misalignment,
            Category::Stagnation => self.stagnation,
            Category::Disengagement => self.disengagement,
            Category::Satisfaction => self.satisfaction,
            Category::Failure => self.failure,
            Category::Loop => self.loop_,
            Category::Exhaustion => 0.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Ranking {
    /// Order each stream by triage score, ties by seeded id hash.
    #[default]
    Scored,
    /// Any activation qualifies; order by seeded id hash only.
    Flat,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TriageConfig {
    pub weights: CategoryWeights,
    pub exemplar_fraction: f64,
    pub seed: u64,
    pub heuristic_min_user_msgs: usize,
    pub sample_size: usize,
    pub ranking: Ranking,
}

impl Default for TriageConfig {
    fn default() -> Self {
        TriageConfig {
            weights: CategoryWeights::default(),
            exemplar_fraction: 0.2,
            seed: 0,
            heuristic_min_user_msgs: 10,
            sample_size: 100,
            ranking: Ranking::Scored,
        }
    }
}

impl TriageConfig {
    pub fn validate(&self) -> Result<(), String> {
        if !(0.0..=1.0).contains(&self.exemplar_fraction) {
            return Err(format!("exemplar_fraction must be in [0, 1], got {}", self.exemplar_fraction));
        }
        if self.sample_size == 0 {
            return Err("sample size must be at least 1".into());
        }
        for c in Category::LEARNING {
            let w = self.weights.get(c);
            if !(w >= 0.0) {
                return Err(format!("weight for {c} must be non-negative, got {w}"));
            }
        }
        Ok(())
    }
}

/// Sum of weights over activated learning-oriented categories. Instance
/// counts do not matter, only activation.
pub fn triage_score(r: &SignalReport, cfg: &TriageConfig) -> f64 {
    r.activations.iter().filter(|c| c.is_learning()).map(|c| cfg.weights.get(*c)).sum()
}

/// Activation counts per category across a set of reports.
pub fn activation_summary(reports: &[SignalReport]) -> BTreeMap<Category, usize> {
    let mut out: BTreeMap<Category, usize> = Category::ALL.into_iter().map(|c| (c, 0)).collect();
    for r in reports {
        for c in &r.activations {
            *out.get_mut(c).expect("all categories present") += 1;
        }
    }
    out
}
