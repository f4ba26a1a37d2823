//! Signal taxonomy and detectors.
//!
//! Signals are descriptive markers of recurring behavioral patterns, grouped
//! into interaction (discourse), execution (tool stream) and environment
//! (infrastructure) categories. All detectors are deterministic and pure.

pub mod environment;
pub mod execution;
pub mod interaction;
mod lexicons;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

pub use environment::{attribute_outcome, detect_exhaustion, Attribution, ExhaustionKind, ExhaustionLexicon};
pub use execution::{detect_failures, detect_loops, find_loop_patterns, ExecutionConfig, LoopKind, LoopPattern};
pub use interaction::{
    detect_disengagement, detect_misalignment, detect_satisfaction, detect_stagnation, InteractionConfig,
};
pub use lexicons::{default_lexicon, load_lexicon, LexiconSet, LEXICON_NAMES};

pub const MAX_EVIDENCE_CHARS: usize = 240;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Category {
    Misalignment,
    Stagnation,
    Disengagement,
    Satisfaction,
    Failure,
    Loop,
    Exhaustion,
}

impl Category {
    pub const ALL: [Category; 7] = [
        Category::Misalignment,
        Category::Stagnation,
        Category::Disengagement,
        Category::Satisfaction,
        Category::Failure,
        Category::Loop,
        Category::Exhaustion,
    ];

    /// Categories that feed triage scoring. Exhaustion is diagnosis-only.
    pub const LEARNING: [Category; 6] = [
        Category::Misalignment,
        Category::Stagnation,
        Category::Disengagement,
        Category::Satisfaction,
        Category::Failure,
        Category::Loop,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Category::Misalignment => "Misalignment",
            Category::Stagnation => "Stagnation",
            Category::Disengagement => "Disengagement",
            Category::Satisfaction => "Satisfaction",
            Category::Failure => "Failure",
            Category::Loop => "Loop",
            Category::Exhaustion => "Exhaustion",
        }
    }

    pub fn is_learning(self) -> bool {
        self != Category::Exhaustion
    }
}

impl fmt::Display for Category {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Category {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Category::ALL
            .into_iter()
            .find(|c| c.as_str().eq_ignore_ascii_case(s))
            .ok_or_else(|| format!("unknown category {s:?}"))
    }
}

/// Every (category, subkind) pair a detector may emit.
pub const REGISTRY: &[(Category, &str)] = &[
    (Category::Misalignment, "phrase-cue"),
    (Category::Misalignment, "rephrase-similarity"),
    (Category::Stagnation, "near-duplicate-assistant"),
    (Category::Stagnation, "prolonged"),
    (Category::Disengagement, "phrase-cue"),
    (Category::Disengagement, "abandonment"),
    (Category::Satisfaction, "phrase-cue"),
    (Category::Satisfaction, "closing"),
    (Category::Failure, "error"),
    (Category::Failure, "empty-result"),
    (Category::Loop, "identical-retry"),
    (Category::Loop, "parameter-drift"),
    (Category::Loop, "multi-tool-cycle"),
    (Category::Exhaustion, "rate-limit"),
    (Category::Exhaustion, "quota"),
    (Category::Exhaustion, "outage"),
    (Category::Exhaustion, "context-cap"),
    (Category::Exhaustion, "malformed"),
];

pub fn is_registered(category: Category, subkind: &str) -> bool {
    REGISTRY.iter().any(|(c, s)| *c == category && *s == subkind)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SignalInstance {
    pub category: Category,
    pub subkind: String,
    /// Message indices, ascending and non-empty.
    pub span: Vec<usize>,
    pub evidence: String,
    pub detector_id: String,
    pub weight_hint: f64,
}

impl SignalInstance {
    pub(crate) fn new(category: Category, subkind: &str, mut span: Vec<usize>, evidence: &str, detector_id: &str) -> Self {
        debug_assert!(is_registered(category, subkind), "{category}/{subkind}");
        span.sort_unstable();
        span.dedup();
        debug_assert!(!span.is_empty());
        SignalInstance {
            category,
            subkind: subkind.to_string(),
            span,
            evidence: truncate_chars(evidence, MAX_EVIDENCE_CHARS),
            detector_id: detector_id.to_string(),
            weight_hint: 1.0,
        }
    }

    pub fn first_index(&self) -> usize {
        self.span[0]
    }
}

pub(crate) fn truncate_chars(s: &str, max: usize) -> String {
    match s.char_indices().nth(max) {
        Some((byte, _)) => s[..byte].to_string(),
        None => s.to_string(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn category_round_trip() {
        for c in Category::ALL {
            assert_eq!(c.as_str().parse::<Category>().unwrap(), c);
            assert_eq!(serde_json::to_string(&c).unwrap(), format!("\"{c}\""));
        }
        assert!(!Category::Exhaustion.is_learning());
        assert!(!Category::LEARNING.contains(&Category::Exhaustion));
    }

    #[test]
    fn evidence_is_capped() {
        let long = "é".repeat(500);
        let inst = SignalInstance::new(Category::Loop, "identical-retry", vec![3, 1, 3], &long, "t");
        assert_eq!(inst.evidence.chars().count(), MAX_EVIDENCE_CHARS);
        assert_eq!(inst.span, vec![1, 3]);
    }
}
