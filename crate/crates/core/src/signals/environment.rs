//! Exhaustion detection and Environment/Execution attribution.

use std::fmt;

use serde::{Deserialize, Serialize};

use super::{Category, SignalInstance};
use crate::textmatch::{find_in_message, normalize, Lexicon, MatchSpan};
use crate::trajectory::{Role, ToolInvocation, ToolObservation, Trajectory};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ExhaustionKind {
    RateLimit,
    Quota,
    Outage,
    ContextCap,
    Malformed,
}

impl ExhaustionKind {
    pub const ALL: [ExhaustionKind; 5] = [
        ExhaustionKind::RateLimit,
        ExhaustionKind::Quota,
        ExhaustionKind::Outage,
        ExhaustionKind::ContextCap,
        ExhaustionKind::Malformed,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            ExhaustionKind::RateLimit => "rate-limit",
            ExhaustionKind::Quota => "quota",
            ExhaustionKind::Outage => "outage",
            ExhaustionKind::ContextCap => "context-cap",
            ExhaustionKind::Malformed => "malformed",
        }
    }
}

impl fmt::Display for ExhaustionKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Marker lexicons keyed by exhaustion subkind.
#[derive(Debug, Clone, PartialEq)]
pub struct ExhaustionLexicon {
    groups: Vec<(ExhaustionKind, Lexicon)>,
}

impl Default for ExhaustionLexicon {
    fn default() -> Self {
        super::LexiconSet::default().exhaustion
    }
}

impl ExhaustionLexicon {
    pub fn new(mut groups: Vec<(ExhaustionKind, Lexicon)>) -> Self {
        groups.sort_by_key(|(k, _)| *k);
        ExhaustionLexicon { groups }
    }

    pub fn groups(&self) -> &[(ExhaustionKind, Lexicon)] {
        &self.groups
    }

    /// The group whose marker occurs earliest in the normalized payload;
    /// ties go to the group listed first in [`ExhaustionKind::ALL`].
    pub fn classify(&self, payload: &str) -> Option<(ExhaustionKind, String)> {
        let norm = normalize(payload);
        let mut best: Option<(ExhaustionKind, MatchSpan)> = None;
        for (kind, lex) in &self.groups {
            if let Some(m) = find_in_message(0, &norm, lex).into_iter().next() {
                if best.as_ref().map_or(true, |(_, b)| m.char_start < b.char_start) {
                    best = Some((*kind, m));
                }
            }
        }
        best.map(|(kind, m)| (kind, m.excerpt(&norm).to_string()))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Attribution {
    Environment,
    Execution,
}

/// One instance per tool observation carrying an exhaustion marker.
pub fn detect_exhaustion(t: &Trajectory, lex: &ExhaustionLexicon) -> Vec<SignalInstance> {
    let mut out = Vec::new();
    for msg in &t.messages {
        if msg.role != Role::Tool {
            continue;
        }
        let Some(obs) = &msg.observation else { continue };
        if let Some((kind, excerpt)) = lex.classify(&obs.payload) {
            out.push(SignalInstance::new(
                Category::Exhaustion,
                kind.as_str(),
                vec![msg.index],
                &format!("{excerpt:?}: {}", obs.payload),
                "environment.exhaustion.v1",
            ));
        }
    }
    out
}

/// Environment when any exhaustion marker is present in the payload,
/// Execution otherwise.
pub fn attribute_outcome(_inv: &ToolInvocation, obs: &ToolObservation, lex: &ExhaustionLexicon) -> Attribution {
    if lex.classify(&obs.payload).is_some() {
        Attribution::Environment
    } else {
        Attribution::Execution
    }
}
