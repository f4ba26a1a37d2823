//! Canonical trajectory model.
//!
//! A [`Trajectory`] is one complete agent interaction: user and assistant
//! turns, tool invocations issued by the assistant, and the observations the
//! tools returned. Every detector in the crate works off this model; source
//! formats are handled by adapters in [`parse`].

mod parse;
mod tau;

use std::collections::{BTreeMap, HashMap, HashSet};
use std::fmt;

use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

pub use parse::{parse_document, parse_trajectory, parse_trajectory_with, ParseError, SourceFormat, SourceHint};

/// Speaker of a message.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Role {
    User,
    Assistant,
    Tool,
}

impl fmt::Display for Role {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Role::User => "user",
            Role::Assistant => "assistant",
            Role::Tool => "tool",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ObservationStatus {
    Ok,
    Error,
    /// The source format carried no status field.
    Unknown,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ToolInvocation {
    pub call_id: String,
    pub tool_name: String,
    /// Arguments in source order. Compare with [`crate::canon::canonical_json`].
    #[serde(default)]
    pub arguments: Map<String, Value>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ToolObservation {
    pub call_id: String,
    pub status: ObservationStatus,
    #[serde(default)]
    pub payload: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Message {
    pub index: usize,
    pub role: Role,
    #[serde(default)]
    pub text: String,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub tool_calls: Vec<ToolInvocation>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub observation: Option<ToolObservation>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub id: String,
    #[serde(default)]
    pub domain: String,
    /// Binary task reward. Kept as a raw integer so that out-of-range source
    /// values survive parsing and are reported by [`validate_pool`].
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reward: Option<i64>,
    #[serde(default)]
    pub meta: BTreeMap<String, String>,
    pub messages: Vec<Message>,
}

/// One entry of [`Trajectory::invocation_stream`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StreamEntry<'a> {
    /// Index of the assistant message that issued the call.
    pub message_index: usize,
    pub invocation: &'a ToolInvocation,
    /// The linked observation and the index of the tool message carrying it.
    pub observation: Option<(usize, &'a ToolObservation)>,
}

impl Trajectory {
    pub fn user_message_count(&self) -> usize {
        self.role_count(Role::User)
    }

    pub fn role_count(&self, role: Role) -> usize {
        self.messages.iter().filter(|m| m.role == role).count()
    }

    /// The reward as a success flag, when present and binary.
    pub fn succeeded(&self) -> Option<bool> {
        match self.reward {
            Some(0) => Some(false),
            Some(1) => Some(true),
            _ => None,
        }
    }

    /// Every tool invocation in call order, paired with its observation when
    /// one is linked by call id.
    pub fn invocation_stream(&self) -> Vec<StreamEntry<'_>> {
        let mut observations: HashMap<&str, (usize, &ToolObservation)> = HashMap::new();
        for msg in &self.messages {
            if let Some(obs) = &msg.observation {
                observations.entry(obs.call_id.as_str()).or_insert((msg.index, obs));
            }
        }
        self.messages
            .iter()
            .flat_map(|msg| msg.tool_calls.iter().map(move |inv| (msg.index, inv)))
            .map(|(message_index, invocation)| StreamEntry {
                message_index,
                invocation,
                observation: observations.get(invocation.call_id.as_str()).copied(),
            })
            .collect()
    }

    /// Check the structural invariants. Returns a description of every
    /// violation found.
    pub fn invariant_violations(&self) -> Vec<String> {
        let mut out = Vec::new();
        let mut seen_calls: HashSet<&str> = HashSet::new();
        for (pos, msg) in self.messages.iter().enumerate() {
            if msg.index != pos {
                out.push(format!("message at position {pos} has index {}", msg.index));
            }
            if msg.role != Role::Assistant && !msg.tool_calls.is_empty() {
                out.push(format!("message {pos}: tool calls on a {} message", msg.role));
            }
            match (msg.role, &msg.observation) {
                (Role::Tool, None) => out.push(format!("message {pos}: tool message without observation")),
                (Role::Tool, Some(obs)) => {
                    if !seen_calls.contains(obs.call_id.as_str()) {
                        out.push(format!(
                            "message {pos}: observation references unknown call id {:?}",
                            obs.call_id
                        ));
                    }
                }
                (_, Some(_)) => out.push(format!("message {pos}: observation on a {} message", msg.role)),
                _ => {}
            }
            for inv in &msg.tool_calls {
                if inv.tool_name.is_empty() {
                    out.push(format!("message {pos}: tool call with empty tool name"));
                }
                if !seen_calls.insert(inv.call_id.as_str()) {
                    out.push(format!("message {pos}: duplicate call id {:?}", inv.call_id));
                }
            }
        }
        if let Some(r) = self.reward {
            if r != 0 && r != 1 {
                out.push(format!("reward {r} is not 0 or 1"));
            }
        }
        out
    }

    /// Serialize as one CanonicalV1 JSON line.
    pub fn to_canonical_json(&self) -> String {
        serde_json::to_string(self).expect("trajectory serialization is infallible")
    }
}

/// A problem found by [`validate_pool`].
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Violation {
    DuplicateId { id: String, count: usize },
    RewardOutOfRange { id: String, reward: i64 },
    MissingReward { id: String },
    Invariant { id: String, detail: String },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::DuplicateId { id, count } => write!(f, "{id}: id appears {count} times"),
            Violation::RewardOutOfRange { id, reward } => write!(f, "{id}: reward {reward} out of range"),
            Violation::MissingReward { id } => write!(f, "{id}: missing reward"),
            Violation::Invariant { id, detail } => write!(f, "{id}: {detail}"),
        }
    }
}

pub fn validate_pool(pool: &[Trajectory]) -> Vec<Violation> {
    let mut out = Vec::new();
    let mut counts: BTreeMap<&str, usize> = BTreeMap::new();
    for t in pool {
        *counts.entry(t.id.as_str()).or_default() += 1;
    }
    for (id, count) in &counts {
        if *count > 1 {
            out.push(Violation::DuplicateId { id: id.to_string(), count: *count });
        }
    }
    for t in pool {
        match t.reward {
            None => out.push(Violation::MissingReward { id: t.id.clone() }),
            Some(r) if r != 0 && r != 1 => out.push(Violation::RewardOutOfRange { id: t.id.clone(), reward: r }),
            _ => {}
        }
        out.extend(
            t.invariant_violations()
                .into_iter()
                .filter(|d| !d.starts_with("reward"))
                .map(|detail| Violation::Invariant { id: t.id.clone(), detail }),
        );
    }
    out
}

/// Median user-turn count over a pool; the default stagnation baseline.
/// Never returns less than 1.
pub fn median_user_turns(pool: &[Trajectory]) -> f64 {
    let mut counts: Vec<usize> = pool.iter().map(Trajectory::user_message_count).collect();
    if counts.is_empty() {
        return 1.0;
    }
    counts.sort_unstable();
    let mid = counts.len() / 2;
    let median = if counts.len() % 2 == 0 {
        (counts[mid - 1] + counts[mid]) as f64 / 2.0
    } else {
        counts[mid] as f64
    };
    median.max(1.0)
}
