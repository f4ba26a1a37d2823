//! Control-flow detectors over the tool invocation stream.
//!
//! Failures are non-advancing tool outcomes. Loops are three pattern rules
//! over consecutive invocations:
//!
//! * identical-retry: a maximal run of calls with the same tool and
//!   canonically equal arguments;
//! * parameter-drift: a maximal run of calls to one tool where every step
//!   changes the value of the same single argument key;
//! * multi-tool-cycle: a maximal segment of the tool-name sequence that is
//!   periodic with period `p`, whose repeating block uses at least two tools
//!   and is not itself a repetition of a shorter block.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::lexicons::default_lexicon;
use super::{truncate_chars, Category, SignalInstance};
use crate::canon::{canonical_args, canonical_json};
use crate::textmatch::{find_in_message, normalize, Lexicon};
use crate::trajectory::{ObservationStatus, StreamEntry, ToolInvocation, ToolObservation, Trajectory};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ExecutionConfig {
    pub identical_retry_min: usize,
    pub drift_min_run: usize,
    pub cycle_period_max: usize,
    pub cycle_repeats_min: usize,
    #[serde(skip, default = "empty_result_lexicon")]
    pub empty_result_markers: Lexicon,
    /// Leading payload phrases that mark an error when the observation has
    /// no status of its own.
    #[serde(skip, default = "error_prefix_lexicon")]
    pub error_prefixes: Lexicon,
}

fn empty_result_lexicon() -> Lexicon {
    default_lexicon("empty-result")
}
fn error_prefix_lexicon() -> Lexicon {
    default_lexicon("error-prefix")
}

impl Default for ExecutionConfig {
    fn default() -> Self {
        ExecutionConfig {
            identical_retry_min: 3,
            drift_min_run: 3,
            cycle_period_max: 4,
            cycle_repeats_min: 2,
            empty_result_markers: empty_result_lexicon(),
            error_prefixes: error_prefix_lexicon(),
        }
    }
}

impl ExecutionConfig {
    pub fn validate(&self) -> Result<(), String> {
        if self.identical_retry_min < 2 {
            return Err("identical_retry_min must be at least 2".into());
        }
        if self.drift_min_run < 3 {
            return Err("drift_min_run must be at least 3".into());
        }
        if self.cycle_period_max < 2 {
            return Err("cycle_period_max must be at least 2".into());
        }
        if self.cycle_repeats_min < 2 {
            return Err("cycle_repeats_min must be at least 2".into());
        }
        Ok(())
    }
}

/// Payloads that carry no content at all.
const EMPTY_PAYLOADS: [&str; 3] = ["", "null", "none"];

/// Why an outcome did not advance the task, if it did not.
pub fn non_advancing(obs: &ToolObservation, cfg: &ExecutionConfig) -> Option<&'static str> {
    let norm = normalize(&obs.payload);
    match obs.status {
        ObservationStatus::Error => return Some("error"),
        ObservationStatus::Unknown => {
            if find_in_message(0, &norm, &cfg.error_prefixes).iter().any(|m| m.char_start == 0) {
                return Some("error");
            }
        }
        ObservationStatus::Ok => {}
    }
    if EMPTY_PAYLOADS.contains(&norm.as_str()) || !find_in_message(0, &norm, &cfg.empty_result_markers).is_empty() {
        return Some("empty-result");
    }
    None
}

fn call_digest(inv: &ToolInvocation) -> String {
    format!("{}({})", inv.tool_name, truncate_chars(&canonical_args(&inv.arguments), 80))
}

/// One instance per non-advancing tool outcome, with the triggering
/// invocation in the evidence.
pub fn detect_failures(t: &Trajectory, cfg: &ExecutionConfig) -> Vec<SignalInstance> {
    failures_with_observation(t, cfg).into_iter().map(|(_, inst)| inst).collect()
}

/// As [`detect_failures`], also returning the observation message index of
/// each instance.
pub(crate) fn failures_with_observation(t: &Trajectory, cfg: &ExecutionConfig) -> Vec<(usize, SignalInstance)> {
    let mut out = Vec::new();
    for entry in t.invocation_stream() {
        let Some((obs_index, obs)) = entry.observation else { continue };
        if let Some(subkind) = non_advancing(obs, cfg) {
            let evidence = format!("{} -> {:?}: {}", call_digest(entry.invocation), obs.status, obs.payload);
            out.push((
                obs_index,
                SignalInstance::new(
                    Category::Failure,
                    subkind,
                    vec![entry.message_index, obs_index],
                    &evidence,
                    "execution.failure.v1",
                ),
            ));
        }
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum LoopKind {
    IdenticalRetry,
    ParameterDrift,
    MultiToolCycle,
}

impl LoopKind {
    pub fn subkind(self) -> &'static str {
        match self {
            LoopKind::IdenticalRetry => "identical-retry",
            LoopKind::ParameterDrift => "parameter-drift",
            LoopKind::MultiToolCycle => "multi-tool-cycle",
        }
    }
}

/// A loop over call positions `start..=end` of the invocation stream.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub struct LoopPattern {
    pub kind: LoopKind,
    pub start: usize,
    pub end: usize,
    /// The varying key for drift, the period for cycles.
    pub detail: String,
}

/// A call reduced to what the loop rules compare.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CallKey {
    pub tool: String,
    /// Canonical JSON per argument key.
    pub args: BTreeMap<String, String>,
}

impl CallKey {
    pub fn from_invocation(inv: &ToolInvocation) -> Self {
        CallKey {
            tool: inv.tool_name.clone(),
            args: inv.arguments.iter().map(|(k, v)| (k.clone(), canonical_json(v))).collect(),
        }
    }

    /// The single key whose value differs from `next`, when the tool and key
    /// set match and exactly one value changed.
    fn drift_key<'a>(&'a self, next: &CallKey) -> Option<&'a str> {
        if self.tool != next.tool || self.args.len() != next.args.len() {
            return None;
        }
        let mut changed = None;
        for ((ka, va), (kb, vb)) in self.args.iter().zip(next.args.iter()) {
            if ka != kb {
                return None;
            }
            if va != vb {
                if changed.is_some() {
                    return None;
                }
                changed = Some(ka.as_str());
            }
        }
        changed
    }
}

/// All loop patterns in a call sequence, sorted by (start, kind).
pub fn find_loop_patterns(calls: &[CallKey], cfg: &ExecutionConfig) -> Vec<LoopPattern> {
    let mut out = Vec::new();
    let n = calls.len();

    // identical-retry
    let mut start = 0;
    while start < n {
        let mut end = start;
        while end + 1 < n && calls[end + 1] == calls[start] {
            end += 1;
        }
        if end - start + 1 >= cfg.identical_retry_min {
            out.push(LoopPattern { kind: LoopKind::IdenticalRetry, start, end, detail: String::new() });
        }
        start = end + 1;
    }

    // parameter-drift: maximal runs of steps sharing the same varying key
    let steps: Vec<Option<&str>> = calls.windows(2).map(|w| w[0].drift_key(&w[1])).collect();
    let mut i = 0;
    while i < steps.len() {
        let Some(key) = steps[i] else {
            i += 1;
            continue;
        };
        let mut j = i;
        while j + 1 < steps.len() && steps[j + 1] == Some(key) {
            j += 1;
        }
        // steps i..=j cover calls i..=j+1
        if j - i + 2 >= cfg.drift_min_run {
            out.push(LoopPattern { kind: LoopKind::ParameterDrift, start: i, end: j + 1, detail: key.to_string() });
        }
        i = j + 1;
    }

    // multi-tool-cycle
    let tools: Vec<&str> = calls.iter().map(|c| c.tool.as_str()).collect();
    for p in 2..=cfg.cycle_period_max {
        if n < p * cfg.cycle_repeats_min {
            break;
        }
        let mut a = 0;
        while a + p < n {
            if tools[a] != tools[a + p] {
                a += 1;
                continue;
            }
            let mut b = a;
            while b + 1 + p < n && tools[b + 1] == tools[b + 1 + p] {
                b += 1;
            }
            let len = b - a + 1 + p;
            let block = &tools[a..a + p];
            if len / p >= cfg.cycle_repeats_min && is_primitive(block) && block.iter().any(|t| *t != block[0]) {
                out.push(LoopPattern { kind: LoopKind::MultiToolCycle, start: a, end: b + p, detail: p.to_string() });
            }
            a = b + 1;
        }
    }

    out.sort();
    out
}

/// True when `block` is not a repetition of a strictly shorter block.
pub fn is_primitive<T: PartialEq>(block: &[T]) -> bool {
    let p = block.len();
    (1..p).filter(|d| p % d == 0).all(|d| (d..p).any(|i| block[i] != block[i - d]))
}

pub fn detect_loops(t: &Trajectory, cfg: &ExecutionConfig) -> Vec<SignalInstance> {
    let stream = t.invocation_stream();
    let keys: Vec<CallKey> = stream.iter().map(|e| CallKey::from_invocation(e.invocation)).collect();
    find_loop_patterns(&keys, cfg)
        .into_iter()
        .map(|pat| {
            let calls: &[StreamEntry] = &stream[pat.start..=pat.end];
            let span: Vec<usize> = calls.iter().map(|e| e.message_index).collect();
            let count = calls.len();
            let evidence = match pat.kind {
                LoopKind::IdenticalRetry => format!("{} x{count}", call_digest(calls[0].invocation)),
                LoopKind::ParameterDrift => {
                    let values: Vec<String> = calls
                        .iter()
                        .map(|e| e.invocation.arguments.get(&pat.detail).map(canonical_json).unwrap_or_default())
                        .collect();
                    format!("{}: {} = {}", calls[0].invocation.tool_name, pat.detail, values.join(", "))
                }
                LoopKind::MultiToolCycle => {
                    let p: usize = pat.detail.parse().expect("period");
                    let block: Vec<&str> = calls[..p].iter().map(|e| e.invocation.tool_name.as_str()).collect();
                    format!("period {p} [{}] over {count} calls", block.join(", "))
                }
            };
            SignalInstance::new(Category::Loop, pat.kind.subkind(), span, &evidence, "execution.loop.v1")
        })
        .collect()
}
