//! Discourse-level detectors over user and assistant turns.

use serde::{Deserialize, Serialize};

use super::lexicons::default_lexicon;
use super::{Category, SignalInstance};
use crate::textmatch::{find_in_message, near_duplicate, normalize, token_overlap, Lexicon, MatchSpan};
use crate::trajectory::{Role, Trajectory};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct InteractionConfig {
    #[serde(skip, default = "misalignment_lexicon")]
    pub misalignment: Lexicon,
    #[serde(skip, default = "disengagement_lexicon")]
    pub disengagement: Lexicon,
    #[serde(skip, default = "satisfaction_lexicon")]
    pub satisfaction: Lexicon,
    /// Token-overlap similarity at or above which two nearby user turns count
    /// as a restatement.
    pub rephrase_similarity_threshold: f64,
    /// How many preceding user turns a user turn is compared against.
    pub rephrase_window: usize,
    /// Shingle similarity at or above which two assistant turns are
    /// near-duplicates.
    pub duplicate_threshold: f64,
    pub prolonged_factor: f64,
    /// Reference user-turn count, normally the pool median.
    pub baseline_user_turns: f64,
}

fn misalignment_lexicon() -> Lexicon {
    default_lexicon("misalignment")
}
fn disengagement_lexicon() -> Lexicon {
    default_lexicon("disengagement")
}
fn satisfaction_lexicon() -> Lexicon {
    default_lexicon("satisfaction")
}

impl Default for InteractionConfig {
    fn default() -> Self {
        InteractionConfig {
            misalignment: misalignment_lexicon(),
            disengagement: disengagement_lexicon(),
            satisfaction: satisfaction_lexicon(),
            rephrase_similarity_threshold: 0.8,
            rephrase_window: 2,
            duplicate_threshold: 0.8,
            prolonged_factor: 2.0,
            baseline_user_turns: 10.0,
        }
    }
}

impl InteractionConfig {
    pub fn validate(&self) -> Result<(), String> {
        for (name, v) in [
            ("rephrase_similarity_threshold", self.rephrase_similarity_threshold),
            ("duplicate_threshold", self.duplicate_threshold),
        ] {
            if !(0.0..=1.0).contains(&v) {
                return Err(format!("{name} must be in [0, 1], got {v}"));
            }
        }
        if self.rephrase_window < 1 {
            return Err("rephrase_window must be at least 1".into());
        }
        if !(self.prolonged_factor > 0.0) {
            return Err("prolonged_factor must be positive".into());
        }
        if !(self.baseline_user_turns > 0.0) {
            return Err("baseline_user_turns must be positive".into());
        }
        Ok(())
    }
}

struct Turn {
    index: usize,
    norm: String,
}

fn turns(t: &Trajectory, role: Role) -> Vec<Turn> {
    t.messages
        .iter()
        .filter(|m| m.role == role)
        .map(|m| Turn { index: m.index, norm: normalize(&m.text) })
        .collect()
}

fn cue_evidence(turn: &Turn, m: &MatchSpan) -> String {
    format!("{:?} ~ {:?} (d={:.2}): {}", m.excerpt(&turn.norm), m.phrase_id, m.distance, turn.norm)
}

fn phrase_cues(turns: &[Turn], lex: &Lexicon, category: Category, detector_id: &str) -> Vec<SignalInstance> {
    let mut out = Vec::new();
    for turn in turns {
        for m in find_in_message(turn.index, &turn.norm, lex) {
            out.push(SignalInstance::new(category, "phrase-cue", vec![turn.index], &cue_evidence(turn, &m), detector_id));
        }
    }
    out
}

/// Correction cues in user turns, plus restatements of a recent user turn.
pub fn detect_misalignment(t: &Trajectory, cfg: &InteractionConfig) -> Vec<SignalInstance> {
    const ID: &str = "interaction.misalignment.v1";
    let users = turns(t, Role::User);
    let mut out = phrase_cues(&users, &cfg.misalignment, Category::Misalignment, ID);

    for (j, later) in users.iter().enumerate() {
        if later.norm.is_empty() {
            continue;
        }
        let from = j.saturating_sub(cfg.rephrase_window);
        let hit = users[from..j].iter().rev().find_map(|earlier| {
            if earlier.norm.is_empty() || earlier.norm == later.norm {
                return None;
            }
            let sim = token_overlap(&earlier.norm, &later.norm);
            (sim >= cfg.rephrase_similarity_threshold).then_some((earlier, sim))
        });
        if let Some((earlier, sim)) = hit {
            out.push(SignalInstance::new(
                Category::Misalignment,
                "rephrase-similarity",
                vec![earlier.index, later.index],
                &format!("similarity {sim:.2}: {:?} -> {:?}", earlier.norm, later.norm),
                ID,
            ));
        }
    }
    out.sort_by_key(|i| i.first_index());
    out
}

/// Near-duplicate assistant turns and conversations prolonged well past the
/// baseline length.
pub fn detect_stagnation(t: &Trajectory, cfg: &InteractionConfig) -> Vec<SignalInstance> {
    const ID: &str = "interaction.stagnation.v1";
    let assistants: Vec<Turn> = turns(t, Role::Assistant).into_iter().filter(|a| !a.norm.is_empty()).collect();
    let mut out = Vec::new();
    for (j, later) in assistants.iter().enumerate() {
        let hit = assistants[..j].iter().rev().find_map(|earlier| {
            let sim = near_duplicate(&earlier.norm, &later.norm);
            (sim >= cfg.duplicate_threshold).then_some((earlier, sim))
        });
        if let Some((earlier, sim)) = hit {
            out.push(SignalInstance::new(
                Category::Stagnation,
                "near-duplicate-assistant",
                vec![earlier.index, later.index],
                &format!("similarity {sim:.2}: {}", later.norm),
                ID,
            ));
        }
    }

    let user_count = t.user_message_count();
    let limit = cfg.prolonged_factor * cfg.baseline_user_turns;
    if user_count as f64 > limit {
        let last_user = t.messages.iter().rev().find(|m| m.role == Role::User).expect("user_count > 0");
        out.push(SignalInstance::new(
            Category::Stagnation,
            "prolonged",
            vec![last_user.index],
            &format!("{user_count} user turns > {limit}"),
            ID,
        ));
    }
    out.sort_by_key(|i| i.first_index());
    out
}

/// Exit requests and negative stances in user turns. Sessions the source
/// marks as abandoned (`meta.session_end = "abandoned"`) also emit.
pub fn detect_disengagement(t: &Trajectory, cfg: &InteractionConfig) -> Vec<SignalInstance> {
    const ID: &str = "interaction.disengagement.v1";
    let users = turns(t, Role::User);
    let mut out = phrase_cues(&users, &cfg.disengagement, Category::Disengagement, ID);
    if t.meta.get("session_end").map(String::as_str) == Some("abandoned") {
        let last = t.messages.iter().rev().find(|m| matches!(m.role, Role::User | Role::Assistant));
        if let Some(last) = last {
            out.push(SignalInstance::new(
                Category::Disengagement,
                "abandonment",
                vec![last.index],
                "session ended without a closing turn",
                ID,
            ));
        }
    }
    out.sort_by_key(|i| i.first_index());
    out
}

/// Gratitude and success confirmations in user turns. Hits in the final
/// quartile of user turns carry subkind `closing`.
pub fn detect_satisfaction(t: &Trajectory, cfg: &InteractionConfig) -> Vec<SignalInstance> {
    const ID: &str = "interaction.satisfaction.v1";
    let users = turns(t, Role::User);
    let closing_from = users.len() - users.len().div_ceil(4);
    let mut out = Vec::new();
    for (ordinal, turn) in users.iter().enumerate() {
        let subkind = if ordinal >= closing_from { "closing" } else { "phrase-cue" };
        for m in find_in_message(turn.index, &turn.norm, &cfg.satisfaction) {
            out.push(SignalInstance::new(Category::Satisfaction, subkind, vec![turn.index], &cue_evidence(turn, &m), ID));
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::trajectory::Message;
    use std::collections::BTreeMap;

    fn conv(turns: &[(Role, &str)]) -> Trajectory {
        Trajectory {
            id: "t".into(),
            domain: "retail".into(),
            reward: Some(1),
            meta: BTreeMap::new(),
            messages: turns
                .iter()
                .enumerate()
                .map(|(i, (role, text))| Message {
                    index: i,
                    role: *role,
                    text: text.to_string(),
                    tool_calls: vec![],
                    observation: None,
                })
                .collect(),
        }
    }

    fn user_turns(n: usize) -> Trajectory {
        let texts: Vec<(Role, String)> = (0..n)
            .flat_map(|i| {
                [
                    (Role::User, format!("item {i} question about shipping zone {}", i * 7)),
                    (Role::Assistant, format!("reply number {i}")),
                ]
            })
            .collect();
        conv(&texts.iter().map(|(r, s)| (*r, s.as_str())).collect::<Vec<_>>())
    }

    #[test]
    fn misalignment_phrase_cue() {
        let t = conv(&[(Role::User, "No, I said economy class")]);
        let out = detect_misalignment(&t, &InteractionConfig::default());
        assert_eq!(out.len(), 1);
        assert_eq!(out[0].subkind, "phrase-cue");
        assert_eq!(out[0].span, vec![0]);
    }

    #[test]
    fn misalignment_rephrase() {
        let t = conv(&[
            (Role::User, "cancel order 123 please"),
            (Role::Assistant, "Which order would you like to cancel?"),
            (Role::User, "please cancel my order 123"),
        ]);
        let out = detect_misalignment(&t, &InteractionConfig::default());
        assert_eq!(out.len(), 1);
        assert_eq!(out[0].subkind, "rephrase-similarity");
        assert_eq!(out[0].span, vec![0, 2]);
    }

    #[test]
    fn misalignment_identical_and_single_turns_are_quiet() {
        let cfg = InteractionConfig::default();
        assert!(detect_misalignment(&conv(&[(Role::User, "cancel order 123 please")]), &cfg).is_empty());
        let t = conv(&[(Role::User, "cancel order 123"), (Role::Assistant, "ok"), (Role::User, "cancel order 123")]);
        assert!(detect_misalignment(&t, &cfg).is_empty());
    }

    #[test]
    fn rephrase_window_limits_distance() {
        let t = conv(&[
            (Role::User, "cancel order 123 please"),
            (Role::User, "what colors exist"),
            (Role::User, "how long is shipping"),
            (Role::User, "please cancel my order 123"),
        ]);
        let mut cfg = InteractionConfig::default();
        assert!(detect_misalignment(&t, &cfg).is_empty());
        cfg.rephrase_window = 3;
        assert_eq!(detect_misalignment(&t, &cfg).len(), 1);
    }

    #[test]
    fn stagnation_duplicate_assistant() {
        let t = conv(&[
            (Role::User, "hello"),
            (Role::Assistant, "I can look into that for you right away."),
            (Role::User, "ok"),
            (Role::Assistant, "I can look into that for you right away."),
        ]);
        let out = detect_stagnation(&t, &InteractionConfig::default());
        assert_eq!(out.len(), 1);
        assert_eq!(out[0].subkind, "near-duplicate-assistant");
        assert_eq!(out[0].span, vec![1, 3]);
        assert!(out[0].evidence.starts_with("similarity 1.00"));
    }

    #[test]
    fn stagnation_prolonged_threshold() {
        let cfg = InteractionConfig { baseline_user_turns: 10.0, ..Default::default() };
        let out = detect_stagnation(&user_turns(25), &cfg);
        assert_eq!(out.len(), 1);
        assert_eq!(out[0].subkind, "prolonged");
        assert_eq!(out[0].span, vec![48]);
        assert!(detect_stagnation(&user_turns(15), &cfg).is_empty());
        assert!(detect_stagnation(&user_turns(20), &cfg).is_empty());
    }

    #[test]
    fn disengagement_cues() {
        let cfg = InteractionConfig::default();
        assert_eq!(detect_disengagement(&conv(&[(Role::User, "just let me talk to a human")]), &cfg).len(), 1);
        assert_eq!(detect_disengagement(&conv(&[(Role::User, "tlak to a human")]), &cfg).len(), 1);
        assert!(detect_disengagement(&conv(&[(Role::User, "thanks, bye")]), &cfg).is_empty());
    }

    #[test]
    fn abandonment_requires_marker() {
        let mut t = conv(&[(Role::User, "where is my parcel"), (Role::Assistant, "checking")]);
        let cfg = InteractionConfig::default();
        assert!(detect_disengagement(&t, &cfg).is_empty());
        t.meta.insert("session_end".into(), "abandoned".into());
        let out = detect_disengagement(&t, &cfg);
        assert_eq!(out.len(), 1);
        assert_eq!(out[0].subkind, "abandonment");
        assert_eq!(out[0].span, vec![1]);
    }

    #[test]
    fn satisfaction_closing() {
        let t = conv(&[
            (Role::User, "I need to change my address"),
            (Role::Assistant, "Done"),
            (Role::User, "great, that worked, thanks!"),
        ]);
        let out = detect_satisfaction(&t, &InteractionConfig::default());
        let phrases: Vec<&str> = out.iter().map(|i| i.evidence.split('"').nth(3).unwrap()).collect();
        assert_eq!(phrases, vec!["great", "that worked", "thanks"]);
        assert!(out.iter().all(|i| i.subkind == "closing"));
    }

    #[test]
    fn satisfaction_early_turn_not_closing() {
        let mut turns: Vec<(Role, String)> = vec![(Role::User, "thanks".into())];
        for i in 1..12 {
            turns.push((Role::User, format!("question number {i} about parcels")));
        }
        let t = conv(&turns.iter().map(|(r, s)| (*r, s.as_str())).collect::<Vec<_>>());
        let out = detect_satisfaction(&t, &InteractionConfig::default());
        assert_eq!(out.len(), 1);
        assert_eq!(out[0].subkind, "phrase-cue");
        assert!(detect_satisfaction(&conv(&[]), &InteractionConfig::default()).is_empty());
    }

    #[test]
    fn config_validation() {
        assert!(InteractionConfig::default().validate().is_ok());
        let bad = InteractionConfig { duplicate_threshold: 1.5, ..Default::default() };
        assert!(bad.validate().is_err());
        let bad = InteractionConfig { rephrase_window: 0, ..Default::default() };
        assert!(bad.validate().is_err());
    }
}
