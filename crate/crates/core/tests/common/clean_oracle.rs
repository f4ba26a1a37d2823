// Brute-force certification that a trajectory contains nothing any detector
// could fire on. Written without the crate's matching code: every check is
// broader than the detector it shadows, so a certified trajectory is clean
// under any detector that stays within the documented rules.

use std::collections::{BTreeSet, HashSet};

use sigtriage_core::trajectory::{ObservationStatus, Role, Trajectory};

const CUE_LEXICONS: [&str; 3] = [
    include_str!("../../lexicons/misalignment.txt"),
    include_str!("../../lexicons/disengagement.txt"),
    include_str!("../../lexicons/satisfaction.txt"),
];

const PAYLOAD_LEXICONS: [&str; 7] = [
    include_str!("../../lexicons/empty-result.txt"),
    include_str!("../../lexicons/rate-limit.txt"),
    include_str!("../../lexicons/quota.txt"),
    include_str!("../../lexicons/outage.txt"),
    include_str!("../../lexicons/context-cap.txt"),
    include_str!("../../lexicons/malformed.txt"),
    include_str!("../../lexicons/error-prefix.txt"),
];

fn norm(s: &str) -> Vec<String> {
    let mapped: String = s.chars().map(|c| if c.is_alphanumeric() { c.to_ascii_lowercase() } else { ' ' }).collect();
    mapped.split_whitespace().map(str::to_string).collect()
}

fn phrases(text: &str) -> Vec<Vec<String>> {
    text.lines()
        .map(str::trim)
        .filter(|l| !l.is_empty() && !l.starts_with('#') && !l.starts_with("tolerance="))
        .map(norm)
        .filter(|p| !p.is_empty())
        .collect()
}

fn edit_distance(a: &[char], b: &[char]) -> usize {
    let mut d = vec![vec![0usize; b.len() + 1]; a.len() + 1];
    for (i, row) in d.iter_mut().enumerate() {
        row[0] = i;
    }
    for j in 0..=b.len() {
        d[0][j] = j;
    }
    for i in 1..=a.len() {
        for j in 1..=b.len() {
            let sub = d[i - 1][j - 1] + usize::from(a[i - 1] != b[j - 1]);
            d[i][j] = sub.min(d[i - 1][j] + 1).min(d[i][j - 1] + 1);
        }
    }
    d[a.len()][b.len()]
}

/// Any token window of width 1..=k+1 within 0.2 normalized edit distance.
fn fuzzy_hit(tokens: &[String], phrase: &[String]) -> bool {
    let p: Vec<char> = phrase.join(" ").chars().collect();
    for w in 1..=phrase.len() + 1 {
        for win in tokens.windows(w) {
            let s: Vec<char> = win.join(" ").chars().collect();
            let longer = s.len().max(p.len());
            // edit distance is at least the length difference
            if s.len().abs_diff(p.len()) as f64 > 0.2 * longer as f64 + 1e-9 {
                continue;
            }
            if edit_distance(&s, &p) as f64 <= 0.2 * longer as f64 + 1e-9 {
                return true;
            }
        }
    }
    false
}

fn contains_run(tokens: &[String], phrase: &[String]) -> bool {
    tokens.windows(phrase.len()).any(|w| w == phrase)
}

fn jaccard<T: Ord>(a: BTreeSet<T>, b: BTreeSet<T>) -> f64 {
    let inter = a.intersection(&b).count();
    let union = a.len() + b.len() - inter;
    if union == 0 {
        1.0
    } else {
        inter as f64 / union as f64
    }
}

/// Reasons `t` is not certifiably clean; empty means certified.
pub fn uncertified_reasons(t: &Trajectory, baseline_user_turns: f64) -> Vec<String> {
    let mut why = Vec::new();
    let cue_phrases: Vec<Vec<String>> = CUE_LEXICONS.iter().flat_map(|l| phrases(l)).collect();
    let payload_phrases: Vec<Vec<String>> = PAYLOAD_LEXICONS.iter().flat_map(|l| phrases(l)).collect();

    let users: Vec<Vec<String>> = t.messages.iter().filter(|m| m.role == Role::User).map(|m| norm(&m.text)).collect();
    for u in &users {
        for p in &cue_phrases {
            if fuzzy_hit(u, p) {
                why.push(format!("user turn {:?} near cue {:?}", u.join(" "), p.join(" ")));
            }
        }
    }
    for (i, a) in users.iter().enumerate() {
        for b in &users[i + 1..] {
            let sim = jaccard(a.iter().collect(), b.iter().collect());
            if sim >= 0.8 {
                why.push(format!("user turns overlap {sim:.2}"));
            }
        }
    }
    if users.len() as f64 > 2.0 * baseline_user_turns {
        why.push(format!("{} user turns", users.len()));
    }

    let assistants: Vec<Vec<String>> = t
        .messages
        .iter()
        .filter(|m| m.role == Role::Assistant)
        .map(|m| norm(&m.text))
        .filter(|v| !v.is_empty())
        .collect();
    for (i, a) in assistants.iter().enumerate() {
        for b in &assistants[i + 1..] {
            let sim = if a.len() < 3 || b.len() < 3 {
                f64::from(u8::from(a == b))
            } else {
                jaccard(a.windows(3).collect(), b.windows(3).collect())
            };
            if sim >= 0.8 {
                why.push(format!("assistant turns similar {sim:.2}"));
            }
        }
    }

    if t.meta.get("session_end").is_some_and(|s| s == "abandoned") {
        why.push("abandoned".into());
    }

    let mut tools = HashSet::new();
    for m in &t.messages {
        for c in &m.tool_calls {
            if !tools.insert(c.tool_name.clone()) {
                why.push(format!("tool {} called twice", c.tool_name));
            }
        }
        if let Some(obs) = &m.observation {
            if obs.status == ObservationStatus::Error {
                why.push("error status".into());
            }
            let toks = norm(&obs.payload);
            if toks.is_empty() || toks == ["null"] || toks == ["none"] {
                why.push(format!("empty payload {:?}", obs.payload));
            }
            for p in &payload_phrases {
                if contains_run(&toks, p) {
                    why.push(format!("payload {:?} contains {:?}", obs.payload, p.join(" ")));
                }
            }
        }
    }
    why
}
