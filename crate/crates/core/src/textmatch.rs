//! Text normalization and typo-tolerant phrase matching.
//!
//! Matching is done on normalized text (see [`normalize`]) over token-aligned
//! windows: a lexicon phrase of `k` tokens is compared against every window of
//! `k-1..=k+1` consecutive haystack tokens with character-level Levenshtein
//! distance, normalized by the longer of the two strings.

use std::collections::{BTreeSet, HashSet};

use serde::{Deserialize, Serialize};
use thiserror::Error;
use unicode_normalization::UnicodeNormalization;

pub const DEFAULT_TOLERANCE: f64 = 0.2;
pub const MAX_TOLERANCE: f64 = 0.5;

const EPS: f64 = 1e-9;

/// Lowercase, NFC, punctuation and symbols to spaces, collapse whitespace.
pub fn normalize(text: &str) -> String {
    let lowered: String = text.nfc().collect::<String>().to_lowercase().nfc().collect();
    let mut out = String::with_capacity(lowered.len());
    let mut pending_space = false;
    for c in lowered.chars() {
        if c.is_alphanumeric() {
            if pending_space && !out.is_empty() {
                out.push(' ');
            }
            pending_space = false;
            out.push(c);
        } else {
            pending_space = true;
        }
    }
    out
}

pub fn levenshtein(a: &[char], b: &[char]) -> usize {
    if a.is_empty() {
        return b.len();
    }
    let mut row: Vec<usize> = (0..=a.len()).collect();
    for (j, cb) in b.iter().enumerate() {
        let mut diag = row[0];
        row[0] = j + 1;
        for (i, ca) in a.iter().enumerate() {
            let above = row[i + 1];
            row[i + 1] = if ca == cb { diag } else { 1 + diag.min(above).min(row[i]) };
            diag = above;
        }
    }
    row[a.len()]
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LexiconEntry {
    /// Normalized phrase; doubles as the phrase id.
    pub phrase: String,
    tokens: Vec<String>,
    chars: Vec<char>,
}

impl LexiconEntry {
    pub fn phrase_id(&self) -> &str {
        &self.phrase
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Lexicon {
    pub id: String,
    entries: Vec<LexiconEntry>,
    pub tolerance: f64,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum LexiconError {
    #[error("lexicon {lexicon}: phrase {phrase:?} is empty after normalization")]
    EmptyPhrase { lexicon: String, phrase: String },
    #[error("lexicon {lexicon}: tolerance {tolerance} outside [0, {MAX_TOLERANCE}]")]
    Tolerance { lexicon: String, tolerance: f64 },
    #[error("lexicon {lexicon}, line {line}: {message}")]
    Syntax { lexicon: String, line: usize, message: String },
}

impl Lexicon {
    pub fn new<I, S>(id: impl Into<String>, phrases: I, tolerance: f64) -> Result<Self, LexiconError>
    where
        I: IntoIterator<Item = S>,
        S: AsRef<str>,
    {
        let id = id.into();
        if !(0.0..=MAX_TOLERANCE).contains(&tolerance) {
            return Err(LexiconError::Tolerance { lexicon: id, tolerance });
        }
        let mut seen = HashSet::new();
        let mut entries = Vec::new();
        for raw in phrases {
            let phrase = normalize(raw.as_ref());
            if phrase.is_empty() {
                return Err(LexiconError::EmptyPhrase { lexicon: id, phrase: raw.as_ref().to_string() });
            }
            if seen.insert(phrase.clone()) {
                entries.push(LexiconEntry {
                    tokens: phrase.split(' ').map(str::to_string).collect(),
                    chars: phrase.chars().collect(),
                    phrase,
                });
            }
        }
        Ok(Lexicon { id, entries, tolerance })
    }

    /// Parse the lexicon file format: UTF-8, optional `tolerance=<float>`
    /// header, `#` comments, one phrase per line. Without a header the
    /// tolerance is [`DEFAULT_TOLERANCE`].
    pub fn parse(id: impl Into<String>, text: &str) -> Result<Self, LexiconError> {
        let id = id.into();
        let mut tolerance = None;
        let mut phrases = Vec::new();
        for (n, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            if let Some(value) = line.strip_prefix("tolerance=") {
                if tolerance.is_some() || !phrases.is_empty() {
                    return Err(LexiconError::Syntax {
                        lexicon: id,
                        line: n + 1,
                        message: "tolerance header must precede all phrases".into(),
                    });
                }
                tolerance = Some(value.trim().parse::<f64>().map_err(|e| LexiconError::Syntax {
                    lexicon: id.clone(),
                    line: n + 1,
                    message: format!("bad tolerance: {e}"),
                })?);
                continue;
            }
            phrases.push(line.to_string());
        }
        Lexicon::new(id, phrases, tolerance.unwrap_or(DEFAULT_TOLERANCE))
    }

    pub fn entries(&self) -> &[LexiconEntry] {
        &self.entries
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

/// A lexicon hit inside one message.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MatchSpan {
    pub message_index: usize,
    /// Char offsets into the normalized text, end exclusive.
    pub char_start: usize,
    pub char_end: usize,
    pub phrase_id: String,
    pub distance: f64,
}

impl MatchSpan {
    pub fn excerpt<'a>(&self, normalized: &'a str) -> &'a str {
        let start = normalized.char_indices().nth(self.char_start).map_or(normalized.len(), |(b, _)| b);
        let end = normalized.char_indices().nth(self.char_end).map_or(normalized.len(), |(b, _)| b);
        &normalized[start..end]
    }
}

/// All non-overlapping lexicon matches in `haystack` (already normalized),
/// ordered by `char_start`.
///
/// Overlaps are resolved best-first: lowest distance, then leftmost, then
/// longest, then phrase id.
pub fn fuzzy_find(haystack: &str, lex: &Lexicon) -> Vec<MatchSpan> {
    find_in_message(0, haystack, lex)
}

pub fn find_in_message(message_index: usize, haystack: &str, lex: &Lexicon) -> Vec<MatchSpan> {
    let chars: Vec<char> = haystack.chars().collect();
    let tokens = token_bounds(&chars);
    if tokens.is_empty() {
        return Vec::new();
    }

    let mut candidates: Vec<MatchSpan> = Vec::new();
    for entry in &lex.entries {
        let k = entry.tokens.len();
        let lp = entry.chars.len();
        let (min_w, max_w) = if lex.tolerance == 0.0 { (k, k) } else { (k.saturating_sub(1).max(1), k + 1) };
        for start in 0..tokens.len() {
            for width in min_w..=max_w {
                let end = start + width;
                if end > tokens.len() {
                    break;
                }
                let (cs, ce) = (tokens[start].0, tokens[end - 1].1);
                let window = &chars[cs..ce];
                let longer = window.len().max(lp);
                if window.len().abs_diff(lp) as f64 > lex.tolerance * longer as f64 + EPS {
                    continue;
                }
                let distance = if window == entry.chars.as_slice() {
                    0.0
                } else if lex.tolerance == 0.0 {
                    continue;
                } else {
                    levenshtein(window, &entry.chars) as f64 / longer as f64
                };
                if distance <= lex.tolerance + EPS {
                    candidates.push(MatchSpan {
                        message_index,
                        char_start: cs,
                        char_end: ce,
                        phrase_id: entry.phrase.clone(),
                        distance,
                    });
                }
            }
        }
    }

    candidates.sort_by(|a, b| {
        a.distance
            .total_cmp(&b.distance)
            .then(a.char_start.cmp(&b.char_start))
            .then((b.char_end - b.char_start).cmp(&(a.char_end - a.char_start)))
            .then(a.phrase_id.cmp(&b.phrase_id))
    });
    let mut accepted: Vec<MatchSpan> = Vec::new();
    for c in candidates {
        if accepted.iter().all(|a| c.char_end <= a.char_start || c.char_start >= a.char_end) {
            accepted.push(c);
        }
    }
    accepted.sort_by_key(|m| m.char_start);
    accepted
}

fn token_bounds(chars: &[char]) -> Vec<(usize, usize)> {
    let mut out = Vec::new();
    let mut start = None;
    for (i, c) in chars.iter().enumerate() {
        match (c.is_whitespace(), start) {
            (false, None) => start = Some(i),
            (true, Some(s)) => {
                out.push((s, i));
                start = None;
            }
            _ => {}
        }
    }
    if let Some(s) = start {
        out.push((s, chars.len()));
    }
    out
}

/// Jaccard similarity over token 3-shingle sets. Inputs with fewer than three
/// tokens compare by exact token-sequence equality.
pub fn near_duplicate(a: &str, b: &str) -> f64 {
    let ta: Vec<&str> = a.split_whitespace().collect();
    let tb: Vec<&str> = b.split_whitespace().collect();
    if ta.len() < 3 || tb.len() < 3 {
        return if ta == tb { 1.0 } else { 0.0 };
    }
    let sa: BTreeSet<&[&str]> = ta.windows(3).collect();
    let sb: BTreeSet<&[&str]> = tb.windows(3).collect();
    jaccard(&sa, &sb)
}

/// Jaccard similarity over token sets; insensitive to word order.
pub fn token_overlap(a: &str, b: &str) -> f64 {
    let sa: BTreeSet<&str> = a.split_whitespace().collect();
    let sb: BTreeSet<&str> = b.split_whitespace().collect();
    if sa.is_empty() && sb.is_empty() {
        return 1.0;
    }
    jaccard(&sa, &sb)
}

fn jaccard<T: Ord>(a: &BTreeSet<T>, b: &BTreeSet<T>) -> f64 {
    let inter = a.intersection(b).count();
    let union = a.len() + b.len() - inter;
    if union == 0 {
        1.0
    } else {
        inter as f64 / union as f64
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn normalize_golden() {
        assert_eq!(normalize("That   Worked!!"), "that worked");
        assert_eq!(normalize(""), "");
        assert_eq!(normalize("Thanks \u{2014} that's  PERFECT."), "thanks that s perfect");
        assert_eq!(normalize("  ...  "), "");
        assert_eq!(normalize("Error 429: Too Many Requests"), "error 429 too many requests");
        // decomposed e + combining acute composes to a single char
        assert_eq!(normalize("Cafe\u{301}"), "caf\u{e9}");
    }

    #[test]
    fn levenshtein_basics() {
        let l = |a: &str, b: &str| levenshtein(&a.chars().collect::<Vec<_>>(), &b.chars().collect::<Vec<_>>());
        assert_eq!(l("", "abc"), 3);
        assert_eq!(l("kitten", "sitting"), 3);
        assert_eq!(l("tlak", "talk"), 2);
    }

    #[test]
    fn exact_substring_match() {
        let lex = Lexicon::new("d", ["talk to a human"], 0.2).unwrap();
        let m = fuzzy_find("please talk to a human now", &lex);
        assert_eq!(m.len(), 1);
        assert_eq!(m[0].distance, 0.0);
        assert_eq!(m[0].excerpt("please talk to a human now"), "talk to a human");
    }

    #[test]
    fn transposition_typo_within_tolerance() {
        let lex = Lexicon::new("d", ["talk to a human"], 0.2).unwrap();
        let m = fuzzy_find("tlak to a human", &lex);
        assert_eq!(m.len(), 1);
        assert!((m[0].distance - 2.0 / 15.0).abs() < 1e-12);
    }

    #[test]
    fn no_match_on_unrelated_text() {
        let lex = Lexicon::new("s", ["thanks", "that worked", "perfect"], 0.2).unwrap();
        assert!(fuzzy_find("weather is nice", &lex).is_empty());
    }

    #[test]
    fn zero_tolerance_is_whole_token_exact() {
        let lex = Lexicon::new("r", ["429"], 0.0).unwrap();
        assert_eq!(fuzzy_find("error 429 too many", &lex).len(), 1);
        assert!(fuzzy_find("order 4291", &lex).is_empty());
    }

    #[test]
    fn multiple_matches_sorted() {
        let lex = Lexicon::new("s", ["thanks", "that worked"], 0.2).unwrap();
        let m = fuzzy_find("great that worked thanks", &lex);
        let ids: Vec<&str> = m.iter().map(|s| s.phrase_id.as_str()).collect();
        assert_eq!(ids, vec!["that worked", "thanks"]);
    }

    #[test]
    fn lexicon_file_format() {
        let lex = Lexicon::parse("x", "# cues\ntolerance=0.1\nTalk to a Human\n\n# more\nforget it\n").unwrap();
        assert_eq!(lex.tolerance, 0.1);
        let phrases: Vec<&str> = lex.entries().iter().map(|e| e.phrase_id()).collect();
        assert_eq!(phrases, vec!["talk to a human", "forget it"]);

        assert!(matches!(Lexicon::parse("x", "tolerance=0.9\na\n"), Err(LexiconError::Tolerance { .. })));
        assert!(matches!(Lexicon::parse("x", "a\ntolerance=0.1\n"), Err(LexiconError::Syntax { .. })));
        assert!(matches!(Lexicon::new("x", ["!!"], 0.1), Err(LexiconError::EmptyPhrase { .. })));
        assert_eq!(Lexicon::parse("x", "a\n").unwrap().tolerance, DEFAULT_TOLERANCE);
    }

    #[test]
    fn near_duplicate_cases() {
        assert_eq!(near_duplicate("a b c d", "a b c d"), 1.0);
        assert_eq!(near_duplicate("one two three", "four five six"), 0.0);
        // 6 shingles each, 5 shared, 7 in the union
        let s = near_duplicate("i can help you cancel the order today", "i can help you cancel the order now");
        assert!((s - 5.0 / 7.0).abs() < 1e-12);
        assert_eq!(near_duplicate("ok", "ok"), 1.0);
        assert_eq!(near_duplicate("ok then", "ok now"), 0.0);
        assert_eq!(near_duplicate("ok", "ok then go"), 0.0);
    }

    #[test]
    fn token_overlap_is_order_insensitive() {
        let s = token_overlap("cancel order 123 please", "please cancel my order 123");
        assert!((s - 0.8).abs() < 1e-12);
    }
}
