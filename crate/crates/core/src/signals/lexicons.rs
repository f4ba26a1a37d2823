use std::path::Path;

use crate::textmatch::{Lexicon, LexiconError};

use super::environment::{ExhaustionKind, ExhaustionLexicon};

/// File stems of the shipped lexicons, `<name>.txt` in a lexicon directory.
pub const LEXICON_NAMES: [&str; 10] = [
    "misalignment",
    "disengagement",
    "satisfaction",
    "empty-result",
    "error-prefix",
    "rate-limit",
    "quota",
    "outage",
    "context-cap",
    "malformed",
];

fn builtin(name: &str) -> Option<&'static str> {
    Some(match name {
        "misalignment" => include_str!("../../lexicons/misalignment.txt"),
        "disengagement" => include_str!("../../lexicons/disengagement.txt"),
        "satisfaction" => include_str!("../../lexicons/satisfaction.txt"),
        "empty-result" => include_str!("../../lexicons/empty-result.txt"),
        "error-prefix" => include_str!("../../lexicons/error-prefix.txt"),
        "rate-limit" => include_str!("../../lexicons/rate-limit.txt"),
        "quota" => include_str!("../../lexicons/quota.txt"),
        "outage" => include_str!("../../lexicons/outage.txt"),
        "context-cap" => include_str!("../../lexicons/context-cap.txt"),
        "malformed" => include_str!("../../lexicons/malformed.txt"),
        _ => return None,
    })
}

/// The built-in lexicon of that name. Panics on unknown names.
pub fn default_lexicon(name: &str) -> Lexicon {
    let text = builtin(name).unwrap_or_else(|| panic!("no built-in lexicon {name:?}"));
    Lexicon::parse(name, text).expect("built-in lexicons are valid")
}

/// Load `<dir>/<name>.txt`, falling back to the built-in copy when the file
/// does not exist.
pub fn load_lexicon(dir: Option<&Path>, name: &str) -> Result<Lexicon, LexiconError> {
    if let Some(dir) = dir {
        let path = dir.join(format!("{name}.txt"));
        if let Ok(text) = std::fs::read_to_string(&path) {
            return Lexicon::parse(name, &text);
        }
    }
    Ok(default_lexicon(name))
}

/// Every lexicon the detectors consume.
#[derive(Debug, Clone)]
pub struct LexiconSet {
    pub misalignment: Lexicon,
    pub disengagement: Lexicon,
    pub satisfaction: Lexicon,
    pub empty_result: Lexicon,
    pub error_prefix: Lexicon,
    pub exhaustion: ExhaustionLexicon,
}

impl Default for LexiconSet {
    fn default() -> Self {
        LexiconSet::load(None).expect("built-in lexicons are valid")
    }
}

impl LexiconSet {
    pub fn load(dir: Option<&Path>) -> Result<Self, LexiconError> {
        let mut groups = Vec::new();
        for kind in ExhaustionKind::ALL {
            groups.push((kind, load_lexicon(dir, kind.as_str())?));
        }
        Ok(LexiconSet {
            misalignment: load_lexicon(dir, "misalignment")?,
            disengagement: load_lexicon(dir, "disengagement")?,
            satisfaction: load_lexicon(dir, "satisfaction")?,
            empty_result: load_lexicon(dir, "empty-result")?,
            error_prefix: load_lexicon(dir, "error-prefix")?,
            exhaustion: ExhaustionLexicon::new(groups),
        })
    }
}
