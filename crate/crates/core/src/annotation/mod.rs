//! Blinded annotation queue, durable label store and label export.

mod export;
mod manifest;
mod store;

use std::collections::{BTreeSet, HashMap};
use std::fmt;
use std::str::FromStr;

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::signals::Category;
use crate::trajectory::{Message, Trajectory};
use crate::triage::SignalReport;

pub use export::{ExportHeader, ExportRecord, LabelExport, EXPORT_FORMAT};
pub use manifest::{build_queue, ManifestItem, ProvenanceLink, QueueManifest};
pub use store::{LabelStore, StoreEntry};

pub const MAX_NOTE_CHARS: usize = 500;

#[derive(Debug, Error)]
pub enum AnnotationError {
    #[error("no samples given")]
    EmptySamples,
    #[error("invalid annotator list: {0}")]
    InvalidAnnotators(String),
    #[error("unknown annotator {0:?}")]
    UnknownAnnotator(String),
    #[error("unknown item {0:?}")]
    UnknownItem(String),
    #[error("trajectory {0:?} is in the queue but not in the pool")]
    UnknownTrajectory(String),
    #[error("annotator {annotator_id:?} already labeled {blinded_id:?} (seq {seq})")]
    DuplicateLabel { annotator_id: String, blinded_id: String, seq: u64 },
    #[error("no label from {annotator_id:?} on {blinded_id:?}")]
    NoSuchLabel { annotator_id: String, blinded_id: String },
    #[error("invalid {field}: {value:?}")]
    InvalidCategory { field: &'static str, value: String },
    #[error("note is {0} characters, the limit is {MAX_NOTE_CHARS}")]
    NoteTooLong(usize),
    #[error("label store is corrupt at line {line}: {message}")]
    Corrupt { line: usize, message: String },
    #[error("malformed export: {0}")]
    MalformedExport(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Informative {
    #[serde(rename = "YES")]
    Yes,
    #[serde(rename = "NO")]
    No,
}

impl Informative {
    pub fn is_yes(self) -> bool {
        self == Informative::Yes
    }
}

impl FromStr for Informative {
    type Err = AnnotationError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_uppercase().as_str() {
            "YES" => Ok(Informative::Yes),
            "NO" => Ok(Informative::No),
            _ => Err(AnnotationError::InvalidCategory { field: "informative", value: s.to_string() }),
        }
    }
}

/// Main-reason categories. Declaration order doubles as the priority order
/// used to break plurality ties.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum MainReason {
    ActionToolUse,
    Conversation,
    ExternalSystem,
    SuccessExemplar,
    Other,
    NoneUnclear,
}

impl MainReason {
    pub const ALL: [MainReason; 6] = [
        MainReason::ActionToolUse,
        MainReason::Conversation,
        MainReason::ExternalSystem,
        MainReason::SuccessExemplar,
        MainReason::Other,
        MainReason::NoneUnclear,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            MainReason::ActionToolUse => "ActionToolUse",
            MainReason::Conversation => "Conversation",
            MainReason::ExternalSystem => "ExternalSystem",
            MainReason::SuccessExemplar => "SuccessExemplar",
            MainReason::Other => "Other",
            MainReason::NoneUnclear => "NoneUnclear",
        }
    }

    pub fn title(self) -> &'static str {
        match self {
            MainReason::ActionToolUse => "Action / Tool-use",
            MainReason::Conversation => "Conversation",
            MainReason::ExternalSystem => "External System",
            MainReason::SuccessExemplar => "Success Exemplar",
            MainReason::Other => "Other",
            MainReason::NoneUnclear => "None / Unclear",
        }
    }

    pub fn index(self) -> usize {
        MainReason::ALL.iter().position(|r| *r == self).expect("listed")
    }
}

impl fmt::Display for MainReason {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for MainReason {
    type Err = AnnotationError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        MainReason::ALL
            .into_iter()
            .find(|r| r.as_str().eq_ignore_ascii_case(s))
            .ok_or_else(|| AnnotationError::InvalidCategory { field: "main_reason", value: s.to_string() })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AnnotationLabel {
    pub annotator_id: String,
    pub blinded_id: String,
    pub informative: Informative,
    pub main_reason: MainReason,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
    pub submitted_at: DateTime<Utc>,
}

/// A label as submitted over the wire, before enum validation.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LabelSubmission {
    pub annotator_id: String,
    pub blinded_id: String,
    pub informative: String,
    #[serde(default)]
    pub main_reason: Option<String>,
    #[serde(default)]
    pub note: Option<String>,
}

impl LabelSubmission {
    pub fn validate(self, now: DateTime<Utc>) -> Result<AnnotationLabel, AnnotationError> {
        let informative = self.informative.parse()?;
        let main_reason = self
            .main_reason
            .as_deref()
            .ok_or(AnnotationError::InvalidCategory { field: "main_reason", value: String::new() })?
            .parse()?;
        let note = self.note.filter(|n| !n.trim().is_empty());
        if let Some(n) = &note {
            let len = n.chars().count();
            if len > MAX_NOTE_CHARS {
                return Err(AnnotationError::NoteTooLong(len));
            }
        }
        Ok(AnnotationLabel {
            annotator_id: self.annotator_id,
            blinded_id: self.blinded_id,
            informative,
            main_reason,
            note,
            submitted_at: now,
        })
    }
}

/// What an annotator sees: the conversation and tool traffic, nothing else.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QueueItem {
    pub blinded_id: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub position: Option<usize>,
    pub messages: Vec<Message>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "lowercase")]
pub enum NextItem {
    Item { item: QueueItem, labeled: usize, total: usize },
    Done { labeled: usize, total: usize },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Progress {
    pub annotator_id: String,
    pub labeled: usize,
    pub total: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Ack {
    pub seq: u64,
    pub blinded_id: String,
}

/// Queue state plus label store. Callers serialize mutation; reads are
/// side-effect free.
#[derive(Debug)]
pub struct AnnotationService {
    manifest: QueueManifest,
    pool: HashMap<String, Trajectory>,
    activations: HashMap<String, BTreeSet<Category>>,
    store: LabelStore,
    by_blinded: HashMap<String, usize>,
}

impl AnnotationService {
    pub fn new(
        manifest: QueueManifest,
        pool: Vec<Trajectory>,
        reports: Vec<SignalReport>,
        store: LabelStore,
    ) -> Result<Self, AnnotationError> {
        let pool: HashMap<String, Trajectory> = pool.into_iter().map(|t| (t.id.clone(), t)).collect();
        for item in &manifest.items {
            if !pool.contains_key(&item.trajectory_id) {
                return Err(AnnotationError::UnknownTrajectory(item.trajectory_id.clone()));
            }
        }
        let by_blinded = manifest.items.iter().enumerate().map(|(i, it)| (it.blinded_id.clone(), i)).collect();
        let activations = reports.into_iter().map(|r| (r.trajectory_id, r.activations)).collect();
        Ok(AnnotationService { manifest, pool, activations, store, by_blinded })
    }

    pub fn manifest(&self) -> &QueueManifest {
        &self.manifest
    }

    pub fn store(&self) -> &LabelStore {
        &self.store
    }

    fn order(&self, annotator: &str) -> Result<&[String], AnnotationError> {
        self.manifest
            .orders
            .get(annotator)
            .map(|v| v.as_slice())
            .ok_or_else(|| AnnotationError::UnknownAnnotator(annotator.to_string()))
    }

    fn payload(&self, blinded_id: &str, position: Option<usize>) -> Result<QueueItem, AnnotationError> {
        let idx = *self.by_blinded.get(blinded_id).ok_or_else(|| AnnotationError::UnknownItem(blinded_id.to_string()))?;
        let t = &self.pool[&self.manifest.items[idx].trajectory_id];
        Ok(QueueItem { blinded_id: blinded_id.to_string(), position, messages: t.messages.clone() })
    }

    pub fn progress(&self, annotator: &str) -> Result<Progress, AnnotationError> {
        let order = self.order(annotator)?;
        let labeled = order.iter().filter(|b| self.store.label_seq(annotator, b).is_some()).count();
        Ok(Progress { annotator_id: annotator.to_string(), labeled, total: order.len() })
    }

    pub fn progress_all(&self) -> Vec<Progress> {
        self.manifest.annotators.iter().map(|a| self.progress(a).expect("registered")).collect()
    }

    /// Lowest-position item this annotator has not labeled.
    pub fn next_item(&self, annotator: &str) -> Result<NextItem, AnnotationError> {
        let order = self.order(annotator)?;
        let Progress { labeled, total, .. } = self.progress(annotator)?;
        match order.iter().position(|b| self.store.label_seq(annotator, b).is_none()) {
            Some(pos) => Ok(NextItem::Item { item: self.payload(&order[pos], Some(pos))?, labeled, total }),
            None => Ok(NextItem::Done { labeled, total }),
        }
    }

    /// An item by blinded id, with its position in `annotator`'s order when
    /// one is given.
    pub fn item(&self, blinded_id: &str, annotator: Option<&str>) -> Result<QueueItem, AnnotationError> {
        let position = match annotator {
            Some(a) => self.order(a)?.iter().position(|b| b == blinded_id),
            None => None,
        };
        self.payload(blinded_id, position)
    }

    pub fn submit(&mut self, sub: LabelSubmission, now: DateTime<Utc>) -> Result<Ack, AnnotationError> {
        self.order(&sub.annotator_id)?;
        if !self.by_blinded.contains_key(&sub.blinded_id) {
            return Err(AnnotationError::UnknownItem(sub.blinded_id));
        }
        let label = sub.validate(now)?;
        let blinded_id = label.blinded_id.clone();
        let seq = self.store.append_label(label)?;
        Ok(Ack { seq, blinded_id })
    }

    /// Admin escape hatch: tombstone one label so the item can be relabeled.
    pub fn delete_label(&mut self, annotator: &str, blinded_id: &str) -> Result<u64, AnnotationError> {
        self.store.delete_label(annotator, blinded_id)
    }

    pub fn export(&self) -> LabelExport {
        let mut records = Vec::new();
        for (seq, label) in self.store.active_labels() {
            let item = &self.manifest.items[self.by_blinded[&label.blinded_id]];
            let t = &self.pool[&item.trajectory_id];
            records.push(ExportRecord {
                seq,
                annotator_id: label.annotator_id.clone(),
                blinded_id: label.blinded_id.clone(),
                trajectory_id: item.trajectory_id.clone(),
                provenance: item.provenance.clone(),
                reward: t.reward,
                domain: t.domain.clone(),
                activations: self.activations.get(&t.id).cloned().unwrap_or_default().into_iter().collect(),
                informative: label.informative,
                main_reason: label.main_reason,
                note: label.note.clone(),
                submitted_at: label.submitted_at,
            });
        }
        LabelExport {
            header: ExportHeader {
                format: EXPORT_FORMAT.to_string(),
                annotators: self.manifest.annotators.clone(),
                items: self.manifest.items.len(),
                records: records.len(),
                samples: self.manifest.samples.clone(),
            },
            records,
        }
    }
}
