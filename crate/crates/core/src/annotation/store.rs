use std::collections::HashMap;
use std::fs::{File, OpenOptions};
use std::io::{Read, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::{AnnotationError, AnnotationLabel};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "op", rename_all = "lowercase")]
pub enum StoreEntry {
    Label { seq: u64, label: AnnotationLabel },
    Delete { seq: u64, annotator_id: String, blinded_id: String },
}

impl StoreEntry {
    pub fn seq(&self) -> u64 {
        match self {
            StoreEntry::Label { seq, .. } | StoreEntry::Delete { seq, .. } => *seq,
        }
    }
}

/// Append-only JSONL label log. Every append is flushed to disk before it
/// returns. On open, a torn final line left by a crash is cut off; damage
/// anywhere else is reported as corruption.
#[derive(Debug)]
pub struct LabelStore {
    path: PathBuf,
    file: File,
    len: u64,
    entries: Vec<StoreEntry>,
    /// (annotator, blinded id) -> index into `entries` of the live label.
    live: HashMap<(String, String), usize>,
    dropped_tail: u64,
}

impl LabelStore {
    pub fn open(path: impl AsRef<Path>) -> Result<Self, AnnotationError> {
        let path = path.as_ref().to_path_buf();
        let mut file = OpenOptions::new().read(true).append(true).create(true).open(&path)?;
        let mut bytes = Vec::new();
        file.read_to_end(&mut bytes)?;

        let mut entries: Vec<StoreEntry> = Vec::new();
        let mut good_len = 0usize;
        let mut offset = 0usize;
        let mut line_no = 0usize;
        while offset < bytes.len() {
            line_no += 1;
            let Some(nl) = bytes[offset..].iter().position(|b| *b == b'\n') else {
                break; // unterminated tail
            };
            let line = &bytes[offset..offset + nl];
            let next = offset + nl + 1;
            let parsed = std::str::from_utf8(line)
                .map_err(|e| e.to_string())
                .and_then(|s| serde_json::from_str::<StoreEntry>(s).map_err(|e| e.to_string()));
            match parsed {
                Ok(entry) => {
                    if let Some(prev) = entries.last() {
                        if entry.seq() <= prev.seq() {
                            return Err(AnnotationError::Corrupt {
                                line: line_no,
                                message: format!("sequence {} does not follow {}", entry.seq(), prev.seq()),
                            });
                        }
                    }
                    entries.push(entry);
                    good_len = next;
                }
                Err(_) if next >= bytes.len() => break, // torn final line
                Err(message) => return Err(AnnotationError::Corrupt { line: line_no, message }),
            }
            offset = next;
        }
        if good_len < bytes.len() {
            file.set_len(good_len as u64)?;
            file.sync_all()?;
        }

        let dropped_tail = (bytes.len() - good_len) as u64;
        let mut store =
            LabelStore { path, file, len: good_len as u64, entries: Vec::new(), live: HashMap::new(), dropped_tail };
        for e in entries {
            store.index(e);
        }
        Ok(store)
    }

    fn index(&mut self, e: StoreEntry) {
        match &e {
            StoreEntry::Label { label, .. } => {
                self.live.insert((label.annotator_id.clone(), label.blinded_id.clone()), self.entries.len());
            }
            StoreEntry::Delete { annotator_id, blinded_id, .. } => {
                self.live.remove(&(annotator_id.clone(), blinded_id.clone()));
            }
        }
        self.entries.push(e);
    }

    pub fn path(&self) -> &Path {
        &self.path
    }

    /// Bytes of incomplete trailing record discarded when the store was opened.
    pub fn dropped_tail_bytes(&self) -> u64 {
        self.dropped_tail
    }

    pub fn next_seq(&self) -> u64 {
        self.entries.last().map_or(1, |e| e.seq() + 1)
    }

    pub fn entries(&self) -> &[StoreEntry] {
        &self.entries
    }

    pub fn label_seq(&self, annotator: &str, blinded_id: &str) -> Option<u64> {
        self.live.get(&(annotator.to_string(), blinded_id.to_string())).map(|i| self.entries[*i].seq())
    }

    /// Live labels in sequence order.
    pub fn active_labels(&self) -> Vec<(u64, &AnnotationLabel)> {
        let mut idx: Vec<usize> = self.live.values().copied().collect();
        idx.sort_unstable();
        idx.into_iter()
            .map(|i| match &self.entries[i] {
                StoreEntry::Label { seq, label } => (*seq, label),
                StoreEntry::Delete { .. } => unreachable!("live index points at labels only"),
            })
            .collect()
    }

    fn append(&mut self, entry: StoreEntry) -> Result<u64, AnnotationError> {
        let mut line = serde_json::to_string(&entry).expect("store entries serialize");
        line.push('\n');
        let result = self.file.write_all(line.as_bytes()).and_then(|_| self.file.sync_data());
        if let Err(e) = result {
            // Roll back a partial write so the log stays line-aligned.
            let _ = self.file.set_len(self.len);
            return Err(e.into());
        }
        self.len += line.len() as u64;
        let seq = entry.seq();
        self.index(entry);
        Ok(seq)
    }

    pub fn append_label(&mut self, label: AnnotationLabel) -> Result<u64, AnnotationError> {
        if let Some(seq) = self.label_seq(&label.annotator_id, &label.blinded_id) {
            return Err(AnnotationError::DuplicateLabel {
                annotator_id: label.annotator_id,
                blinded_id: label.blinded_id,
                seq,
            });
        }
        let seq = self.next_seq();
        self.append(StoreEntry::Label { seq, label })
    }

    pub fn delete_label(&mut self, annotator: &str, blinded_id: &str) -> Result<u64, AnnotationError> {
        if self.label_seq(annotator, blinded_id).is_none() {
            return Err(AnnotationError::NoSuchLabel {
                annotator_id: annotator.to_string(),
                blinded_id: blinded_id.to_string(),
            });
        }
        let seq = self.next_seq();
        self.append(StoreEntry::Delete { seq, annotator_id: annotator.to_string(), blinded_id: blinded_id.to_string() })
    }
}
