use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};

use super::{AnnotationError, Informative, MainReason, ProvenanceLink};
use crate::signals::Category;
use crate::triage::SampleSet;

pub const EXPORT_FORMAT: &str = "sigtriage-labels/v1";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExportHeader {
    pub format: String,
    pub annotators: Vec<String>,
    pub items: usize,
    pub records: usize,
    pub samples: Vec<SampleSet>,
}

/// One label joined with everything hidden from the annotator.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExportRecord {
    pub seq: u64,
    pub annotator_id: String,
    pub blinded_id: String,
    pub trajectory_id: String,
    pub provenance: Vec<ProvenanceLink>,
    pub reward: Option<i64>,
    pub domain: String,
    pub activations: Vec<Category>,
    pub informative: Informative,
    pub main_reason: MainReason,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
    pub submitted_at: DateTime<Utc>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LabelExport {
    pub header: ExportHeader,
    /// Sorted by sequence number.
    pub records: Vec<ExportRecord>,
}

#[derive(Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
enum Line {
    Header(ExportHeader),
    Label(ExportRecord),
}

impl LabelExport {
    /// Header line first, then one line per record.
    pub fn to_jsonl(&self) -> String {
        let mut out = serde_json::to_string(&Line::Header(self.header.clone())).expect("serializable");
        out.push('\n');
        for r in &self.records {
            out.push_str(&serde_json::to_string(&Line::Label(r.clone())).expect("serializable"));
            out.push('\n');
        }
        out
    }

    pub fn parse(text: &str) -> Result<Self, AnnotationError> {
        let mut header = None;
        let mut records = Vec::new();
        for (i, line) in text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty()) {
            let parsed: Line = serde_json::from_str(line)
                .map_err(|e| AnnotationError::MalformedExport(format!("line {}: {e}", i + 1)))?;
            match parsed {
                Line::Header(h) if header.is_none() && records.is_empty() => header = Some(h),
                Line::Header(_) => {
                    return Err(AnnotationError::MalformedExport(format!("line {}: unexpected header", i + 1)))
                }
                Line::Label(r) => records.push(r),
            }
        }
        let header = header.ok_or_else(|| AnnotationError::MalformedExport("missing header line".into()))?;
        if header.format != EXPORT_FORMAT {
            return Err(AnnotationError::MalformedExport(format!("unsupported format {:?}", header.format)));
        }
        records.sort_by_key(|r| r.seq);
        Ok(LabelExport { header, records })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_export_round_trip() {
        let e = LabelExport {
            header: ExportHeader {
                format: EXPORT_FORMAT.into(),
                annotators: vec!["a".into()],
                items: 0,
                records: 0,
                samples: vec![],
            },
            records: vec![],
        };
        let text = e.to_jsonl();
        assert_eq!(text.lines().count(), 1);
        assert_eq!(LabelExport::parse(&text).unwrap(), e);
        assert!(LabelExport::parse("").is_err());
    }
}
