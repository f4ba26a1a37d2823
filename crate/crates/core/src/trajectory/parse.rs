use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::str::FromStr;

use serde_json::{Map, Value};
use thiserror::Error;

use super::{Message, ObservationStatus, Role, ToolInvocation, ToolObservation, Trajectory};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SourceFormat {
    /// τ-bench historical trajectory results (OpenAI-style message lists).
    TauBenchV1,
    CanonicalV1,
}

impl FromStr for SourceFormat {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "tau-bench" | "taubench" | "tau-bench-v1" | "taubenchv1" => Ok(SourceFormat::TauBenchV1),
            "canonical" | "canonical-v1" | "canonicalv1" => Ok(SourceFormat::CanonicalV1),
            other => Err(format!("unknown format {other:?} (expected tau-bench or canonical)")),
        }
    }
}

impl fmt::Display for SourceFormat {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SourceFormat::TauBenchV1 => "tau-bench",
            SourceFormat::CanonicalV1 => "canonical",
        })
    }
}

/// Context the source document itself may not carry.
#[derive(Debug, Clone, Default)]
pub struct SourceHint {
    /// Prefix for generated ids, usually the file stem.
    pub id_prefix: Option<String>,
    /// Domain tag used when the document has none.
    pub domain: Option<String>,
    /// Recorded into `meta["source"]`.
    pub source: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ParseError {
    #[error("malformed input at byte {offset}: {message}")]
    MalformedInput { offset: usize, message: String },
    #[error("schema violation{}: {message}", fmt_index(.message_index))]
    SchemaViolation { message_index: Option<usize>, message: String },
}

fn fmt_index(idx: &Option<usize>) -> String {
    idx.map(|i| format!(" at message {i}")).unwrap_or_default()
}

impl ParseError {
    fn schema(message_index: Option<usize>, message: impl Into<String>) -> Self {
        ParseError::SchemaViolation { message_index, message: message.into() }
    }

    fn shift(self, base: usize) -> Self {
        match self {
            ParseError::MalformedInput { offset, message } => {
                ParseError::MalformedInput { offset: offset + base, message }
            }
            other => other,
        }
    }
}

pub fn parse_trajectory(raw: &str, format: SourceFormat) -> Result<Trajectory, ParseError> {
    parse_trajectory_with(raw, format, &SourceHint::default())
}

pub fn parse_trajectory_with(raw: &str, format: SourceFormat, hint: &SourceHint) -> Result<Trajectory, ParseError> {
    let value = parse_json(raw)?;
    from_value(&value, format, hint, None)
}

/// Parse a whole file: a single object, a JSON array of objects, or JSONL.
pub fn parse_document(raw: &str, format: SourceFormat, hint: &SourceHint) -> Result<Vec<Trajectory>, ParseError> {
    let trimmed = raw.trim_start();
    if trimmed.is_empty() {
        return Ok(Vec::new());
    }
    if trimmed.starts_with('[') {
        let value = parse_json(raw)?;
        let items = value.as_array().expect("document starts with '['");
        return items
            .iter()
            .enumerate()
            .map(|(i, item)| from_value(item, format, hint, Some(i)))
            .collect();
    }
    if let Ok(value) = serde_json::from_str::<Value>(raw) {
        return Ok(vec![from_value(&value, format, hint, None)?]);
    }
    let mut out = Vec::new();
    let mut offset = 0;
    for (line_no, line) in raw.split_inclusive('\n').enumerate() {
        if !line.trim().is_empty() {
            let value = parse_json(line).map_err(|e| e.shift(offset))?;
            out.push(from_value(&value, format, hint, Some(line_no))?);
        }
        offset += line.len();
    }
    Ok(out)
}

fn parse_json(raw: &str) -> Result<Value, ParseError> {
    serde_json::from_str(raw).map_err(|e| ParseError::MalformedInput {
        offset: byte_offset(raw, e.line(), e.column()),
        message: e.to_string(),
    })
}

fn byte_offset(raw: &str, line: usize, column: usize) -> usize {
    if line == 0 {
        return 0;
    }
    let line_start: usize = raw.split_inclusive('\n').take(line - 1).map(str::len).sum();
    (line_start + column.saturating_sub(1)).min(raw.len())
}

fn from_value(value: &Value, format: SourceFormat, hint: &SourceHint, ordinal: Option<usize>) -> Result<Trajectory, ParseError> {
    let obj = value
        .as_object()
        .ok_or_else(|| ParseError::schema(None, "trajectory must be a JSON object"))?;
    let draft = match format {
        SourceFormat::CanonicalV1 => canonical_draft(obj, hint, ordinal)?,
        SourceFormat::TauBenchV1 => super::tau::draft(obj, hint, ordinal)?,
    };
    draft.assemble()
}

pub(super) struct DraftCall {
    pub call_id: Option<String>,
    pub tool_name: String,
    pub arguments: Map<String, Value>,
}

pub(super) struct DraftObservation {
    pub call_id: Option<String>,
    pub tool_name: Option<String>,
    pub status: ObservationStatus,
    pub payload: String,
}

pub(super) struct DraftMessage {
    pub role: Role,
    pub text: String,
    pub calls: Vec<DraftCall>,
    pub observation: Option<DraftObservation>,
}

pub(super) struct Draft {
    pub id: String,
    pub domain: String,
    pub reward: Option<i64>,
    pub meta: BTreeMap<String, String>,
    pub messages: Vec<DraftMessage>,
}

impl Draft {
    /// Assign missing call ids and link observations to invocations.
    ///
    /// Observations with a call id must reference an earlier invocation.
    /// Observations without one link to the nearest preceding unlinked
    /// invocation of the same tool, else to the oldest unlinked invocation.
    fn assemble(self) -> Result<Trajectory, ParseError> {
        let mut messages = Vec::with_capacity(self.messages.len());
        // (call_id, tool_name, linked)
        let mut issued: Vec<(String, String, bool)> = Vec::new();
        let mut by_id: HashMap<String, usize> = HashMap::new();

        for (index, draft) in self.messages.into_iter().enumerate() {
            if draft.role != Role::Assistant && !draft.calls.is_empty() {
                return Err(ParseError::schema(Some(index), format!("tool calls on a {} message", draft.role)));
            }
            let mut tool_calls = Vec::with_capacity(draft.calls.len());
            for (k, call) in draft.calls.into_iter().enumerate() {
                if call.tool_name.is_empty() {
                    return Err(ParseError::schema(Some(index), "tool call without a tool name"));
                }
                let call_id = match call.call_id.filter(|s| !s.is_empty()) {
                    Some(id) => id,
                    None => format!("call-{index}-{k}"),
                };
                if by_id.insert(call_id.clone(), issued.len()).is_some() {
                    return Err(ParseError::schema(Some(index), format!("duplicate call id {call_id:?}")));
                }
                issued.push((call_id.clone(), call.tool_name.clone(), false));
                tool_calls.push(ToolInvocation { call_id, tool_name: call.tool_name, arguments: call.arguments });
            }

            let observation = match (draft.role, draft.observation) {
                (Role::Tool, None) => {
                    return Err(ParseError::schema(Some(index), "tool message without an observation"));
                }
                (Role::Tool, Some(obs)) => {
                    let slot = link(&issued, &by_id, &obs)
                        .map_err(|m| ParseError::schema(Some(index), m))?;
                    issued[slot].2 = true;
                    Some(ToolObservation {
                        call_id: issued[slot].0.clone(),
                        status: obs.status,
                        payload: obs.payload,
                    })
                }
                (role, Some(_)) => {
                    return Err(ParseError::schema(Some(index), format!("observation on a {role} message")));
                }
                (_, None) => None,
            };

            messages.push(Message { index, role: draft.role, text: draft.text, tool_calls, observation });
        }

        Ok(Trajectory { id: self.id, domain: self.domain, reward: self.reward, meta: self.meta, messages })
    }
}

fn link(issued: &[(String, String, bool)], by_id: &HashMap<String, usize>, obs: &DraftObservation) -> Result<usize, String> {
    if let Some(id) = obs.call_id.as_deref().filter(|s| !s.is_empty()) {
        return match by_id.get(id) {
            Some(&slot) if issued[slot].2 => Err(format!("second observation for call id {id:?}")),
            Some(&slot) => Ok(slot),
            None => Err(format!("observation references unknown call id {id:?}")),
        };
    }
    if let Some(name) = &obs.tool_name {
        if let Some(slot) = issued.iter().rposition(|(_, tool, linked)| !linked && tool == name) {
            return Ok(slot);
        }
    }
    issued
        .iter()
        .position(|(_, _, linked)| !linked)
        .ok_or_else(|| "observation without any pending tool call".to_string())
}

pub(super) fn string_field(obj: &Map<String, Value>, key: &str) -> Option<String> {
    match obj.get(key)? {
        Value::String(s) => Some(s.clone()),
        Value::Number(n) => Some(n.to_string()),
        Value::Bool(b) => Some(b.to_string()),
        _ => None,
    }
}

pub(super) fn parse_reward(value: Option<&Value>) -> Result<Option<i64>, ParseError> {
    match value {
        None | Some(Value::Null) => Ok(None),
        Some(Value::Number(n)) => {
            if let Some(i) = n.as_i64() {
                Ok(Some(i))
            } else {
                let f = n.as_f64().unwrap_or(f64::NAN);
                if f.fract() == 0.0 && f.is_finite() {
                    Ok(Some(f as i64))
                } else {
                    Err(ParseError::schema(None, format!("reward {n} is not an integer")))
                }
            }
        }
        Some(other) => Err(ParseError::schema(None, format!("reward must be a number, got {other}"))),
    }
}

pub(super) fn parse_role(raw: &str, index: usize) -> Result<Role, ParseError> {
    match raw {
        "user" => Ok(Role::User),
        "assistant" => Ok(Role::Assistant),
        "tool" => Ok(Role::Tool),
        other => Err(ParseError::schema(Some(index), format!("unknown role {other:?}"))),
    }
}

fn canonical_draft(obj: &Map<String, Value>, hint: &SourceHint, ordinal: Option<usize>) -> Result<Draft, ParseError> {
    let id = match string_field(obj, "id") {
        Some(id) if !id.is_empty() => id,
        _ => match (&hint.id_prefix, ordinal) {
            (Some(prefix), Some(i)) => format!("{prefix}:{i}"),
            (Some(prefix), None) => prefix.clone(),
            _ => return Err(ParseError::schema(None, "missing trajectory id")),
        },
    };
    let domain = string_field(obj, "domain").or_else(|| hint.domain.clone()).unwrap_or_default();
    let reward = parse_reward(obj.get("reward"))?;
    let mut meta = BTreeMap::new();
    if let Some(m) = obj.get("meta") {
        let m = m.as_object().ok_or_else(|| ParseError::schema(None, "meta must be an object"))?;
        for (k, v) in m {
            let v = match v {
                Value::String(s) => s.clone(),
                other => other.to_string(),
            };
            meta.insert(k.clone(), v);
        }
    }
    if let Some(source) = &hint.source {
        meta.entry("source".into()).or_insert_with(|| source.clone());
    }

    let raw_messages = obj
        .get("messages")
        .and_then(Value::as_array)
        .ok_or_else(|| ParseError::schema(None, "missing messages array"))?;
    let mut messages = Vec::with_capacity(raw_messages.len());
    for (pos, raw) in raw_messages.iter().enumerate() {
        let m = raw
            .as_object()
            .ok_or_else(|| ParseError::schema(Some(pos), "message must be an object"))?;
        if let Some(idx) = m.get("index") {
            if idx.as_u64() != Some(pos as u64) {
                return Err(ParseError::schema(Some(pos), format!("index {idx} does not match position {pos}")));
            }
        }
        let role = m
            .get("role")
            .and_then(Value::as_str)
            .ok_or_else(|| ParseError::schema(Some(pos), "missing role"))?;
        let role = parse_role(role, pos)?;
        let text = match m.get("text") {
            Some(Value::String(s)) => s.clone(),
            Some(Value::Null) if role != Role::User => String::new(),
            None if role != Role::User => String::new(),
            _ => return Err(ParseError::schema(Some(pos), "missing text")),
        };
        let mut calls = Vec::new();
        if let Some(list) = m.get("tool_calls") {
            let list = list
                .as_array()
                .ok_or_else(|| ParseError::schema(Some(pos), "tool_calls must be an array"))?;
            for c in list {
                let c = c
                    .as_object()
                    .ok_or_else(|| ParseError::schema(Some(pos), "tool call must be an object"))?;
                let arguments = match c.get("arguments") {
                    None | Some(Value::Null) => Map::new(),
                    Some(Value::Object(a)) => a.clone(),
                    Some(_) => return Err(ParseError::schema(Some(pos), "arguments must be an object")),
                };
                calls.push(DraftCall {
                    call_id: string_field(c, "call_id"),
                    tool_name: string_field(c, "tool_name").unwrap_or_default(),
                    arguments,
                });
            }
        }
        let observation = match m.get("observation") {
            None | Some(Value::Null) => None,
            Some(Value::Object(o)) => Some(DraftObservation {
                call_id: string_field(o, "call_id"),
                tool_name: string_field(o, "tool_name"),
                status: match o.get("status").and_then(Value::as_str) {
                    None => ObservationStatus::Unknown,
                    Some("ok") => ObservationStatus::Ok,
                    Some("error") => ObservationStatus::Error,
                    Some("unknown") => ObservationStatus::Unknown,
                    Some(other) => {
                        return Err(ParseError::schema(Some(pos), format!("unknown observation status {other:?}")))
                    }
                },
                payload: match o.get("payload") {
                    None | Some(Value::Null) => String::new(),
                    Some(Value::String(s)) => s.clone(),
                    Some(other) => other.to_string(),
                },
            }),
            Some(_) => return Err(ParseError::schema(Some(pos), "observation must be an object")),
        };
        messages.push(DraftMessage { role, text, calls, observation });
    }
    Ok(Draft { id, domain, reward, meta, messages })
}
