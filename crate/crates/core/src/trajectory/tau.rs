//! Adapter for τ-bench historical trajectory results.
//!
//! Each result looks like `{"task_id", "reward", "info", "traj": [...], "trial"}`
//! where `traj` is an OpenAI-style chat transcript. System prompts are dropped,
//! tool output carries no status field, and the simulated user's `###STOP###`
//! control token is stripped from the text and recorded in `meta`.

use std::collections::BTreeMap;

use serde_json::{Map, Value};

use super::parse::{
    parse_reward, parse_role, string_field, Draft, DraftCall, DraftMessage, DraftObservation, ParseError, SourceHint,
};
use super::ObservationStatus;

const STOP_TOKEN: &str = "###STOP###";

pub(super) fn draft(obj: &Map<String, Value>, hint: &SourceHint, ordinal: Option<usize>) -> Result<Draft, ParseError> {
    let task_id = string_field(obj, "task_id");
    let trial = string_field(obj, "trial");
    let prefix = hint.id_prefix.clone().unwrap_or_else(|| "tau".into());
    let id = match string_field(obj, "id") {
        Some(id) => id,
        None => {
            let task = task_id.clone().unwrap_or_else(|| "?".into());
            let tail = trial.clone().or_else(|| ordinal.map(|i| format!("n{i}"))).unwrap_or_else(|| "0".into());
            format!("{prefix}:{task}:{tail}")
        }
    };
    let domain = string_field(obj, "domain")
        .or_else(|| hint.domain.clone())
        .unwrap_or_else(|| "unknown".into());
    let reward = parse_reward(obj.get("reward"))?;

    let mut meta = BTreeMap::new();
    if let Some(t) = task_id {
        meta.insert("task_id".into(), t);
    }
    if let Some(t) = trial {
        meta.insert("trial".into(), t);
    }
    if let Some(s) = &hint.source {
        meta.insert("source".into(), s.clone());
    }

    let traj = obj
        .get("traj")
        .or_else(|| obj.get("messages"))
        .and_then(Value::as_array)
        .ok_or_else(|| ParseError::SchemaViolation { message_index: None, message: "missing traj array".into() })?;

    let mut messages = Vec::with_capacity(traj.len());
    let mut dropped_system = 0usize;
    let mut saw_stop = false;
    for (pos, raw) in traj.iter().enumerate() {
        let schema = |m: &str| ParseError::SchemaViolation { message_index: Some(pos), message: m.into() };
        let m = raw.as_object().ok_or_else(|| schema("message must be an object"))?;
        let role = m.get("role").and_then(Value::as_str).ok_or_else(|| schema("missing role"))?;
        if role == "system" {
            dropped_system += 1;
            continue;
        }
        let role = parse_role(role, pos)?;
        let mut text = match m.get("content") {
            Some(Value::String(s)) => s.clone(),
            Some(Value::Null) | None if role != super::Role::User => String::new(),
            Some(other) if role == super::Role::Tool => other.to_string(),
            _ => return Err(schema("missing content")),
        };
        if role == super::Role::User && text.contains(STOP_TOKEN) {
            saw_stop = true;
            text = text.replace(STOP_TOKEN, "").trim().to_string();
        }

        let mut calls = Vec::new();
        if let Some(list) = m.get("tool_calls").filter(|v| !v.is_null()) {
            let list = list.as_array().ok_or_else(|| schema("tool_calls must be an array"))?;
            for c in list {
                let c = c.as_object().ok_or_else(|| schema("tool call must be an object"))?;
                let function = c.get("function").and_then(Value::as_object);
                let name = function
                    .and_then(|f| string_field(f, "name"))
                    .or_else(|| string_field(c, "name"))
                    .unwrap_or_default();
                let raw_args = function.and_then(|f| f.get("arguments")).or_else(|| c.get("arguments"));
                calls.push(DraftCall { call_id: string_field(c, "id"), tool_name: name, arguments: arguments(raw_args) });
            }
        }

        let observation = if role == super::Role::Tool {
            let payload = std::mem::take(&mut text);
            Some(DraftObservation {
                call_id: string_field(m, "tool_call_id"),
                tool_name: string_field(m, "name"),
                status: ObservationStatus::Unknown,
                payload,
            })
        } else {
            None
        };
        messages.push(DraftMessage { role, text, calls, observation });
    }
    if dropped_system > 0 {
        meta.insert("system_messages".into(), dropped_system.to_string());
    }
    if saw_stop {
        meta.insert("session_end".into(), "stop-token".into());
    }
    Ok(Draft { id, domain, reward, meta, messages })
}

/// τ-bench encodes arguments as a JSON string; decode it when possible.
fn arguments(raw: Option<&Value>) -> Map<String, Value> {
    let decoded = match raw {
        None | Some(Value::Null) => return Map::new(),
        Some(Value::String(s)) => serde_json::from_str::<Value>(s).unwrap_or_else(|_| Value::String(s.clone())),
        Some(other) => other.clone(),
    };
    match decoded {
        Value::Object(map) => map,
        other => {
            let mut map = Map::new();
            map.insert("_raw".into(), other);
            map
        }
    }
}

#[cfg(test)]
mod tests {
    use crate::trajectory::{parse_trajectory, ObservationStatus, Role, SourceFormat};

    const RESULT: &str = r#"{
      "task_id": 7, "reward": 1.0, "trial": 0,
      "traj": [
        {"role": "system", "content": "policy"},
        {"role": "user", "content": "I want to return an item"},
        {"role": "assistant", "content": null, "tool_calls": [
          {"id": "call_1", "type": "function", "function": {"name": "find_user_id_by_email", "arguments": "{\"email\": \"a@b.com\"}"}}]},
        {"role": "tool", "tool_call_id": "call_1", "name": "find_user_id_by_email", "content": "sara_1"},
        {"role": "assistant", "content": "Done."},
        {"role": "user", "content": "thanks ###STOP###"}
      ]
    }"#;

    #[test]
    fn tau_result_maps_to_trajectory() {
        let t = parse_trajectory(RESULT, SourceFormat::TauBenchV1).unwrap();
        assert_eq!(t.id, "tau:7:0");
        assert_eq!(t.reward, Some(1));
        assert_eq!(t.messages.len(), 5);
        assert_eq!(t.meta["system_messages"], "1");
        assert_eq!(t.meta["session_end"], "stop-token");
        assert_eq!(t.messages[4].text, "thanks");
        let s = t.invocation_stream();
        assert_eq!(s.len(), 1);
        assert_eq!(s[0].invocation.arguments["email"], "a@b.com");
        let (idx, obs) = s[0].observation.unwrap();
        assert_eq!(t.messages[idx].role, Role::Tool);
        assert_eq!(obs.status, ObservationStatus::Unknown);
        assert_eq!(obs.payload, "sara_1");
    }

    #[test]
    fn fractional_reward_rejected() {
        let raw = RESULT.replace("\"reward\": 1.0", "\"reward\": 0.5");
        assert!(parse_trajectory(&raw, SourceFormat::TauBenchV1).is_err());
    }
}
