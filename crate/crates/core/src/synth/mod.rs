//! Deterministic synthetic pools: a planted-pattern pool with a manifest of
//! what was planted where, a study pool shaped for sampling dry runs, and a
//! label script that drives a queue to chosen outcome counts.

mod banks;
mod labels;

use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::signals::{Category, REGISTRY};
use crate::trajectory::{Message, ObservationStatus, Role, ToolInvocation, ToolObservation, Trajectory};

pub use banks::{ASSISTANT_LINES, USER_LINES};
pub use labels::{script_labels, StrategyTargets};

/// How tool outcomes are encoded. Canonical sources carry a status; the
/// τ-bench style does not, so errors are spelled out in the payload.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Dialect {
    Canonical,
    TauBench,
}

struct Builder {
    t: Trajectory,
    next_call: usize,
    dialect: Dialect,
}

impl Builder {
    fn new(id: String, domain: &str, reward: i64, dialect: Dialect) -> Self {
        Builder {
            t: Trajectory {
                id,
                domain: domain.to_string(),
                reward: Some(reward),
                meta: BTreeMap::new(),
                messages: Vec::new(),
            },
            next_call: 0,
            dialect,
        }
    }

    fn push(&mut self, role: Role, text: &str, tool_calls: Vec<ToolInvocation>, observation: Option<ToolObservation>) {
        let index = self.t.messages.len();
        self.t.messages.push(Message { index, role, text: text.to_string(), tool_calls, observation });
    }

    fn user(&mut self, text: &str) {
        self.push(Role::User, text, vec![], None);
    }

    fn assistant(&mut self, text: &str) {
        self.push(Role::Assistant, text, vec![], None);
    }

    fn call(&mut self, tool: &str, args: Value, outcome: Outcome, payload: &str) {
        self.next_call += 1;
        let call_id = format!("call_{:03}", self.next_call);
        let arguments = args.as_object().cloned().unwrap_or_default();
        self.push(
            Role::Assistant,
            "",
            vec![ToolInvocation { call_id: call_id.clone(), tool_name: tool.to_string(), arguments }],
            None,
        );
        let (status, payload) = match (self.dialect, outcome) {
            (Dialect::TauBench, Outcome::Error) => (ObservationStatus::Unknown, format!("Error: {payload}")),
            (Dialect::TauBench, _) => (ObservationStatus::Unknown, payload.to_string()),
            (Dialect::Canonical, Outcome::Error) => (ObservationStatus::Error, payload.to_string()),
            (Dialect::Canonical, Outcome::Ok) => (ObservationStatus::Ok, payload.to_string()),
        };
        self.push(Role::Tool, "", vec![], Some(ToolObservation { call_id, status, payload }));
    }

    fn finish(self) -> Trajectory {
        self.t
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Outcome {
    Ok,
    Error,
}

/// Per-trajectory draw of distinct bank lines, so no sentence repeats by
/// accident.
struct Lines {
    users: Vec<&'static str>,
    assistants: Vec<&'static str>,
}

impl Lines {
    fn new(rng: &mut ChaCha8Rng) -> Self {
        let mut users = USER_LINES.to_vec();
        let mut assistants = ASSISTANT_LINES.to_vec();
        users.shuffle(rng);
        assistants.shuffle(rng);
        Lines { users, assistants }
    }

    fn user(&mut self) -> &'static str {
        self.users.pop().expect("user bank is large enough")
    }

    fn assistant(&mut self) -> &'static str {
        self.assistants.pop().expect("assistant bank is large enough")
    }
}

/// A benign tool call drawn from a fixed catalogue; `slot` selects the tool so
/// that calls within one trajectory never repeat.
fn clean_call(b: &mut Builder, rng: &mut ChaCha8Rng, slot: usize) {
    let n: u32 = rng.random_range(1000..10000);
    let m: u32 = rng.random_range(10..100);
    let k: u32 = rng.random_range(10..100);
    match slot % 6 {
        0 => b.call(
            "get_order_details",
            json!({"order_id": format!("#W{n}")}),
            Outcome::Ok,
            &json!({"order_id": format!("#W{n}"), "status": "processed", "item_count": m % 4 + 1}).to_string(),
        ),
        1 => b.call(
            "get_user_details",
            json!({"user_id": format!("mia_garcia_{n}")}),
            Outcome::Ok,
            &json!({"name": "Mia Garcia", "membership": "gold", "orders": [format!("#W{n}")]}).to_string(),
        ),
        2 => b.call(
            "search_direct_flight",
            json!({"origin": "JFK", "destination": "SEA", "date": format!("2024-05-{:02}", m % 28 + 1)}),
            Outcome::Ok,
            &json!([{"flight_number": format!("HAT{n}"), "price": 120 + 5 * (m % 20)}]).to_string(),
        ),
        3 => b.call(
            "get_reservation_details",
            json!({"reservation_id": format!("ZF{n}")}),
            Outcome::Ok,
            &json!({"reservation_id": format!("ZF{n}"), "cabin": "economy", "passengers": m % 3 + 1}).to_string(),
        ),
        4 => b.call(
            "get_product_details",
            json!({"product_id": format!("P{n}")}),
            Outcome::Ok,
            &json!({"name": "desk lamp", "variants": m % 5 + 1}).to_string(),
        ),
        _ => b.call("calculate", json!({"expression": format!("{m} + {k}")}), Outcome::Ok, &(m + k).to_string()),
    }
}

/// `users` clean user/assistant exchanges with `calls` benign tool calls
/// placed before some of the assistant replies.
fn clean_turns(b: &mut Builder, lines: &mut Lines, rng: &mut ChaCha8Rng, users: usize, calls: usize) {
    let mut call_at: Vec<bool> = (0..users).map(|i| i < calls).collect();
    call_at.shuffle(rng);
    let first_slot: usize = rng.random_range(0..6);
    let mut slot = 0;
    for has_call in call_at {
        b.user(lines.user());
        if has_call {
            clean_call(b, rng, first_slot + slot);
            slot += 1;
        }
        b.assistant(lines.assistant());
    }
}

/// One planted pattern per registered (category, subkind).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct PlantKind(pub usize);

impl PlantKind {
    pub fn all() -> impl Iterator<Item = PlantKind> {
        (0..REGISTRY.len()).map(PlantKind)
    }

    pub fn category(self) -> Category {
        REGISTRY[self.0].0
    }

    pub fn subkind(self) -> &'static str {
        REGISTRY[self.0].1
    }

    fn find(category: Category, subkind: &str) -> PlantKind {
        PlantKind(REGISTRY.iter().position(|(c, s)| *c == category && *s == subkind).expect("registered"))
    }

    /// User turns the plant itself contributes.
    fn users(self) -> usize {
        match (self.category(), self.subkind()) {
            (Category::Misalignment, "rephrase-similarity") => 2,
            (Category::Stagnation, "near-duplicate-assistant") => 2,
            (Category::Stagnation, "prolonged") => PROLONGED_USERS,
            (Category::Disengagement, "abandonment") => 0,
            _ => 1,
        }
    }
}

const PROLONGED_USERS: usize = 25;

const EXHAUSTION_PAYLOADS: [(&str, &str); 5] = [
    ("rate-limit", "429 Too Many Requests"),
    ("quota", "Quota exceeded for this account"),
    ("outage", "503 Service Unavailable"),
    ("context-cap", "Request exceeds the maximum context length"),
    ("malformed", "Upstream returned a malformed response body"),
];

/// Write `base` clean exchanges plus one instance of `kind`.
fn plant(kind: PlantKind, b: &mut Builder, lines: &mut Lines, rng: &mut ChaCha8Rng, base: usize) {
    // Loop plants get no extra calls so their call stream is exactly the pattern.
    let calls = if kind.category() == Category::Loop { 0 } else { rng.random_range(0..=base.min(2)) };
    let n: u32 = rng.random_range(1000..10000);
    match (kind.category(), kind.subkind()) {
        (Category::Satisfaction, "phrase-cue") => {
            // Early in the conversation, so it is not a closing remark.
            b.user("Perfect, I have one more question");
            b.assistant(lines.assistant());
            clean_turns(b, lines, rng, base.max(3), calls);
        }
        (Category::Stagnation, "prolonged") => clean_turns(b, lines, rng, PROLONGED_USERS, 2),
        (category, subkind) => {
            clean_turns(b, lines, rng, base, calls);
            match (category, subkind) {
                (Category::Misalignment, "phrase-cue") => {
                    b.user("No I said the other address");
                    b.assistant(lines.assistant());
                }
                (Category::Misalignment, "rephrase-similarity") => {
                    let u = lines.user();
                    b.user(u);
                    b.assistant(lines.assistant());
                    b.user(&format!("{u} please"));
                    b.assistant(lines.assistant());
                }
                (Category::Stagnation, "near-duplicate-assistant") => {
                    let a = lines.assistant();
                    b.user(lines.user());
                    b.assistant(a);
                    b.user(lines.user());
                    b.assistant(a);
                }
                (Category::Disengagement, "phrase-cue") => {
                    b.user("I want to talk to a human about this");
                    b.assistant(lines.assistant());
                }
                (Category::Disengagement, "abandonment") => {
                    b.t.meta.insert("session_end".into(), "abandoned".into());
                }
                (Category::Satisfaction, "closing") => {
                    b.user("Thank you, that is all for today");
                    b.assistant("You are welcome, have a good day");
                }
                (Category::Failure, subkind) => {
                    b.user(lines.user());
                    if subkind == "error" {
                        b.call("update_item", json!({"item_id": format!("I{n}")}), Outcome::Error, "invalid value for field item_id");
                    } else {
                        b.call("find_orders", json!({"keyword": "lamp"}), Outcome::Ok, "[]");
                    }
                    b.assistant(lines.assistant());
                }
                (Category::Loop, subkind) => {
                    b.user(lines.user());
                    let order = |k: u32| json!({"order_id": format!("#W{}", n + k)});
                    let payload = |k: u32| json!({"order_id": format!("#W{}", n + k), "status": "pending"}).to_string();
                    match subkind {
                        "identical-retry" => {
                            for _ in 0..3 {
                                b.call("get_order_details", order(0), Outcome::Ok, &payload(0));
                            }
                        }
                        "parameter-drift" => {
                            for k in 0..3 {
                                b.call("get_order_details", order(k), Outcome::Ok, &payload(k));
                            }
                        }
                        _ => {
                            for _ in 0..2 {
                                b.call("get_order_details", order(0), Outcome::Ok, &payload(0));
                                b.call("get_user_details", json!({"user_id": "mia_garcia"}), Outcome::Ok, r#"{"name": "Mia Garcia"}"#);
                            }
                        }
                    }
                    b.assistant(lines.assistant());
                }
                (Category::Exhaustion, subkind) => {
                    b.user(lines.user());
                    let payload = EXHAUSTION_PAYLOADS.iter().find(|(s, _)| *s == subkind).expect("listed").1;
                    b.call("search_direct_flight", json!({"origin": "JFK", "destination": "SEA"}), Outcome::Error, payload);
                    b.assistant(lines.assistant());
                }
                _ => unreachable!("every registered kind is handled"),
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PlantedPattern {
    pub trajectory_id: String,
    pub category: Category,
    pub subkind: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlantedManifest {
    pub seed: u64,
    pub planted: Vec<PlantedPattern>,
    /// Trajectories built only from clean material.
    pub clean: Vec<String>,
}

pub const PLANTED_POOL_SIZE: usize = 500;
pub const CLEAN_COUNT: usize = 100;

const DOMAINS: [&str; 2] = ["airline", "retail"];

/// 400 trajectories with exactly one planted pattern each (kinds in rotation)
/// and 100 clean ones, shuffled together.
pub fn planted_pool(seed: u64) -> (Vec<Trajectory>, PlantedManifest) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let kinds: Vec<PlantKind> = PlantKind::all().collect();
    let mut roles: Vec<Option<PlantKind>> =
        (0..PLANTED_POOL_SIZE - CLEAN_COUNT).map(|i| Some(kinds[i % kinds.len()])).collect();
    roles.extend(std::iter::repeat_n(None, CLEAN_COUNT));
    roles.shuffle(&mut rng);

    let mut pool = Vec::with_capacity(PLANTED_POOL_SIZE);
    let mut manifest = PlantedManifest { seed, planted: Vec::new(), clean: Vec::new() };
    for (i, role) in roles.into_iter().enumerate() {
        let id = format!("syn-{i:04}");
        let mut b = Builder::new(id.clone(), DOMAINS[i % 2], rng.random_range(0..=1), Dialect::Canonical);
        let mut lines = Lines::new(&mut rng);
        let base = rng.random_range(2..=4);
        match role {
            Some(kind) => {
                plant(kind, &mut b, &mut lines, &mut rng, base);
                manifest.planted.push(PlantedPattern {
                    trajectory_id: id,
                    category: kind.category(),
                    subkind: kind.subkind().to_string(),
                });
            }
            None => {
                let calls = rng.random_range(0..=2);
                clean_turns(&mut b, &mut lines, &mut rng, base, calls);
                manifest.clean.push(id);
            }
        }
        pool.push(b.finish());
    }
    (pool, manifest)
}

/// Which part of the study pool a trajectory was built for.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Cohort {
    /// Long (10 to 12 user turns), no signals.
    Long,
    /// Short with one problem signal.
    Problem,
    /// Short with a closing thank-you and nothing else.
    Exemplar,
    /// Short and clean.
    Plain,
}

pub const STUDY_POOL_SIZE: usize = 500;

/// (cohort, count, failed count)
pub const STUDY_COHORTS: [(Cohort, usize, usize); 4] =
    [(Cohort::Long, 100, 70), (Cohort::Problem, 80, 52), (Cohort::Exemplar, 20, 0), (Cohort::Plain, 300, 63)];

/// A 500-trajectory pool in τ-bench style for sampling dry runs. The long
/// cohort is exactly the heuristic's qualifying set and the problem plus
/// exemplar cohorts are exactly the signal sampler's qualifying set, each of
/// size 100. 37% of the pool failed.
pub fn study_pool(seed: u64) -> Vec<(Trajectory, Cohort)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut roles: Vec<(Cohort, i64)> = Vec::new();
    for (cohort, count, failed) in STUDY_COHORTS {
        roles.extend((0..count).map(|i| (cohort, if i < failed { 0 } else { 1 })));
    }
    roles.shuffle(&mut rng);

    let problem_kinds = [
        PlantKind::find(Category::Misalignment, "phrase-cue"),
        PlantKind::find(Category::Misalignment, "rephrase-similarity"),
        PlantKind::find(Category::Stagnation, "near-duplicate-assistant"),
        PlantKind::find(Category::Disengagement, "phrase-cue"),
        PlantKind::find(Category::Failure, "error"),
        PlantKind::find(Category::Failure, "empty-result"),
        PlantKind::find(Category::Loop, "identical-retry"),
        PlantKind::find(Category::Loop, "parameter-drift"),
        PlantKind::find(Category::Loop, "multi-tool-cycle"),
    ];
    let closing = PlantKind::find(Category::Satisfaction, "closing");

    let mut out = Vec::with_capacity(STUDY_POOL_SIZE);
    let mut problems = 0usize;
    for (task, (cohort, reward)) in roles.into_iter().enumerate() {
        let domain = DOMAINS[rng.random_range(0..2)];
        let mut b = Builder::new(format!("tau:{task}:0"), domain, reward, Dialect::TauBench);
        b.t.meta.insert("task_id".into(), task.to_string());
        b.t.meta.insert("trial".into(), "0".into());
        let mut lines = Lines::new(&mut rng);
        match cohort {
            Cohort::Long => {
                let users = rng.random_range(10..=12);
                let calls = rng.random_range(1..=3);
                clean_turns(&mut b, &mut lines, &mut rng, users, calls);
            }
            Cohort::Plain => {
                let users = rng.random_range(6..=9);
                let calls = rng.random_range(0..=2);
                clean_turns(&mut b, &mut lines, &mut rng, users, calls);
            }
            Cohort::Problem | Cohort::Exemplar => {
                let kind = if cohort == Cohort::Exemplar {
                    closing
                } else {
                    problems += 1;
                    problem_kinds[problems % problem_kinds.len()]
                };
                let total = rng.random_range(6..=9);
                plant(kind, &mut b, &mut lines, &mut rng, total - kind.users());
            }
        }
        out.push((b.finish(), cohort));
    }
    out
}

/// τ-bench result object for a trajectory: OpenAI-style `traj`, arguments
/// as JSON strings, tool messages linked by `tool_call_id`.
pub fn to_tau_json(t: &Trajectory) -> Value {
    let mut traj = vec![json!({"role": "system", "content": "You are a customer service agent."})];
    let last_user = t.messages.iter().rposition(|m| m.role == Role::User);
    for (pos, m) in t.messages.iter().enumerate() {
        let v = match m.role {
            Role::User => {
                let text = if Some(pos) == last_user && t.meta.get("session_end").is_none() {
                    format!("{} ###STOP###", m.text)
                } else {
                    m.text.clone()
                };
                json!({"role": "user", "content": text})
            }
            Role::Assistant if !m.tool_calls.is_empty() => json!({
                "role": "assistant",
                "content": Value::Null,
                "tool_calls": m.tool_calls.iter().map(|c| json!({
                    "id": c.call_id,
                    "type": "function",
                    "function": {"name": c.tool_name, "arguments": Value::Object(c.arguments.clone()).to_string()},
                })).collect::<Vec<_>>(),
            }),
            Role::Assistant => json!({"role": "assistant", "content": m.text}),
            Role::Tool => {
                let obs = m.observation.as_ref().expect("tool messages carry observations");
                let name = t
                    .messages
                    .iter()
                    .flat_map(|x| &x.tool_calls)
                    .find(|c| c.call_id == obs.call_id)
                    .map(|c| c.tool_name.clone())
                    .unwrap_or_default();
                json!({"role": "tool", "tool_call_id": obs.call_id, "name": name, "content": obs.payload})
            }
        };
        traj.push(v);
    }
    json!({
        "task_id": t.meta.get("task_id").and_then(|s| s.parse::<u64>().ok()),
        "trial": t.meta.get("trial").and_then(|s| s.parse::<u64>().ok()),
        "domain": t.domain,
        "reward": t.reward.map(|r| r as f64),
        "info": {},
        "traj": traj,
    })
}
