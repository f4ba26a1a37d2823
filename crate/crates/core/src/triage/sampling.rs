use std::collections::{HashMap, HashSet};
use std::fmt;
use std::str::FromStr;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::{triage_score, Ranking, SignalReport, TriageConfig};
use crate::signals::Category;
use crate::trajectory::Trajectory;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Strategy {
    Random,
    Heuristic,
    Signal,
}

impl Strategy {
    pub const ALL: [Strategy; 3] = [Strategy::Random, Strategy::Heuristic, Strategy::Signal];

    pub fn as_str(self) -> &'static str {
        match self {
            Strategy::Random => "Random",
            Strategy::Heuristic => "Heuristic",
            Strategy::Signal => "Signal",
        }
    }
}

impl fmt::Display for Strategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Strategy {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Strategy::ALL
            .into_iter()
            .find(|st| st.as_str().eq_ignore_ascii_case(s))
            .ok_or_else(|| format!("unknown strategy {s:?} (expected random, heuristic or signal)"))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Stream {
    #[serde(rename = "failure-stream")]
    Failure,
    #[serde(rename = "exemplar-stream")]
    Exemplar,
    #[serde(rename = "n/a")]
    NotApplicable,
}

impl Stream {
    pub fn as_str(self) -> &'static str {
        match self {
            Stream::Failure => "failure-stream",
            Stream::Exemplar => "exemplar-stream",
            Stream::NotApplicable => "n/a",
        }
    }
}

impl fmt::Display for Stream {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleSet {
    pub strategy: Strategy,
    pub seed: u64,
    pub trajectory_ids: Vec<String>,
    /// Stream each id was drawn from, parallel to `trajectory_ids`.
    pub provenance: Vec<Stream>,
    /// Size of the subpool the sample was drawn from.
    pub qualifying: usize,
}

impl SampleSet {
    pub fn len(&self) -> usize {
        self.trajectory_ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.trajectory_ids.is_empty()
    }

    pub fn stream_count(&self, stream: Stream) -> usize {
        self.provenance.iter().filter(|s| **s == stream).count()
    }

    pub fn to_json_line(&self) -> String {
        serde_json::to_string(self).expect("sample serialization is infallible")
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SamplingError {
    #[error("pool too small: need {needed}, only {available} qualifying trajectories")]
    PoolTooSmall { needed: usize, available: usize },
    #[error("invalid sampling config: {0}")]
    InvalidConfig(String),
}

/// Seeded, order-independent hash of a trajectory id, used for tie-breaking.
pub fn tie_key(seed: u64, id: &str) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in id.as_bytes() {
        h ^= u64::from(*b);
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    let mut z = h ^ seed;
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Uniform sample without replacement. Candidates are sorted by id first so
/// that the result does not depend on pool file order.
fn uniform(mut ids: Vec<&str>, n: usize, seed: u64) -> Result<Vec<String>, SamplingError> {
    if ids.len() < n {
        return Err(SamplingError::PoolTooSmall { needed: n, available: ids.len() });
    }
    ids.sort_unstable();
    ids.dedup();
    if ids.len() < n {
        return Err(SamplingError::PoolTooSmall { needed: n, available: ids.len() });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Ok(rand::seq::index::sample(&mut rng, ids.len(), n).into_iter().map(|i| ids[i].to_string()).collect())
}

pub fn sample_random(pool: &[Trajectory], n: usize, seed: u64) -> Result<SampleSet, SamplingError> {
    let ids: Vec<&str> = pool.iter().map(|t| t.id.as_str()).collect();
    let qualifying = ids.len();
    let trajectory_ids = uniform(ids, n, seed)?;
    Ok(SampleSet { strategy: Strategy::Random, seed, provenance: vec![Stream::NotApplicable; n], trajectory_ids, qualifying })
}

/// Uniform sample from trajectories with at least
/// `cfg.heuristic_min_user_msgs` user messages.
pub fn sample_heuristic(pool: &[Trajectory], cfg: &TriageConfig) -> Result<SampleSet, SamplingError> {
    cfg.validate().map_err(SamplingError::InvalidConfig)?;
    let n = cfg.sample_size;
    let ids: Vec<&str> = pool
        .iter()
        .filter(|t| t.user_message_count() >= cfg.heuristic_min_user_msgs)
        .map(|t| t.id.as_str())
        .collect();
    let qualifying = ids.len();
    let trajectory_ids = uniform(ids, n, cfg.seed)?;
    Ok(SampleSet {
        strategy: Strategy::Heuristic,
        seed: cfg.seed,
        provenance: vec![Stream::NotApplicable; n],
        trajectory_ids,
        qualifying,
    })
}

const PROBLEM: [Category; 5] =
    [Category::Misalignment, Category::Stagnation, Category::Disengagement, Category::Failure, Category::Loop];

/// Fill one review budget from two ranked streams.
///
/// The exemplar stream holds trajectories with Satisfaction active and
/// Disengagement inactive; the failure stream holds trajectories with any
/// problem category active. `ceil(exemplar_fraction * n)` slots go to
/// exemplars, the rest to failures, and an underfilled stream is backfilled
/// from the other. Trajectories with a zero score are never selected.
pub fn sample_signal(pool: &[Trajectory], reports: &[SignalReport], cfg: &TriageConfig) -> Result<SampleSet, SamplingError> {
    cfg.validate().map_err(SamplingError::InvalidConfig)?;
    let n = cfg.sample_size;
    let by_id: HashMap<&str, &SignalReport> = reports.iter().map(|r| (r.trajectory_id.as_str(), r)).collect();

    let mut exemplar = Vec::new();
    let mut failure = Vec::new();
    let mut seen = HashSet::new();
    for t in pool {
        if !seen.insert(t.id.as_str()) {
            continue;
        }
        let Some(r) = by_id.get(t.id.as_str()) else { continue };
        let score = triage_score(r, cfg);
        if score <= 0.0 {
            continue;
        }
        let rank_score = match cfg.ranking {
            Ranking::Scored => score,
            Ranking::Flat => 1.0,
        };
        let entry = (rank_score, tie_key(cfg.seed, &t.id), t.id.as_str());
        if r.is_active(Category::Satisfaction) && !r.is_active(Category::Disengagement) {
            exemplar.push(entry);
        }
        if PROBLEM.iter().any(|c| r.is_active(*c)) {
            failure.push(entry);
        }
    }
    let rank = |v: &mut Vec<(f64, u64, &str)>| {
        v.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)).then(a.2.cmp(b.2)));
    };
    rank(&mut exemplar);
    rank(&mut failure);

    let qualifying = exemplar.iter().chain(failure.iter()).map(|e| e.2).collect::<HashSet<_>>().len();
    if qualifying < n {
        return Err(SamplingError::PoolTooSmall { needed: n, available: qualifying });
    }

    let exemplar_quota = ((cfg.exemplar_fraction * n as f64) - 1e-9).ceil().max(0.0) as usize;
    let mut chosen: Vec<(String, Stream)> = Vec::with_capacity(n);
    let mut taken: HashSet<String> = HashSet::new();
    let mut take = |stream: &[(f64, u64, &str)], tag: Stream, limit: usize, chosen: &mut Vec<(String, Stream)>| {
        for (_, _, id) in stream {
            if chosen.len() >= limit {
                break;
            }
            if !taken.contains(*id) {
                taken.insert(id.to_string());
                chosen.push((id.to_string(), tag));
            }
        }
    };
    take(&exemplar, Stream::Exemplar, exemplar_quota.min(n), &mut chosen);
    take(&failure, Stream::Failure, n, &mut chosen);
    take(&exemplar, Stream::Exemplar, n, &mut chosen);

    let (trajectory_ids, provenance) = chosen.into_iter().unzip();
    Ok(SampleSet { strategy: Strategy::Signal, seed: cfg.seed, trajectory_ids, provenance, qualifying })
}
