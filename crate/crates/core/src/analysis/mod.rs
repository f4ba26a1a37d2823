//! Study report: informativeness rates, exact tests, standardization,
//! efficiency, agreement and main-reason distribution, computed from a
//! label export.

mod render;

use std::collections::{BTreeMap, BTreeSet, HashMap};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::annotation::{Informative, LabelExport, MainReason};
use crate::stats::{
    annotation_efficiency, clopper_pearson, fisher_exact_two_sided, fleiss_kappa, gwet_ac1, majority_vote,
    prevalence_bias_indices, standardized_rate, Agreement, BinomialCount, Efficiency, RatingMatrix, StatsError,
    Stratum, StratumRates,
};
use crate::triage::Strategy;

pub use render::{check_against, render_report, render_tables, Mismatch};

pub const SIGNIFICANCE: f64 = 0.05;

#[derive(Debug, Error, PartialEq)]
pub enum AnalysisError {
    #[error("the export lists no samples")]
    NoSamples,
    #[error("strategy {0} appears in more than one sample")]
    DuplicateStrategy(Strategy),
    #[error("trajectory {0:?} carries conflicting reward or domain across records")]
    InconsistentRecords(String),
    #[error(transparent)]
    Stats(#[from] StatsError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RewardStratum {
    Overall,
    Failed,
    Successful,
}

impl RewardStratum {
    pub const ALL: [RewardStratum; 3] = [RewardStratum::Overall, RewardStratum::Failed, RewardStratum::Successful];

    fn admits(self, reward: Option<i64>) -> bool {
        match self {
            RewardStratum::Overall => true,
            RewardStratum::Failed => reward == Some(0),
            RewardStratum::Successful => reward == Some(1),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RateCell {
    pub k: u64,
    pub n: u64,
    pub rate: Option<f64>,
    pub ci: Option<[f64; 2]>,
    /// Significantly higher than the Random sample in the same stratum.
    pub above_random: bool,
    /// Significantly higher than the Heuristic sample in the same stratum.
    pub above_heuristic: bool,
}

impl RateCell {
    fn new(c: BinomialCount, alpha: f64) -> Result<Self, StatsError> {
        let (rate, ci) = if c.n == 0 {
            (None, None)
        } else {
            let (lo, hi) = clopper_pearson(c, alpha)?;
            (Some(c.rate()), Some([lo, hi]))
        };
        Ok(RateCell { k: c.k, n: c.n, rate, ci, above_random: false, above_heuristic: false })
    }

    pub fn count(&self) -> BinomialCount {
        BinomialCount { k: self.k, n: self.n }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StrategyResult {
    pub overall: RateCell,
    pub failed: RateCell,
    pub successful: RateCell,
    pub standardized_rate: Option<f64>,
    pub labels_per_informative: Option<f64>,
    /// Main reason of each majority-informative item.
    pub reasons: BTreeMap<MainReason, usize>,
}

impl StrategyResult {
    pub fn cell(&self, s: RewardStratum) -> &RateCell {
        match s {
            RewardStratum::Overall => &self.overall,
            RewardStratum::Failed => &self.failed,
            RewardStratum::Successful => &self.successful,
        }
    }

    fn cell_mut(&mut self, s: RewardStratum) -> &mut RateCell {
        match s {
            RewardStratum::Overall => &mut self.overall,
            RewardStratum::Failed => &mut self.failed,
            RewardStratum::Successful => &mut self.successful,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Comparison {
    pub stratum: RewardStratum,
    pub strategy: Strategy,
    pub baseline: Strategy,
    pub p_value: f64,
}

/// Reward mix of the Random sample, used as standardization weights.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ReferenceMix {
    pub failed: f64,
    pub successful: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BinaryAgreement {
    pub items: usize,
    pub ac1: Agreement,
    pub kappa: Agreement,
    pub prevalence_index: f64,
    pub bias_index: f64,
    pub rater_yes_rates: BTreeMap<String, f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReasonAgreement {
    /// Items every rater judged informative.
    pub items: usize,
    pub ac1: Agreement,
    pub kappa: Agreement,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnalysisReport {
    pub alpha: f64,
    pub annotators: Vec<String>,
    pub items: usize,
    pub labels: usize,
    pub strategies: BTreeMap<Strategy, StrategyResult>,
    pub comparisons: Vec<Comparison>,
    pub reference_mix: Option<ReferenceMix>,
    pub efficiency: Option<Efficiency>,
    pub agreement: BinaryAgreement,
    pub reason_agreement: Option<ReasonAgreement>,
    pub domains: BTreeMap<String, BTreeMap<Strategy, RateCell>>,
}

struct ItemLabels {
    reward: Option<i64>,
    domain: String,
    by_rater: HashMap<String, (Informative, MainReason)>,
}

/// Plurality main reason among the raters who said YES; ties go to the
/// reason listed first in [`MainReason::ALL`].
pub fn plurality_reason(labels: &[(Informative, MainReason)]) -> Option<MainReason> {
    let mut counts = [0usize; 6];
    for (inf, r) in labels {
        if inf.is_yes() {
            counts[r.index()] += 1;
        }
    }
    let best = *counts.iter().max()?;
    if best == 0 {
        return None;
    }
    MainReason::ALL.into_iter().find(|r| counts[r.index()] == best)
}

pub fn compute_report(export: &LabelExport, alpha: f64) -> Result<AnalysisReport, AnalysisError> {
    let samples = &export.header.samples;
    if samples.is_empty() {
        return Err(AnalysisError::NoSamples);
    }
    let mut seen = BTreeSet::new();
    for s in samples {
        if !seen.insert(s.strategy) {
            return Err(AnalysisError::DuplicateStrategy(s.strategy));
        }
    }
    let raters = &export.header.annotators;
    if raters.len() % 2 == 0 {
        return Err(StatsError::EvenRaterCount(raters.len()).into());
    }

    let mut items: HashMap<&str, ItemLabels> = HashMap::new();
    for r in &export.records {
        let entry = items.entry(r.trajectory_id.as_str()).or_insert_with(|| ItemLabels {
            reward: r.reward,
            domain: r.domain.clone(),
            by_rater: HashMap::new(),
        });
        if entry.reward != r.reward || entry.domain != r.domain {
            return Err(AnalysisError::InconsistentRecords(r.trajectory_id.clone()));
        }
        entry.by_rater.insert(r.annotator_id.clone(), (r.informative, r.main_reason));
    }

    let sampled: BTreeSet<&str> = samples.iter().flat_map(|s| s.trajectory_ids.iter().map(|x| x.as_str())).collect();
    let missing: Vec<String> = sampled
        .iter()
        .filter(|id| items.get(*id).is_none_or(|it| raters.iter().any(|a| !it.by_rater.contains_key(a))))
        .map(|id| id.to_string())
        .collect();
    if !missing.is_empty() {
        return Err(StatsError::MissingVotes(missing).into());
    }

    let rater_labels = |id: &str| -> Vec<(Informative, MainReason)> {
        let it = &items[id];
        raters.iter().map(|a| it.by_rater[a]).collect()
    };
    let mut votes: HashMap<&str, bool> = HashMap::new();
    for id in &sampled {
        let yes: Vec<bool> = rater_labels(id).iter().map(|(i, _)| i.is_yes()).collect();
        votes.insert(id, majority_vote(&yes)?);
    }

    let count = |ids: &[String], pred: &dyn Fn(&ItemLabels) -> bool| {
        let sel: Vec<&str> = ids.iter().map(|s| s.as_str()).filter(|id| pred(&items[id])).collect();
        let k = sel.iter().filter(|id| votes[*id]).count() as u64;
        BinomialCount { k, n: sel.len() as u64 }
    };

    let mut strategies = BTreeMap::new();
    for s in samples {
        let cell = |st: RewardStratum| RateCell::new(count(&s.trajectory_ids, &|it| st.admits(it.reward)), alpha);
        let mut reasons: BTreeMap<MainReason, usize> = MainReason::ALL.into_iter().map(|r| (r, 0)).collect();
        for id in &s.trajectory_ids {
            if votes[id.as_str()] {
                if let Some(r) = plurality_reason(&rater_labels(id)) {
                    *reasons.get_mut(&r).expect("all reasons present") += 1;
                }
            }
        }
        strategies.insert(
            s.strategy,
            StrategyResult {
                overall: cell(RewardStratum::Overall)?,
                failed: cell(RewardStratum::Failed)?,
                successful: cell(RewardStratum::Successful)?,
                standardized_rate: None,
                labels_per_informative: None,
                reasons,
            },
        );
    }

    let mut comparisons = Vec::new();
    let pairs = [
        (Strategy::Signal, Strategy::Random),
        (Strategy::Signal, Strategy::Heuristic),
        (Strategy::Heuristic, Strategy::Random),
    ];
    for stratum in RewardStratum::ALL {
        for (a, b) in pairs {
            let (Some(ra), Some(rb)) = (strategies.get(&a), strategies.get(&b)) else { continue };
            let (ca, cb) = (ra.cell(stratum).count(), rb.cell(stratum).count());
            let p_value = match fisher_exact_two_sided(ca.k, ca.n - ca.k, cb.k, cb.n - cb.k) {
                Ok(p) => p,
                Err(StatsError::DegenerateTable) => continue,
                Err(e) => return Err(e.into()),
            };
            let higher = ca.n > 0 && cb.n > 0 && ca.rate() > cb.rate();
            if p_value < SIGNIFICANCE && higher {
                let cell = strategies.get_mut(&a).expect("present").cell_mut(stratum);
                match b {
                    Strategy::Random => cell.above_random = true,
                    Strategy::Heuristic => cell.above_heuristic = true,
                    Strategy::Signal => {}
                }
            }
            comparisons.push(Comparison { stratum, strategy: a, baseline: b, p_value });
        }
    }

    let reference_mix = strategies.get(&Strategy::Random).and_then(|r| {
        let (f, s) = (r.failed.n as f64, r.successful.n as f64);
        (f + s > 0.0).then(|| ReferenceMix { failed: f / (f + s), successful: s / (f + s) })
    });
    if let Some(mix) = reference_mix {
        for res in strategies.values_mut() {
            let rates = StratumRates {
                strata: vec![
                    Stratum { label: "failed".into(), count: res.failed.count(), weight: mix.failed },
                    Stratum { label: "successful".into(), count: res.successful.count(), weight: mix.successful },
                ],
            };
            res.standardized_rate = standardized_rate(&rates).ok();
        }
    }

    let overall: BTreeMap<String, BinomialCount> =
        strategies.iter().map(|(s, r)| (s.to_string(), r.overall.count())).collect();
    let efficiency = annotation_efficiency(&overall).ok();
    if let Some(e) = &efficiency {
        for (s, r) in strategies.iter_mut() {
            r.labels_per_informative = e.labels_per_informative.get(s.as_str()).copied();
        }
    }

    let item_ids: Vec<&str> = sampled.iter().copied().collect();
    let binary_rows: Vec<Vec<bool>> =
        item_ids.iter().map(|id| rater_labels(id).iter().map(|(i, _)| i.is_yes()).collect()).collect();
    let binary = RatingMatrix::binary(&binary_rows)?;
    let pb = prevalence_bias_indices(&binary)?;
    let rater_yes_rates = raters
        .iter()
        .enumerate()
        .map(|(j, a)| (a.clone(), binary_rows.iter().filter(|row| row[j]).count() as f64 / binary_rows.len() as f64))
        .collect();
    let agreement = BinaryAgreement {
        items: item_ids.len(),
        ac1: gwet_ac1(&binary),
        kappa: fleiss_kappa(&binary),
        prevalence_index: pb.prevalence,
        bias_index: pb.bias,
        rater_yes_rates,
    };

    let reason_rows: Vec<Vec<usize>> = item_ids
        .iter()
        .map(|id| rater_labels(id))
        .filter(|ls| ls.iter().all(|(i, _)| i.is_yes()))
        .map(|ls| ls.iter().map(|(_, r)| r.index()).collect())
        .collect();
    let reason_agreement = if reason_rows.is_empty() {
        None
    } else {
        let m = RatingMatrix::new(reason_rows, MainReason::ALL.len())?;
        Some(ReasonAgreement { items: m.items(), ac1: gwet_ac1(&m), kappa: fleiss_kappa(&m) })
    };

    let domain_names: BTreeSet<&str> = item_ids.iter().map(|id| items[id].domain.as_str()).collect();
    let mut domains = BTreeMap::new();
    for d in domain_names {
        let mut per = BTreeMap::new();
        for s in samples {
            per.insert(s.strategy, RateCell::new(count(&s.trajectory_ids, &|it| it.domain == d), alpha)?);
        }
        domains.insert(d.to_string(), per);
    }

    Ok(AnalysisReport {
        alpha,
        annotators: raters.clone(),
        items: item_ids.len(),
        labels: export.records.len(),
        strategies,
        comparisons,
        reference_mix,
        efficiency,
        agreement,
        reason_agreement,
        domains,
    })
}
