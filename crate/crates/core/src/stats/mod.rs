//! Exact binomial intervals, Fisher's exact test, agreement coefficients,
//! stratified standardization and labeling efficiency.

mod agreement;

use std::collections::{BTreeMap, HashMap};

use serde::{Deserialize, Serialize};
use statrs::function::beta::beta_reg;
use statrs::function::factorial::ln_factorial;
use thiserror::Error;

pub use agreement::{fleiss_kappa, gwet_ac1, prevalence_bias_indices, Agreement, PrevalenceBias, RatingMatrix};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum StatsError {
    #[error("alpha must be in (0, 1), got {0}")]
    InvalidAlpha(f64),
    #[error("invalid count: {k} successes of {n} trials")]
    InvalidCount { k: u64, n: u64 },
    #[error("degenerate 2x2 table: a row or column margin is zero")]
    DegenerateTable,
    #[error("majority vote needs an odd number of raters, got {0}")]
    EvenRaterCount(usize),
    #[error("no votes for {} sampled item(s): {}", .0.len(), .0.join(", "))]
    MissingVotes(Vec<String>),
    #[error("stratum weights sum to {0}, expected 1")]
    WeightsDontSumToOne(f64),
    #[error("stratum {0:?} has positive weight but no trials")]
    EmptyStratum(String),
    #[error("no informative items for {0}; labels-per-informative is undefined")]
    ZeroInformative(String),
    #[error("invalid rating matrix: {0}")]
    InvalidMatrix(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct BinomialCount {
    pub k: u64,
    pub n: u64,
}

impl BinomialCount {
    pub fn new(k: u64, n: u64) -> Result<Self, StatsError> {
        if k > n {
            return Err(StatsError::InvalidCount { k, n });
        }
        Ok(BinomialCount { k, n })
    }

    /// k/n, or NaN for an empty count.
    pub fn rate(&self) -> f64 {
        if self.n == 0 {
            f64::NAN
        } else {
            self.k as f64 / self.n as f64
        }
    }
}

/// Smallest x in [0, 1] with I_x(a, b) >= p, by bisection on the
/// regularized incomplete beta function.
fn beta_quantile(p: f64, a: f64, b: f64) -> f64 {
    let (mut lo, mut hi) = (0.0_f64, 1.0_f64);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if beta_reg(a, b, mid) < p {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Exact (Clopper–Pearson) two-sided interval for a binomial proportion.
pub fn clopper_pearson(c: BinomialCount, alpha: f64) -> Result<(f64, f64), StatsError> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(StatsError::InvalidAlpha(alpha));
    }
    if c.k > c.n || c.n == 0 {
        return Err(StatsError::InvalidCount { k: c.k, n: c.n });
    }
    let (k, n) = (c.k as f64, c.n as f64);
    let lo = if c.k == 0 { 0.0 } else { beta_quantile(alpha / 2.0, k, n - k + 1.0) };
    let hi = if c.k == c.n { 1.0 } else { beta_quantile(1.0 - alpha / 2.0, k + 1.0, n - k) };
    let p = c.rate();
    Ok((lo.min(p), hi.max(p)))
}

const FISHER_REL_TOL: f64 = 1e-7;

/// Two-sided Fisher exact test on [[a, b], [c, d]]: the total probability
/// of all tables with the observed margins that are no more likely than the
/// observed one.
pub fn fisher_exact_two_sided(a: u64, b: u64, c: u64, d: u64) -> Result<f64, StatsError> {
    let (r1, r2, c1) = (a + b, c + d, a + c);
    let c2 = b + d;
    if r1 == 0 || r2 == 0 || c1 == 0 || c2 == 0 {
        return Err(StatsError::DegenerateTable);
    }
    let n = r1 + r2;
    let ln_const = ln_factorial(r1) + ln_factorial(r2) + ln_factorial(c1) + ln_factorial(c2) - ln_factorial(n);
    let ln_p = |x: u64| {
        ln_const - ln_factorial(x) - ln_factorial(r1 - x) - ln_factorial(c1 - x) - ln_factorial(r2 + x - c1)
    };
    let lo = c1.saturating_sub(r2);
    let hi = r1.min(c1);
    let observed = ln_p(a);
    let threshold = observed + FISHER_REL_TOL.ln_1p();
    let mut p = 0.0;
    for x in lo..=hi {
        let lp = ln_p(x);
        if lp <= threshold {
            p += lp.exp();
        }
    }
    Ok(p.clamp(f64::MIN_POSITIVE, 1.0))
}

/// YES iff at least ceil(R/2) of an odd number R of raters say YES.
pub fn majority_vote(labels: &[bool]) -> Result<bool, StatsError> {
    if labels.len() % 2 == 0 {
        return Err(StatsError::EvenRaterCount(labels.len()));
    }
    let yes = labels.iter().filter(|l| **l).count();
    Ok(yes >= labels.len().div_ceil(2))
}

/// Number of YES votes among the sampled ids.
pub fn informativeness_rate<S: AsRef<str>>(
    sample: &[S],
    votes: &HashMap<String, bool>,
) -> Result<BinomialCount, StatsError> {
    let missing: Vec<String> =
        sample.iter().filter(|id| !votes.contains_key(id.as_ref())).map(|id| id.as_ref().to_string()).collect();
    if !missing.is_empty() {
        return Err(StatsError::MissingVotes(missing));
    }
    let k = sample.iter().filter(|id| votes[id.as_ref()]).count() as u64;
    Ok(BinomialCount { k, n: sample.len() as u64 })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Stratum {
    pub label: String,
    pub count: BinomialCount,
    pub weight: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StratumRates {
    pub strata: Vec<Stratum>,
}

const WEIGHT_TOL: f64 = 1e-9;

/// Stratum rates re-weighted to reference weights.
pub fn standardized_rate(s: &StratumRates) -> Result<f64, StatsError> {
    let total: f64 = s.strata.iter().map(|st| st.weight).sum();
    if (total - 1.0).abs() > WEIGHT_TOL || s.strata.iter().any(|st| !(st.weight >= 0.0)) {
        return Err(StatsError::WeightsDontSumToOne(total));
    }
    let mut out = 0.0;
    for st in &s.strata {
        if st.weight == 0.0 {
            continue;
        }
        if st.count.n == 0 {
            return Err(StatsError::EmptyStratum(st.label.clone()));
        }
        out += st.weight * st.count.rate();
    }
    Ok(out)
}

/// Labels spent per informative item: n/k.
pub fn labels_per_informative(name: &str, c: BinomialCount) -> Result<f64, StatsError> {
    if c.k == 0 {
        return Err(StatsError::ZeroInformative(name.to_string()));
    }
    Ok(c.n as f64 / c.k as f64)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EfficiencyGain {
    pub strategy: String,
    pub baseline: String,
    pub gain: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Efficiency {
    pub labels_per_informative: BTreeMap<String, f64>,
    /// For every ordered pair, cost(baseline) / cost(strategy).
    pub gains: Vec<EfficiencyGain>,
}

impl Efficiency {
    pub fn gain(&self, strategy: &str, baseline: &str) -> Option<f64> {
        self.gains.iter().find(|g| g.strategy == strategy && g.baseline == baseline).map(|g| g.gain)
    }
}

pub fn annotation_efficiency(rates: &BTreeMap<String, BinomialCount>) -> Result<Efficiency, StatsError> {
    let mut lpi = BTreeMap::new();
    for (name, c) in rates {
        lpi.insert(name.clone(), labels_per_informative(name, *c)?);
    }
    let mut gains = Vec::new();
    for (a, cost_a) in &lpi {
        for (b, cost_b) in &lpi {
            if a != b {
                gains.push(EfficiencyGain { strategy: a.clone(), baseline: b.clone(), gain: cost_b / cost_a });
            }
        }
    }
    Ok(Efficiency { labels_per_informative: lpi, gains })
}
