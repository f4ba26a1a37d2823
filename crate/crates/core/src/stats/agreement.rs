use serde::{Deserialize, Serialize};

use super::StatsError;

/// Items x raters table of category indices.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RatingMatrix {
    rows: Vec<Vec<usize>>,
    categories: usize,
}

impl RatingMatrix {
    /// Build from category indices. `categories` is the declared category
    /// count, which may exceed the number of categories actually used.
    pub fn new(rows: Vec<Vec<usize>>, categories: usize) -> Result<Self, StatsError> {
        if rows.is_empty() {
            return Err(StatsError::InvalidMatrix("no items".into()));
        }
        let raters = rows[0].len();
        if raters < 2 {
            return Err(StatsError::InvalidMatrix(format!("need at least 2 raters, got {raters}")));
        }
        if categories < 2 {
            return Err(StatsError::InvalidMatrix(format!("need at least 2 categories, got {categories}")));
        }
        for (i, row) in rows.iter().enumerate() {
            if row.len() != raters {
                return Err(StatsError::InvalidMatrix(format!("item {i} has {} ratings, expected {raters}", row.len())));
            }
            if let Some(c) = row.iter().find(|c| **c >= categories) {
                return Err(StatsError::InvalidMatrix(format!("item {i} uses category {c} of {categories}")));
            }
        }
        Ok(RatingMatrix { rows, categories })
    }

    /// Build from arbitrary labels drawn from `categories`.
    pub fn from_labels<L: PartialEq + std::fmt::Debug>(rows: &[Vec<L>], categories: &[L]) -> Result<Self, StatsError> {
        let rows = rows
            .iter()
            .map(|row| {
                row.iter()
                    .map(|l| {
                        categories
                            .iter()
                            .position(|c| c == l)
                            .ok_or_else(|| StatsError::InvalidMatrix(format!("label {l:?} is not a declared category")))
                    })
                    .collect::<Result<Vec<_>, _>>()
            })
            .collect::<Result<Vec<_>, _>>()?;
        RatingMatrix::new(rows, categories.len())
    }

    pub fn binary(rows: &[Vec<bool>]) -> Result<Self, StatsError> {
        RatingMatrix::from_labels(rows, &[false, true])
    }

    pub fn items(&self) -> usize {
        self.rows.len()
    }

    pub fn raters(&self) -> usize {
        self.rows[0].len()
    }

    pub fn categories(&self) -> usize {
        self.categories
    }

    pub fn rows(&self) -> &[Vec<usize>] {
        &self.rows
    }

    fn all_identical(&self) -> bool {
        let first = self.rows[0][0];
        self.rows.iter().flatten().all(|c| *c == first)
    }

    /// Mean over items of the fraction of agreeing ordered rater pairs.
    fn observed_agreement(&self) -> f64 {
        let r = self.raters() as f64;
        let mut total = 0.0;
        let mut counts = vec![0usize; self.categories];
        for row in &self.rows {
            counts.iter_mut().for_each(|c| *c = 0);
            for c in row {
                counts[*c] += 1;
            }
            let agree: f64 = counts.iter().map(|&n| (n * n.saturating_sub(1)) as f64).sum();
            total += agree / (r * (r - 1.0));
        }
        total / self.items() as f64
    }

    /// Overall share of ratings in each category.
    fn prevalence(&self) -> Vec<f64> {
        let mut counts = vec![0usize; self.categories];
        for c in self.rows.iter().flatten() {
            counts[*c] += 1;
        }
        let total = (self.items() * self.raters()) as f64;
        counts.into_iter().map(|n| n as f64 / total).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Agreement {
    pub value: f64,
    /// Set when every rating is the same category and the coefficient is
    /// reported as 1.0 by convention.
    pub degenerate: bool,
}

/// Multi-rater Gwet AC1 with chance agreement sum_q pi_q (1 - pi_q) / (Q - 1).
pub fn gwet_ac1(m: &RatingMatrix) -> Agreement {
    if m.all_identical() {
        return Agreement { value: 1.0, degenerate: true };
    }
    let pa = m.observed_agreement();
    let q = m.categories() as f64;
    let pe: f64 = m.prevalence().iter().map(|p| p * (1.0 - p)).sum::<f64>() / (q - 1.0);
    Agreement { value: (pa - pe) / (1.0 - pe), degenerate: false }
}

/// Fleiss' kappa with chance agreement sum_q pi_q^2.
pub fn fleiss_kappa(m: &RatingMatrix) -> Agreement {
    if m.all_identical() {
        return Agreement { value: 1.0, degenerate: true };
    }
    let pa = m.observed_agreement();
    let pe: f64 = m.prevalence().iter().map(|p| p * p).sum();
    Agreement { value: (pa - pe) / (1.0 - pe), degenerate: false }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PrevalenceBias {
    pub prevalence: f64,
    pub bias: f64,
}

/// Prevalence index |P(both YES) - P(both NO)| and bias index
/// |P(YES_i) - P(YES_j)|, averaged over unordered rater pairs. Category 1 is
/// YES; both indices are symmetric under swapping the two categories.
pub fn prevalence_bias_indices(m: &RatingMatrix) -> Result<PrevalenceBias, StatsError> {
    if m.categories() != 2 {
        return Err(StatsError::InvalidMatrix(format!("expected binary labels, got {} categories", m.categories())));
    }
    let n = m.items() as f64;
    let r = m.raters();
    let yes = |j: usize| m.rows().iter().filter(|row| row[j] == 1).count() as f64 / n;
    let (mut prev, mut bias, mut pairs) = (0.0, 0.0, 0.0);
    for i in 0..r {
        for j in i + 1..r {
            let both_yes = m.rows().iter().filter(|row| row[i] == 1 && row[j] == 1).count() as f64 / n;
            let both_no = m.rows().iter().filter(|row| row[i] == 0 && row[j] == 0).count() as f64 / n;
            prev += (both_yes - both_no).abs();
            bias += (yes(i) - yes(j)).abs();
            pairs += 1.0;
        }
    }
    Ok(PrevalenceBias { prevalence: prev / pairs, bias: bias / pairs })
}
