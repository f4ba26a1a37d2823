use std::collections::{BTreeMap, BTreeSet, HashMap};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::annotation::{LabelSubmission, MainReason, QueueManifest};
use crate::triage::Strategy;

/// Majority-vote outcome wanted for one strategy's sample.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StrategyTargets {
    pub failed_yes: usize,
    pub successful_yes: usize,
    /// Plurality reasons over the YES items; must sum to the YES total.
    pub reasons: BTreeMap<MainReason, usize>,
}

type Signature = BTreeSet<Strategy>;

/// Scripted labels for every rater and every queue item such that the
/// majority vote and plurality reason reproduce `targets` exactly. Items that
/// sit in several samples count toward each of them, so YES counts and
/// reasons are solved jointly over membership signatures. Roughly a third of
/// items get one dissenting rater.
pub fn script_labels(
    manifest: &QueueManifest,
    rewards: &HashMap<String, Option<i64>>,
    targets: &BTreeMap<Strategy, StrategyTargets>,
    seed: u64,
) -> Result<Vec<LabelSubmission>, String> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);

    // (signature, failed?) -> blinded ids
    let mut cells: BTreeMap<(Signature, bool), Vec<String>> = BTreeMap::new();
    for item in &manifest.items {
        let sig: Signature = item.provenance.iter().map(|p| p.strategy).collect();
        let failed = match rewards.get(&item.trajectory_id) {
            Some(Some(0)) => true,
            Some(Some(1)) => false,
            _ => return Err(format!("{} has no binary reward", item.trajectory_id)),
        };
        cells.entry((sig, failed)).or_default().push(item.blinded_id.clone());
    }
    for ids in cells.values_mut() {
        ids.shuffle(&mut rng);
    }

    let mut yes: BTreeMap<(Signature, bool), usize> = BTreeMap::new();
    for failed in [true, false] {
        let want: BTreeMap<Strategy, usize> = targets
            .iter()
            .map(|(s, t)| (*s, if failed { t.failed_yes } else { t.successful_yes }))
            .collect();
        let keys: Vec<Signature> = cells.keys().filter(|(_, f)| *f == failed).map(|(s, _)| s.clone()).collect();
        let sizes: Vec<usize> = keys.iter().map(|s| cells[&(s.clone(), failed)].len()).collect();
        let counts = solve(&keys, &sizes, &want)
            .ok_or_else(|| format!("no YES assignment meets the {} targets", if failed { "failed" } else { "successful" }))?;
        for (sig, c) in keys.into_iter().zip(counts) {
            yes.insert((sig, failed), c);
        }
    }

    // Reasons: overlap items first, each taking a reason every member still needs.
    let mut remaining: BTreeMap<Strategy, BTreeMap<MainReason, usize>> =
        targets.iter().map(|(s, t)| (*s, t.reasons.clone())).collect();
    for (s, t) in targets {
        let total: usize = t.reasons.values().sum();
        if total != t.failed_yes + t.successful_yes {
            return Err(format!("{s} reasons sum to {total}, not the YES total"));
        }
    }
    let mut yes_items: Vec<(Signature, String)> = Vec::new();
    for ((sig, failed), ids) in &cells {
        let k = yes[&(sig.clone(), *failed)];
        yes_items.extend(ids[..k].iter().map(|id| (sig.clone(), id.clone())));
    }
    yes_items.sort_by_key(|(sig, _)| std::cmp::Reverse(sig.len()));
    let mut reason_of: HashMap<String, MainReason> = HashMap::new();
    for (sig, id) in &yes_items {
        let pick = MainReason::ALL
            .into_iter()
            .filter(|r| sig.iter().all(|s| remaining.get(s).and_then(|m| m.get(r)).copied().unwrap_or(0) > 0))
            .max_by_key(|r| sig.iter().map(|s| remaining[s][r]).min().unwrap_or(0))
            .ok_or_else(|| format!("no reason fits item {id}"))?;
        for s in sig {
            *remaining.get_mut(s).expect("target").get_mut(&pick).expect("positive") -= 1;
        }
        reason_of.insert(id.clone(), pick);
    }

    let raters = &manifest.annotators;
    let mut votes: HashMap<String, Vec<(bool, MainReason)>> = HashMap::new();
    for ((_, _), ids) in &cells {
        for id in ids {
            let is_yes = reason_of.contains_key(id);
            let reason = reason_of.get(id).copied().unwrap_or(MainReason::NoneUnclear);
            let mut row: Vec<bool> = vec![is_yes; raters.len()];
            if raters.len() >= 3 && rng.random_range(0..3) == 0 {
                let j = rng.random_range(0..raters.len());
                row[j] = !is_yes;
            }
            let row = row
                .into_iter()
                .map(|y| (y, if y { reason } else { MainReason::NoneUnclear }))
                .collect();
            votes.insert(id.clone(), row);
        }
    }

    let mut out = Vec::new();
    for (j, a) in raters.iter().enumerate() {
        for blinded in &manifest.orders[a] {
            let (y, reason) = votes[blinded][j];
            out.push(LabelSubmission {
                annotator_id: a.clone(),
                blinded_id: blinded.clone(),
                informative: if y { "YES" } else { "NO" }.to_string(),
                main_reason: Some(reason.as_str().to_string()),
                note: None,
            });
        }
    }
    Ok(out)
}

/// YES counts per signature cell meeting every strategy's total. Depth-first
/// over cells; the last cell of each strategy is forced by its total.
fn solve(keys: &[Signature], sizes: &[usize], want: &BTreeMap<Strategy, usize>) -> Option<Vec<usize>> {
    fn go(
        i: usize,
        keys: &[Signature],
        sizes: &[usize],
        want: &BTreeMap<Strategy, usize>,
        left: &mut BTreeMap<Strategy, usize>,
        acc: &mut Vec<usize>,
    ) -> bool {
        if i == keys.len() {
            return want.keys().all(|s| left[s] == 0);
        }
        let cap = keys[i].iter().filter_map(|s| left.get(s)).copied().min().unwrap_or(0).min(sizes[i]);
        for c in (0..=cap).rev() {
            for s in &keys[i] {
                if let Some(v) = left.get_mut(s) {
                    *v -= c;
                }
            }
            acc.push(c);
            if go(i + 1, keys, sizes, want, left, acc) {
                return true;
            }
            acc.pop();
            for s in &keys[i] {
                if let Some(v) = left.get_mut(s) {
                    *v += c;
                }
            }
        }
        false
    }
    // Larger signatures first so the singletons absorb what is left.
    let mut order: Vec<usize> = (0..keys.len()).collect();
    order.sort_by_key(|&i| std::cmp::Reverse(keys[i].len()));
    let ks: Vec<Signature> = order.iter().map(|&i| keys[i].clone()).collect();
    let ss: Vec<usize> = order.iter().map(|&i| sizes[i]).collect();
    let mut left = want.clone();
    let mut acc = Vec::new();
    if !go(0, &ks, &ss, want, &mut left, &mut acc) {
        return None;
    }
    let mut out = vec![0; keys.len()];
    for (pos, &i) in order.iter().enumerate() {
        out[i] = acc[pos];
    }
    Some(out)
}
