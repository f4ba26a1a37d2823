use std::collections::{BTreeMap, HashSet};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::AnnotationError;
use crate::triage::{tie_key, SampleSet, Strategy, Stream};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ProvenanceLink {
    pub strategy: Strategy,
    pub stream: Stream,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ManifestItem {
    pub blinded_id: String,
    pub trajectory_id: String,
    pub provenance: Vec<ProvenanceLink>,
}

/// Server-side queue state. Holds the blinded-id mapping, so it must never
/// be served to annotators.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QueueManifest {
    pub seed: u64,
    pub global_order: bool,
    pub annotators: Vec<String>,
    /// Sorted by blinded id.
    pub items: Vec<ManifestItem>,
    /// Blinded ids in presentation order, per annotator.
    pub orders: BTreeMap<String, Vec<String>>,
    pub samples: Vec<SampleSet>,
}

const BLIND_SALT: u64 = 0x6b1d_5eed_0a11_ce55;

/// One blinded item per unique trajectory across all samples, with every
/// provenance link kept. Each annotator gets an independent seeded shuffle
/// unless `global_order` is set.
pub fn build_queue(
    samples: &[SampleSet],
    annotators: &[String],
    seed: u64,
    global_order: bool,
) -> Result<QueueManifest, AnnotationError> {
    if samples.is_empty() || samples.iter().all(|s| s.is_empty()) {
        return Err(AnnotationError::EmptySamples);
    }
    if annotators.is_empty() {
        return Err(AnnotationError::InvalidAnnotators("at least one annotator is required".into()));
    }
    let mut seen = HashSet::new();
    for a in annotators {
        if a.trim().is_empty() || !seen.insert(a.as_str()) {
            return Err(AnnotationError::InvalidAnnotators(format!("empty or repeated annotator id {a:?}")));
        }
    }

    let mut links: BTreeMap<&str, Vec<ProvenanceLink>> = BTreeMap::new();
    for s in samples {
        for (id, stream) in s.trajectory_ids.iter().zip(&s.provenance) {
            let entry = links.entry(id.as_str()).or_default();
            let link = ProvenanceLink { strategy: s.strategy, stream: *stream };
            if !entry.contains(&link) {
                entry.push(link);
            }
        }
    }

    let mut used = HashSet::new();
    let mut items: Vec<ManifestItem> = links
        .into_iter()
        .map(|(tid, provenance)| {
            let mut salt = BLIND_SALT ^ seed;
            let blinded_id = loop {
                let candidate = format!("item-{:016x}", tie_key(salt, tid));
                if used.insert(candidate.clone()) {
                    break candidate;
                }
                salt = salt.wrapping_add(1);
            };
            ManifestItem { blinded_id, trajectory_id: tid.to_string(), provenance }
        })
        .collect();
    items.sort_by(|a, b| a.blinded_id.cmp(&b.blinded_id));

    let base: Vec<String> = items.iter().map(|i| i.blinded_id.clone()).collect();
    let shuffled = |rng_seed: u64| {
        let mut order = base.clone();
        order.shuffle(&mut ChaCha8Rng::seed_from_u64(rng_seed));
        order
    };
    let orders = annotators
        .iter()
        .map(|a| {
            let order = if global_order { shuffled(seed) } else { shuffled(tie_key(seed, a)) };
            (a.clone(), order)
        })
        .collect();

    Ok(QueueManifest {
        seed,
        global_order,
        annotators: annotators.to_vec(),
        items,
        orders,
        samples: samples.to_vec(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample(strategy: Strategy, ids: &[&str]) -> SampleSet {
        SampleSet {
            strategy,
            seed: 1,
            trajectory_ids: ids.iter().map(|s| s.to_string()).collect(),
            provenance: vec![Stream::NotApplicable; ids.len()],
            qualifying: ids.len(),
        }
    }

    fn raters() -> Vec<String> {
        vec!["ann1".into(), "ann2".into(), "ann3".into()]
    }

    #[test]
    fn disjoint_samples_union() {
        let ids = |p: &str| (0..100).map(|i| format!("{p}{i}")).collect::<Vec<_>>();
        let (a, b, c) = (ids("a"), ids("b"), ids("c"));
        fn refs(v: &[String]) -> Vec<&str> {
            v.iter().map(|s| s.as_str()).collect()
        }
        let samples = vec![
            sample(Strategy::Random, &refs(&a)),
            sample(Strategy::Heuristic, &refs(&b)),
            sample(Strategy::Signal, &refs(&c)),
        ];
        let m = build_queue(&samples, &raters(), 9, false).unwrap();
        assert_eq!(m.items.len(), 300);
        for order in m.orders.values() {
            let mut sorted = order.clone();
            sorted.sort();
            assert_eq!(sorted, m.items.iter().map(|i| i.blinded_id.clone()).collect::<Vec<_>>());
        }
        assert_ne!(m.orders["ann1"], m.orders["ann2"]);
    }

    #[test]
    fn shared_trajectory_keeps_both_links() {
        let samples = vec![sample(Strategy::Random, &["x", "y"]), sample(Strategy::Signal, &["y", "z"])];
        let m = build_queue(&samples, &raters(), 9, false).unwrap();
        assert_eq!(m.items.len(), 3);
        let y = m.items.iter().find(|i| i.trajectory_id == "y").unwrap();
        assert_eq!(y.provenance.len(), 2);
    }

    #[test]
    fn seeded_and_global_orders() {
        let samples = vec![sample(Strategy::Random, &["a", "b", "c", "d", "e", "f", "g"])];
        assert_eq!(build_queue(&samples, &raters(), 4, false).unwrap(), build_queue(&samples, &raters(), 4, false).unwrap());
        let g = build_queue(&samples, &raters(), 4, true).unwrap();
        assert_eq!(g.orders["ann1"], g.orders["ann3"]);
    }

    #[test]
    fn blinded_ids_are_opaque() {
        let samples = vec![sample(Strategy::Signal, &["tau:retail:7:0"])];
        let m = build_queue(&samples, &raters(), 4, false).unwrap();
        let b = &m.items[0].blinded_id;
        assert!(b.starts_with("item-") && !b.contains("retail") && !b.contains("Signal"));
    }

    #[test]
    fn rejects_bad_input() {
        assert!(matches!(build_queue(&[], &raters(), 1, false), Err(AnnotationError::EmptySamples)));
        let s = vec![sample(Strategy::Random, &["a"])];
        assert!(matches!(build_queue(&s, &[], 1, false), Err(AnnotationError::InvalidAnnotators(_))));
        let dup = vec!["a".to_string(), "a".to_string()];
        assert!(matches!(build_queue(&s, &dup, 1, false), Err(AnnotationError::InvalidAnnotators(_))));
    }
}
