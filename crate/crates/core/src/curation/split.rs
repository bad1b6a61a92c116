//! Per-source stratified train/validation split.

use std::collections::BTreeMap;

use rand::seq::index;
use serde::{Deserialize, Serialize};

use crate::rng;

/// Validation fraction per source, with a fallback for unlisted sources.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct SplitFractions {
    #[serde(default)]
    pub per_source: BTreeMap<String, f64>,
    #[serde(default)]
    pub default: f64,
}

impl SplitFractions {
    pub fn uniform(fraction: f64) -> Self {
        Self {
            per_source: BTreeMap::new(),
            default: fraction,
        }
    }

    pub fn fraction(&self, source: &str) -> f64 {
        self.per_source.get(source).copied().unwrap_or(self.default)
    }
}

/// Draws `⌊f·n + ½⌋` validation items without replacement from each source
/// group of `n` items. Both outputs keep input order.
///
/// Fractions are clamped to `[0, 1]`.
pub fn stratified_split<T: Clone>(
    items: &[T],
    source_of: impl Fn(&T) -> &str,
    fractions: &SplitFractions,
    seed: u64,
) -> (Vec<T>, Vec<T>) {
    let mut groups: BTreeMap<&str, Vec<usize>> = BTreeMap::new();
    for (i, it) in items.iter().enumerate() {
        groups.entry(source_of(it)).or_default().push(i);
    }
    let mut in_val = vec![false; items.len()];
    for (g, (source, members)) in groups.iter().enumerate() {
        let f = fractions.fraction(source).clamp(0.0, 1.0);
        let k = ((f * members.len() as f64 + 0.5).floor() as usize).min(members.len());
        let mut rng = rng::stream(seed, rng::stage::SPLIT, g as u64);
        for j in index::sample(&mut rng, members.len(), k) {
            in_val[members[j]] = true;
        }
    }
    let mut train = Vec::new();
    let mut val = Vec::new();
    for (it, v) in items.iter().zip(in_val) {
        if v {
            val.push(it.clone())
        } else {
            train.push(it.clone())
        }
    }
    (train, val)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn corpus(counts: &[(&str, usize)]) -> Vec<(usize, String)> {
        let mut id = 0;
        let mut out = Vec::new();
        for (s, n) in counts {
            for _ in 0..*n {
                out.push((id, s.to_string()));
                id += 1;
            }
        }
        out
    }

    #[test]
    fn proportional_counts() {
        let c = corpus(&[("droid", 2000), ("bridge", 1000)]);
        let (train, val) = stratified_split(&c, |e| &e.1, &SplitFractions::uniform(0.1), 5);
        let count = |v: &[(usize, String)], s: &str| v.iter().filter(|e| e.1 == s).count();
        assert_eq!((count(&val, "droid"), count(&val, "bridge")), (200, 100));
        assert_eq!(train.len(), 2700);

        let (_, none) = stratified_split(&c, |e| &e.1, &SplitFractions::uniform(0.0), 5);
        assert!(none.is_empty());

        // 0.25 · 10 = 2.5 rounds up
        let small = corpus(&[("rt1", 10)]);
        assert_eq!(
            stratified_split(&small, |e| &e.1, &SplitFractions::uniform(0.25), 1)
                .1
                .len(),
            3
        );
    }

    proptest! {
        #[test]
        fn partition(a in 0usize..40, b in 0usize..40, f in 0.0f64..=1.0, seed: u64) {
            let c = corpus(&[("x", a), ("y", b)]);
            let (train, val) = stratified_split(&c, |e| &e.1, &SplitFractions::uniform(f), seed);
            let mut ids: Vec<usize> = train.iter().chain(&val).map(|e| e.0).collect();
            ids.sort_unstable();
            prop_assert_eq!(ids, (0..a + b).collect::<Vec<_>>());
        }
    }
}
