//! Word-overlap sentence metrics operating on surface tokens.

mod bleu;
mod cider;
mod meteor;

use std::collections::BTreeMap;

pub use bleu::bleu4;
pub use cider::{build_df, cider_d, CorpusDf, CIDER_SIGMA};
pub use meteor::meteor_lite;

pub const MAX_NGRAM: usize = 4;

pub type NGram = Vec<String>;

/// Counts of every n-gram of order 1..=4 in a sentence.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct NGramProfile {
    counts: [BTreeMap<NGram, usize>; MAX_NGRAM],
    len: usize,
}

impl NGramProfile {
    pub fn new(tokens: &[String]) -> Self {
        let mut counts: [BTreeMap<NGram, usize>; MAX_NGRAM] = Default::default();
        for (n, table) in counts.iter_mut().enumerate() {
            for w in tokens.windows(n + 1) {
                *table.entry(w.to_vec()).or_default() += 1;
            }
        }
        NGramProfile {
            counts,
            len: tokens.len(),
        }
    }

    /// N-gram table for order `n` (1-based).
    pub fn order(&self, n: usize) -> &BTreeMap<NGram, usize> {
        &self.counts[n - 1]
    }

    pub fn total(&self, n: usize) -> usize {
        self.order(n).values().sum()
    }

    pub fn sentence_len(&self) -> usize {
        self.len
    }
}

/// Pairwise sentence scorer used by the event-level evaluators.
pub trait SentenceMetric {
    fn name(&self) -> &'static str;
    fn score(&self, candidate: &[String], reference: &[String]) -> f64;
}

pub struct Bleu4;

impl SentenceMetric for Bleu4 {
    fn name(&self) -> &'static str {
        "bleu4"
    }

    fn score(&self, candidate: &[String], reference: &[String]) -> f64 {
        if candidate.is_empty() || reference.is_empty() {
            return 0.0;
        }
        bleu4(candidate, std::slice::from_ref(&reference.to_vec())).unwrap_or(0.0)
    }
}

pub struct MeteorLite;

impl SentenceMetric for MeteorLite {
    fn name(&self) -> &'static str {
        "meteor"
    }

    fn score(&self, candidate: &[String], reference: &[String]) -> f64 {
        meteor_lite(candidate, reference)
    }
}

pub struct CiderD<'a> {
    pub df: &'a CorpusDf,
    pub sigma: f64,
}

impl SentenceMetric for CiderD<'_> {
    fn name(&self) -> &'static str {
        "cider_d"
    }

    fn score(&self, candidate: &[String], reference: &[String]) -> f64 {
        cider_d(candidate, std::slice::from_ref(&reference.to_vec()), self.df, self.sigma)
            .unwrap_or(0.0)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::tokenize;
    use proptest::prelude::*;

    #[test]
    fn profile_totals() {
        let p = NGramProfile::new(&tokenize("a b a b c"));
        assert_eq!(p.total(1), 5);
        assert_eq!(p.total(4), 2);
        assert_eq!(p.order(2)[&tokenize("a b")], 2);
        assert_eq!(NGramProfile::new(&tokenize("a b")).total(3), 0);
    }

    proptest! {
        #[test]
        fn profile_total_matches_length(words in proptest::collection::vec("[a-c]", 0..12)) {
            let p = NGramProfile::new(&words);
            for n in 1..=MAX_NGRAM {
                prop_assert_eq!(p.total(n), words.len().saturating_sub(n - 1));
            }
        }

        #[test]
        fn metrics_invariant_under_relabeling(
            cand in proptest::collection::vec(0u8..5, 1..8),
            refr in proptest::collection::vec(0u8..5, 1..8),
        ) {
            let a = |v: &[u8]| v.iter().map(|i| format!("w{i}")).collect::<Vec<_>>();
            let b = |v: &[u8]| v.iter().map(|i| format!("z{}", 4 - i)).collect::<Vec<_>>();
            let (ca, ra, cb, rb) = (a(&cand), a(&refr), b(&cand), b(&refr));
            prop_assert_eq!(Bleu4.score(&ca, &ra), Bleu4.score(&cb, &rb));
            prop_assert_eq!(MeteorLite.score(&ca, &ra), MeteorLite.score(&cb, &rb));
            let dfa = build_df(&[vec![ra.clone()], vec![ca.clone()]]).unwrap();
            let dfb = build_df(&[vec![rb.clone()], vec![cb.clone()]]).unwrap();
            let sa = cider_d(&ca, std::slice::from_ref(&ra), &dfa, CIDER_SIGMA).unwrap();
            let sb = cider_d(&cb, &[rb], &dfb, CIDER_SIGMA).unwrap();
            prop_assert!((sa - sb).abs() < 1e-12);
            for s in [Bleu4.score(&ca, &ra), MeteorLite.score(&ca, &ra)] {
                prop_assert!(s.is_finite() && (0.0..=1.0).contains(&s));
            }
            prop_assert!(sa.is_finite() && (0.0..=10.0 + 1e-9).contains(&sa));
        }
    }
}
