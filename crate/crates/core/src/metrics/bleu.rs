use std::collections::HashMap;

use super::{NGramProfile, MAX_NGRAM};
use crate::error::{Error, Result};

/// Sentence-level BLEU-4 with uniform weights.
///
/// Unigram precision is unsmoothed; orders 2..=4 use add-one smoothing so
/// that short sentences do not collapse to zero. The effective reference
/// length is the reference length closest to the candidate (shorter wins
/// ties).
pub fn bleu4(candidate: &[String], references: &[Vec<String>]) -> Result<f64> {
    if references.is_empty() {
        return Err(Error::InvalidArgument("bleu4 needs at least one reference".into()));
    }
    if candidate.is_empty() {
        return Err(Error::InvalidArgument("bleu4 candidate is empty".into()));
    }
    let cand = NGramProfile::new(candidate);
    let refs: Vec<NGramProfile> = references.iter().map(|r| NGramProfile::new(r)).collect();

    let mut log_sum = 0.0;
    for n in 1..=MAX_NGRAM {
        let mut max_ref: HashMap<&Vec<String>, usize> = HashMap::new();
        for r in &refs {
            for (g, &c) in r.order(n) {
                let e = max_ref.entry(g).or_default();
                *e = (*e).max(c);
            }
        }
        let matched: usize = cand
            .order(n)
            .iter()
            .map(|(g, &c)| c.min(max_ref.get(g).copied().unwrap_or(0)))
            .sum();
        let total = cand.total(n);
        let p = if n == 1 {
            matched as f64 / total as f64
        } else {
            (matched as f64 + 1.0) / (total as f64 + 1.0)
        };
        if p == 0.0 {
            return Ok(0.0);
        }
        log_sum += p.ln() / MAX_NGRAM as f64;
    }

    let c = candidate.len();
    let r = references
        .iter()
        .map(Vec::len)
        .min_by_key(|&len| (len.abs_diff(c), len))
        .unwrap_or(c);
    let bp = if c < r {
        (1.0 - r as f64 / c as f64).exp()
    } else {
        1.0
    };
    Ok(bp * log_sum.exp())
}
