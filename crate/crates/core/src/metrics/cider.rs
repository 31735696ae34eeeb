use std::collections::{BTreeMap, BTreeSet};

use super::{NGram, NGramProfile, MAX_NGRAM};
use crate::error::{Error, Result};

pub const CIDER_SIGMA: f64 = 6.0;

/// Document frequencies per n-gram order, one document per video.
#[derive(Debug, Clone, PartialEq)]
pub struct CorpusDf {
    df: [BTreeMap<NGram, usize>; MAX_NGRAM],
    documents: usize,
}

impl CorpusDf {
    pub fn documents(&self) -> usize {
        self.documents
    }

    pub fn df(&self, ngram: &[String]) -> usize {
        let n = ngram.len();
        if n == 0 || n > MAX_NGRAM {
            return 0;
        }
        self.df[n - 1].get(ngram).copied().unwrap_or(0)
    }
}

/// Counts, for every n-gram, how many videos' reference sets contain it.
pub fn build_df(references: &[Vec<Vec<String>>]) -> Result<CorpusDf> {
    if references.is_empty() {
        return Err(Error::InvalidArgument("build_df needs at least one video".into()));
    }
    let mut df: [BTreeMap<NGram, usize>; MAX_NGRAM] = Default::default();
    for video in references {
        let mut seen: [BTreeSet<NGram>; MAX_NGRAM] = Default::default();
        for sent in video {
            let p = NGramProfile::new(sent);
            for n in 1..=MAX_NGRAM {
                seen[n - 1].extend(p.order(n).keys().cloned());
            }
        }
        for (table, grams) in df.iter_mut().zip(seen) {
            for g in grams {
                *table.entry(g).or_default() += 1;
            }
        }
    }
    Ok(CorpusDf {
        df,
        documents: references.len(),
    })
}

struct TfIdf {
    vecs: [BTreeMap<NGram, f64>; MAX_NGRAM],
    norms: [f64; MAX_NGRAM],
    len: usize,
}

fn tf_idf(tokens: &[String], df: &CorpusDf) -> TfIdf {
    let profile = NGramProfile::new(tokens);
    let log_docs = (df.documents as f64).ln();
    let mut vecs: [BTreeMap<NGram, f64>; MAX_NGRAM] = Default::default();
    let mut norms = [0.0; MAX_NGRAM];
    for n in 1..=MAX_NGRAM {
        for (g, &tf) in profile.order(n) {
            let d = (df.df(g).max(1) as f64).ln();
            let w = tf as f64 * (log_docs - d);
            norms[n - 1] += w * w;
            vecs[n - 1].insert(g.clone(), w);
        }
        norms[n - 1] = norms[n - 1].sqrt();
    }
    TfIdf {
        vecs,
        norms,
        len: tokens.len(),
    }
}

fn similarity(cand: &TfIdf, reference: &TfIdf, sigma: f64) -> f64 {
    let delta = cand.len as f64 - reference.len as f64;
    let length_penalty = (-(delta * delta) / (2.0 * sigma * sigma)).exp();
    let mut total = 0.0;
    for n in 0..MAX_NGRAM {
        let mut val = 0.0;
        for (g, &wc) in &cand.vecs[n] {
            if let Some(&wr) = reference.vecs[n].get(g) {
                val += wc.min(wr) * wr;
            }
        }
        if cand.norms[n] != 0.0 && reference.norms[n] != 0.0 {
            val /= cand.norms[n] * reference.norms[n];
        }
        total += val * length_penalty;
    }
    total / MAX_NGRAM as f64
}

/// CIDEr-D: TF-IDF cosine per n-gram order with candidate weights clipped to
/// the reference, Gaussian length penalty, averaged over orders and
/// references, scaled by 10.
pub fn cider_d(
    candidate: &[String],
    references: &[Vec<String>],
    df: &CorpusDf,
    sigma: f64,
) -> Result<f64> {
    if references.is_empty() {
        return Err(Error::InvalidArgument("cider_d needs at least one reference".into()));
    }
    let cand = tf_idf(candidate, df);
    let sum: f64 = references
        .iter()
        .map(|r| similarity(&cand, &tf_idf(r, df), sigma))
        .sum();
    Ok(10.0 * sum / references.len() as f64)
}
