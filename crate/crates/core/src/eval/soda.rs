use super::tiou;
use crate::data::{GroundTruthRecipe, PredictionRecipe};
use crate::metrics::SentenceMetric;

/// Order-preserving matching between predictions and references.
#[derive(Debug, Clone, PartialEq)]
pub struct Alignment {
    /// (prediction index, reference index), strictly increasing in both.
    pub pairs: Vec<(usize, usize)>,
    pub total: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SodaScore {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub alignment: Alignment,
}

/// How a (prediction, reference) pair is scored before alignment.
pub enum PairScore<'a> {
    /// tIoU multiplied by a sentence metric.
    Metric(&'a dyn SentenceMetric),
    /// tIoU alone (SODA-tIoU).
    TiouOnly,
}

/// Maximum-total monotone alignment over `scores[i][j]` by dynamic
/// programming, then precision = total/|P|, recall = total/|G|.
pub fn soda_from_scores(scores: &[Vec<f64>], num_refs: usize) -> SodaScore {
    let np = scores.len();
    let ng = num_refs;
    let mut table = vec![vec![0.0f64; ng + 1]; np + 1];
    for i in 1..=np {
        for j in 1..=ng {
            let diag = table[i - 1][j - 1] + scores[i - 1][j - 1];
            table[i][j] = table[i - 1][j].max(table[i][j - 1]).max(diag);
        }
    }

    let mut pairs = Vec::new();
    let (mut i, mut j) = (np, ng);
    while i > 0 && j > 0 {
        if table[i][j] == table[i - 1][j] {
            i -= 1;
        } else if table[i][j] == table[i][j - 1] {
            j -= 1;
        } else {
            pairs.push((i - 1, j - 1));
            i -= 1;
            j -= 1;
        }
    }
    pairs.reverse();

    let total = table[np][ng];
    let precision = if np == 0 { 0.0 } else { total / np as f64 };
    let recall = if ng == 0 { 0.0 } else { total / ng as f64 };
    let f1 = if precision + recall > 0.0 {
        2.0 * precision * recall / (precision + recall)
    } else {
        0.0
    };
    SodaScore {
        precision,
        recall,
        f1,
        alignment: Alignment { pairs, total },
    }
}

pub fn soda(pred: &PredictionRecipe, gt: &GroundTruthRecipe, pair: &PairScore<'_>) -> SodaScore {
    let scores: Vec<Vec<f64>> = pred
        .intervals
        .iter()
        .zip(&pred.sentences)
        .map(|(pi, ps)| {
            gt.steps
                .iter()
                .map(|g| {
                    let t = tiou(pi, &g.interval);
                    match pair {
                        PairScore::TiouOnly => t,
                        PairScore::Metric(_) if t == 0.0 => 0.0,
                        PairScore::Metric(m) => t * m.score(ps, &g.sentence),
                    }
                })
                .collect()
        })
        .collect();
    soda_from_scores(&scores, gt.steps.len())
}
