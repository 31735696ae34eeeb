use super::tiou;
use crate::data::{GroundTruthRecipe, PredictionRecipe};
use crate::metrics::SentenceMetric;

pub const DVC_THRESHOLDS: [f64; 4] = [0.3, 0.5, 0.7, 0.9];

/// Threshold-averaged pair score given precomputed tIoU and sentence scores
/// (`tious[i][j]`, `scores[i][j]` for prediction i and reference j).
///
/// For each threshold, pairs with tIoU strictly above it are averaged (0 when
/// none qualify); the result is the mean over thresholds.
pub fn dvc_eval_scores(tious: &[Vec<f64>], scores: &[Vec<f64>], thresholds: &[f64]) -> f64 {
    if thresholds.is_empty() {
        return 0.0;
    }
    let mut total = 0.0;
    for &theta in thresholds {
        let mut sum = 0.0;
        let mut count = 0usize;
        for (trow, srow) in tious.iter().zip(scores) {
            for (&t, &s) in trow.iter().zip(srow) {
                if t > theta {
                    sum += s;
                    count += 1;
                }
            }
        }
        if count > 0 {
            total += sum / count as f64;
        }
    }
    total / thresholds.len() as f64
}

pub fn dvc_eval(pred: &PredictionRecipe, gt: &GroundTruthRecipe, metric: &dyn SentenceMetric) -> f64 {
    let tious: Vec<Vec<f64>> = pred
        .intervals
        .iter()
        .map(|p| gt.steps.iter().map(|g| tiou(p, &g.interval)).collect())
        .collect();
    // Sentence scores are only needed where some threshold can be met.
    let min_theta = DVC_THRESHOLDS.iter().copied().fold(f64::INFINITY, f64::min);
    let scores: Vec<Vec<f64>> = pred
        .sentences
        .iter()
        .enumerate()
        .map(|(i, ps)| {
            gt.steps
                .iter()
                .enumerate()
                .map(|(j, g)| {
                    if tious[i][j] > min_theta {
                        metric.score(ps, &g.sentence)
                    } else {
                        0.0
                    }
                })
                .collect()
        })
        .collect();
    dvc_eval_scores(&tious, &scores, &DVC_THRESHOLDS)
}
