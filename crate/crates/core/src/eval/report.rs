use std::collections::{BTreeMap, HashMap};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{dvc_eval, event_count_stats, soda, PairScore};
use crate::data::{write_json, GroundTruthRecipe, PredictionRecipe};
use crate::error::{Error, Result};
use crate::metrics::{build_df, Bleu4, CiderD, MeteorLite, SentenceMetric, CIDER_SIGMA};

pub const COUNT_ETAS: [usize; 4] = [0, 1, 2, 3];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VideoReport {
    pub video_id: String,
    pub predicted_steps: usize,
    pub reference_steps: usize,
    pub metrics: BTreeMap<String, f64>,
}

/// Corpus metrics keyed by name (`dvc_eval.bleu4`, `soda.tiou`, ...), the
/// per-video breakdown and metadata describing metric variants.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub metrics: BTreeMap<String, f64>,
    pub per_video: Vec<VideoReport>,
    pub metadata: BTreeMap<String, String>,
}

impl MetricReport {
    pub fn get(&self, key: &str) -> Option<f64> {
        self.metrics.get(key).copied()
    }

    pub fn to_json(&self) -> Result<String> {
        let mut s = serde_json::to_string_pretty(self)?;
        s.push('\n');
        Ok(s)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        write_json(path, self)
    }
}

fn metadata() -> BTreeMap<String, String> {
    [
        ("meteor_variant", "exact-lite"),
        ("bleu_smoothing", "add-one (orders 2-4), sentence level"),
        ("cider_sigma", "6"),
        ("dvc_eval_threshold_rule", "tiou > theta, theta in {0.3,0.5,0.7,0.9}"),
        ("soda_reference_mode", "single-reference"),
        ("soda_tiou_statistic", "f1"),
        ("count_stats_unit", "percent"),
    ]
    .into_iter()
    .map(|(k, v)| (k.to_owned(), v.to_owned()))
    .collect()
}

/// Scores every prediction against the reference recipe with the same id.
///
/// CIDEr-D document frequencies are computed over the evaluated references,
/// one document per video.
pub fn evaluate_corpus(
    predictions: &[PredictionRecipe],
    references: &[GroundTruthRecipe],
) -> Result<MetricReport> {
    let by_id: HashMap<&str, &GroundTruthRecipe> =
        references.iter().map(|r| (r.video_id.as_str(), r)).collect();
    let pred_ids: HashMap<&str, &PredictionRecipe> =
        predictions.iter().map(|p| (p.video_id.as_str(), p)).collect();
    let mut unmatched: Vec<&str> = predictions
        .iter()
        .map(|p| p.video_id.as_str())
        .filter(|id| !by_id.contains_key(id))
        .chain(
            references
                .iter()
                .map(|r| r.video_id.as_str())
                .filter(|id| !pred_ids.contains_key(id)),
        )
        .collect();
    if !unmatched.is_empty() || pred_ids.len() != predictions.len() {
        unmatched.sort_unstable();
        return Err(Error::InvalidArgument(format!(
            "predictions and references do not align; unmatched or duplicate video ids: [{}]",
            unmatched.join(", ")
        )));
    }

    let mut metrics: BTreeMap<String, f64> = [
        "dvc_eval.bleu4",
        "dvc_eval.meteor",
        "dvc_eval.cider_d",
        "soda.meteor",
        "soda.cider_d",
        "soda.tiou",
    ]
    .into_iter()
    .map(|k| (k.to_owned(), 0.0))
    .collect();
    for eta in COUNT_ETAS {
        metrics.insert(format!("count_stats.eta{eta}"), 0.0);
    }
    if predictions.is_empty() {
        return Ok(MetricReport {
            metrics,
            per_video: Vec::new(),
            metadata: metadata(),
        });
    }

    let df = build_df(&references.iter().map(|r| r.sentences()).collect::<Vec<_>>())?;
    let cider = CiderD {
        df: &df,
        sigma: CIDER_SIGMA,
    };
    let sentence_metrics: [(&str, &dyn SentenceMetric); 3] =
        [("bleu4", &Bleu4), ("meteor", &MeteorLite), ("cider_d", &cider)];

    let mut ordered: Vec<&PredictionRecipe> = predictions.iter().collect();
    ordered.sort_by(|a, b| a.video_id.cmp(&b.video_id));

    let mut per_video = Vec::with_capacity(ordered.len());
    let mut counts = Vec::with_capacity(ordered.len());
    for pred in ordered {
        let gt = by_id[pred.video_id.as_str()];
        let mut m = BTreeMap::new();
        for (name, metric) in sentence_metrics {
            m.insert(format!("dvc_eval.{name}"), dvc_eval(pred, gt, metric));
        }
        m.insert("soda.meteor".into(), soda(pred, gt, &PairScore::Metric(&MeteorLite)).f1);
        m.insert("soda.cider_d".into(), soda(pred, gt, &PairScore::Metric(&cider)).f1);
        m.insert("soda.tiou".into(), soda(pred, gt, &PairScore::TiouOnly).f1);
        counts.push((pred.len(), gt.steps.len()));
        per_video.push(VideoReport {
            video_id: pred.video_id.clone(),
            predicted_steps: pred.len(),
            reference_steps: gt.steps.len(),
            metrics: m,
        });
    }

    let n = per_video.len() as f64;
    for (key, value) in metrics.iter_mut() {
        if key.starts_with("count_stats") {
            continue;
        }
        *value = per_video.iter().map(|v| v.metrics[key]).sum::<f64>() / n;
    }
    for (eta, pct) in event_count_stats(&counts, &COUNT_ETAS) {
        metrics.insert(format!("count_stats.eta{eta}"), pct);
    }

    Ok(MetricReport {
        metrics,
        per_video,
        metadata: metadata(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{tokenize, RecipeStep, TimedEvent};

    fn recipe(id: &str) -> GroundTruthRecipe {
        GroundTruthRecipe {
            video_id: id.into(),
            duration: 30.0,
            steps: vec![
                RecipeStep { interval: TimedEvent::new(0.0, 8.0).unwrap(), sentence: tokenize("chop the onion") },
                RecipeStep { interval: TimedEvent::new(10.0, 20.0).unwrap(), sentence: tokenize("fry the chopped onion") },
            ],
            ingredients: vec!["onion".into()],
        }
    }

    #[test]
    fn perfect_predictions() {
        let refs = vec![recipe("a"), recipe("b")];
        let preds: Vec<_> = refs.iter().map(PredictionRecipe::from_ground_truth).collect();
        let r = evaluate_corpus(&preds, &refs).unwrap();
        assert_eq!(r.get("soda.tiou"), Some(1.0));
        assert_eq!(r.get("dvc_eval.bleu4"), Some(1.0));
        assert_eq!(r.get("count_stats.eta0"), Some(100.0));
        assert_eq!(r.per_video.len(), 2);
    }

    #[test]
    fn empty_corpus_is_all_zero() {
        let r = evaluate_corpus(&[], &[]).unwrap();
        assert!(r.metrics.values().all(|&v| v == 0.0));
        assert_eq!(r.metrics.len(), 10);
    }

    #[test]
    fn unmatched_ids_are_listed() {
        let refs = vec![recipe("a")];
        let preds = vec![PredictionRecipe::empty("zz")];
        let err = evaluate_corpus(&preds, &refs).unwrap_err().to_string();
        assert!(err.contains("zz") && err.contains('a'));
    }

    #[test]
    fn empty_recipe_scores_zero() {
        let refs = vec![recipe("a")];
        let r = evaluate_corpus(&[PredictionRecipe::empty("a")], &refs).unwrap();
        assert_eq!(r.get("soda.tiou"), Some(0.0));
        assert_eq!(r.get("dvc_eval.cider_d"), Some(0.0));
        assert_eq!(r.get("count_stats.eta1"), Some(0.0));
        assert_eq!(r.get("count_stats.eta2"), Some(100.0));
    }
}
