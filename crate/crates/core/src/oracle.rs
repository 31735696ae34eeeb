//! Oracle selection: for every reference step, the candidate with maximum
//! tIoU. Gives an upper bound on what any selector can reach from a given
//! candidate set, plus the random-selection baseline used as a floor.

use std::collections::BTreeSet;

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::data::{DatasetRecord, EventCandidateSet, GroundTruthRecipe, PredictionRecipe};
use crate::error::{Error, Result};
use crate::eval::{evaluate_corpus, tiou, MetricReport};

pub const HISTOGRAM_BINS: usize = 10;

#[derive(Debug, Clone, PartialEq)]
pub struct OracleAssignment {
    /// Chosen candidate per reference step.
    pub indices: Vec<usize>,
    pub tious: Vec<f64>,
}

impl OracleAssignment {
    /// Number of steps whose candidate was already chosen for an earlier step.
    pub fn duplicate_assignments(&self) -> usize {
        let distinct: BTreeSet<usize> = self.indices.iter().copied().collect();
        self.indices.len() - distinct.len()
    }

    pub fn mean_tiou(&self) -> f64 {
        if self.tious.is_empty() {
            0.0
        } else {
            self.tious.iter().sum::<f64>() / self.tious.len() as f64
        }
    }
}

/// Independent argmax per step; ties go to the earliest start, then the
/// lowest index. Candidates may be reused across steps.
pub fn oracle_select(candidates: &EventCandidateSet, gt: &GroundTruthRecipe) -> Result<OracleAssignment> {
    if candidates.is_empty() {
        return Err(Error::InvalidArgument(format!(
            "oracle selection for `{}` needs at least one candidate",
            gt.video_id
        )));
    }
    let mut indices = Vec::with_capacity(gt.steps.len());
    let mut tious = Vec::with_capacity(gt.steps.len());
    for step in &gt.steps {
        let mut best = 0;
        let mut best_t = tiou(&candidates.events[0], &step.interval);
        for (i, ev) in candidates.events.iter().enumerate().skip(1) {
            let t = tiou(ev, &step.interval);
            let better = t > best_t || (t == best_t && ev.start < candidates.events[best].start);
            if better {
                best = i;
                best_t = t;
            }
        }
        indices.push(best);
        tious.push(best_t);
    }
    Ok(OracleAssignment { indices, tious })
}

/// Where oracle predictions take their sentences from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SentenceSource {
    /// Captions attached to the candidates; falls back to the reference
    /// sentence (and flags the video) when a candidate has none.
    Attached,
    /// Reference sentences, isolating selection quality.
    GtSentences,
}

impl SentenceSource {
    pub fn as_str(&self) -> &'static str {
        match self {
            SentenceSource::Attached => "attached",
            SentenceSource::GtSentences => "gt-sentences",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OracleReport {
    pub mode: SentenceSource,
    pub mean_tiou: f64,
    /// Counts of per-step oracle tIoU in bins of width 0.1 (last bin closed).
    pub histogram: Vec<usize>,
    pub duplicate_assignments: usize,
    /// Videos where attached mode had to fall back to reference sentences.
    pub fallback_videos: Vec<String>,
    pub metrics: MetricReport,
}

pub fn histogram_bin(t: f64) -> usize {
    ((t * HISTOGRAM_BINS as f64).floor() as usize).min(HISTOGRAM_BINS - 1)
}

pub fn oracle_prediction(
    record: &DatasetRecord,
    assignment: &OracleAssignment,
    mode: SentenceSource,
) -> (PredictionRecipe, bool) {
    let mut fell_back = false;
    let mut pred = PredictionRecipe::empty(record.video_id());
    for (step, &idx) in record.recipe.steps.iter().zip(&assignment.indices) {
        let sentence = match (mode, &record.candidates.sentences) {
            (SentenceSource::Attached, Some(s)) if !s[idx].is_empty() => s[idx].clone(),
            (SentenceSource::Attached, _) => {
                fell_back = true;
                step.sentence.clone()
            }
            (SentenceSource::GtSentences, _) => step.sentence.clone(),
        };
        pred.selections.push(idx);
        pred.intervals.push(record.candidates.events[idx]);
        pred.sentences.push(sentence);
    }
    (pred, fell_back)
}

pub fn oracle_report(dataset: &[DatasetRecord], mode: SentenceSource) -> Result<OracleReport> {
    let mut histogram = vec![0usize; HISTOGRAM_BINS];
    let mut tiou_sum = 0.0;
    let mut steps = 0usize;
    let mut duplicates = 0usize;
    let mut fallback_videos = Vec::new();
    let mut predictions = Vec::with_capacity(dataset.len());
    for rec in dataset {
        let a = oracle_select(&rec.candidates, &rec.recipe)?;
        for &t in &a.tious {
            histogram[histogram_bin(t)] += 1;
            tiou_sum += t;
        }
        steps += a.tious.len();
        duplicates += a.duplicate_assignments();
        let (pred, fell_back) = oracle_prediction(rec, &a, mode);
        if fell_back {
            fallback_videos.push(rec.video_id().to_owned());
        }
        predictions.push(pred);
    }
    let references: Vec<GroundTruthRecipe> = dataset.iter().map(|r| r.recipe.clone()).collect();
    let mut metrics = evaluate_corpus(&predictions, &references)?;
    metrics.metadata.insert("oracle_sentence_mode".into(), mode.as_str().into());
    Ok(OracleReport {
        mode,
        mean_tiou: if steps == 0 { 0.0 } else { tiou_sum / steps as f64 },
        histogram,
        duplicate_assignments: duplicates,
        fallback_videos,
        metrics,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub n_candidates: usize,
    pub mean_tiou: f64,
    pub report: OracleReport,
}

/// Oracle report per candidate budget, restricting each video to its first
/// `n` candidates in generation order (so budgets are nested).
pub fn oracle_sweep(dataset: &[DatasetRecord], ns: &[usize], mode: SentenceSource) -> Result<Vec<SweepRow>> {
    ns.iter()
        .map(|&n| {
            let restricted: Vec<DatasetRecord> =
                dataset.iter().map(|r| r.with_candidate_limit(n)).collect();
            let report = oracle_report(&restricted, mode)?;
            Ok(SweepRow {
                n_candidates: n,
                mean_tiou: report.mean_tiou,
                report,
            })
        })
        .collect()
}

/// Baseline that ignores the video: picks `k` distinct candidates uniformly
/// at random (k uniform in `count_range`, capped at N) and orders them by
/// start time. Sentences are left empty.
pub fn random_selection<R: Rng + ?Sized>(
    record: &DatasetRecord,
    count_range: (usize, usize),
    rng: &mut R,
) -> PredictionRecipe {
    let n = record.candidates.len();
    let (lo, hi) = count_range;
    let k = rng.gen_range(lo.min(hi)..=hi.max(lo)).min(n);
    let mut idx: Vec<usize> = (0..n).collect();
    idx.shuffle(rng);
    idx.truncate(k);
    idx.sort_unstable();
    let mut pred = PredictionRecipe::empty(record.video_id());
    for i in idx {
        pred.selections.push(i);
        pred.intervals.push(record.candidates.events[i]);
        pred.sentences.push(Vec::new());
    }
    pred
}

/// Random selections for every record, with k drawn from the range of
/// reference step counts in `records`.
pub fn random_baseline<R: Rng + ?Sized>(records: &[DatasetRecord], rng: &mut R) -> Vec<PredictionRecipe> {
    let counts = records.iter().map(|r| r.recipe.steps.len());
    let range = (counts.clone().min().unwrap_or(0), counts.max().unwrap_or(0));
    records.iter().map(|r| random_selection(r, range, rng)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{tokenize, RecipeStep, TimedEvent};
    use crate::eval::{soda, PairScore};
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn ev(s: f64, e: f64) -> TimedEvent {
        TimedEvent::new(s, e).unwrap()
    }

    fn recipe(intervals: &[TimedEvent]) -> GroundTruthRecipe {
        GroundTruthRecipe {
            video_id: "v".into(),
            duration: 100.0,
            steps: intervals
                .iter()
                .map(|&interval| RecipeStep { interval, sentence: tokenize("stir the soup") })
                .collect(),
            ingredients: vec![],
        }
    }

    fn candidates(events: Vec<TimedEvent>) -> EventCandidateSet {
        let n = events.len();
        EventCandidateSet::new(events, vec![vec![0.0]; n]).unwrap()
    }

    #[test]
    fn exact_candidates_are_picked() {
        let gt = [ev(0.0, 5.0), ev(6.0, 9.0)];
        let c = candidates(vec![ev(0.0, 5.0), ev(1.0, 7.0), ev(6.0, 9.0)]);
        let a = oracle_select(&c, &recipe(&gt)).unwrap();
        assert_eq!(a.indices, vec![0, 2]);
        assert_eq!(a.tious, vec![1.0, 1.0]);
    }

    #[test]
    fn single_candidate_maps_everything_to_zero() {
        let c = candidates(vec![ev(2.0, 3.0)]);
        let a = oracle_select(&c, &recipe(&[ev(0.0, 1.0), ev(5.0, 6.0)])).unwrap();
        assert_eq!(a.indices, vec![0, 0]);
        assert_eq!(a.duplicate_assignments(), 1);
    }

    #[test]
    fn ties_prefer_earliest_start() {
        // both candidates have tIoU 0.5 with [2, 4]
        let c = candidates(vec![ev(0.0, 4.0), ev(2.0, 6.0)]);
        let a = oracle_select(&c, &recipe(&[ev(2.0, 4.0)])).unwrap();
        assert_eq!(a.indices, vec![0]);
    }

    #[test]
    fn empty_candidates_error() {
        let c = EventCandidateSet::new(vec![], vec![]).unwrap();
        assert!(oracle_select(&c, &recipe(&[ev(0.0, 1.0)])).is_err());
    }

    #[test]
    fn report_on_perfect_candidates() {
        let gt = recipe(&[ev(0.0, 5.0), ev(6.0, 9.0)]);
        let rec = DatasetRecord { candidates: candidates(gt.intervals()), recipe: gt };
        let r = oracle_report(&[rec], SentenceSource::GtSentences).unwrap();
        assert_eq!(r.mean_tiou, 1.0);
        assert_eq!(r.metrics.get("soda.tiou"), Some(1.0));
        assert_eq!(r.histogram[9], 2);
        assert!(r.fallback_videos.is_empty());

        let rec2 = DatasetRecord { candidates: candidates(recipe(&[ev(0.0, 5.0)]).intervals()), recipe: recipe(&[ev(0.0, 5.0)]) };
        let r2 = oracle_report(&[rec2], SentenceSource::Attached).unwrap();
        assert_eq!(r2.fallback_videos, vec!["v".to_string()]);
    }

    #[test]
    fn histogram_bins() {
        assert_eq!(histogram_bin(0.0), 0);
        assert_eq!(histogram_bin(0.35), 3);
        assert_eq!(histogram_bin(1.0), 9);
    }

    fn arb_events(max: usize) -> impl Strategy<Value = Vec<TimedEvent>> {
        proptest::collection::vec((0.0f64..90.0, 0.5f64..20.0), 1..max).prop_map(|v| {
            let mut evs: Vec<TimedEvent> = v.into_iter().map(|(s, l)| ev(s, s + l)).collect();
            evs.sort_by(|a, b| a.start.partial_cmp(&b.start).unwrap());
            evs
        })
    }

    proptest! {
        #[test]
        fn per_step_tiou_is_brute_force_max(c in arb_events(12), g in arb_events(6)) {
            let cands = candidates(c.clone());
            let gt = recipe(&g);
            let a = oracle_select(&cands, &gt).unwrap();
            for (j, step) in g.iter().enumerate() {
                let best = c.iter().map(|e| tiou(e, step)).fold(0.0, f64::max);
                prop_assert_eq!(a.tious[j], best);
            }
        }

        #[test]
        fn superset_never_lowers_mean_tiou(c in arb_events(12), g in arb_events(6), k in 1usize..12) {
            let full = candidates(c.clone());
            let mut sub = full.clone();
            sub.ranks = (0..c.len()).collect();
            let sub = sub.restrict(k.min(c.len()));
            let gt = recipe(&g);
            let a_sub = oracle_select(&sub, &gt).unwrap();
            let a_full = oracle_select(&full, &gt).unwrap();
            prop_assert!(a_full.mean_tiou() >= a_sub.mean_tiou());
        }

        #[test]
        fn oracle_beats_other_selections_of_same_size(c in arb_events(10), g in arb_events(5), seed in 0u64..1000) {
            let cands = candidates(c);
            let gt = recipe(&g);
            let rec = DatasetRecord { candidates: cands, recipe: gt.clone() };
            let a = oracle_select(&rec.candidates, &gt).unwrap();
            let (oracle_pred, _) = oracle_prediction(&rec, &a, SentenceSource::GtSentences);
            let oracle_f1 = soda(&oracle_pred, &gt, &PairScore::TiouOnly).f1;
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let k = gt.steps.len();
            let mut other = random_selection(&rec, (k, k), &mut rng);
            other.sentences = gt.sentences().into_iter().take(other.len()).collect();
            if other.len() == k {
                prop_assert!(soda(&other, &gt, &PairScore::TiouOnly).f1 <= oracle_f1 + 1e-12);
            }
        }
    }

    #[test]
    fn random_baseline_is_sorted_and_distinct() {
        let c = candidates((0..20).map(|i| ev(i as f64, i as f64 + 3.0)).collect());
        let rec = DatasetRecord { candidates: c, recipe: recipe(&[ev(0.0, 1.0)]) };
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..20 {
            let p = random_selection(&rec, (3, 12), &mut rng);
            assert!((3..=12).contains(&p.len()));
            assert!(p.selections.windows(2).all(|w| w[0] < w[1]));
        }
    }
}
