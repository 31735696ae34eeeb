//! Epoch loop: per-video graphs, batch-averaged gradients, Adam with
//! warmup, periodic validation and early stopping on a report metric.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use log::info;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::data::{DatasetRecord, GroundTruthRecipe};
use crate::error::{Error, Result};
use crate::eval::{evaluate_corpus, MetricReport};
use crate::model::{training_labels, LossValues, RecipeModel};
use crate::nn::{adam_step, AdamState, Graph, OptimizerConfig, ParamStore, RngNoise};
use crate::synth::derive_seed;
use crate::vocab::Vocabulary;

/// Keys a report always contains; the early-stop metric must be one of them.
pub const REPORT_KEYS: [&str; 10] = [
    "dvc_eval.bleu4",
    "dvc_eval.meteor",
    "dvc_eval.cider_d",
    "soda.meteor",
    "soda.cider_d",
    "soda.tiou",
    "count_stats.eta0",
    "count_stats.eta1",
    "count_stats.eta2",
    "count_stats.eta3",
];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainingConfig {
    pub batch_size: usize,
    pub max_epochs: usize,
    pub early_stop_metric: String,
    /// Stop after this many validations without improvement.
    pub patience: Option<usize>,
    /// Restore the best validated parameters at the end.
    pub keep_best: bool,
    pub eval_every: usize,
    pub seed: u64,
    /// Candidate limit N applied to every video (nested by rank).
    pub n_candidates: Option<usize>,
    pub val_fraction: f64,
    pub vocab_min_count: usize,
}

impl Default for TrainingConfig {
    fn default() -> Self {
        TrainingConfig {
            batch_size: 16,
            max_epochs: 50,
            early_stop_metric: "soda.cider_d".into(),
            patience: None,
            keep_best: true,
            eval_every: 1,
            seed: 0,
            n_candidates: Some(25),
            val_fraction: 0.2,
            vocab_min_count: 3,
        }
    }
}

impl TrainingConfig {
    pub fn validate(&self) -> Result<()> {
        if self.batch_size == 0 || self.eval_every == 0 {
            return Err(Error::Config("training.batch_size and training.eval_every must be positive".into()));
        }
        if !REPORT_KEYS.contains(&self.early_stop_metric.as_str()) {
            return Err(Error::Config(format!(
                "training.early_stop_metric `{}` is not a report key (one of {})",
                self.early_stop_metric,
                REPORT_KEYS.join(", ")
            )));
        }
        if !(0.0..1.0).contains(&self.val_fraction) {
            return Err(Error::Config("training.val_fraction must lie in [0, 1)".into()));
        }
        if self.n_candidates == Some(0) {
            return Err(Error::Config("training.n_candidates must be positive".into()));
        }
        Ok(())
    }
}

/// True when `video_id` falls in the held-out share, by SHA-256 of the id.
pub fn is_validation(video_id: &str, val_fraction: f64) -> bool {
    let digest = Sha256::digest(video_id.as_bytes());
    let x = u64::from_le_bytes(digest[..8].try_into().expect("8 bytes"));
    (x as f64 / u64::MAX as f64) < val_fraction
}

/// Splits into (train, validation) by id hash; order is preserved.
pub fn split_dataset(records: &[DatasetRecord], val_fraction: f64) -> (Vec<DatasetRecord>, Vec<DatasetRecord>) {
    records
        .iter()
        .cloned()
        .partition(|r| !is_validation(r.video_id(), val_fraction))
}

pub fn limit_candidates(records: &[DatasetRecord], n: Option<usize>) -> Vec<DatasetRecord> {
    match n {
        Some(n) => records.iter().map(|r| r.with_candidate_limit(n)).collect(),
        None => records.to_vec(),
    }
}

/// Vocabulary over training sentences and ingredient names.
pub fn build_vocab(records: &[DatasetRecord], min_count: usize) -> Result<Vocabulary> {
    let mut corpus: Vec<Vec<String>> = Vec::new();
    for r in records {
        corpus.extend(r.recipe.sentences());
        corpus.extend(r.recipe.ingredients.iter().map(|i| crate::data::tokenize(i)));
    }
    Vocabulary::build(&corpus, min_count)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochLog {
    /// 1-based epoch number.
    pub epoch: usize,
    pub loss_event: f64,
    pub loss_sentence: f64,
    pub loss_vsim: f64,
    pub loss_tattn: f64,
    pub loss_total: f64,
    pub validation: Option<BTreeMap<String, f64>>,
}

/// CSV with one row per epoch; validation columns stay empty on epochs
/// without validation.
pub fn log_to_csv(log: &[EpochLog]) -> String {
    let mut out = String::from("epoch,loss_event,loss_sentence,loss_vsim,loss_tattn,loss_total");
    for k in REPORT_KEYS {
        write!(out, ",val.{k}").expect("write to string");
    }
    out.push('\n');
    for row in log {
        write!(
            out,
            "{},{},{},{},{},{}",
            row.epoch, row.loss_event, row.loss_sentence, row.loss_vsim, row.loss_tattn, row.loss_total
        )
        .expect("write to string");
        for k in REPORT_KEYS {
            match row.validation.as_ref().and_then(|v| v.get(k)) {
                Some(v) => write!(out, ",{v}"),
                None => write!(out, ","),
            }
            .expect("write to string");
        }
        out.push('\n');
    }
    out
}

pub fn evaluate_model(model: &RecipeModel, records: &[DatasetRecord]) -> Result<MetricReport> {
    let preds = model.predict_all(records)?;
    let refs: Vec<GroundTruthRecipe> = records.iter().map(|r| r.recipe.clone()).collect();
    evaluate_corpus(&preds, &refs)
}

#[derive(Debug, Clone)]
pub struct Trainer {
    pub model: RecipeModel,
    pub optimizer: OptimizerConfig,
    pub state: AdamState,
    pub config: TrainingConfig,
    /// Completed epochs.
    pub epoch: usize,
    pub best: Option<(usize, f64, ParamStore)>,
    evals_since_best: usize,
}

#[derive(Debug, Clone)]
pub struct FitSummary {
    pub log: Vec<EpochLog>,
    pub best_epoch: Option<usize>,
    pub best_metric: Option<f64>,
    pub stopped_early: bool,
}

impl Trainer {
    pub fn new(model: RecipeModel, optimizer: OptimizerConfig, config: TrainingConfig) -> Result<Self> {
        let state = AdamState::new(&model.params);
        Trainer::resume(model, optimizer, state, config, 0)
    }

    pub fn resume(
        model: RecipeModel,
        optimizer: OptimizerConfig,
        state: AdamState,
        config: TrainingConfig,
        epoch: usize,
    ) -> Result<Self> {
        optimizer.validate()?;
        config.validate()?;
        Ok(Trainer {
            model,
            optimizer,
            state,
            config,
            epoch,
            best: None,
            evals_since_best: 0,
        })
    }

    /// One pass over `records` in a seeded shuffled order. Returns the mean
    /// per-video loss terms.
    pub fn run_epoch(&mut self, records: &[DatasetRecord]) -> Result<LossValues> {
        if records.is_empty() {
            return Err(Error::InvalidArgument("no training videos".into()));
        }
        let unique = self.model.config.no_reselect;
        let labels: Vec<Vec<usize>> = records
            .iter()
            .map(|r| training_labels(r, unique))
            .collect::<Result<_>>()?;
        let e = self.epoch;
        let mut order: Vec<usize> = (0..records.len()).collect();
        order.shuffle(&mut ChaCha8Rng::seed_from_u64(derive_seed(self.config.seed, &format!("shuffle/{e}"))));
        let mut noise = RngNoise(ChaCha8Rng::seed_from_u64(derive_seed(self.config.seed, &format!("gumbel/{e}"))));
        let tau = self.model.config.tau_at(e, self.config.max_epochs);
        let mut sum = LossValues::default();
        for batch in order.chunks(self.config.batch_size) {
            let mut grads = self.model.params.zeros_like();
            for &i in batch {
                let mut g = Graph::new(&self.model.params);
                let losses = self.model.training_loss(&mut g, &records[i], &labels[i], tau, &mut noise)?;
                let v = losses.values(&g);
                if !v.total.is_finite() {
                    return Err(Error::InvalidArgument(format!(
                        "non-finite loss on video {} at epoch {}",
                        records[i].video_id(),
                        e + 1
                    )));
                }
                sum.event += v.event;
                sum.sentence += v.sentence;
                sum.vsim += v.vsim;
                sum.tattn += v.tattn;
                sum.total += v.total;
                g.backward(losses.total).accumulate_into(&mut grads);
            }
            let scale = 1.0 / batch.len() as f64;
            grads.iter_mut().for_each(|g| *g *= scale);
            adam_step(&mut self.model.params, &grads, &self.optimizer, &mut self.state, e);
        }
        self.epoch += 1;
        let n = records.len() as f64;
        Ok(LossValues {
            event: sum.event / n,
            sentence: sum.sentence / n,
            vsim: sum.vsim / n,
            tattn: sum.tattn / n,
            total: sum.total / n,
        })
    }

    /// Trains until `max_epochs` (counting already completed ones) or until
    /// patience runs out. `on_epoch` sees every log row as it is produced.
    pub fn fit(
        &mut self,
        train: &[DatasetRecord],
        val: &[DatasetRecord],
        mut on_epoch: impl FnMut(&EpochLog, &Trainer) -> Result<()>,
    ) -> Result<FitSummary> {
        let mut log = Vec::new();
        let mut stopped_early = false;
        while self.epoch < self.config.max_epochs {
            let losses = self.run_epoch(train)?;
            let due = self.epoch.is_multiple_of(self.config.eval_every) || self.epoch == self.config.max_epochs;
            let validation = if due && !val.is_empty() {
                let report = evaluate_model(&self.model, val)?;
                let score = report
                    .get(&self.config.early_stop_metric)
                    .expect("validated early-stop key");
                if self.best.as_ref().is_none_or(|(_, b, _)| score > *b) {
                    self.best = Some((self.epoch, score, self.model.params.clone()));
                    self.evals_since_best = 0;
                } else {
                    self.evals_since_best += 1;
                }
                Some(report.metrics)
            } else {
                None
            };
            let row = EpochLog {
                epoch: self.epoch,
                loss_event: losses.event,
                loss_sentence: losses.sentence,
                loss_vsim: losses.vsim,
                loss_tattn: losses.tattn,
                loss_total: losses.total,
                validation,
            };
            info!(
                "epoch {} loss {:.4} (event {:.4}, sentence {:.4})",
                row.epoch, row.loss_total, row.loss_event, row.loss_sentence
            );
            on_epoch(&row, self)?;
            log.push(row);
            if self.config.patience.is_some_and(|p| self.evals_since_best >= p) {
                stopped_early = true;
                break;
            }
        }
        if self.config.keep_best {
            if let Some((_, _, params)) = &self.best {
                self.model.params = params.clone();
            }
        }
        Ok(FitSummary {
            log,
            best_epoch: self.best.as_ref().map(|b| b.0),
            best_metric: self.best.as_ref().map(|b| b.1),
            stopped_early,
        })
    }
}
