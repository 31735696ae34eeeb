use std::path::{Path, PathBuf};

use log::info;
use recipegen::data::{load_dataset, write_json, DatasetRecord};
use recipegen::model::{Checkpoint, RecipeModel, Variant};
use recipegen::train::{build_vocab, limit_candidates, log_to_csv, split_dataset, FitSummary, Trainer};
use recipegen::{Error, Result};

use super::{emit, required, CliError, CliResult};
use crate::cli::Common;
use crate::config::ExperimentConfig;

/// The token list written next to a checkpoint.
pub fn vocab_path(checkpoint: &Path) -> PathBuf {
    checkpoint.with_extension("vocab.json")
}

fn log_path(checkpoint: &Path) -> PathBuf {
    checkpoint.with_extension("log.csv")
}

pub(crate) fn feature_dim(records: &[DatasetRecord]) -> Result<usize> {
    records
        .iter()
        .find(|r| !r.candidates.is_empty())
        .map(|r| r.candidates.feature_dim())
        .ok_or_else(|| Error::validation("dataset", "candidates", "no video has candidates"))
}

/// Fresh model for `train`, with the vocabulary built from the training split.
pub(crate) fn fresh_model(cfg: &ExperimentConfig, variant: Option<Variant>, train: &[DatasetRecord]) -> Result<RecipeModel> {
    let model_cfg = cfg.model_config(variant, feature_dim(train)?);
    let vocab = build_vocab(train, cfg.training.vocab_min_count)?;
    RecipeModel::new(model_cfg, vocab, cfg.lexicon()?, cfg.training.seed)
}

/// Applies the candidate limit and the train/validation split.
pub(crate) fn prepare(cfg: &ExperimentConfig, records: &[DatasetRecord]) -> (Vec<DatasetRecord>, Vec<DatasetRecord>) {
    let limited = limit_candidates(records, cfg.training.n_candidates);
    split_dataset(&limited, cfg.training.val_fraction)
}

pub(crate) fn run(
    trainer: &mut Trainer,
    train: &[DatasetRecord],
    val: &[DatasetRecord],
    log_out: Option<&Path>,
) -> Result<FitSummary> {
    let mut rows = Vec::new();
    trainer.fit(train, val, |row, _| {
        rows.push(row.clone());
        if let Some(p) = log_out {
            std::fs::write(p, log_to_csv(&rows)).map_err(|e| Error::io(p, e))?;
        }
        Ok(())
    })
}

#[allow(clippy::too_many_arguments)]
pub fn train(
    common: &Common,
    dataset: Option<PathBuf>,
    checkpoint: Option<PathBuf>,
    out: Option<PathBuf>,
    variant: Option<Variant>,
    n_candidates: Option<usize>,
    resume: Option<PathBuf>,
) -> CliResult {
    let mut cfg = ExperimentConfig::load_or_default(common.config.as_deref())?;
    if let Some(s) = common.seed {
        cfg.training.seed = s;
    }
    if n_candidates.is_some() {
        cfg.training.n_candidates = n_candidates;
    }
    cfg.validate()?;
    let dataset = required(dataset, &cfg.paths.dataset, "dataset")?;
    let ck_path = required(checkpoint, &cfg.paths.checkpoint, "checkpoint")?;
    let log_out = out.unwrap_or_else(|| log_path(&ck_path));
    if let Some(dir) = ck_path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }

    let records = load_dataset(&dataset)?;
    if records.is_empty() {
        return Err(Error::validation("dataset", "records", "dataset is empty").into());
    }
    let (train, val) = prepare(&cfg, &records);
    if train.is_empty() {
        return Err(Error::validation("dataset", "records", "validation split left no training videos").into());
    }

    let mut trainer = match &resume {
        Some(p) => {
            let ck = Checkpoint::load(p)?;
            let model = RecipeModel::from_checkpoint(&ck)?;
            if variant.is_some_and(|v| v != model.variant()) {
                return Err(CliError::Usage(format!(
                    "--variant does not match the checkpoint's variant {}",
                    model.variant()
                )));
            }
            let (opt, state) = match ck.optimizer_state(&model)? {
                Some(s) => s,
                None => (cfg.optimizer, recipegen::nn::AdamState::new(&model.params)),
            };
            info!("resuming from {} after epoch {}", p.display(), ck.epoch);
            Trainer::resume(model, opt, state, cfg.training.clone(), ck.epoch)?
        }
        None => Trainer::new(fresh_model(&cfg, variant, &train)?, cfg.optimizer, cfg.training.clone())?,
    };
    info!(
        "training {} ({} parameters) on {} videos, validating on {}",
        trainer.model.variant(),
        trainer.model.num_parameters(),
        train.len(),
        val.len()
    );

    let summary = run(&mut trainer, &train, &val, Some(&log_out))?;
    if summary.log.is_empty() {
        emit(Some(&log_out), &log_to_csv(&[]))?;
    }
    let ck = trainer
        .model
        .to_checkpoint(Some((&trainer.optimizer, &trainer.state)), trainer.epoch);
    ck.save(&ck_path)?;
    write_json(&vocab_path(&ck_path), &trainer.model.vocab)?;
    if let (Some(e), Some(m)) = (summary.best_epoch, summary.best_metric) {
        info!("best {} = {m:.4} at epoch {e}", cfg.training.early_stop_metric);
    }
    info!("wrote {}", ck_path.display());
    Ok(())
}
