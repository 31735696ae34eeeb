use std::fs;
use std::path::PathBuf;

use log::info;
use recipegen::data::{load_dataset, save_predictions};
use recipegen::model::{Checkpoint, RecipeModel, Variant};
use recipegen::train::limit_candidates;
use recipegen::vocab::Vocabulary;
use recipegen::Error;

use super::{required, CliError, CliResult};
use crate::cli::Common;
use crate::config::ExperimentConfig;

#[allow(clippy::too_many_arguments)]
pub fn generate(
    common: &Common,
    checkpoint: Option<PathBuf>,
    dataset: Option<PathBuf>,
    out: Option<PathBuf>,
    variant: Option<Variant>,
    n_candidates: Option<usize>,
    vocab: Option<PathBuf>,
) -> CliResult {
    let cfg = ExperimentConfig::load_or_default(common.config.as_deref())?;
    let ck_path = required(checkpoint, &cfg.paths.checkpoint, "checkpoint")?;
    let dataset = required(dataset, &cfg.paths.dataset, "dataset")?;
    let out = required(out, &cfg.paths.out, "out")?;

    let model = RecipeModel::from_checkpoint(&Checkpoint::load(&ck_path)?)?;
    if variant.is_some_and(|v| v != model.variant()) {
        return Err(CliError::Usage(format!(
            "--variant does not match the checkpoint's variant {}",
            model.variant()
        )));
    }
    if let Some(p) = vocab {
        let text = fs::read_to_string(&p).map_err(|e| Error::io(&p, e))?;
        let v: Vocabulary = serde_json::from_str(&text).map_err(Error::from)?;
        model.check_vocab(&v)?;
    }

    let records = limit_candidates(&load_dataset(&dataset)?, n_candidates.or(cfg.training.n_candidates));
    let dim = model.config.feature_dim;
    if let Some(r) = records.iter().find(|r| !r.candidates.is_empty() && r.candidates.feature_dim() != dim) {
        return Err(Error::validation(
            r.video_id(),
            "candidates.features",
            format!("feature dimension {} does not match the checkpoint's {dim}", r.candidates.feature_dim()),
        )
        .into());
    }
    let preds = model.predict_all(&records)?;
    save_predictions(&out, &preds)?;
    info!("wrote {} recipes to {}", preds.len(), out.display());
    Ok(())
}
