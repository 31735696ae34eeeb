use std::path::{Path, PathBuf};

use recipegen::data::{load_dataset, load_predictions, GroundTruthRecipe};
use recipegen::eval::evaluate_corpus;

use super::{emit, required, CliResult};
use crate::cli::Common;
use crate::config::ExperimentConfig;

pub fn evaluate(common: &Common, predictions: &Path, dataset: Option<PathBuf>, out: Option<PathBuf>) -> CliResult {
    let cfg = ExperimentConfig::load_or_default(common.config.as_deref())?;
    let dataset = required(dataset, &cfg.paths.dataset, "dataset")?;
    let preds = load_predictions(predictions)?;
    let refs: Vec<GroundTruthRecipe> = load_dataset(&dataset)?.into_iter().map(|r| r.recipe).collect();
    let report = evaluate_corpus(&preds, &refs)?;
    emit(out.or(cfg.paths.out).as_deref(), &report.to_json()?)
}
