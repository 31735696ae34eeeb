use std::path::PathBuf;

use log::info;
use recipegen::data::save_dataset;
use recipegen::synth::generate_world;

use super::{required, CliResult};
use crate::cli::Common;
use crate::config::ExperimentConfig;

pub fn synth(common: &Common, out: Option<PathBuf>, n_candidates: Option<usize>) -> CliResult {
    let mut cfg = ExperimentConfig::load_or_default(common.config.as_deref())?;
    if let Some(s) = common.seed {
        cfg.world.seed = s;
    }
    if let Some(n) = n_candidates {
        cfg.world.n_candidates = n;
    }
    let out = required(out, &cfg.paths.dataset, "out")?;
    let records = generate_world(&cfg.world)?;
    save_dataset(&out, &records)?;
    info!("wrote {} videos to {}", records.len(), out.display());
    Ok(())
}
