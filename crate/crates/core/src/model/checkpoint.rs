use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::{ModelConfig, RecipeModel};
use crate::error::{Error, Result};
use crate::nn::{AdamState, NamedArray, OptimizerConfig};
use crate::vocab::Vocabulary;

pub const CHECKPOINT_FORMAT: &str = "recipegen-checkpoint-v1";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OptimizerSnapshot {
    pub config: OptimizerConfig,
    pub step: u64,
    pub m: Vec<NamedArray>,
    pub v: Vec<NamedArray>,
}

/// Everything needed to rebuild a model and resume its training.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Checkpoint {
    pub format: String,
    pub config: ModelConfig,
    pub config_hash: String,
    pub seed: u64,
    pub vocab: Vocabulary,
    pub lexicon: Vec<String>,
    pub params: Vec<NamedArray>,
    pub optimizer: Option<OptimizerSnapshot>,
    /// Number of completed epochs.
    pub epoch: usize,
}

/// Hex SHA-256 of the canonical JSON form of `config`.
pub fn config_hash(config: &ModelConfig) -> String {
    let json = serde_json::to_string(config).expect("config serializes");
    format!("{:x}", Sha256::digest(json.as_bytes()))
}

impl Checkpoint {
    pub fn save(&self, path: &Path) -> Result<()> {
        if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
            fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        }
        fs::write(path, serde_json::to_string(self)?).map_err(|e| Error::io(path, e))?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let ck: Checkpoint = serde_json::from_str(&text)?;
        if ck.format != CHECKPOINT_FORMAT {
            return Err(Error::validation(
                path.display().to_string(),
                "format",
                format!("unsupported checkpoint format `{}`", ck.format),
            ));
        }
        Ok(ck)
    }

    /// Optimizer state matching `model`, if one was saved.
    pub fn optimizer_state(&self, model: &RecipeModel) -> Result<Option<(OptimizerConfig, AdamState)>> {
        self.optimizer
            .as_ref()
            .map(|o| Ok((o.config, AdamState::from_named(&model.params, o.step, &o.m, &o.v)?)))
            .transpose()
    }
}

impl RecipeModel {
    pub fn to_checkpoint(&self, optimizer: Option<(&OptimizerConfig, &AdamState)>, epoch: usize) -> Checkpoint {
        let optimizer = optimizer.map(|(config, state)| {
            let (m, v) = state.to_named(&self.params);
            OptimizerSnapshot {
                config: *config,
                step: state.step,
                m,
                v,
            }
        });
        Checkpoint {
            format: CHECKPOINT_FORMAT.to_string(),
            config: self.config.clone(),
            config_hash: config_hash(&self.config),
            seed: self.seed,
            vocab: self.vocab.clone(),
            lexicon: self.lexicon.clone(),
            params: self.params.to_named(),
            optimizer,
            epoch,
        }
    }

    /// Rebuilds the model; fails if the stored hash does not match the
    /// stored config or any parameter is missing or misshapen.
    pub fn from_checkpoint(ck: &Checkpoint) -> Result<Self> {
        let hash = config_hash(&ck.config);
        if hash != ck.config_hash {
            return Err(Error::validation(
                "checkpoint",
                "config_hash",
                format!("stored hash {} does not match the config ({hash})", ck.config_hash),
            ));
        }
        let mut model = RecipeModel::new(ck.config.clone(), ck.vocab.clone(), ck.lexicon.clone(), ck.seed)?;
        if ck.params.len() != model.params.len() {
            return Err(Error::validation(
                "checkpoint",
                "params",
                format!("{} parameters stored, model expects {}", ck.params.len(), model.params.len()),
            ));
        }
        model.params.load_named(&ck.params)?;
        Ok(model)
    }

    /// Errors when `vocab` differs from the one the model was trained with.
    pub fn check_vocab(&self, vocab: &Vocabulary) -> Result<()> {
        if &self.vocab != vocab {
            return Err(Error::validation(
                "checkpoint",
                "vocab",
                format!("checkpoint has {} tokens, given vocabulary has {}", self.vocab.len(), vocab.len()),
            ));
        }
        Ok(())
    }
}
