use std::fs;
use std::path::{Path, PathBuf};

use recipegen::model::{ModelConfig, Variant};
use recipegen::nn::OptimizerConfig;
use recipegen::synth::WorldConfig;
use recipegen::train::TrainingConfig;
use recipegen::{Error, Result};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Preset {
    Toy,
    Full,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ActionsConfig {
    /// One action per line; `null` uses the world's action verbs.
    pub lexicon_path: Option<PathBuf>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PathsConfig {
    pub dataset: Option<PathBuf>,
    pub checkpoint: Option<PathBuf>,
    pub out: Option<PathBuf>,
}

/// Everything a command may need. Every section is optional in the file
/// and falls back to its defaults; command-line flags override keys.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExperimentConfig {
    /// When set, replaces the model's hidden/heads/ffn sizes.
    pub preset: Option<Preset>,
    pub world: WorldConfig,
    pub model: ModelConfig,
    pub optimizer: OptimizerConfig,
    pub training: TrainingConfig,
    pub actions: ActionsConfig,
    pub paths: PathsConfig,
}

impl ExperimentConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        serde_json::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
    }

    pub fn load_or_default(path: Option<&Path>) -> Result<Self> {
        match path {
            Some(p) => Self::load(p),
            None => Ok(Self::default()),
        }
    }

    /// Model config with the preset applied.
    pub fn model_config(&self, variant: Option<Variant>, feature_dim: usize) -> ModelConfig {
        let mut m = self.model.clone();
        if let Some(p) = self.preset {
            let base = match p {
                Preset::Toy => ModelConfig::toy(feature_dim),
                Preset::Full => ModelConfig::full(feature_dim),
            };
            m.hidden = base.hidden;
            m.heads = base.heads;
            m.ffn = base.ffn;
        }
        m.feature_dim = feature_dim;
        if let Some(v) = variant {
            m.variant = v;
        }
        m
    }

    pub fn lexicon(&self) -> Result<Vec<String>> {
        match &self.actions.lexicon_path {
            None => Ok(self.world.lexicon()),
            Some(p) => {
                let text = fs::read_to_string(p).map_err(|e| Error::io(p, e))?;
                let words: Vec<String> = text
                    .lines()
                    .map(str::trim)
                    .filter(|l| !l.is_empty() && !l.starts_with('#'))
                    .map(str::to_string)
                    .collect();
                if words.is_empty() {
                    return Err(Error::Config(format!("{}: action lexicon is empty", p.display())));
                }
                Ok(words)
            }
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.world.validate()?;
        self.optimizer.validate()?;
        self.training.validate()?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_object_is_all_defaults() {
        let c: ExperimentConfig = serde_json::from_str("{}").unwrap();
        assert_eq!(c, ExperimentConfig::default());
        assert_eq!(c.training.early_stop_metric, "soda.cider_d");
        c.validate().unwrap();
    }

    #[test]
    fn unknown_keys_rejected() {
        assert!(serde_json::from_str::<ExperimentConfig>(r#"{"trainin": {}}"#).is_err());
        assert!(serde_json::from_str::<ExperimentConfig>(r#"{"training": {"epochs": 3}}"#).is_err());
    }

    #[test]
    fn preset_and_variant_override() {
        let c: ExperimentConfig = serde_json::from_str(r#"{"preset": "full", "model": {"hidden": 8}}"#).unwrap();
        let m = c.model_config(Some(Variant::BIV), 12);
        assert_eq!((m.hidden, m.heads, m.feature_dim, m.variant), (768, 12, 12, Variant::BIV));
    }

    #[test]
    fn committed_default_file_matches_defaults() {
        let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs/default.json");
        assert_eq!(ExperimentConfig::load(&path).unwrap(), ExperimentConfig::default());
    }
}
