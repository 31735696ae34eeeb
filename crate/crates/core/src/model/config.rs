use serde::{Deserialize, Serialize};

use crate::data::{DEFAULT_MAX_SENTENCE_LEN, DEFAULT_MAX_STEPS};
use crate::error::{Error, Result};

/// Model family. Each letter switches on one block: ingredients (I), the
/// visual simulator (V) and textual attention (T).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Variant {
    B,
    BI,
    BIV,
    BIVT,
}

impl Variant {
    pub const ALL: [Variant; 4] = [Variant::B, Variant::BI, Variant::BIV, Variant::BIVT];

    pub fn uses_ingredients(self) -> bool {
        self != Variant::B
    }

    pub fn uses_simulator(self) -> bool {
        matches!(self, Variant::BIV | Variant::BIVT)
    }

    pub fn uses_textual_attention(self) -> bool {
        self == Variant::BIVT
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Variant::B => "B",
            Variant::BI => "BI",
            Variant::BIV => "BIV",
            Variant::BIVT => "BIVT",
        }
    }
}

impl std::fmt::Display for Variant {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for Variant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_uppercase().as_str() {
            "B" => Ok(Variant::B),
            "BI" => Ok(Variant::BI),
            "BIV" => Ok(Variant::BIV),
            "BIVT" => Ok(Variant::BIVT),
            _ => Err(Error::InvalidArgument(format!("unknown variant `{s}` (expected B, BI, BIV or BIVT)"))),
        }
    }
}

/// How the selected event reaches the generator during training.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SelectionMode {
    /// One-hot forward value, soft gradient.
    Hard,
    /// Probability-weighted mixture of event vectors.
    Soft,
}

/// Whether memories and the generator are conditioned on the oracle label
/// or on the model's own sample during training.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Conditioning {
    TeacherForced,
    FreeRunning,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MemoryMode {
    /// Gated exchange between selector and generator memories.
    Mixed,
    /// Each memory only follows its own recurrent update.
    Separate,
}

/// Treatment of items that are not labeled at a step in the simulator loss.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum VsimNegatives {
    Skip,
    NullEvent,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ModelConfig {
    pub variant: Variant,
    pub hidden: usize,
    pub layers: usize,
    pub heads: usize,
    pub ffn: usize,
    pub feature_dim: usize,
    pub memory_slots: usize,
    pub max_steps: usize,
    pub max_sentence_len: usize,
    /// Gumbel temperature at the first epoch.
    pub tau: f64,
    /// Temperature reached at the last epoch (exponential schedule).
    pub tau_final: f64,
    pub selection: SelectionMode,
    pub conditioning: Conditioning,
    pub no_reselect: bool,
    pub memory_mode: MemoryMode,
    pub vsim_negatives: VsimNegatives,
}

impl Default for ModelConfig {
    fn default() -> Self {
        ModelConfig::toy(32)
    }
}

impl ModelConfig {
    /// Desk-scale preset.
    pub fn toy(feature_dim: usize) -> Self {
        ModelConfig {
            variant: Variant::B,
            hidden: 64,
            layers: 2,
            heads: 4,
            ffn: 128,
            feature_dim,
            memory_slots: 1,
            max_steps: DEFAULT_MAX_STEPS,
            max_sentence_len: DEFAULT_MAX_SENTENCE_LEN,
            tau: 1.0,
            tau_final: 1.0,
            selection: SelectionMode::Hard,
            conditioning: Conditioning::TeacherForced,
            no_reselect: true,
            memory_mode: MemoryMode::Mixed,
            vsim_negatives: VsimNegatives::Skip,
        }
    }

    /// Full-size preset: hidden 768, 2 layers, 12 heads.
    pub fn full(feature_dim: usize) -> Self {
        ModelConfig {
            hidden: 768,
            heads: 12,
            ffn: 3072,
            ..ModelConfig::toy(feature_dim)
        }
    }

    pub fn with_variant(mut self, variant: Variant) -> Self {
        self.variant = variant;
        self
    }

    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("hidden", self.hidden),
            ("layers", self.layers),
            ("heads", self.heads),
            ("ffn", self.ffn),
            ("feature_dim", self.feature_dim),
            ("memory_slots", self.memory_slots),
            ("max_steps", self.max_steps),
            ("max_sentence_len", self.max_sentence_len),
        ];
        for (name, v) in positive {
            if v == 0 {
                return Err(Error::Config(format!("model.{name} must be positive")));
            }
        }
        if !self.hidden.is_multiple_of(self.heads) {
            return Err(Error::Config(format!(
                "model.hidden ({}) must be divisible by model.heads ({})",
                self.hidden, self.heads
            )));
        }
        if !(self.tau > 0.0 && self.tau_final > 0.0) {
            return Err(Error::Config("gumbel temperatures must be positive".into()));
        }
        Ok(())
    }

    /// Temperature for `epoch` out of `epochs`, annealed geometrically from
    /// `tau` to `tau_final`.
    pub fn tau_at(&self, epoch: usize, epochs: usize) -> f64 {
        if epochs <= 1 {
            return self.tau;
        }
        let frac = epoch.min(epochs - 1) as f64 / (epochs - 1) as f64;
        self.tau * (self.tau_final / self.tau).powf(frac)
    }
}
