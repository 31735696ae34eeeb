use serde::{Deserialize, Serialize};

use crate::data::DEFAULT_MAX_STEPS;
use crate::error::{Error, Result};

/// An action verb and the participle used when it describes an ingredient's
/// state in later steps ("chop" / "chopped onion").
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ActionWord {
    pub verb: String,
    pub participle: String,
}

impl ActionWord {
    pub fn new(verb: &str, participle: &str) -> Self {
        ActionWord {
            verb: verb.to_string(),
            participle: participle.to_string(),
        }
    }
}

pub const DEFAULT_INGREDIENTS: [&str; 24] = [
    "onion",
    "garlic",
    "tomato",
    "potato",
    "carrot",
    "chicken",
    "beef",
    "egg",
    "rice",
    "pasta",
    "flour",
    "butter",
    "milk",
    "salt",
    "sugar",
    "olive oil",
    "black pepper",
    "green onion",
    "parmesan cheese",
    "bell pepper",
    "mushroom",
    "spinach",
    "soy sauce",
    "lemon",
];

pub const DEFAULT_ACTIONS: [(&str, &str); 12] = [
    ("chop", "chopped"),
    ("slice", "sliced"),
    ("dice", "diced"),
    ("mix", "mixed"),
    ("boil", "boiled"),
    ("fry", "fried"),
    ("bake", "baked"),
    ("peel", "peeled"),
    ("season", "seasoned"),
    ("grill", "grilled"),
    ("mash", "mashed"),
    ("whisk", "whisked"),
];

/// Parameters of the synthetic kitchen world. Every generated dataset is a
/// pure function of this config.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct WorldConfig {
    pub num_videos: usize,
    pub ingredients: Vec<String>,
    /// Inclusive range of distinct ingredients per video.
    pub ingredients_per_video: (usize, usize),
    pub actions: Vec<ActionWord>,
    /// Inclusive range of steps per video.
    pub steps: (usize, usize),
    pub max_steps: usize,
    pub feature_dim: usize,
    pub n_candidates: usize,
    /// Boundary noise std. dev. as a fraction of the video duration.
    pub jitter_sigma: f64,
    /// Jittered copies are resampled until their tIoU to the source step
    /// reaches this value.
    pub min_jitter_tiou: f64,
    /// Share of the non-mandatory candidates that are distractors; the rest
    /// are extra jittered copies.
    pub distractor_fraction: f64,
    pub noise_scale: f64,
    /// Inclusive range of video durations in seconds.
    pub duration: (f64, f64),
    pub seed: u64,
}

impl Default for WorldConfig {
    fn default() -> Self {
        WorldConfig {
            num_videos: 200,
            ingredients: DEFAULT_INGREDIENTS.iter().map(|s| s.to_string()).collect(),
            ingredients_per_video: (2, 5),
            actions: DEFAULT_ACTIONS.iter().map(|&(v, p)| ActionWord::new(v, p)).collect(),
            steps: (3, 12),
            max_steps: DEFAULT_MAX_STEPS,
            feature_dim: 32,
            n_candidates: 50,
            jitter_sigma: 0.05,
            min_jitter_tiou: 0.3,
            distractor_fraction: 0.5,
            noise_scale: 0.1,
            duration: (120.0, 480.0),
            seed: 0,
        }
    }
}

impl WorldConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        let (lo, hi) = self.steps;
        if lo < 1 || lo > hi || hi > self.max_steps {
            return bad(format!("world.steps {lo}..={hi} must lie within 1..={}", self.max_steps));
        }
        if self.n_candidates < hi {
            return bad(format!(
                "world.n_candidates ({}) must be at least the maximum step count ({hi})",
                self.n_candidates
            ));
        }
        let (ilo, ihi) = self.ingredients_per_video;
        if ilo < 1 || ilo > ihi || ihi > self.ingredients.len() {
            return bad(format!(
                "world.ingredients_per_video {ilo}..={ihi} must lie within 1..={}",
                self.ingredients.len()
            ));
        }
        let mut names = self.ingredients.clone();
        names.sort();
        names.dedup();
        if names.len() != self.ingredients.len() || names.iter().any(|n| n.trim().is_empty()) {
            return bad("world.ingredients must be distinct and non-empty".into());
        }
        if self.actions.is_empty() {
            return bad("world.actions must not be empty".into());
        }
        for (name, f) in [
            ("min_jitter_tiou", self.min_jitter_tiou),
            ("distractor_fraction", self.distractor_fraction),
        ] {
            if !(0.0..=1.0).contains(&f) {
                return bad(format!("world.{name} must lie in [0, 1], got {f}"));
            }
        }
        if !(self.jitter_sigma >= 0.0 && self.noise_scale >= 0.0) {
            return bad("world.jitter_sigma and world.noise_scale must be non-negative".into());
        }
        let (dlo, dhi) = self.duration;
        if !(dlo > 0.0 && dlo <= dhi && dhi.is_finite()) {
            return bad(format!("world.duration range ({dlo}, {dhi}) is invalid"));
        }
        if self.feature_dim == 0 {
            return bad("world.feature_dim must be positive".into());
        }
        Ok(())
    }

    /// Action verbs in lexicon order, for distant supervision.
    pub fn lexicon(&self) -> Vec<String> {
        self.actions.iter().map(|a| a.verb.clone()).collect()
    }
}
