use crate::data::{tokenize, GroundTruthRecipe};
use crate::error::{Error, Result};

/// Step-level supervision derived by string matching.
#[derive(Debug, Clone, PartialEq)]
pub struct DistantLabels {
    /// Candidate index each step's labels attach to.
    pub events: Vec<usize>,
    /// `[step][ingredient]`.
    pub ingredients: Vec<Vec<bool>>,
    /// `[step][action]`.
    pub actions: Vec<Vec<bool>>,
}

impl DistantLabels {
    pub fn num_steps(&self) -> usize {
        self.events.len()
    }
}

/// True if `phrase` occurs as a contiguous run of `tokens`.
pub fn contains_phrase(tokens: &[String], phrase: &[String]) -> bool {
    !phrase.is_empty() && tokens.windows(phrase.len()).any(|w| w == phrase)
}

/// Marks, for every ground-truth step, which of the video's ingredients and
/// which lexicon actions its sentence mentions. `events[t]` is the candidate
/// selected for step `t`.
pub fn distant_labels(gt: &GroundTruthRecipe, events: &[usize], lexicon: &[String]) -> Result<DistantLabels> {
    if lexicon.is_empty() {
        return Err(Error::InvalidArgument("action lexicon is empty".into()));
    }
    if events.len() != gt.steps.len() {
        return Err(Error::InvalidArgument(format!(
            "{} event indices for {} steps in video {}",
            events.len(),
            gt.steps.len(),
            gt.video_id
        )));
    }
    let ingredients: Vec<Vec<String>> = gt.ingredients.iter().map(|s| tokenize(s)).collect();
    let actions: Vec<Vec<String>> = lexicon.iter().map(|s| tokenize(s)).collect();
    let scan = |sentence: &[String], items: &[Vec<String>]| -> Vec<bool> {
        items.iter().map(|p| contains_phrase(sentence, p)).collect()
    };
    Ok(DistantLabels {
        events: events.to_vec(),
        ingredients: gt.steps.iter().map(|s| scan(&s.sentence, &ingredients)).collect(),
        actions: gt.steps.iter().map(|s| scan(&s.sentence, &actions)).collect(),
    })
}
