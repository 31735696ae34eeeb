//! Canonical records and the JSON file formats shared by every other module.
//!
//! Timestamps are stored as seconds. Sentences are kept as token sequences;
//! on disk they are plain strings that are re-tokenized on load.

use std::collections::BTreeSet;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

pub const DEFAULT_MAX_SENTENCE_LEN: usize = 20;
pub const DEFAULT_MAX_STEPS: usize = 12;

/// Lowercases, drops ASCII punctuation and splits on whitespace.
pub fn tokenize(text: &str) -> Vec<String> {
    text.chars()
        .filter(|c| !c.is_ascii_punctuation())
        .collect::<String>()
        .to_lowercase()
        .split_whitespace()
        .map(str::to_owned)
        .collect()
}

pub fn detokenize(tokens: &[String]) -> String {
    tokens.join(" ")
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TimedEvent {
    pub start: f64,
    pub end: f64,
}

impl TimedEvent {
    pub fn new(start: f64, end: f64) -> Result<Self> {
        let ev = TimedEvent { start, end };
        ev.check().map_err(Error::InvalidArgument)?;
        Ok(ev)
    }

    pub fn duration(&self) -> f64 {
        self.end - self.start
    }

    fn check(&self) -> std::result::Result<(), String> {
        if !self.start.is_finite() || !self.end.is_finite() {
            return Err(format!("non-finite bounds [{}, {}]", self.start, self.end));
        }
        if self.start < 0.0 {
            return Err(format!("start {} is negative", self.start));
        }
        if self.start >= self.end {
            return Err(format!(
                "start {} must be strictly less than end {}",
                self.start, self.end
            ));
        }
        Ok(())
    }
}

/// Candidate proposals for one video, sorted by start time.
///
/// `ranks` records the generation order of each candidate so that a smaller
/// nested candidate set can be recovered with [`EventCandidateSet::restrict`].
/// `sentences` holds captions attached to candidates by an upstream captioner,
/// when available.
#[derive(Debug, Clone, PartialEq)]
pub struct EventCandidateSet {
    pub events: Vec<TimedEvent>,
    pub features: Vec<Vec<f64>>,
    pub ranks: Vec<usize>,
    pub sentences: Option<Vec<Vec<String>>>,
}

impl EventCandidateSet {
    pub fn new(events: Vec<TimedEvent>, features: Vec<Vec<f64>>) -> Result<Self> {
        let ranks = (0..events.len()).collect();
        let set = EventCandidateSet {
            events,
            features,
            ranks,
            sentences: None,
        };
        set.validate("<candidates>")?;
        Ok(set)
    }

    pub fn len(&self) -> usize {
        self.events.len()
    }

    pub fn is_empty(&self) -> bool {
        self.events.is_empty()
    }

    pub fn feature_dim(&self) -> usize {
        self.features.first().map_or(0, Vec::len)
    }

    /// Keeps the candidates whose generation rank is below `n`.
    pub fn restrict(&self, n: usize) -> EventCandidateSet {
        let keep: Vec<usize> = (0..self.len()).filter(|&i| self.ranks[i] < n).collect();
        EventCandidateSet {
            events: keep.iter().map(|&i| self.events[i]).collect(),
            features: keep.iter().map(|&i| self.features[i].clone()).collect(),
            ranks: keep.iter().map(|&i| self.ranks[i]).collect(),
            sentences: self
                .sentences
                .as_ref()
                .map(|s| keep.iter().map(|&i| s[i].clone()).collect()),
        }
    }

    fn validate(&self, record: &str) -> Result<()> {
        if self.features.len() != self.events.len() {
            return Err(Error::validation(
                record,
                "candidates.feature",
                format!(
                    "{} features for {} events",
                    self.features.len(),
                    self.events.len()
                ),
            ));
        }
        if self.ranks.len() != self.events.len() {
            return Err(Error::validation(record, "candidates.rank", "rank count mismatch"));
        }
        let dim = self.feature_dim();
        for (i, (ev, feat)) in self.events.iter().zip(&self.features).enumerate() {
            ev.check()
                .map_err(|m| Error::validation(record, format!("candidates[{i}]"), m))?;
            if feat.len() != dim {
                return Err(Error::validation(
                    record,
                    format!("candidates[{i}].feature"),
                    format!("dimension {} differs from {}", feat.len(), dim),
                ));
            }
            if feat.iter().any(|v| !v.is_finite()) {
                return Err(Error::validation(
                    record,
                    format!("candidates[{i}].feature"),
                    "non-finite value",
                ));
            }
        }
        if let Some(w) = self.events.windows(2).position(|w| w[1].start < w[0].start) {
            return Err(Error::validation(
                record,
                format!("candidates[{}].start", w + 1),
                "candidates must be sorted by start time",
            ));
        }
        let distinct: BTreeSet<usize> = self.ranks.iter().copied().collect();
        if distinct.len() != self.ranks.len() {
            return Err(Error::validation(record, "candidates.rank", "ranks must be distinct"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RecipeStep {
    pub interval: TimedEvent,
    pub sentence: Vec<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GroundTruthRecipe {
    pub video_id: String,
    pub duration: f64,
    pub steps: Vec<RecipeStep>,
    pub ingredients: Vec<String>,
}

impl GroundTruthRecipe {
    pub fn intervals(&self) -> Vec<TimedEvent> {
        self.steps.iter().map(|s| s.interval).collect()
    }

    pub fn sentences(&self) -> Vec<Vec<String>> {
        self.steps.iter().map(|s| s.sentence.clone()).collect()
    }
}

/// One video: its candidates plus the reference recipe.
#[derive(Debug, Clone, PartialEq)]
pub struct DatasetRecord {
    pub candidates: EventCandidateSet,
    pub recipe: GroundTruthRecipe,
}

impl DatasetRecord {
    pub fn video_id(&self) -> &str {
        &self.recipe.video_id
    }

    pub fn duration(&self) -> f64 {
        self.recipe.duration
    }

    pub fn with_candidate_limit(&self, n: usize) -> DatasetRecord {
        DatasetRecord {
            candidates: self.candidates.restrict(n),
            recipe: self.recipe.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PredictionRecipe {
    pub video_id: String,
    pub selections: Vec<usize>,
    pub sentences: Vec<Vec<String>>,
    pub intervals: Vec<TimedEvent>,
}

impl PredictionRecipe {
    pub fn empty(video_id: impl Into<String>) -> Self {
        PredictionRecipe {
            video_id: video_id.into(),
            selections: Vec::new(),
            sentences: Vec::new(),
            intervals: Vec::new(),
        }
    }

    pub fn len(&self) -> usize {
        self.selections.len()
    }

    pub fn is_empty(&self) -> bool {
        self.selections.is_empty()
    }

    /// A prediction that reproduces the reference recipe exactly, using the
    /// reference intervals as if they were candidates `0..T`.
    pub fn from_ground_truth(gt: &GroundTruthRecipe) -> Self {
        PredictionRecipe {
            video_id: gt.video_id.clone(),
            selections: (0..gt.steps.len()).collect(),
            sentences: gt.sentences(),
            intervals: gt.intervals(),
        }
    }

    pub fn validate(&self, num_candidates: usize) -> Result<()> {
        if self.selections.len() != self.sentences.len()
            || self.selections.len() != self.intervals.len()
        {
            return Err(Error::validation(
                &self.video_id,
                "results",
                "selections, sentences and intervals differ in length",
            ));
        }
        if let Some(&bad) = self.selections.iter().find(|&&i| i >= num_candidates) {
            return Err(Error::validation(
                &self.video_id,
                "results.index",
                format!("index {bad} out of range for {num_candidates} candidates"),
            ));
        }
        Ok(())
    }
}

/// Non-fatal findings reported while loading a dataset.
#[derive(Debug, Clone, PartialEq)]
pub struct LoadWarning {
    pub video_id: String,
    pub message: String,
}

#[derive(Debug, Clone, Copy)]
pub struct LoadOptions {
    pub max_sentence_len: usize,
    pub max_steps: usize,
}

impl Default for LoadOptions {
    fn default() -> Self {
        LoadOptions {
            max_sentence_len: DEFAULT_MAX_SENTENCE_LEN,
            max_steps: DEFAULT_MAX_STEPS,
        }
    }
}

// On-disk schema.

#[derive(Debug, Serialize, Deserialize)]
struct CandidateFile {
    start: f64,
    end: f64,
    feature: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    rank: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    sentence: Option<String>,
}

#[derive(Debug, Serialize, Deserialize)]
struct StepFile {
    start: f64,
    end: f64,
    sentence: String,
}

#[derive(Debug, Serialize, Deserialize)]
struct RecordFile {
    video_id: String,
    duration: f64,
    candidates: Vec<CandidateFile>,
    steps: Vec<StepFile>,
    #[serde(default)]
    ingredients: Vec<String>,
}

#[derive(Debug, Serialize, Deserialize)]
struct ResultFile {
    index: usize,
    start: f64,
    end: f64,
    sentence: String,
}

#[derive(Debug, Serialize, Deserialize)]
struct PredictionFile {
    video_id: String,
    results: Vec<ResultFile>,
}

fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_json(&text, path)
}

fn parse_json<T: serde::de::DeserializeOwned>(text: &str, path: &Path) -> Result<T> {
    serde_json::from_str(text).map_err(|e| Error::Parse {
        path: path.to_path_buf(),
        line: e.line(),
        column: e.column(),
        message: e.to_string(),
    })
}

pub fn write_json<T: Serialize + ?Sized>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
    }
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

fn record_from_file(
    raw: RecordFile,
    opts: &LoadOptions,
    warnings: &mut Vec<LoadWarning>,
) -> Result<DatasetRecord> {
    let id = raw.video_id.clone();
    if id.is_empty() {
        return Err(Error::validation("<unnamed>", "video_id", "empty video id"));
    }
    if !(raw.duration.is_finite() && raw.duration > 0.0) {
        return Err(Error::validation(&id, "duration", "duration must be positive"));
    }

    let has_sentences = raw.candidates.iter().any(|c| c.sentence.is_some());
    let mut events = Vec::with_capacity(raw.candidates.len());
    let mut features = Vec::with_capacity(raw.candidates.len());
    let mut ranks = Vec::with_capacity(raw.candidates.len());
    let mut cand_sentences = Vec::new();
    for (i, c) in raw.candidates.into_iter().enumerate() {
        events.push(TimedEvent {
            start: c.start,
            end: c.end,
        });
        features.push(c.feature);
        ranks.push(c.rank.unwrap_or(i));
        if has_sentences {
            let mut toks = tokenize(c.sentence.as_deref().unwrap_or(""));
            toks.truncate(opts.max_sentence_len);
            cand_sentences.push(toks);
        }
    }
    let candidates = EventCandidateSet {
        events,
        features,
        ranks,
        sentences: has_sentences.then_some(cand_sentences),
    };
    candidates.validate(&id)?;

    let mut steps = Vec::with_capacity(raw.steps.len());
    for (i, s) in raw.steps.into_iter().enumerate() {
        let interval = TimedEvent {
            start: s.start,
            end: s.end,
        };
        interval
            .check()
            .map_err(|m| Error::validation(&id, format!("steps[{i}]"), m))?;
        let mut sentence = tokenize(&s.sentence);
        if sentence.is_empty() {
            return Err(Error::validation(
                &id,
                format!("steps[{i}].sentence"),
                "sentence has no tokens",
            ));
        }
        sentence.truncate(opts.max_sentence_len);
        steps.push(RecipeStep { interval, sentence });
    }
    if steps.is_empty() {
        return Err(Error::validation(&id, "steps", "at least one step is required"));
    }
    if let Some(w) = steps
        .windows(2)
        .position(|w| w[1].interval.start < w[0].interval.start)
    {
        return Err(Error::validation(
            &id,
            format!("steps[{}].start", w + 1),
            "steps must be ordered by start time",
        ));
    }
    if steps.len() > opts.max_steps {
        warnings.push(LoadWarning {
            video_id: id.clone(),
            message: format!("truncated {} steps to {}", steps.len(), opts.max_steps),
        });
        steps.truncate(opts.max_steps);
    }
    for w in steps.windows(2) {
        if w[1].interval.start < w[0].interval.end {
            warnings.push(LoadWarning {
                video_id: id.clone(),
                message: format!(
                    "steps overlap: [{}, {}] and [{}, {}]",
                    w[0].interval.start, w[0].interval.end, w[1].interval.start, w[1].interval.end
                ),
            });
        }
    }

    Ok(DatasetRecord {
        candidates,
        recipe: GroundTruthRecipe {
            video_id: id,
            duration: raw.duration,
            steps,
            ingredients: raw.ingredients,
        },
    })
}

fn record_to_file(rec: &DatasetRecord) -> RecordFile {
    let c = &rec.candidates;
    RecordFile {
        video_id: rec.recipe.video_id.clone(),
        duration: rec.recipe.duration,
        candidates: (0..c.len())
            .map(|i| CandidateFile {
                start: c.events[i].start,
                end: c.events[i].end,
                feature: c.features[i].clone(),
                rank: Some(c.ranks[i]),
                sentence: c.sentences.as_ref().map(|s| detokenize(&s[i])),
            })
            .collect(),
        steps: rec
            .recipe
            .steps
            .iter()
            .map(|s| StepFile {
                start: s.interval.start,
                end: s.interval.end,
                sentence: detokenize(&s.sentence),
            })
            .collect(),
        ingredients: rec.recipe.ingredients.clone(),
    }
}

/// Parses dataset JSON text, returning records sorted by video id together
/// with any non-fatal warnings (e.g. overlapping reference steps).
pub fn parse_dataset(
    text: &str,
    origin: &Path,
    opts: &LoadOptions,
) -> Result<(Vec<DatasetRecord>, Vec<LoadWarning>)> {
    let raw: Vec<RecordFile> = parse_json(text, origin)?;
    let mut warnings = Vec::new();
    let mut records = raw
        .into_iter()
        .map(|r| record_from_file(r, opts, &mut warnings))
        .collect::<Result<Vec<_>>>()?;
    records.sort_by(|a, b| a.video_id().cmp(b.video_id()));
    if let Some(w) = records.windows(2).find(|w| w[0].video_id() == w[1].video_id()) {
        return Err(Error::validation(w[0].video_id(), "video_id", "duplicate video id"));
    }
    for w in &warnings {
        log::warn!("{}: {}", w.video_id, w.message);
    }
    Ok((records, warnings))
}

pub fn load_dataset_with_warnings(
    path: &Path,
    opts: &LoadOptions,
) -> Result<(Vec<DatasetRecord>, Vec<LoadWarning>)> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_dataset(&text, path, opts)
}

pub fn load_dataset(path: &Path) -> Result<Vec<DatasetRecord>> {
    load_dataset_with_warnings(path, &LoadOptions::default()).map(|(r, _)| r)
}

pub fn dataset_to_json(records: &[DatasetRecord]) -> Result<String> {
    let raw: Vec<RecordFile> = records.iter().map(record_to_file).collect();
    let mut text = serde_json::to_string_pretty(&raw)?;
    text.push('\n');
    Ok(text)
}

/// Hex SHA-256 of the canonical dataset JSON.
pub fn dataset_hash(records: &[DatasetRecord]) -> Result<String> {
    let text = dataset_to_json(records)?;
    Ok(format!("{:x}", Sha256::digest(text.as_bytes())))
}

pub fn save_dataset(path: &Path, records: &[DatasetRecord]) -> Result<()> {
    let raw: Vec<RecordFile> = records.iter().map(record_to_file).collect();
    write_json(path, &raw)
}

pub fn save_predictions(path: &Path, predictions: &[PredictionRecipe]) -> Result<()> {
    write_json(path, &predictions_to_file(predictions))
}

pub fn predictions_to_json(predictions: &[PredictionRecipe]) -> Result<String> {
    let mut text = serde_json::to_string_pretty(&predictions_to_file(predictions))?;
    text.push('\n');
    Ok(text)
}

fn predictions_to_file(predictions: &[PredictionRecipe]) -> Vec<PredictionFile> {
    predictions
        .iter()
        .map(|p| PredictionFile {
            video_id: p.video_id.clone(),
            results: (0..p.len())
                .map(|i| ResultFile {
                    index: p.selections[i],
                    start: p.intervals[i].start,
                    end: p.intervals[i].end,
                    sentence: detokenize(&p.sentences[i]),
                })
                .collect(),
        })
        .collect()
}

pub fn load_predictions(path: &Path) -> Result<Vec<PredictionRecipe>> {
    let raw: Vec<PredictionFile> = read_json(path)?;
    let mut out = Vec::with_capacity(raw.len());
    for p in raw {
        let mut pred = PredictionRecipe::empty(p.video_id);
        for (i, r) in p.results.into_iter().enumerate() {
            let ev = TimedEvent {
                start: r.start,
                end: r.end,
            };
            ev.check().map_err(|m| {
                Error::validation(&pred.video_id, format!("results[{i}]"), m)
            })?;
            pred.selections.push(r.index);
            pred.intervals.push(ev);
            pred.sentences.push(tokenize(&r.sentence));
        }
        out.push(pred);
    }
    Ok(out)
}
