//! Deterministic synthetic kitchen world: feature-level videos with
//! templated recipes, ingredient lists and jittered candidate proposals.

mod config;
mod features;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

pub use config::{ActionWord, WorldConfig, DEFAULT_ACTIONS, DEFAULT_INGREDIENTS};
pub use features::{derive_seed, featurize_event, overlap_fraction, semantic_embedding, StepSemantics};

use crate::data::{tokenize, DatasetRecord, EventCandidateSet, GroundTruthRecipe, RecipeStep, TimedEvent};
use crate::error::{Error, Result};
use crate::eval::tiou;

/// Bumped whenever the sentence templates change.
pub const TEMPLATE_VERSION: u32 = 1;

/// `{a}` is the action verb, `{np}` the noun phrase. The last template is
/// only used for steps with two ingredients.
pub const TEMPLATES: [&str; 4] = ["{a} {np}", "{a} {np} well", "now {a} {np}", "{a} {np} together"];

const MAX_JITTER_TRIES: usize = 100;

/// Ingredients and step semantics of one video.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct VideoProgram {
    pub ingredients: Vec<usize>,
    pub steps: Vec<StepSemantics>,
    pub templates: Vec<usize>,
}

fn video_rng(config: &WorldConfig, index: usize) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(derive_seed(config.seed, &format!("video/{index}")))
}

pub fn video_id(index: usize) -> String {
    format!("kitchen_{index:05}")
}

/// Samples ingredients and an ordered action program. Each step touches one
/// or two of the video's ingredients and records the last action already
/// applied to them, so later noun phrases depend on earlier steps.
pub fn sample_program<R: Rng + ?Sized>(config: &WorldConfig, rng: &mut R) -> VideoProgram {
    let (ilo, ihi) = config.ingredients_per_video;
    let k = rng.gen_range(ilo..=ihi);
    let pool: Vec<usize> = (0..config.ingredients.len()).collect();
    let ingredients: Vec<usize> = pool.choose_multiple(rng, k).copied().collect();
    let t = rng.gen_range(config.steps.0..=config.steps.1);
    let mut state: Vec<Option<usize>> = vec![None; config.ingredients.len()];
    let mut steps = Vec::with_capacity(t);
    let mut templates = Vec::with_capacity(t);
    for ordinal in 0..t {
        let action = rng.gen_range(0..config.actions.len());
        let count = if k > 1 && rng.gen_bool(0.4) { 2 } else { 1 };
        let used: Vec<usize> = ingredients.choose_multiple(rng, count).copied().collect();
        let states = used.iter().map(|&i| state[i]).collect();
        for &i in &used {
            state[i] = Some(action);
        }
        let n_templates = if count == 2 { TEMPLATES.len() } else { TEMPLATES.len() - 1 };
        templates.push(rng.gen_range(0..n_templates));
        steps.push(StepSemantics {
            action,
            ingredients: used,
            states,
            ordinal,
        });
    }
    VideoProgram {
        ingredients,
        steps,
        templates,
    }
}

/// "the chopped onion and the salt"
pub fn noun_phrase(config: &WorldConfig, sem: &StepSemantics) -> String {
    sem.ingredients
        .iter()
        .zip(&sem.states)
        .map(|(&i, state)| match state {
            Some(a) => format!("the {} {}", config.actions[*a].participle, config.ingredients[i]),
            None => format!("the {}", config.ingredients[i]),
        })
        .collect::<Vec<_>>()
        .join(" and ")
}

pub fn render_sentence(config: &WorldConfig, sem: &StepSemantics, template: usize) -> String {
    TEMPLATES[template]
        .replace("{a}", &config.actions[sem.action].verb)
        .replace("{np}", &noun_phrase(config, sem))
}

/// `count` ordered, non-overlapping steps on `[0, duration]`: step lengths
/// U(1, 3) and gaps U(0.2, 1) in relative units, rescaled to the duration.
pub fn sample_intervals<R: Rng + ?Sized>(count: usize, duration: f64, rng: &mut R) -> Vec<TimedEvent> {
    let lengths: Vec<f64> = (0..count).map(|_| rng.gen_range(1.0..3.0)).collect();
    let gaps: Vec<f64> = (0..=count).map(|_| rng.gen_range(0.2..1.0)).collect();
    let total: f64 = lengths.iter().sum::<f64>() + gaps.iter().sum::<f64>();
    let scale = duration / total;
    let mut t = 0.0;
    let mut out = Vec::with_capacity(count);
    for (len, gap) in lengths.iter().zip(&gaps) {
        let start = t + gap * scale;
        let end = start + len * scale;
        out.push(TimedEvent { start, end });
        t = end;
    }
    out
}

fn jittered<R: Rng + ?Sized>(step: &TimedEvent, duration: f64, config: &WorldConfig, rng: &mut R) -> TimedEvent {
    let sigma = config.jitter_sigma * duration;
    if sigma == 0.0 {
        return *step;
    }
    for _ in 0..MAX_JITTER_TRIES {
        let zs: f64 = rng.sample(StandardNormal);
        let ze: f64 = rng.sample(StandardNormal);
        let start = (step.start + sigma * zs).clamp(0.0, duration);
        let end = (step.end + sigma * ze).clamp(0.0, duration);
        if start < end {
            let ev = TimedEvent { start, end };
            if tiou(&ev, step) >= config.min_jitter_tiou {
                return ev;
            }
        }
    }
    *step
}

fn random_span<R: Rng + ?Sized>(duration: f64, rng: &mut R) -> TimedEvent {
    let len = rng.gen_range(0.02..0.3) * duration;
    let start = rng.gen_range(0.0..duration - len);
    TimedEvent { start, end: start + len }
}

fn distractor<R: Rng + ?Sized>(steps: &[TimedEvent], duration: f64, rng: &mut R) -> TimedEvent {
    if steps.len() >= 2 && rng.gen_bool(0.5) {
        let i = rng.gen_range(0..steps.len() - 1);
        TimedEvent {
            start: steps[i].start,
            end: steps[i + 1].end,
        }
    } else {
        random_span(duration, rng)
    }
}

/// One jittered copy per step (ranks `0..T`), then the remaining slots as
/// distractors (merged adjacent steps or random spans) or further jittered
/// copies. Ranks keep generation order, so `restrict(n)` yields nested
/// sets; the returned set is sorted by start.
pub fn propose_candidates<R: Rng + ?Sized>(
    steps: &[(TimedEvent, Vec<f64>)],
    duration: f64,
    config: &WorldConfig,
    rng: &mut R,
) -> Result<EventCandidateSet> {
    let n = config.n_candidates;
    if n < steps.len() {
        return Err(Error::Config(format!("{n} candidates cannot cover {} steps", steps.len())));
    }
    let spans: Vec<TimedEvent> = steps.iter().map(|(s, _)| *s).collect();
    let mut events = Vec::with_capacity(n);
    for s in &spans {
        events.push(jittered(s, duration, config, rng));
    }
    while events.len() < n {
        let ev = if rng.gen_bool(config.distractor_fraction) {
            distractor(&spans, duration, rng)
        } else {
            let s = spans.choose(rng).expect("at least one step");
            jittered(s, duration, config, rng)
        };
        events.push(ev);
    }
    let features: Vec<Vec<f64>> = events
        .iter()
        .map(|ev| featurize_event(ev, steps, config.feature_dim, config.noise_scale, rng))
        .collect();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| {
        events[a]
            .start
            .total_cmp(&events[b].start)
            .then(events[a].end.total_cmp(&events[b].end))
            .then(a.cmp(&b))
    });
    Ok(EventCandidateSet {
        events: order.iter().map(|&i| events[i]).collect(),
        features: order.iter().map(|&i| features[i].clone()).collect(),
        ranks: order,
        sentences: None,
    })
}

/// Video `index` of the world; a pure function of `(config, index)`.
pub fn generate_video(config: &WorldConfig, index: usize) -> Result<DatasetRecord> {
    let mut rng = video_rng(config, index);
    let program = sample_program(config, &mut rng);
    let (dlo, dhi) = config.duration;
    let duration = if dlo < dhi { rng.gen_range(dlo..=dhi) } else { dlo };
    let intervals = sample_intervals(program.steps.len(), duration, &mut rng);
    let steps: Vec<(TimedEvent, Vec<f64>)> = intervals
        .iter()
        .zip(&program.steps)
        .map(|(iv, sem)| (*iv, semantic_embedding(sem, config.seed, config.feature_dim)))
        .collect();
    let candidates = propose_candidates(&steps, duration, config, &mut rng)?;
    let recipe = GroundTruthRecipe {
        video_id: video_id(index),
        duration,
        steps: intervals
            .iter()
            .zip(program.steps.iter().zip(&program.templates))
            .map(|(iv, (sem, &tpl))| RecipeStep {
                interval: *iv,
                sentence: tokenize(&render_sentence(config, sem, tpl)),
            })
            .collect(),
        ingredients: program.ingredients.iter().map(|&i| config.ingredients[i].clone()).collect(),
    };
    Ok(DatasetRecord { candidates, recipe })
}

pub fn generate_world(config: &WorldConfig) -> Result<Vec<DatasetRecord>> {
    config.validate()?;
    (0..config.num_videos).map(|i| generate_video(config, i)).collect()
}
