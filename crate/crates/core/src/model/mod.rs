//! The recipe generation model: event encoder, memory-augmented event
//! selector, sentence generator and memory exchange, with the optional
//! ingredient, simulator and textual-attention blocks.
//!
//! One call of [`RecipeModel::training_loss`] builds the full graph for a
//! video. Inference runs step by step through [`InferenceState`], which
//! carries everything needed to resume a video mid-way.

mod checkpoint;
mod config;
mod encoder;
mod generator;
mod losses;
mod memory;
mod selector;

use std::collections::BTreeSet;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub use checkpoint::{config_hash, Checkpoint, OptimizerSnapshot, CHECKPOINT_FORMAT};
pub use config::{Conditioning, MemoryMode, ModelConfig, SelectionMode, Variant, VsimNegatives};
pub use encoder::EventEncoder;
pub use generator::{DecodeInputs, DecodeOutput, SentenceGenerator};
pub use losses::{loss_event, loss_sentence, loss_total};
pub use memory::{pool_memory, MemoryLayer, MemoryMixer, MemoryState, MemoryTransformer};
pub use selector::{event_log_probs, select_event, selected_representation, Selection};

use crate::data::{tokenize, DatasetRecord, PredictionRecipe};
use crate::error::{Error, Result};
use crate::eval::tiou;
use crate::extended::{
    distant_labels, fuse_event_representations, ingredient_token_ids, loss_extended, loss_tattn, loss_vsim,
    tattn_targets, update_ingredients, IngredientEncoder, SelectorOutput, SimulatorLogits, TextualAttention,
    VisualSimulator,
};
use crate::nn::{argmax, GumbelNoise, Graph, Mat, ParamId, ParamStore, Var};
use crate::oracle::oracle_select;
use crate::vocab::{Vocabulary, BOS, EOS, PAD};

#[derive(Debug, Clone)]
struct Parts {
    encoder: EventEncoder,
    selector: MemoryTransformer,
    stop: ParamId,
    embedding: ParamId,
    generator: SentenceGenerator,
    mixer: MemoryMixer,
    ingredients: Option<(IngredientEncoder, IngredientEncoder)>,
    actions: Option<ParamId>,
    simulator: Option<VisualSimulator>,
}

#[derive(Debug, Clone)]
pub struct RecipeModel {
    pub config: ModelConfig,
    pub vocab: Vocabulary,
    /// Action names, one row of the action embedding each.
    pub lexicon: Vec<String>,
    pub params: ParamStore,
    pub seed: u64,
    parts: Parts,
}

/// Graph nodes shared by every step of one video.
#[derive(Debug, Clone, Copy)]
struct VideoInputs {
    events: Var,
    embedding: Var,
    stop: Var,
    selector_ingredients: Option<Var>,
    generator_ingredients: Option<Var>,
    actions: Option<Var>,
}

#[derive(Debug, Clone, Copy)]
struct SimulatorStep {
    actions: SelectorOutput,
    ingredients: SelectorOutput,
    next_state: Var,
}

#[derive(Debug, Clone)]
struct SelectorStep {
    events: Var,
    log_probs: Var,
    memory: Vec<Var>,
    simulator: Option<SimulatorStep>,
}

/// Loss terms of one video. `vsim` and `tattn` exist only for variants
/// that use the simulator and textual attention.
#[derive(Debug, Clone, Copy)]
pub struct VideoLosses {
    pub event: Var,
    pub sentence: Var,
    pub vsim: Option<Var>,
    pub tattn: Option<Var>,
    pub total: Var,
}

#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct LossValues {
    pub event: f64,
    pub sentence: f64,
    pub vsim: f64,
    pub tattn: f64,
    pub total: f64,
}

impl VideoLosses {
    pub fn values(&self, g: &Graph) -> LossValues {
        LossValues {
            event: g.scalar(self.event),
            sentence: g.scalar(self.sentence),
            vsim: self.vsim.map_or(0.0, |v| g.scalar(v)),
            tattn: self.tattn.map_or(0.0, |v| g.scalar(v)),
            total: g.scalar(self.total),
        }
    }
}

/// Recurrent state between inference steps.
#[derive(Debug, Clone, PartialEq)]
pub struct InferenceState {
    pub event_memory: MemoryState,
    pub sentence_memory: MemoryState,
    /// Simulator ingredient vectors (extended variants only).
    pub ingredient_state: Option<Mat>,
    pub chosen: Vec<usize>,
    pub finished: bool,
}

/// What one inference step produced.
#[derive(Debug, Clone, PartialEq)]
pub struct StepOutput {
    /// Over the candidates plus STOP (last entry).
    pub probabilities: Vec<f64>,
    /// `None` when STOP was selected.
    pub choice: Option<usize>,
    pub tokens: Vec<usize>,
    /// Next-token distribution at every decoding position, including the
    /// one that produced EOS.
    pub token_distributions: Vec<Vec<f64>>,
}

fn part_rng(seed: u64, tag: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed.wrapping_mul(0x9E37_79B9_7F4A_7C15).wrapping_add(tag))
}

fn softmax_row(row: ndarray::ArrayView1<f64>) -> Vec<f64> {
    let m = row.fold(f64::NEG_INFINITY, |a, &b| a.max(b));
    let e: Vec<f64> = row.iter().map(|v| (v - m).exp()).collect();
    let z: f64 = e.iter().sum();
    e.into_iter().map(|v| v / z).collect()
}

/// Oracle candidate per ground-truth step, used as selection targets. With
/// `unique`, a step whose oracle candidate was already taken by an earlier
/// step falls back to its best unused candidate (ties: lowest index), so
/// that no label is ever masked by the no-reselection rule.
pub fn training_labels(record: &DatasetRecord, unique: bool) -> Result<Vec<usize>> {
    let assignment = oracle_select(&record.candidates, &record.recipe)?;
    if !unique {
        return Ok(assignment.indices);
    }
    let n = record.candidates.len();
    if n < record.recipe.steps.len() {
        return Err(Error::InvalidArgument(format!(
            "video {} has {} candidates for {} steps",
            record.video_id(),
            n,
            record.recipe.steps.len()
        )));
    }
    let mut used = BTreeSet::new();
    let mut labels = Vec::with_capacity(assignment.indices.len());
    for (t, &idx) in assignment.indices.iter().enumerate() {
        let pick = if used.contains(&idx) {
            let step = &record.recipe.steps[t].interval;
            let mut best: Option<(usize, f64)> = None;
            for i in (0..n).filter(|i| !used.contains(i)) {
                let s = tiou(&record.candidates.events[i], step);
                if best.is_none_or(|(_, b)| s > b) {
                    best = Some((i, s));
                }
            }
            best.expect("an unused candidate exists").0
        } else {
            idx
        };
        used.insert(pick);
        labels.push(pick);
    }
    Ok(labels)
}

impl RecipeModel {
    /// Builds a freshly initialized model. Each block draws its initial
    /// weights from its own seeded stream, so blocks shared between variants
    /// start identical for the same seed.
    pub fn new(config: ModelConfig, vocab: Vocabulary, lexicon: Vec<String>, seed: u64) -> Result<Self> {
        config.validate()?;
        let v = config.variant;
        if v.uses_simulator() && lexicon.is_empty() {
            return Err(Error::Config(format!("variant {} needs a non-empty action lexicon", v.as_str())));
        }
        let (h, l, heads, ffn) = (config.hidden, config.layers, config.heads, config.ffn);
        let mut store = ParamStore::new();
        let encoder = EventEncoder::new(&mut store, "encoder", config.feature_dim, h, &mut part_rng(seed, 1));
        let selector = MemoryTransformer::new(&mut store, "selector", l, h, heads, ffn, &mut part_rng(seed, 2))?;
        let stop = store.glorot("stop", 1, h, &mut part_rng(seed, 3));
        let embedding = store.glorot("embedding", vocab.len(), h, &mut part_rng(seed, 4));
        let textual = v
            .uses_textual_attention()
            .then(|| TextualAttention::new(&mut store, "textual", h, &mut part_rng(seed, 5)));
        let generator =
            SentenceGenerator::new(&mut store, "generator", vocab.len(), h, l, heads, ffn, textual, &mut part_rng(seed, 6))?;
        let mixer = MemoryMixer::new(&mut store, "mixer", h, &mut part_rng(seed, 7));
        let ingredients = v.uses_ingredients().then(|| {
            (
                IngredientEncoder::new(&mut store, "ingredients.selector", h, &mut part_rng(seed, 8)),
                IngredientEncoder::new(&mut store, "ingredients.generator", h, &mut part_rng(seed, 9)),
            )
        });
        let actions = v
            .uses_simulator()
            .then(|| store.glorot("actions", lexicon.len(), h, &mut part_rng(seed, 10)));
        let simulator = v
            .uses_simulator()
            .then(|| VisualSimulator::new(&mut store, "simulator", h, &mut part_rng(seed, 11)));
        Ok(RecipeModel {
            config,
            vocab,
            lexicon,
            params: store,
            seed,
            parts: Parts {
                encoder,
                selector,
                stop,
                embedding,
                generator,
                mixer,
                ingredients,
                actions,
                simulator,
            },
        })
    }

    pub fn variant(&self) -> Variant {
        self.config.variant
    }

    pub fn num_parameters(&self) -> usize {
        self.params.num_scalars()
    }

    fn video_inputs(&self, g: &mut Graph, record: &DatasetRecord) -> Result<VideoInputs> {
        let events = self.parts.encoder.encode_events(g, &record.candidates, record.duration())?;
        let embedding = g.param(self.parts.embedding);
        let stop = g.param(self.parts.stop);
        let (selector_ingredients, generator_ingredients) = match &self.parts.ingredients {
            Some((sel, gen)) => {
                let ids = ingredient_token_ids(&self.vocab, &record.recipe.ingredients);
                (Some(sel.encode(g, embedding, &ids)?), Some(gen.encode(g, embedding, &ids)?))
            }
            None => (None, None),
        };
        let actions = self.parts.actions.map(|a| g.param(a));
        Ok(VideoInputs {
            events,
            embedding,
            stop,
            selector_ingredients,
            generator_ingredients,
            actions,
        })
    }

    fn selector_step(
        &self,
        g: &mut Graph,
        inp: &VideoInputs,
        memory: &[Var],
        ingredient_state: Option<Var>,
        forbidden: &[usize],
    ) -> Result<SelectorStep> {
        let (h, memory) = self
            .parts
            .selector
            .forward(g, inp.events, memory, inp.selector_ingredients, false);
        let pooled = pool_memory(g, &memory);
        let (events, simulator) = match (&self.parts.simulator, inp.actions, ingredient_state) {
            (Some(sim), Some(actions), Some(state)) => {
                let act = sim.action_selector(g, actions, h);
                let ing = sim.ingredient_selector(g, state, h);
                let fused = fuse_event_representations(g, h, act.weighted_events, ing.weighted_events);
                let next_state = update_ingredients(g, state, ing.weighted_items, act.weighted_items);
                (
                    fused,
                    Some(SimulatorStep {
                        actions: act,
                        ingredients: ing,
                        next_state,
                    }),
                )
            }
            _ => (h, None),
        };
        let log_probs = event_log_probs(g, events, inp.stop, pooled, forbidden)?;
        Ok(SelectorStep {
            events,
            log_probs,
            memory,
            simulator,
        })
    }

    fn decode_inputs(&self, inp: &VideoInputs, event: Var, sim: Option<&SimulatorStep>) -> DecodeInputs {
        DecodeInputs {
            embedding: inp.embedding,
            event,
            context: inp.generator_ingredients,
            grounding: sim.map(|s| (s.next_state, s.actions.weighted_items)),
        }
    }

    fn exchange(&self, g: &mut Graph, v: Vec<Var>, s: Vec<Var>) -> (Vec<Var>, Vec<Var>) {
        match self.config.memory_mode {
            MemoryMode::Mixed => self.parts.mixer.mix_layers(g, &v, &s),
            MemoryMode::Separate => (v, s),
        }
    }

    fn zero_memory(&self, g: &mut Graph) -> Vec<Var> {
        MemoryState::zeros(self.config.layers, self.config.memory_slots, self.config.hidden).to_graph(g)
    }

    /// Sentence token ids, truncated to the configured length.
    fn sentence_ids(&self, sentence: &[String]) -> Vec<usize> {
        let mut ids = self.vocab.encode(sentence);
        ids.truncate(self.config.max_sentence_len);
        ids
    }

    fn head_ids(&self, names: &[String]) -> Vec<usize> {
        names
            .iter()
            .map(|n| tokenize(n).last().map_or(PAD, |w| self.vocab.id(w)))
            .collect()
    }

    /// Builds the training graph of one video and returns its losses.
    ///
    /// `labels[t]` is the candidate for ground-truth step `t`; a STOP label
    /// is appended after the last step. Selection for the generator follows
    /// the configured mode; the no-reselection mask always follows the
    /// labels so that every label stays reachable.
    pub fn training_loss(
        &self,
        g: &mut Graph,
        record: &DatasetRecord,
        labels: &[usize],
        tau: f64,
        noise: &mut dyn GumbelNoise,
    ) -> Result<VideoLosses> {
        let steps = &record.recipe.steps;
        let n = record.candidates.len();
        if labels.len() != steps.len() {
            return Err(Error::InvalidArgument(format!(
                "{} labels for {} steps in video {}",
                labels.len(),
                steps.len(),
                record.video_id()
            )));
        }
        if let Some(&bad) = labels.iter().find(|&&l| l >= n) {
            return Err(Error::InvalidArgument(format!("label {bad} outside {n} candidates")));
        }
        if self.config.no_reselect {
            let distinct: BTreeSet<usize> = labels.iter().copied().collect();
            if distinct.len() != labels.len() {
                return Err(Error::InvalidArgument(format!(
                    "video {}: repeated labels are unreachable under the no-reselection mask",
                    record.video_id()
                )));
            }
        }
        let v = self.config.variant;
        let inp = self.video_inputs(g, record)?;
        let mut event_memory = self.zero_memory(g);
        let mut sentence_memory = self.zero_memory(g);
        let mut state = inp.selector_ingredients.filter(|_| v.uses_simulator());
        let mut forbidden: Vec<usize> = Vec::new();
        let mut log_probs = Vec::with_capacity(steps.len() + 1);
        let mut sentence_loss = g.constant(Mat::zeros((1, 1)));
        let mut sim_logits = Vec::new();
        let mut tattn = v.uses_textual_attention().then(|| g.constant(Mat::zeros((1, 1))));
        let ingredient_heads = self.head_ids(&record.recipe.ingredients);
        let action_heads = self.head_ids(&self.lexicon);

        for (t, step) in steps.iter().enumerate() {
            let sel = self.selector_step(g, &inp, &event_memory, state, &forbidden)?;
            log_probs.push(sel.log_probs);
            let forced = match self.config.conditioning {
                Conditioning::TeacherForced => Some(labels[t]),
                Conditioning::FreeRunning => None,
            };
            let selection = Selection::Train {
                tau,
                hard: self.config.selection == SelectionMode::Hard,
                forced,
                noise: &mut *noise,
            };
            let (y, _) = select_event(g, sel.log_probs, selection)?;
            let event = selected_representation(g, y, sel.events);

            let ids = self.sentence_ids(&step.sentence);
            let mut input = Vec::with_capacity(ids.len() + 1);
            input.push(BOS);
            input.extend(&ids);
            let mut targets = ids;
            targets.push(EOS);
            let dec_in = self.decode_inputs(&inp, event, sel.simulator.as_ref());
            let out = self.parts.generator.decode(g, dec_in, &input, &sentence_memory);
            let ls = loss_sentence(g, out.logits, &targets);
            sentence_loss = g.add(sentence_loss, ls);

            if let (Some(acc), Some(tx)) = (tattn, out.textual) {
                let ing_pairs = tattn_targets(&targets, &ingredient_heads);
                let act_pairs = tattn_targets(&targets, &action_heads);
                let term = loss_tattn(g, tx.log_alpha_ingredients, tx.log_alpha_actions, &ing_pairs, &act_pairs);
                tattn = Some(g.add(acc, term));
            }
            if let Some(sim) = sel.simulator {
                sim_logits.push(SimulatorLogits {
                    actions: sim.actions.logits,
                    ingredients: sim.ingredients.logits,
                });
                state = Some(sim.next_state);
            }
            let (ev, sm) = self.exchange(g, sel.memory, out.memory);
            event_memory = ev;
            sentence_memory = sm;
            if self.config.no_reselect {
                forbidden.push(labels[t]);
            }
        }
        let last = self.selector_step(g, &inp, &event_memory, state, &forbidden)?;
        log_probs.push(last.log_probs);
        let mut all_labels = labels.to_vec();
        all_labels.push(n);
        let event_loss = loss_event(g, &log_probs, &all_labels)?;
        let base = loss_total(g, event_loss, sentence_loss);

        let vsim = if v.uses_simulator() {
            let dl = distant_labels(&record.recipe, labels, &self.lexicon)?;
            Some(loss_vsim(g, &sim_logits, &dl, self.config.vsim_negatives)?)
        } else {
            None
        };
        let total = match (vsim, tattn) {
            (Some(a), Some(b)) => loss_extended(g, base, a, b),
            (Some(a), None) => g.add(base, a),
            _ => base,
        };
        Ok(VideoLosses {
            event: event_loss,
            sentence: sentence_loss,
            vsim,
            tattn,
            total,
        })
    }

    /// State before the first step of `record`.
    pub fn initial_state(&self, record: &DatasetRecord) -> Result<InferenceState> {
        let ingredient_state = if self.config.variant.uses_simulator() {
            let mut g = Graph::inference(&self.params);
            let inp = self.video_inputs(&mut g, record)?;
            inp.selector_ingredients.map(|v| g.value(v).clone())
        } else {
            None
        };
        let zeros = MemoryState::zeros(self.config.layers, self.config.memory_slots, self.config.hidden);
        Ok(InferenceState {
            event_memory: zeros.clone(),
            sentence_memory: zeros,
            ingredient_state,
            chosen: Vec::new(),
            finished: false,
        })
    }

    /// Greedy decoding; the returned memory comes from a pass whose input is
    /// exactly `[BOS, tokens...]`, as in training.
    fn greedy_decode(&self, g: &mut Graph, inputs: DecodeInputs, memory: &[Var]) -> (Vec<usize>, Vec<Vec<f64>>, Vec<Var>) {
        let mut input = vec![BOS];
        let mut dists = Vec::new();
        loop {
            let out = self.parts.generator.decode(g, inputs, &input, memory);
            let logits = g.value(out.logits);
            let mut dist = softmax_row(logits.row(logits.nrows() - 1));
            let mut choose = dist.clone();
            choose[PAD] = f64::NEG_INFINITY;
            choose[BOS] = f64::NEG_INFINITY;
            let next = argmax(&choose);
            dists.push(std::mem::take(&mut dist));
            if next == EOS {
                return (input[1..].to_vec(), dists, out.memory);
            }
            input.push(next);
            if input.len() > self.config.max_sentence_len {
                let out = self.parts.generator.decode(g, inputs, &input, memory);
                return (input[1..].to_vec(), dists, out.memory);
            }
        }
    }

    /// One selection + generation step. Selecting STOP, or reaching the step
    /// limit, marks the state finished.
    pub fn inference_step(&self, record: &DatasetRecord, state: &mut InferenceState) -> Result<StepOutput> {
        if state.finished || state.chosen.len() >= self.config.max_steps {
            return Err(Error::InvalidArgument(format!(
                "inference for video {} already finished",
                record.video_id()
            )));
        }
        let mut g = Graph::inference(&self.params);
        let inp = self.video_inputs(&mut g, record)?;
        let event_memory = state.event_memory.to_graph(&mut g);
        let sentence_memory = state.sentence_memory.to_graph(&mut g);
        let ingredient_state = state.ingredient_state.as_ref().map(|m| g.constant(m.clone()));
        let forbidden: Vec<usize> = if self.config.no_reselect {
            state.chosen.iter().copied().collect::<BTreeSet<_>>().into_iter().collect()
        } else {
            Vec::new()
        };
        let sel = self.selector_step(&mut g, &inp, &event_memory, ingredient_state, &forbidden)?;
        let probabilities: Vec<f64> = g.value(sel.log_probs).iter().map(|v| v.exp()).collect();
        let (_, k) = select_event(&mut g, sel.log_probs, Selection::Infer)?;
        let n = record.candidates.len();
        if k == n {
            state.finished = true;
            return Ok(StepOutput {
                probabilities,
                choice: None,
                tokens: Vec::new(),
                token_distributions: Vec::new(),
            });
        }
        let event = g.gather_rows(sel.events, &[k]);
        let dec_in = self.decode_inputs(&inp, event, sel.simulator.as_ref());
        let (tokens, token_distributions, new_sentence_memory) = self.greedy_decode(&mut g, dec_in, &sentence_memory);
        let (ev, sm) = self.exchange(&mut g, sel.memory, new_sentence_memory);
        state.event_memory = MemoryState::from_graph(&g, &ev);
        state.sentence_memory = MemoryState::from_graph(&g, &sm);
        if let Some(sim) = sel.simulator {
            state.ingredient_state = Some(g.value(sim.next_state).clone());
        }
        state.chosen.push(k);
        if state.chosen.len() >= self.config.max_steps {
            state.finished = true;
        }
        Ok(StepOutput {
            probabilities,
            choice: Some(k),
            tokens,
            token_distributions,
        })
    }

    /// Greedy recipe for one video.
    pub fn run_inference(&self, record: &DatasetRecord) -> Result<PredictionRecipe> {
        let mut state = self.initial_state(record)?;
        let mut pred = PredictionRecipe::empty(record.video_id());
        while !state.finished {
            let out = self.inference_step(record, &mut state)?;
            if let Some(k) = out.choice {
                pred.selections.push(k);
                pred.intervals.push(record.candidates.events[k]);
                pred.sentences.push(self.vocab.decode(&out.tokens));
            }
        }
        Ok(pred)
    }

    /// Greedy recipes for every record, spread over the available cores.
    /// Each video is decoded independently, so the output does not depend
    /// on the thread count.
    pub fn predict_all(&self, records: &[DatasetRecord]) -> Result<Vec<PredictionRecipe>> {
        let threads = std::thread::available_parallelism().map_or(1, |n| n.get());
        if threads < 2 || records.len() < 2 {
            return records.iter().map(|r| self.run_inference(r)).collect();
        }
        let chunk = records.len().div_ceil(threads);
        std::thread::scope(|s| {
            let handles: Vec<_> = records
                .chunks(chunk)
                .map(|part| s.spawn(move || part.iter().map(|r| self.run_inference(r)).collect::<Vec<_>>()))
                .collect();
            handles
                .into_iter()
                .flat_map(|h| h.join().expect("inference thread panicked"))
                .collect()
        })
    }
}

#[cfg(test)]
mod tests;
