use super::*;
use crate::data::{EventCandidateSet, GroundTruthRecipe, RecipeStep, TimedEvent};
use crate::nn::{adam_step, check_gradients, AdamState, OptimizerConfig, ZeroNoise};

fn words(s: &str) -> Vec<String> {
    tokenize(s)
}

fn vocab() -> Vocabulary {
    let toks = ["<pad>", "<bos>", "<eos>", "<unk>", "crack", "the", "eggs", "stir", "parmesan", "cheese", "cracked"];
    Vocabulary::from_tokens(toks.map(String::from).to_vec()).unwrap()
}

fn lexicon() -> Vec<String> {
    vec!["crack".into(), "stir".into()]
}

fn record() -> DatasetRecord {
    let spans = [(0.0, 10.0), (8.0, 20.0), (25.0, 40.0), (30.0, 55.0), (50.0, 60.0)];
    let events: Vec<TimedEvent> = spans.iter().map(|&(s, e)| TimedEvent::new(s, e).unwrap()).collect();
    let features = (0..events.len())
        .map(|i| (0..3).map(|d| ((i * 3 + d) as f64 * 0.37).sin()).collect())
        .collect();
    let candidates = EventCandidateSet::new(events, features).unwrap();
    let step = |s, e, text: &str| RecipeStep {
        interval: TimedEvent::new(s, e).unwrap(),
        sentence: words(text),
    };
    DatasetRecord {
        candidates,
        recipe: GroundTruthRecipe {
            video_id: "v0".into(),
            duration: 60.0,
            steps: vec![
                step(1.0, 9.0, "crack the eggs"),
                step(26.0, 41.0, "stir the parmesan cheese"),
                step(31.0, 52.0, "stir the cracked eggs"),
            ],
            ingredients: vec!["eggs".into(), "parmesan cheese".into()],
        },
    }
}

fn tiny(variant: Variant) -> ModelConfig {
    ModelConfig {
        hidden: 8,
        layers: 1,
        heads: 2,
        ffn: 12,
        max_sentence_len: 6,
        max_steps: 4,
        ..ModelConfig::toy(3).with_variant(variant)
    }
}

fn model(config: ModelConfig) -> RecipeModel {
    RecipeModel::new(config, vocab(), lexicon(), 17).unwrap()
}

fn soft(variant: Variant) -> ModelConfig {
    ModelConfig {
        selection: SelectionMode::Soft,
        ..tiny(variant)
    }
}

#[test]
fn labels_are_deduplicated_oracle_assignments() {
    let r = record();
    let raw = training_labels(&r, false).unwrap();
    assert_eq!(raw, vec![0, 2, 3]);
    let mut dup = r.clone();
    dup.recipe.steps[2].interval = TimedEvent::new(26.0, 40.0).unwrap();
    assert_eq!(training_labels(&dup, false).unwrap(), vec![0, 2, 2]);
    // the repeated step falls back to its best unused candidate
    assert_eq!(training_labels(&dup, true).unwrap(), vec![0, 2, 3]);
}

#[test]
fn gradients_match_finite_differences_base() {
    let m = model(soft(Variant::B));
    let r = record();
    let labels = training_labels(&r, true).unwrap();
    let check = check_gradients(&m.params, 1e-6, 3, |g| {
        Ok(m.training_loss(g, &r, &labels, 0.7, &mut ZeroNoise)?.total)
    })
    .unwrap();
    assert!(check.checked > 50);
    assert!(check.max_rel_error < 1e-4, "{check:?}");
}

#[test]
fn gradients_match_finite_differences_extended() {
    let m = model(soft(Variant::BIVT));
    let r = record();
    let labels = training_labels(&r, true).unwrap();
    let check = check_gradients(&m.params, 1e-6, 3, |g| {
        let l = m.training_loss(g, &r, &labels, 0.7, &mut ZeroNoise)?;
        assert!(l.vsim.is_some() && l.tattn.is_some());
        Ok(l.total)
    })
    .unwrap();
    assert!(check.max_rel_error < 1e-4, "{check:?}");
}

#[test]
fn every_parameter_receives_gradient() {
    for v in Variant::ALL {
        let m = model(tiny(v));
        let r = record();
        let labels = training_labels(&r, true).unwrap();
        let mut g = Graph::new(&m.params);
        let loss = m.training_loss(&mut g, &r, &labels, 1.0, &mut ZeroNoise).unwrap();
        let mut buf = m.params.zeros_like();
        g.backward(loss.total).accumulate_into(&mut buf);
        for id in m.params.ids() {
            let norm: f64 = buf[id.index()].iter().map(|x| x * x).sum();
            assert!(norm > 0.0, "{}: no gradient reaches `{}`", v.as_str(), m.params.name(id));
        }
    }
}

#[test]
fn loss_terms_per_variant() {
    let r = record();
    let labels = training_labels(&r, true).unwrap();
    for v in Variant::ALL {
        let m = model(tiny(v));
        let mut g = Graph::inference(&m.params);
        let l = m.training_loss(&mut g, &r, &labels, 1.0, &mut ZeroNoise).unwrap();
        let vals = l.values(&g);
        assert_eq!(l.vsim.is_some(), v.uses_simulator());
        assert_eq!(l.tattn.is_some(), v.uses_textual_attention());
        let sum = vals.event + vals.sentence + vals.vsim + vals.tattn;
        assert!((vals.total - sum).abs() < 1e-9 * sum.abs().max(1.0));
        assert!(vals.event > 0.0 && vals.sentence > 0.0);
    }
}

#[test]
fn bad_labels_rejected() {
    let m = model(tiny(Variant::B));
    let r = record();
    let mut g = Graph::inference(&m.params);
    assert!(m.training_loss(&mut g, &r, &[0, 1], 1.0, &mut ZeroNoise).is_err());
    assert!(m.training_loss(&mut g, &r, &[0, 1, 9], 1.0, &mut ZeroNoise).is_err());
    assert!(m.training_loss(&mut g, &r, &[0, 1, 1], 1.0, &mut ZeroNoise).is_err());
}

#[test]
fn simulator_variants_need_a_lexicon() {
    assert!(RecipeModel::new(tiny(Variant::BIV), vocab(), vec![], 1).is_err());
    assert!(RecipeModel::new(tiny(Variant::BI), vocab(), vec![], 1).is_ok());
}

#[test]
fn shared_blocks_start_identical_across_variants() {
    let base = model(tiny(Variant::B));
    let full = model(tiny(Variant::BIVT));
    for id in base.params.ids() {
        let name = base.params.name(id);
        let other = full.params.find(name).unwrap_or_else(|| panic!("`{name}` missing from the full variant"));
        if !name.starts_with("generator.output") {
            assert_eq!(base.params.value(id), full.params.value(other), "{name}");
        }
    }
    assert!(full.num_parameters() > base.num_parameters());
}

#[test]
fn inference_is_valid_and_deterministic() {
    for v in Variant::ALL {
        let m = model(tiny(v));
        let r = record();
        let a = m.run_inference(&r).unwrap();
        let b = m.run_inference(&r).unwrap();
        assert_eq!(a, b);
        assert!(a.len() <= m.config.max_steps);
        let distinct: BTreeSet<usize> = a.selections.iter().copied().collect();
        assert_eq!(distinct.len(), a.len());
        for (k, s) in a.selections.iter().zip(&a.sentences) {
            assert!(*k < r.candidates.len());
            assert!(s.len() <= m.config.max_sentence_len);
        }
    }
}

#[test]
fn step_outputs_are_distributions() {
    let m = model(tiny(Variant::BIVT));
    let r = record();
    let mut state = m.initial_state(&r).unwrap();
    assert!(state.ingredient_state.is_some());
    let out = m.inference_step(&r, &mut state).unwrap();
    assert_eq!(out.probabilities.len(), r.candidates.len() + 1);
    assert!((out.probabilities.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    for d in &out.token_distributions {
        assert_eq!(d.len(), m.vocab.len());
        assert!((d.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }
    if out.choice.is_some() {
        assert_eq!(out.token_distributions.len(), (out.tokens.len() + 1).min(m.config.max_sentence_len));
    }
}

#[test]
fn resumed_inference_matches_uninterrupted() {
    let mut m = model(tiny(Variant::BIVT));
    let r = record();
    fit(&mut m, &r, 30);
    let mut state = m.initial_state(&r).unwrap();
    let first = m.inference_step(&r, &mut state).unwrap();
    assert!(first.choice.is_some(), "fitted model stopped immediately");
    let mut resumed = state.clone();
    let mut rest = Vec::new();
    while !state.finished {
        rest.push(m.inference_step(&r, &mut state).unwrap());
    }
    let mut rest_resumed = Vec::new();
    while !resumed.finished {
        rest_resumed.push(m.inference_step(&r, &mut resumed).unwrap());
    }
    assert_eq!(rest, rest_resumed);
    assert!(m.inference_step(&r, &mut state).is_err());
}

#[test]
fn checkpoint_roundtrip_preserves_predictions() {
    let m = model(tiny(Variant::BIV));
    let r = record();
    let state = AdamState::new(&m.params);
    let ck = m.to_checkpoint(Some((&OptimizerConfig::default(), &state)), 3);
    let json = serde_json::to_string(&ck).unwrap();
    let back: Checkpoint = serde_json::from_str(&json).unwrap();
    let restored = RecipeModel::from_checkpoint(&back).unwrap();
    assert_eq!(restored.params, m.params);
    assert_eq!(restored.run_inference(&r).unwrap(), m.run_inference(&r).unwrap());
    let (_, opt) = back.optimizer_state(&restored).unwrap().unwrap();
    assert_eq!(opt, state);

    let mut tampered = back.clone();
    tampered.config.hidden = 16;
    assert!(RecipeModel::from_checkpoint(&tampered).is_err());
    let mut other_vocab = vocab().tokens().to_vec();
    other_vocab.push("salt".into());
    assert!(m.check_vocab(&Vocabulary::from_tokens(other_vocab).unwrap()).is_err());
}

fn loss_of(m: &RecipeModel, r: &DatasetRecord, labels: &[usize]) -> f64 {
    let mut g = Graph::inference(&m.params);
    let l = m.training_loss(&mut g, r, labels, 1.0, &mut ZeroNoise).unwrap();
    g.scalar(l.total)
}

fn fit(m: &mut RecipeModel, r: &DatasetRecord, updates: usize) {
    let labels = training_labels(r, true).unwrap();
    let cfg = OptimizerConfig {
        learning_rate: 1e-2,
        warmup_epochs: 0,
        ..Default::default()
    };
    let mut opt = AdamState::new(&m.params);
    for _ in 0..updates {
        let mut g = Graph::new(&m.params);
        let l = m.training_loss(&mut g, r, &labels, 1.0, &mut ZeroNoise).unwrap();
        let mut buf = m.params.zeros_like();
        g.backward(l.total).accumulate_into(&mut buf);
        drop(g);
        adam_step(&mut m.params, &buf, &cfg, &mut opt, 0);
    }
}

#[test]
fn a_few_updates_reduce_the_loss() {
    let mut m = model(tiny(Variant::BIVT));
    let r = record();
    let labels = training_labels(&r, true).unwrap();
    let before = loss_of(&m, &r, &labels);
    fit(&mut m, &r, 20);
    assert!(loss_of(&m, &r, &labels) < 0.7 * before);
}
