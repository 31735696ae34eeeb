use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use recipegen::data::{dataset_to_json, parse_dataset, LoadOptions};
use recipegen::model::{ModelConfig, RecipeModel, Variant};
use recipegen::nn::OptimizerConfig;
use recipegen::oracle::{oracle_sweep, random_baseline, SentenceSource};
use recipegen::synth::{generate_world, WorldConfig};
use recipegen::train::{build_vocab, evaluate_model, split_dataset, Trainer, TrainingConfig};

fn world(n: usize) -> WorldConfig {
    WorldConfig { num_videos: n, n_candidates: 20, ..WorldConfig::default() }
}

#[test]
fn synthetic_world_survives_a_json_roundtrip() {
    let records = generate_world(&world(6)).unwrap();
    let text = dataset_to_json(&records).unwrap();
    let (back, warnings) = parse_dataset(&text, "mem".as_ref(), &LoadOptions::default()).unwrap();
    assert!(warnings.is_empty());
    assert_eq!(back, records);
    assert_eq!(dataset_to_json(&back).unwrap(), text);
}

#[test]
fn oracle_sweep_never_gets_worse_with_more_candidates() {
    let records = generate_world(&world(10)).unwrap();
    let rows = oracle_sweep(&records, &[5, 10, 20], SentenceSource::GtSentences).unwrap();
    for pair in rows.windows(2) {
        assert!(pair[1].mean_tiou >= pair[0].mean_tiou);
    }
}

#[test]
fn random_baseline_predictions_are_valid() {
    let records = generate_world(&world(8)).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let preds = random_baseline(&records, &mut rng);
    for (p, r) in preds.iter().zip(&records) {
        p.validate(r.candidates.len()).unwrap();
        assert!(p.selections.windows(2).all(|w| w[0] < w[1]));
    }
}

#[test]
fn short_training_run_produces_scorable_recipes() {
    let records = generate_world(&world(12)).unwrap();
    let (train, val) = split_dataset(&records, 0.25);
    let cfg = ModelConfig { hidden: 16, heads: 2, ffn: 24, layers: 1, ..ModelConfig::toy(32) };
    for variant in [Variant::B, Variant::BIVT] {
        let vocab = build_vocab(&train, 1).unwrap();
        let lexicon = world(1).lexicon();
        let model = RecipeModel::new(ModelConfig { variant, ..cfg.clone() }, vocab, lexicon, 3).unwrap();
        let training = TrainingConfig { max_epochs: 2, batch_size: 4, ..TrainingConfig::default() };
        let mut t = Trainer::new(model, OptimizerConfig::default(), training).unwrap();
        let summary = t.fit(&train, &val, |_, _| Ok(())).unwrap();
        assert_eq!(summary.log.len(), 2);
        assert!(summary.log.iter().all(|r| r.loss_total.is_finite()));
        let report = evaluate_model(&t.model, &val).unwrap();
        assert_eq!(report.per_video.len(), val.len());
    }
}
