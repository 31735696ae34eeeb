use std::path::{Path, PathBuf};

use recipegen::data::{load_dataset, load_predictions, GroundTruthRecipe};
use recipegen::eval::evaluate_corpus;

fn fixture(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures").join(name)
}

fn report_json() -> String {
    let refs: Vec<GroundTruthRecipe> = load_dataset(&fixture("golden_dataset.json"))
        .unwrap()
        .into_iter()
        .map(|r| r.recipe)
        .collect();
    let preds = load_predictions(&fixture("golden_predictions.json")).unwrap();
    evaluate_corpus(&preds, &refs).unwrap().to_json().unwrap()
}

#[test]
fn golden_report_is_stable() {
    let stored = std::fs::read_to_string(fixture("golden_report.json")).unwrap();
    assert_eq!(report_json(), stored);
}

#[test]
fn golden_values_match_hand_computation() {
    let report: serde_json::Value = serde_json::from_str(&report_json()).unwrap();
    let m = &report["metrics"];
    // video a: one exact match plus [50,80] vs [55,85] (25/35), 2 predictions, 3 references
    let matched = 1.0 + 25.0 / 35.0;
    let (p, r) = (matched / 2.0, matched / 3.0);
    let f1_a = 2.0 * p * r / (p + r);
    let a = report["per_video"][0]["metrics"]["soda.tiou"].as_f64().unwrap();
    assert!((a - f1_a).abs() < 1e-12);
    assert!((m["soda.tiou"].as_f64().unwrap() - (f1_a + 1.0) / 2.0).abs() < 1e-12);
    assert_eq!(m["count_stats.eta0"].as_f64(), Some(50.0));
    assert_eq!(m["count_stats.eta1"].as_f64(), Some(100.0));
    assert_eq!(report["per_video"][1]["metrics"]["dvc_eval.bleu4"].as_f64(), Some(1.0));
}
