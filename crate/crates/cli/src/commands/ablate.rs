use std::fmt::Write;
use std::path::PathBuf;

use log::info;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use recipegen::data::{dataset_hash, load_dataset, DatasetRecord, GroundTruthRecipe};
use recipegen::eval::{evaluate_corpus, MetricReport};
use recipegen::model::Variant;
use recipegen::oracle::random_baseline;
use recipegen::synth::derive_seed;
use recipegen::train::{evaluate_model, Trainer, REPORT_KEYS};
use recipegen::{Error, Result};

use super::train::{fresh_model, prepare, run};
use super::{emit, required, CliResult};
use crate::cli::Common;
use crate::config::ExperimentConfig;

/// One row of the ablation table.
pub struct Cell {
    pub variant: String,
    pub n_candidates: Option<usize>,
    pub seed: u64,
    pub best_epoch: Option<usize>,
    pub report: MetricReport,
}

pub(crate) fn table_csv(cells: &[Cell], hash: &str) -> String {
    let mut out = String::from("variant,n_candidates,seed,dataset_hash,best_epoch");
    for k in REPORT_KEYS {
        write!(out, ",{k}").expect("write to string");
    }
    out.push('\n');
    for c in cells {
        let n = c.n_candidates.map(|n| n.to_string()).unwrap_or_default();
        let best = c.best_epoch.map(|e| e.to_string()).unwrap_or_default();
        write!(out, "{},{n},{},{hash},{best}", c.variant, c.seed).expect("write to string");
        for k in REPORT_KEYS {
            write!(out, ",{}", c.report.get(k).unwrap_or(f64::NAN)).expect("write to string");
        }
        out.push('\n');
    }
    out
}

fn random_cell(val: &[DatasetRecord], n: Option<usize>, seed: u64) -> Result<Cell> {
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, "random-baseline"));
    let preds = random_baseline(val, &mut rng);
    let refs: Vec<GroundTruthRecipe> = val.iter().map(|r| r.recipe.clone()).collect();
    Ok(Cell {
        variant: "random".into(),
        n_candidates: n,
        seed,
        best_epoch: None,
        report: evaluate_corpus(&preds, &refs)?,
    })
}

fn train_cell(cfg: &ExperimentConfig, variant: Variant, train: &[DatasetRecord], val: &[DatasetRecord]) -> Result<Cell> {
    let model = fresh_model(cfg, Some(variant), train)?;
    let mut trainer = Trainer::new(model, cfg.optimizer, cfg.training.clone())?;
    let summary = run(&mut trainer, train, val, None)?;
    Ok(Cell {
        variant: variant.to_string(),
        n_candidates: cfg.training.n_candidates,
        seed: cfg.training.seed,
        best_epoch: summary.best_epoch,
        report: evaluate_model(&trainer.model, val)?,
    })
}

pub fn ablate(
    common: &Common,
    dataset: Option<PathBuf>,
    out: Option<PathBuf>,
    variants: &[Variant],
    n_candidates: &[usize],
    seeds: &[u64],
) -> CliResult {
    let mut cfg = ExperimentConfig::load_or_default(common.config.as_deref())?;
    if let Some(s) = common.seed {
        cfg.training.seed = s;
    }
    cfg.validate()?;
    let dataset = required(dataset, &cfg.paths.dataset, "dataset")?;
    let records = load_dataset(&dataset)?;
    let hash = dataset_hash(&records)?;
    let ns: Vec<Option<usize>> = if n_candidates.is_empty() {
        vec![cfg.training.n_candidates]
    } else {
        n_candidates.iter().map(|&n| Some(n)).collect()
    };
    let seeds: Vec<u64> = if seeds.is_empty() { vec![cfg.training.seed] } else { seeds.to_vec() };

    let mut cells = Vec::new();
    for &seed in &seeds {
        for &n in &ns {
            let mut c = cfg.clone();
            c.training.seed = seed;
            c.training.n_candidates = n;
            let (train, val) = prepare(&c, &records);
            if train.is_empty() || val.is_empty() {
                return Err(Error::validation("dataset", "records", "ablation needs both training and validation videos").into());
            }
            cells.push(random_cell(&val, n, seed)?);
            for &v in variants {
                info!("ablation cell {v} n={n:?} seed={seed}");
                cells.push(train_cell(&c, v, &train, &val)?);
            }
        }
    }
    emit(out.or(cfg.paths.out).as_deref(), &table_csv(&cells, &hash))
}
