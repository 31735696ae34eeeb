use std::fmt::Write;
use std::path::PathBuf;

use recipegen::data::load_dataset;
use recipegen::oracle::{oracle_report, oracle_sweep, OracleReport, SentenceSource, SweepRow};
use serde::Serialize;

use super::{emit, required, CliResult};
use crate::cli::Common;
use crate::config::ExperimentConfig;

const NOTE: &str = "Oracle figures describe this dataset's candidate sets only; \
they are not comparable to oracle numbers measured on real video benchmarks.";

#[derive(Serialize)]
struct Output<'a> {
    report: &'a OracleReport,
    sweep: &'a [SweepRow],
    note: &'static str,
}

pub(crate) fn histogram_csv(hist: &[usize]) -> String {
    let width = 1.0 / hist.len() as f64;
    let mut out = String::from("bin_start,bin_end,count\n");
    for (i, c) in hist.iter().enumerate() {
        writeln!(out, "{:.1},{:.1},{c}", i as f64 * width, (i + 1) as f64 * width).expect("write to string");
    }
    out
}

pub fn oracle(
    common: &Common,
    dataset: Option<PathBuf>,
    mode: SentenceSource,
    hist_out: Option<PathBuf>,
    out: Option<PathBuf>,
    n_candidates: &[usize],
) -> CliResult {
    let cfg = ExperimentConfig::load_or_default(common.config.as_deref())?;
    let dataset = required(dataset, &cfg.paths.dataset, "dataset")?;
    let records = load_dataset(&dataset)?;
    let report = oracle_report(&records, mode)?;
    let sweep = oracle_sweep(&records, n_candidates, mode)?;
    if let Some(p) = &hist_out {
        emit(Some(p), &histogram_csv(&report.histogram))?;
    }
    let mut text = serde_json::to_string_pretty(&Output { report: &report, sweep: &sweep, note: NOTE })
        .map_err(recipegen::Error::from)?;
    text.push('\n');
    emit(out.or(cfg.paths.out).as_deref(), &text)
}
