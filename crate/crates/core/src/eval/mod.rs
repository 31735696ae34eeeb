//! Event-level evaluation: tIoU, the multi-threshold dvc_eval harness, SODA
//! story alignment and event-count statistics.

mod counts;
mod dvc;
mod report;
mod soda;

pub use counts::event_count_stats;
pub use dvc::{dvc_eval, dvc_eval_scores, DVC_THRESHOLDS};
pub use report::{evaluate_corpus, MetricReport, VideoReport, COUNT_ETAS};
pub use soda::{soda, soda_from_scores, Alignment, PairScore, SodaScore};

use crate::data::TimedEvent;

/// Temporal intersection over union of two intervals.
pub fn tiou(a: &TimedEvent, b: &TimedEvent) -> f64 {
    let inter = (a.end.min(b.end) - a.start.max(b.start)).max(0.0);
    let union = a.end.max(b.end) - a.start.min(b.start);
    if union <= 0.0 {
        0.0
    } else {
        inter / union
    }
}
