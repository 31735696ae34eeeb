use crate::error::{Error, Result};
use crate::nn::{Graph, Mat, Var};
use crate::vocab::PAD;

/// `-sum_t log p_t(label_t)` over per-step `1 x (N+1)` log-probability rows.
pub fn loss_event(g: &mut Graph, log_probs: &[Var], labels: &[usize]) -> Result<Var> {
    if log_probs.len() != labels.len() {
        return Err(Error::InvalidArgument(format!(
            "{} selection steps but {} labels",
            log_probs.len(),
            labels.len()
        )));
    }
    let mut total = g.constant(Mat::zeros((1, 1)));
    for (&lp, &label) in log_probs.iter().zip(labels) {
        let width = g.shape(lp).1;
        if label >= width {
            return Err(Error::InvalidArgument(format!("label {label} outside {width} choices")));
        }
        let p = g.pick(lp, &[(0, label)]);
        total = g.sub(total, p);
    }
    Ok(total)
}

/// Token NLL of teacher-forced logits (`K x V`) against `targets`, skipping PAD.
pub fn loss_sentence(g: &mut Graph, logits: Var, targets: &[usize]) -> Var {
    assert_eq!(g.shape(logits).0, targets.len(), "one logit row per target");
    let positions: Vec<(usize, usize)> = targets
        .iter()
        .enumerate()
        .filter(|(_, &t)| t != PAD)
        .map(|(k, &t)| (k, t))
        .collect();
    if positions.is_empty() {
        return g.constant(Mat::zeros((1, 1)));
    }
    let lp = g.log_softmax_rows(logits);
    let picked = g.pick(lp, &positions);
    let s = g.sum(picked);
    g.scale(s, -1.0)
}

pub fn loss_total(g: &mut Graph, event: Var, sentence: Var) -> Var {
    g.add(event, sentence)
}
