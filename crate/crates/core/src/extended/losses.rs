use super::labels::DistantLabels;
use crate::error::{Error, Result};
use crate::model::VsimNegatives;
use crate::nn::{Graph, Mat, Var};
use crate::vocab::UNK;

/// Item-to-event scores of both selectors at one step.
#[derive(Debug, Clone, Copy)]
pub struct SimulatorLogits {
    /// `R x N`.
    pub actions: Var,
    /// `M x N`.
    pub ingredients: Var,
}

fn negated_pick_sum(g: &mut Graph, log_probs: Var, positions: &[(usize, usize)]) -> Var {
    if positions.is_empty() {
        return g.constant(Mat::zeros((1, 1)));
    }
    let p = g.pick(log_probs, positions);
    let s = g.sum(p);
    g.scale(s, -1.0)
}

fn item_nll(
    g: &mut Graph,
    logits: Var,
    labels: &[bool],
    event: usize,
    negatives: VsimNegatives,
    what: &str,
) -> Result<Var> {
    let (items, n) = g.shape(logits);
    if items != labels.len() || event >= n {
        return Err(Error::Shape {
            op: "loss_vsim",
            detail: format!("{what} logits {items}x{n} vs {} labels at event {event}", labels.len()),
        });
    }
    let mut positions: Vec<(usize, usize)> = Vec::new();
    let table = match negatives {
        VsimNegatives::Skip => g.log_softmax_rows(logits),
        VsimNegatives::NullEvent => {
            let null = g.constant(Mat::zeros((items, 1)));
            let with_null = g.concat_cols(&[logits, null]);
            g.log_softmax_rows(with_null)
        }
    };
    for (i, &on) in labels.iter().enumerate() {
        if on {
            positions.push((i, event));
        } else if negatives == VsimNegatives::NullEvent {
            positions.push((i, n));
        }
    }
    Ok(negated_pick_sum(g, table, &positions))
}

/// Negative log-likelihood of the labeled event for every (step, item) with
/// a positive label, normalized over the event axis. Summed over the action
/// and ingredient selectors.
pub fn loss_vsim(
    g: &mut Graph,
    logits: &[SimulatorLogits],
    labels: &DistantLabels,
    negatives: VsimNegatives,
) -> Result<Var> {
    if logits.len() != labels.num_steps() {
        return Err(Error::Shape {
            op: "loss_vsim",
            detail: format!("{} logit steps vs {} labeled steps", logits.len(), labels.num_steps()),
        });
    }
    let mut total = g.constant(Mat::zeros((1, 1)));
    for (t, l) in logits.iter().enumerate() {
        let ev = labels.events[t];
        let a = item_nll(g, l.actions, &labels.actions[t], ev, negatives, "action")?;
        let i = item_nll(g, l.ingredients, &labels.ingredients[t], ev, negatives, "ingredient")?;
        total = g.add(total, a);
        total = g.add(total, i);
    }
    Ok(total)
}

/// Positions `(k, item)` where target token `k` equals an item's head token
/// (the last word of a multi-word name). UNK never matches.
pub fn tattn_targets(targets: &[usize], heads: &[usize]) -> Vec<(usize, usize)> {
    let mut out = Vec::new();
    for (k, &tok) in targets.iter().enumerate() {
        if tok == UNK {
            continue;
        }
        for (m, &h) in heads.iter().enumerate() {
            if h == tok {
                out.push((k, m));
            }
        }
    }
    out
}

/// `-sum log alpha` over matched (word, ingredient) and (word, action) pairs.
pub fn loss_tattn(
    g: &mut Graph,
    log_alpha_ingredients: Var,
    log_alpha_actions: Var,
    ingredient_pairs: &[(usize, usize)],
    action_pairs: &[(usize, usize)],
) -> Var {
    let a = negated_pick_sum(g, log_alpha_ingredients, ingredient_pairs);
    let b = negated_pick_sum(g, log_alpha_actions, action_pairs);
    g.add(a, b)
}

pub fn loss_extended(g: &mut Graph, total: Var, vsim: Var, tattn: Var) -> Var {
    let s = g.add(total, vsim);
    g.add(s, tattn)
}
