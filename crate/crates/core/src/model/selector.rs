use crate::error::{Error, Result};
use crate::nn::{argmax, gumbel_softmax, Graph, GumbelNoise, Mat, Var};

/// Log-probabilities over the `N` candidates plus STOP (last column):
/// `softmax_n(h_n . v)` with forbidden candidates masked out.
pub fn event_log_probs(g: &mut Graph, events: Var, stop: Var, pooled: Var, forbidden: &[usize]) -> Result<Var> {
    let n = g.shape(events).0;
    if let Some(&bad) = forbidden.iter().find(|&&i| i >= n) {
        return Err(Error::InvalidArgument(format!("forbidden index {bad} outside {n} candidates")));
    }
    let rows = g.concat_rows(&[events, stop]);
    let vt = g.transpose(pooled);
    let scores = g.matmul(rows, vt);
    let scores = g.transpose(scores);
    let scores = if forbidden.is_empty() {
        scores
    } else {
        let pos: Vec<(usize, usize)> = forbidden.iter().map(|&i| (0, i)).collect();
        g.mask_fill(scores, &pos)
    };
    Ok(g.log_softmax_rows(scores))
}

/// How a step's event is picked.
pub enum Selection<'a> {
    /// Deterministic argmax.
    Infer,
    /// Gumbel-softmax sample; `forced` fixes the chosen index (teacher
    /// forcing) without changing the gradient path.
    Train {
        tau: f64,
        hard: bool,
        forced: Option<usize>,
        noise: &'a mut dyn GumbelNoise,
    },
}

/// Returns the `1 x (N+1)` selection vector and the chosen index (`N` is STOP).
pub fn select_event(g: &mut Graph, log_probs: Var, selection: Selection<'_>) -> Result<(Var, usize)> {
    match selection {
        Selection::Infer => {
            let row = g.value(log_probs);
            let k = argmax(row.as_slice().expect("contiguous"));
            let mut one_hot = Mat::zeros(row.dim());
            one_hot[[0, k]] = 1.0;
            Ok((g.constant(one_hot), k))
        }
        Selection::Train { tau, hard, forced, noise } => gumbel_softmax(g, log_probs, tau, hard, forced, noise),
    }
}

/// `y[..N] . H`: the chosen event vector (or a mixture in soft mode).
pub fn selected_representation(g: &mut Graph, selection: Var, events: Var) -> Var {
    let n = g.shape(events).0;
    let y = g.slice_cols(selection, 0, n);
    g.matmul(y, events)
}
