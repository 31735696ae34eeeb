use rand::Rng;

use super::graph::{Graph, Mat, Var};
use super::params::{ParamId, ParamStore};
use crate::error::{Error, Result};

/// `y = x W + b` on row vectors; `W` is `in x out`.
#[derive(Debug, Clone)]
pub struct Linear {
    pub weight: ParamId,
    pub bias: Option<ParamId>,
}

impl Linear {
    pub fn new<R: Rng + ?Sized>(
        store: &mut ParamStore,
        name: &str,
        input: usize,
        output: usize,
        bias: bool,
        rng: &mut R,
    ) -> Self {
        Linear {
            weight: store.glorot(format!("{name}.weight"), input, output, rng),
            bias: bias.then(|| store.zeros(format!("{name}.bias"), 1, output)),
        }
    }

    pub fn forward(&self, g: &mut Graph, x: Var) -> Var {
        let w = g.param(self.weight);
        let y = g.matmul(x, w);
        match self.bias {
            Some(b) => {
                let b = g.param(b);
                g.add_row(y, b)
            }
            None => y,
        }
    }

    pub fn input_dim(&self, store: &ParamStore) -> usize {
        store.value(self.weight).nrows()
    }

    pub fn output_dim(&self, store: &ParamStore) -> usize {
        store.value(self.weight).ncols()
    }
}

/// Checked affine map on graph nodes: `x (m x k)`, `w (k x n)`, `b (1 x n)`.
pub fn linear(g: &mut Graph, x: Var, w: Var, b: Option<Var>) -> Result<Var> {
    let (xs, ws) = (g.shape(x), g.shape(w));
    if xs.1 != ws.0 {
        return Err(Error::Shape {
            op: "linear",
            detail: format!("input {:?} incompatible with weight {:?}", xs, ws),
        });
    }
    let y = g.matmul(x, w);
    match b {
        Some(b) if g.shape(b) != (1, ws.1) => Err(Error::Shape {
            op: "linear",
            detail: format!("bias {:?} incompatible with output width {}", g.shape(b), ws.1),
        }),
        Some(b) => Ok(g.add_row(y, b)),
        None => Ok(y),
    }
}

#[derive(Debug, Clone)]
pub struct LayerNorm {
    pub gamma: ParamId,
    pub beta: ParamId,
}

impl LayerNorm {
    pub fn new(store: &mut ParamStore, name: &str, dim: usize) -> Self {
        LayerNorm {
            gamma: store.add(format!("{name}.gamma"), Mat::ones((1, dim))),
            beta: store.zeros(format!("{name}.beta"), 1, dim),
        }
    }

    pub fn forward(&self, g: &mut Graph, x: Var) -> Var {
        let n = g.normalize_rows(x, 1e-5);
        let gamma = g.param(self.gamma);
        let beta = g.param(self.beta);
        let y = g.mul_row(n, gamma);
        g.add_row(y, beta)
    }
}

#[derive(Debug, Clone)]
pub struct FeedForward {
    pub up: Linear,
    pub down: Linear,
}

impl FeedForward {
    pub fn new<R: Rng + ?Sized>(store: &mut ParamStore, name: &str, dim: usize, hidden: usize, rng: &mut R) -> Self {
        FeedForward {
            up: Linear::new(store, &format!("{name}.up"), dim, hidden, true, rng),
            down: Linear::new(store, &format!("{name}.down"), hidden, dim, true, rng),
        }
    }

    pub fn forward(&self, g: &mut Graph, x: Var) -> Var {
        let h = self.up.forward(g, x);
        let h = g.relu(h);
        self.down.forward(g, h)
    }
}

/// Scaled dot-product attention with `heads` heads and an output projection.
#[derive(Debug, Clone)]
pub struct MultiHeadAttention {
    pub query: Linear,
    pub key: Linear,
    pub value: Linear,
    pub output: Linear,
    pub heads: usize,
    pub dim: usize,
}

impl MultiHeadAttention {
    pub fn new<R: Rng + ?Sized>(
        store: &mut ParamStore,
        name: &str,
        dim: usize,
        heads: usize,
        rng: &mut R,
    ) -> Result<Self> {
        if heads == 0 || !dim.is_multiple_of(heads) {
            return Err(Error::Config(format!(
                "model dimension {dim} is not divisible by {heads} heads"
            )));
        }
        Ok(MultiHeadAttention {
            query: Linear::new(store, &format!("{name}.q"), dim, dim, true, rng),
            // a key bias only shifts each score row uniformly, so it is omitted
            key: Linear::new(store, &format!("{name}.k"), dim, dim, false, rng),
            value: Linear::new(store, &format!("{name}.v"), dim, dim, true, rng),
            output: Linear::new(store, &format!("{name}.o"), dim, dim, true, rng),
            heads,
            dim,
        })
    }

    /// `queries (m x d)` attend over `memory (n x d)`. `masked` lists
    /// (query, key) positions that must receive no weight.
    pub fn forward(&self, g: &mut Graph, queries: Var, memory: Var, masked: &[(usize, usize)]) -> Var {
        self.forward_with_weights(g, queries, memory, masked).0
    }

    /// As [`forward`](Self::forward), also returning each head's attention
    /// weight matrix.
    pub fn forward_with_weights(
        &self,
        g: &mut Graph,
        queries: Var,
        memory: Var,
        masked: &[(usize, usize)],
    ) -> (Var, Vec<Var>) {
        let q = self.query.forward(g, queries);
        let k = self.key.forward(g, memory);
        let v = self.value.forward(g, memory);
        let dk = self.dim / self.heads;
        let scale = 1.0 / (dk as f64).sqrt();
        let mut outs = Vec::with_capacity(self.heads);
        let mut weights = Vec::with_capacity(self.heads);
        for h in 0..self.heads {
            let (qh, kh, vh) = if self.heads == 1 {
                (q, k, v)
            } else {
                (
                    g.slice_cols(q, h * dk, dk),
                    g.slice_cols(k, h * dk, dk),
                    g.slice_cols(v, h * dk, dk),
                )
            };
            let kt = g.transpose(kh);
            let scores = g.matmul(qh, kt);
            let scores = g.scale(scores, scale);
            let scores = if masked.is_empty() {
                scores
            } else {
                g.mask_fill(scores, masked)
            };
            let w = g.softmax_rows(scores);
            weights.push(w);
            outs.push(g.matmul(w, vh));
        }
        let cat = if outs.len() == 1 { outs[0] } else { g.concat_cols(&outs) };
        (self.output.forward(g, cat), weights)
    }
}

/// Sinusoidal positional encodings for positions `offset..offset + len`.
pub fn positional_encoding(len: usize, dim: usize, offset: usize) -> Mat {
    Mat::from_shape_fn((len, dim), |(p, i)| {
        let pos = (p + offset) as f64;
        let freq = 1.0 / 10000f64.powf((2 * (i / 2)) as f64 / dim as f64);
        if i % 2 == 0 {
            (pos * freq).sin()
        } else {
            (pos * freq).cos()
        }
    })
}

/// Causal mask positions for `rows` queries over `prefix + rows` keys where
/// the first `prefix` keys are always visible.
pub fn causal_mask(rows: usize, prefix: usize) -> Vec<(usize, usize)> {
    let mut out = Vec::new();
    for q in 0..rows {
        for k in (q + 1)..rows {
            out.push((q, prefix + k));
        }
    }
    out
}
