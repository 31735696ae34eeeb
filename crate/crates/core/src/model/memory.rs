//! Memory-augmented recurrent transformer blocks and the selector/generator
//! memory exchange.

use rand::Rng;

use crate::error::Result;
use crate::nn::{FeedForward, Graph, LayerNorm, Linear, Mat, MultiHeadAttention, ParamStore, Var};

/// Per-layer memory slot matrices (`slots x hidden` each).
#[derive(Debug, Clone, PartialEq)]
pub struct MemoryState {
    pub layers: Vec<Mat>,
}

impl MemoryState {
    pub fn zeros(layers: usize, slots: usize, hidden: usize) -> Self {
        MemoryState {
            layers: vec![Mat::zeros((slots, hidden)); layers],
        }
    }

    pub fn to_graph(&self, g: &mut Graph) -> Vec<Var> {
        self.layers.iter().map(|m| g.constant(m.clone())).collect()
    }

    pub fn from_graph(g: &Graph, vars: &[Var]) -> Self {
        MemoryState {
            layers: vars.iter().map(|&v| g.value(v).clone()).collect(),
        }
    }

    pub fn is_finite(&self) -> bool {
        self.layers.iter().all(|m| m.iter().all(|v| v.is_finite()))
    }
}

/// One transformer layer whose attention also sees a set of memory slots,
/// followed by a gated memory update:
///
/// ```text
/// U  = attn(M, [M; X'])
/// C  = tanh(M Wmc + U Wuc + b)
/// Z  = sigmoid(M Wmz + U Wuz + b)
/// M' = (1 - Z) * C + Z * M
/// ```
#[derive(Debug, Clone)]
pub struct MemoryLayer {
    pub attn: MultiHeadAttention,
    pub norm1: LayerNorm,
    pub ff: FeedForward,
    pub norm2: LayerNorm,
    pub mem_attn: MultiHeadAttention,
    pub mem_cand: Linear,
    pub upd_cand: Linear,
    pub mem_gate: Linear,
    pub upd_gate: Linear,
}

impl MemoryLayer {
    pub fn new<R: Rng + ?Sized>(
        store: &mut ParamStore,
        name: &str,
        hidden: usize,
        heads: usize,
        ffn: usize,
        rng: &mut R,
    ) -> Result<Self> {
        Ok(MemoryLayer {
            attn: MultiHeadAttention::new(store, &format!("{name}.attn"), hidden, heads, rng)?,
            norm1: LayerNorm::new(store, &format!("{name}.norm1"), hidden),
            ff: FeedForward::new(store, &format!("{name}.ff"), hidden, ffn, rng),
            norm2: LayerNorm::new(store, &format!("{name}.norm2"), hidden),
            mem_attn: MultiHeadAttention::new(store, &format!("{name}.mem_attn"), hidden, heads, rng)?,
            mem_cand: Linear::new(store, &format!("{name}.mem_cand"), hidden, hidden, true, rng),
            upd_cand: Linear::new(store, &format!("{name}.upd_cand"), hidden, hidden, false, rng),
            mem_gate: Linear::new(store, &format!("{name}.mem_gate"), hidden, hidden, true, rng),
            upd_gate: Linear::new(store, &format!("{name}.upd_gate"), hidden, hidden, false, rng),
        })
    }

    /// `x` attends over `[memory; context; x]`. `context` rows are read-only
    /// keys (e.g. ingredient vectors). `causal` hides later rows of `x`.
    pub fn forward(&self, g: &mut Graph, x: Var, memory: Var, context: Option<Var>, causal: bool) -> (Var, Var) {
        let mut keys = vec![memory];
        keys.extend(context);
        keys.push(x);
        let prefix: usize = keys[..keys.len() - 1].iter().map(|&k| g.shape(k).0).sum();
        let keys = g.concat_rows(&keys);
        let mask = if causal {
            crate::nn::causal_mask(g.shape(x).0, prefix)
        } else {
            Vec::new()
        };
        let a = self.attn.forward(g, x, keys, &mask);
        let h = g.add(x, a);
        let h = self.norm1.forward(g, h);
        let f = self.ff.forward(g, h);
        let h2 = g.add(h, f);
        let out = self.norm2.forward(g, h2);

        let mem_keys = g.concat_rows(&[memory, out]);
        let u = self.mem_attn.forward(g, memory, mem_keys, &[]);
        let c1 = self.mem_cand.forward(g, memory);
        let c2 = self.upd_cand.forward(g, u);
        let c = g.add(c1, c2);
        let c = g.tanh(c);
        let z1 = self.mem_gate.forward(g, memory);
        let z2 = self.upd_gate.forward(g, u);
        let z = g.add(z1, z2);
        let z = g.sigmoid(z);
        let diff = g.sub(memory, c);
        let keep = g.mul(z, diff);
        let new_memory = g.add(c, keep);
        (out, new_memory)
    }
}

/// Stack of [`MemoryLayer`]s; layer `l` reads and writes memory `l`.
#[derive(Debug, Clone)]
pub struct MemoryTransformer {
    pub layers: Vec<MemoryLayer>,
}

impl MemoryTransformer {
    pub fn new<R: Rng + ?Sized>(
        store: &mut ParamStore,
        name: &str,
        layers: usize,
        hidden: usize,
        heads: usize,
        ffn: usize,
        rng: &mut R,
    ) -> Result<Self> {
        let layers = (0..layers)
            .map(|l| MemoryLayer::new(store, &format!("{name}.layer{l}"), hidden, heads, ffn, rng))
            .collect::<Result<_>>()?;
        Ok(MemoryTransformer { layers })
    }

    pub fn forward(
        &self,
        g: &mut Graph,
        x: Var,
        memory: &[Var],
        context: Option<Var>,
        causal: bool,
    ) -> (Var, Vec<Var>) {
        assert_eq!(memory.len(), self.layers.len(), "one memory per layer");
        let mut h = x;
        let mut next = Vec::with_capacity(memory.len());
        for (layer, &m) in self.layers.iter().zip(memory) {
            let (out, m2) = layer.forward(g, h, m, context, causal);
            h = out;
            next.push(m2);
        }
        (h, next)
    }
}

/// Element-wise max over every layer and slot: a single `1 x hidden` vector.
pub fn pool_memory(g: &mut Graph, memories: &[Var]) -> Var {
    assert!(!memories.is_empty(), "pool_memory needs at least one layer");
    let all = if memories.len() == 1 {
        memories[0]
    } else {
        g.concat_rows(memories)
    };
    if g.shape(all).0 == 1 {
        all
    } else {
        g.max_rows(all)
    }
}

/// The four maps of the memory exchange, shared by every layer.
#[derive(Debug, Clone)]
pub struct MemoryMixer {
    pub f1: Linear,
    pub f2: Linear,
    pub g1: Linear,
    pub g2: Linear,
}

impl MemoryMixer {
    pub fn new<R: Rng + ?Sized>(store: &mut ParamStore, name: &str, hidden: usize, rng: &mut R) -> Self {
        MemoryMixer {
            f1: Linear::new(store, &format!("{name}.f1"), hidden, hidden, true, rng),
            f2: Linear::new(store, &format!("{name}.f2"), hidden, hidden, true, rng),
            g1: Linear::new(store, &format!("{name}.g1"), hidden, hidden, true, rng),
            g2: Linear::new(store, &format!("{name}.g2"), hidden, hidden, true, rng),
        }
    }

    /// `V' = f1(V) * sigmoid(g2(g1(S)))`, `S' = g1(S) * sigmoid(f2(f1(V)))`.
    pub fn mix(&self, g: &mut Graph, v: Var, s: Var) -> (Var, Var) {
        let fv = self.f1.forward(g, v);
        let gs = self.g1.forward(g, s);
        let gate_v = self.g2.forward(g, gs);
        let gate_v = g.sigmoid(gate_v);
        let gate_s = self.f2.forward(g, fv);
        let gate_s = g.sigmoid(gate_s);
        (g.mul(fv, gate_v), g.mul(gs, gate_s))
    }

    pub fn mix_layers(&self, g: &mut Graph, v: &[Var], s: &[Var]) -> (Vec<Var>, Vec<Var>) {
        v.iter().zip(s).map(|(&v, &s)| self.mix(g, v, s)).unzip()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use ndarray::array;
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn sigmoid(x: f64) -> f64 {
        1.0 / (1.0 + (-x).exp())
    }

    fn zero_linear(store: &mut ParamStore, l: &Linear) {
        store.value_mut(l.weight).fill(0.0);
        if let Some(b) = l.bias {
            store.value_mut(b).fill(0.0);
        }
    }

    fn identity_linear(store: &mut ParamStore, l: &Linear) {
        let n = store.value(l.weight).nrows();
        *store.value_mut(l.weight) = Mat::eye(n);
        if let Some(b) = l.bias {
            store.value_mut(b).fill(0.0);
        }
    }

    #[test]
    fn pool_single_layer_single_slot_is_identity() {
        let store = ParamStore::new();
        let mut g = Graph::inference(&store);
        let m = g.constant(array![[0.5, -1.0, 2.0]]);
        let p = pool_memory(&mut g, &[m]);
        assert_eq!(g.value(p), &array![[0.5, -1.0, 2.0]]);
    }

    #[test]
    fn pool_two_layers() {
        let store = ParamStore::new();
        let mut g = Graph::inference(&store);
        let a = g.constant(array![[1.0, -1.0]]);
        let b = g.constant(array![[0.0, 2.0]]);
        let p = pool_memory(&mut g, &[a, b]);
        assert_eq!(g.value(p), &array![[1.0, 2.0]]);
    }

    proptest! {
        #[test]
        fn pool_matches_scan(vals in proptest::collection::vec(-5.0f64..5.0, 24), layers in 1usize..4) {
            let store = ParamStore::new();
            let mut g = Graph::inference(&store);
            // layers x (2 slots x 4 dims) drawn from the flat list
            let mats: Vec<Mat> = (0..layers)
                .map(|l| Mat::from_shape_fn((2, 4), |(r, c)| vals[(l * 8 + r * 4 + c) % vals.len()]))
                .collect();
            let vars: Vec<Var> = mats.iter().map(|m| g.constant(m.clone())).collect();
            let p = pool_memory(&mut g, &vars);
            for c in 0..4 {
                let mut best = f64::NEG_INFINITY;
                for m in &mats {
                    for r in 0..2 {
                        best = best.max(m[[r, c]]);
                    }
                }
                prop_assert_eq!(g.value(p)[[0, c]], best);
            }
        }
    }

    #[test]
    fn zero_gate_maps_halve_partner() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let mut store = ParamStore::new();
        let mixer = MemoryMixer::new(&mut store, "mix", 3, &mut rng);
        zero_linear(&mut store, &mixer.g2);
        let mut g = Graph::inference(&store);
        let v = g.constant(array![[0.3, -0.7, 1.1]]);
        let s = g.constant(array![[2.0, 0.1, -0.4]]);
        let (vh, _) = mixer.mix(&mut g, v, s);
        let fv = mixer.f1.forward(&mut g, v);
        let (vh, fv) = (g.value(vh).clone(), g.value(fv).clone());
        assert_eq!(vh, fv * 0.5);
    }

    #[test]
    fn identity_f1_zero_f2_halves_g1() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let mut store = ParamStore::new();
        let mixer = MemoryMixer::new(&mut store, "mix", 3, &mut rng);
        identity_linear(&mut store, &mixer.f1);
        zero_linear(&mut store, &mixer.f2);
        let mut g = Graph::inference(&store);
        let v = g.constant(array![[0.3, -0.7, 1.1]]);
        let s = g.constant(array![[2.0, 0.1, -0.4]]);
        let (_, sh) = mixer.mix(&mut g, v, s);
        let gs = mixer.g1.forward(&mut g, s);
        assert_eq!(g.value(sh), &(g.value(gs) * 0.5));
    }

    #[test]
    fn mixer_matches_dense_formula() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mut store = ParamStore::new();
        let mixer = MemoryMixer::new(&mut store, "mix", 4, &mut rng);
        let vm = Mat::from_shape_fn((2, 4), |(i, j)| (i as f64 - j as f64) * 0.3);
        let sm = Mat::from_shape_fn((2, 4), |(i, j)| ((i * 4 + j) as f64).sin());
        let lin = |l: &Linear, x: &Mat| x.dot(store.value(l.weight)) + store.value(l.bias.unwrap());
        let fv = lin(&mixer.f1, &vm);
        let gs = lin(&mixer.g1, &sm);
        let expect_v = &fv * &lin(&mixer.g2, &gs).mapv(sigmoid);
        let expect_s = &gs * &lin(&mixer.f2, &fv).mapv(sigmoid);
        let mut g = Graph::inference(&store);
        let v = g.constant(vm.clone());
        let s = g.constant(sm.clone());
        let (vh, sh) = mixer.mix(&mut g, v, s);
        for (a, b) in g.value(vh).iter().zip(expect_v.iter()) {
            assert_relative_eq!(*a, *b, epsilon = 1e-12);
        }
        for (a, b) in g.value(sh).iter().zip(expect_s.iter()) {
            assert_relative_eq!(*a, *b, epsilon = 1e-12);
        }
    }

    #[test]
    fn memory_layer_is_deterministic_and_finite() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let mut store = ParamStore::new();
        let tf = MemoryTransformer::new(&mut store, "tf", 2, 8, 2, 16, &mut rng).unwrap();
        let x = Mat::from_shape_fn((3, 8), |(i, j)| ((i + 2 * j) as f64).cos());
        let run = || {
            let mut g = Graph::inference(&store);
            let mem = MemoryState::zeros(2, 1, 8).to_graph(&mut g);
            let xv = g.constant(x.clone());
            let (h, m) = tf.forward(&mut g, xv, &mem, None, false);
            (g.value(h).clone(), MemoryState::from_graph(&g, &m))
        };
        let (h1, m1) = run();
        let (h2, m2) = run();
        assert_eq!(h1, h2);
        assert_eq!(m1, m2);
        assert!(m1.is_finite());
        assert_eq!(m1.layers[0].dim(), (1, 8));
    }

    #[test]
    fn causal_decoder_rows_ignore_future() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let mut store = ParamStore::new();
        let tf = MemoryTransformer::new(&mut store, "tf", 1, 4, 1, 8, &mut rng).unwrap();
        let x = Mat::from_shape_fn((3, 4), |(i, j)| (i * 4 + j) as f64 * 0.1);
        let run = |x: Mat| {
            let mut g = Graph::inference(&store);
            let mem = MemoryState::zeros(1, 1, 4).to_graph(&mut g);
            let xv = g.constant(x);
            let (h, _) = tf.forward(&mut g, xv, &mem, None, true);
            g.value(h).row(0).to_owned()
        };
        let mut x2 = x.clone();
        x2.row_mut(2).fill(9.0);
        assert_eq!(run(x), run(x2));
    }

    /// One layer, one head, hand-set weights; the attention output for two
    /// rows is computed directly.
    #[test]
    fn hand_evaluated_attention_layer() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let mut store = ParamStore::new();
        let layer = MemoryLayer::new(&mut store, "l", 2, 1, 2, &mut rng).unwrap();
        for l in [&layer.attn.query, &layer.attn.key, &layer.attn.value, &layer.attn.output] {
            identity_linear(&mut store, l);
        }
        zero_linear(&mut store, &layer.ff.up);
        zero_linear(&mut store, &layer.ff.down);
        let x = array![[1.0, 0.0], [0.0, 2.0]];
        let mut g = Graph::inference(&store);
        let xv = g.constant(x.clone());
        let mem = g.constant(Mat::zeros((1, 2)));
        let (out, _) = layer.forward(&mut g, xv, mem, None, false);
        // keys: [0 0; 1 0; 0 2], scale 1/sqrt(2)
        let keys = array![[0.0, 0.0], [1.0, 0.0], [0.0, 2.0]];
        let mut expected = Mat::zeros((2, 2));
        for q in 0..2 {
            let s: Vec<f64> = (0..3).map(|k| x.row(q).dot(&keys.row(k)) / 2f64.sqrt()).collect();
            let z: f64 = s.iter().map(|v| v.exp()).sum();
            let mut a = ndarray::Array1::<f64>::zeros(2);
            for k in 0..3 {
                a = a + &keys.row(k) * (s[k].exp() / z);
            }
            let h = &x.row(q) + &a;
            let mean = h.sum() / 2.0;
            let var = h.mapv(|v| (v - mean).powi(2)).sum() / 2.0;
            let n = h.mapv(|v| (v - mean) / (var + 1e-5).sqrt());
            // second norm of an already normalized row
            let mean2 = n.sum() / 2.0;
            let var2 = n.mapv(|v| (v - mean2).powi(2)).sum() / 2.0;
            expected.row_mut(q).assign(&n.mapv(|v| (v - mean2) / (var2 + 1e-5).sqrt()));
        }
        for (a, b) in g.value(out).iter().zip(expected.iter()) {
            assert_relative_eq!(*a, *b, epsilon = 1e-9);
        }
    }
}
