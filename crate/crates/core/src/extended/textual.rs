use rand::Rng;

use crate::nn::{Graph, Linear, ParamStore, Var};

#[derive(Debug, Clone, Copy)]
pub struct TextualOutput {
    /// `[w_k, u_k^g, u_k^a]`, `K x 3 hidden`.
    pub context: Var,
    /// Log word-ingredient attention, `K x M`.
    pub log_alpha_ingredients: Var,
    /// Log word-action attention, `K x R`.
    pub log_alpha_actions: Var,
}

/// Bilinear attention from decoder states to ingredient states and to the
/// event-weighted actions.
#[derive(Debug, Clone)]
pub struct TextualAttention {
    pub ingredient: Linear,
    pub action: Linear,
}

impl TextualAttention {
    pub fn new<R: Rng + ?Sized>(store: &mut ParamStore, name: &str, hidden: usize, rng: &mut R) -> Self {
        TextualAttention {
            ingredient: Linear::new(store, &format!("{name}.ingredient"), hidden, hidden, false, rng),
            action: Linear::new(store, &format!("{name}.action"), hidden, hidden, false, rng),
        }
    }

    fn attend(g: &mut Graph, words: Var, items: Var, map: &Linear) -> (Var, Var) {
        let proj = map.forward(g, items);
        let pt = g.transpose(proj);
        let scores = g.matmul(words, pt);
        let alpha = g.softmax_rows(scores);
        let log_alpha = g.log_softmax_rows(scores);
        (g.matmul(alpha, items), log_alpha)
    }

    pub fn forward(&self, g: &mut Graph, words: Var, ingredients: Var, actions: Var) -> TextualOutput {
        let (ug, la_g) = Self::attend(g, words, ingredients, &self.ingredient);
        let (ua, la_a) = Self::attend(g, words, actions, &self.action);
        TextualOutput {
            context: g.concat_cols(&[words, ug, ua]),
            log_alpha_ingredients: la_g,
            log_alpha_actions: la_a,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::Mat;
    use approx::assert_relative_eq;
    use ndarray::array;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn setup() -> (ParamStore, TextualAttention) {
        let mut store = ParamStore::new();
        let t = TextualAttention::new(&mut store, "tx", 2, &mut ChaCha8Rng::seed_from_u64(4));
        (store, t)
    }

    #[test]
    fn single_ingredient_gets_all_weight() {
        let (store, t) = setup();
        let mut g = Graph::inference(&store);
        let w = g.constant(array![[0.3, 1.0], [2.0, -1.0]]);
        let gm = g.constant(array![[0.7, -0.2]]);
        let a = g.constant(array![[1.0, 0.0], [0.0, 1.0]]);
        let out = t.forward(&mut g, w, gm, a);
        assert!(g.value(out.log_alpha_ingredients).iter().all(|&v| v == 0.0));
        let ctx = g.value(out.context);
        assert_eq!(ctx.dim(), (2, 6));
        for k in 0..2 {
            assert_relative_eq!(ctx[[k, 2]], 0.7, epsilon = 1e-15);
            assert_relative_eq!(ctx[[k, 3]], -0.2, epsilon = 1e-15);
        }
    }

    #[test]
    fn zero_bilinear_gives_uniform() {
        let (mut store, t) = setup();
        store.value_mut(t.action.weight).fill(0.0);
        let mut g = Graph::inference(&store);
        let w = g.constant(array![[0.3, 1.0]]);
        let gm = g.constant(array![[0.7, -0.2]]);
        let a = g.constant(Mat::from_shape_fn((4, 2), |(i, j)| (i + j) as f64));
        let out = t.forward(&mut g, w, gm, a);
        for v in g.value(out.log_alpha_actions).iter() {
            assert_relative_eq!(v.exp(), 0.25, epsilon = 1e-15);
        }
    }

    #[test]
    fn hand_set_bilinear() {
        let (mut store, t) = setup();
        *store.value_mut(t.ingredient.weight) = array![[1.0, 0.0], [0.0, 2.0]];
        let mut g = Graph::inference(&store);
        let w = g.constant(array![[1.0, 1.0]]);
        let gm = g.constant(array![[1.0, 0.0], [0.0, 1.0]]);
        let a = g.constant(array![[1.0, 1.0]]);
        let out = t.forward(&mut g, w, gm, a);
        // scores: g1 -> 1, g2 -> 2
        let z = 1f64.exp() + 2f64.exp();
        assert_relative_eq!(g.value(out.log_alpha_ingredients)[[0, 0]].exp(), 1f64.exp() / z, epsilon = 1e-12);
        assert_relative_eq!(g.value(out.log_alpha_ingredients)[[0, 1]].exp(), 2f64.exp() / z, epsilon = 1e-12);
    }
}
