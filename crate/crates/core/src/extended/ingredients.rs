use rand::Rng;

use crate::data::tokenize;
use crate::error::{Error, Result};
use crate::nn::{Graph, Linear, ParamStore, Var};
use crate::vocab::{Vocabulary, UNK};

/// Token ids of every ingredient name. A name that tokenizes to nothing is
/// represented by UNK.
pub fn ingredient_token_ids(vocab: &Vocabulary, ingredients: &[String]) -> Vec<Vec<usize>> {
    ingredients
        .iter()
        .map(|name| {
            let ids = vocab.encode(&tokenize(name));
            if ids.is_empty() {
                vec![UNK]
            } else {
                ids
            }
        })
        .collect()
}

/// Mean word embedding per ingredient followed by a two-layer ReLU MLP.
#[derive(Debug, Clone)]
pub struct IngredientEncoder {
    pub up: Linear,
    pub down: Linear,
}

impl IngredientEncoder {
    pub fn new<R: Rng + ?Sized>(store: &mut ParamStore, name: &str, hidden: usize, rng: &mut R) -> Self {
        IngredientEncoder {
            up: Linear::new(store, &format!("{name}.up"), hidden, hidden, true, rng),
            down: Linear::new(store, &format!("{name}.down"), hidden, hidden, true, rng),
        }
    }

    /// Word-vector average of each ingredient, one row per ingredient.
    pub fn pooled_words(g: &mut Graph, embedding: Var, ingredients: &[Vec<usize>]) -> Result<Var> {
        if ingredients.is_empty() {
            return Err(Error::InvalidArgument("the extended model needs at least one ingredient".into()));
        }
        let rows: Vec<Var> = ingredients
            .iter()
            .map(|ids| {
                let words = g.gather_rows(embedding, ids);
                if ids.len() == 1 {
                    words
                } else {
                    g.mean_rows(words)
                }
            })
            .collect();
        Ok(if rows.len() == 1 { rows[0] } else { g.concat_rows(&rows) })
    }

    /// `G0`, `M x hidden`.
    pub fn encode(&self, g: &mut Graph, embedding: Var, ingredients: &[Vec<usize>]) -> Result<Var> {
        let x = Self::pooled_words(g, embedding, ingredients)?;
        let h = self.up.forward(g, x);
        let h = g.relu(h);
        Ok(self.down.forward(g, h))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::Mat;
    use approx::assert_relative_eq;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn setup() -> (ParamStore, IngredientEncoder, crate::nn::ParamId, Vocabulary) {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let mut store = ParamStore::new();
        let vocab = Vocabulary::from_tokens(
            ["<pad>", "<bos>", "<eos>", "<unk>", "parmesan", "cheese", "eggs"].map(String::from).to_vec(),
        )
        .unwrap();
        let emb = store.glorot("emb", vocab.len(), 4, &mut rng);
        let enc = IngredientEncoder::new(&mut store, "ing", 4, &mut rng);
        (store, enc, emb, vocab)
    }

    #[test]
    fn multi_word_is_mean_of_words() {
        let (store, _, emb, vocab) = setup();
        let ids = ingredient_token_ids(&vocab, &["Parmesan Cheese".to_string()]);
        let mut g = Graph::inference(&store);
        let e = g.param(emb);
        let pooled = IngredientEncoder::pooled_words(&mut g, e, &ids).unwrap();
        let table = store.value(emb);
        let expected = (&table.row(vocab.id("parmesan")) + &table.row(vocab.id("cheese"))) / 2.0;
        for (a, b) in g.value(pooled).iter().zip(expected.iter()) {
            assert_relative_eq!(*a, *b, epsilon = 1e-15);
        }
    }

    #[test]
    fn single_word_goes_through_mlp() {
        let (store, enc, emb, vocab) = setup();
        let ids = ingredient_token_ids(&vocab, &["eggs".to_string()]);
        let mut g = Graph::inference(&store);
        let e = g.param(emb);
        let out = enc.encode(&mut g, e, &ids).unwrap();
        let x: Mat = store.value(emb).row(vocab.id("eggs")).to_owned().insert_axis(ndarray::Axis(0));
        let h = (x.dot(store.value(enc.up.weight)) + store.value(enc.up.bias.unwrap())).mapv(|v| v.max(0.0));
        let y = h.dot(store.value(enc.down.weight)) + store.value(enc.down.bias.unwrap());
        assert_eq!(g.value(out), &y);
    }

    #[test]
    fn empty_list_rejected_and_encoding_deterministic() {
        let (store, enc, emb, vocab) = setup();
        let mut g = Graph::inference(&store);
        let e = g.param(emb);
        assert!(enc.encode(&mut g, e, &[]).is_err());
        let ids = ingredient_token_ids(&vocab, &["eggs".to_string(), "parmesan cheese".to_string()]);
        let a = enc.encode(&mut g, e, &ids).unwrap();
        let b = enc.encode(&mut g, e, &ids).unwrap();
        assert_eq!(g.value(a), g.value(b));
        assert_eq!(g.shape(a), (2, 4));
    }

    #[test]
    fn unknown_name_maps_to_unk() {
        let (_, _, _, vocab) = setup();
        assert_eq!(ingredient_token_ids(&vocab, &["!!".to_string()]), vec![vec![UNK]]);
    }
}
