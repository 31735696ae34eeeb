use rand::Rng;

use super::memory::MemoryTransformer;
use crate::error::Result;
use crate::extended::{TextualAttention, TextualOutput};
use crate::nn::{positional_encoding, Graph, Linear, ParamStore, Var};

/// Causal memory-augmented decoder conditioned on the selected event.
#[derive(Debug, Clone)]
pub struct SentenceGenerator {
    pub adapter: Linear,
    pub transformer: MemoryTransformer,
    pub textual: Option<TextualAttention>,
    pub output: Linear,
    pub hidden: usize,
}

/// Read-only inputs of one decoding pass.
#[derive(Debug, Clone, Copy)]
pub struct DecodeInputs {
    pub embedding: Var,
    pub event: Var,
    /// Generator-side ingredient vectors, visible to every position.
    pub context: Option<Var>,
    /// Current ingredient state and event-weighted actions.
    pub grounding: Option<(Var, Var)>,
}

#[derive(Debug, Clone)]
pub struct DecodeOutput {
    /// `K x V` next-token scores.
    pub logits: Var,
    pub memory: Vec<Var>,
    pub textual: Option<TextualOutput>,
}

impl SentenceGenerator {
    #[allow(clippy::too_many_arguments)]
    pub fn new<R: Rng + ?Sized>(
        store: &mut ParamStore,
        name: &str,
        vocab_size: usize,
        hidden: usize,
        layers: usize,
        heads: usize,
        ffn: usize,
        textual: Option<TextualAttention>,
        rng: &mut R,
    ) -> Result<Self> {
        let adapter = Linear::new(store, &format!("{name}.adapter"), hidden, hidden, true, rng);
        let transformer = MemoryTransformer::new(store, &format!("{name}.decoder"), layers, hidden, heads, ffn, rng)?;
        let width = if textual.is_some() { 3 * hidden } else { hidden };
        let output = Linear::new(store, &format!("{name}.output"), width, vocab_size, true, rng);
        Ok(SentenceGenerator { adapter, transformer, textual, output, hidden })
    }

    /// Runs the decoder over `tokens` (starting with BOS); row `k` of the
    /// logits predicts token `k + 1`.
    pub fn decode(&self, g: &mut Graph, inputs: DecodeInputs, tokens: &[usize], memory: &[Var]) -> DecodeOutput {
        let k = tokens.len();
        let words = g.gather_rows(inputs.embedding, tokens);
        let words = self.adapter.forward(g, words);
        let words = g.relu(words);
        let ev = g.repeat_rows(inputs.event, k);
        let pe = g.constant(positional_encoding(k, self.hidden, 0));
        let x = g.add(words, ev);
        let x = g.add(x, pe);
        let (h, memory) = self.transformer.forward(g, x, memory, inputs.context, true);
        match (&self.textual, inputs.grounding) {
            (Some(tx), Some((ingredients, actions))) => {
                let out = tx.forward(g, h, ingredients, actions);
                DecodeOutput {
                    logits: self.output.forward(g, out.context),
                    memory,
                    textual: Some(out),
                }
            }
            _ => DecodeOutput {
                logits: self.output.forward(g, h),
                memory,
                textual: None,
            },
        }
    }
}
