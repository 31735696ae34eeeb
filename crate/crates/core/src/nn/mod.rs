//! Minimal neural-network substrate: autodiff tape, parameter storage,
//! attention layers, Gumbel-softmax and the Adam optimizer.

pub mod adam;
pub mod gradcheck;
pub mod graph;
pub mod gumbel;
pub mod layers;
pub mod params;

pub use adam::{adam_step, AdamState, OptimizerConfig};
pub use gradcheck::{check_gradients, GradCheck};
pub use graph::{Grads, Graph, Mat, Var};
pub use gumbel::{argmax, gumbel_softmax, gumbel_softmax_sample, GumbelNoise, RngNoise, ZeroNoise};
pub use layers::{causal_mask, linear, positional_encoding, FeedForward, LayerNorm, Linear, MultiHeadAttention};
pub use params::{NamedArray, ParamId, ParamStore};
