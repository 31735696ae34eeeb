//! Story-aware recipe generation from candidate video events.
//!
//! The crate bundles the data formats, captioning and event-level metrics,
//! oracle analysis, a small reverse-mode autodiff substrate, the base and
//! ingredient-grounded recipe models, and a deterministic synthetic kitchen
//! world used for desk-scale experiments.

pub mod data;
pub mod error;
pub mod eval;
pub mod extended;
pub mod metrics;
pub mod model;
pub mod nn;
pub mod oracle;
pub mod synth;
pub mod train;
pub mod vocab;

pub use error::{Error, Result};
