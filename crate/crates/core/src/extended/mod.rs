//! Ingredient-grounded extension: ingredient encoders, the dot-product
//! visual simulator, textual attention, distant supervision and the extra
//! losses.

mod ingredients;
mod labels;
mod losses;
mod simulator;
mod textual;

pub use ingredients::{ingredient_token_ids, IngredientEncoder};
pub use labels::{contains_phrase, distant_labels, DistantLabels};
pub use losses::{loss_extended, loss_tattn, loss_vsim, tattn_targets, SimulatorLogits};
pub use simulator::{fuse_event_representations, update_ingredients, SelectorOutput, VisualSimulator};
pub use textual::{TextualAttention, TextualOutput};
