use rand::Rng;

use crate::nn::{Graph, Linear, ParamStore, Var};

/// Both directions of one item-event attention.
#[derive(Debug, Clone, Copy)]
pub struct SelectorOutput {
    /// Event-weighted item vectors (`items x hidden`).
    pub weighted_items: Var,
    /// Item-weighted event vectors (`N x hidden`).
    pub weighted_events: Var,
    /// Item-to-event scores before the softmax (`items x N`).
    pub logits: Var,
}

/// Dot-product attention between events and actions / ingredient states.
/// The event-side projections are shared by both selectors.
#[derive(Debug, Clone)]
pub struct VisualSimulator {
    pub action_q: Linear,
    pub action_k: Linear,
    pub action_v: Linear,
    pub ingredient_q: Linear,
    pub ingredient_k: Linear,
    pub ingredient_v: Linear,
    pub event_q: Linear,
    pub event_k: Linear,
    pub event_v: Linear,
    pub dim: usize,
}

impl VisualSimulator {
    pub fn new<R: Rng + ?Sized>(store: &mut ParamStore, name: &str, hidden: usize, rng: &mut R) -> Self {
        let mut lin = |part: &str| Linear::new(store, &format!("{name}.{part}"), hidden, hidden, false, rng);
        VisualSimulator {
            action_q: lin("action_q"),
            action_k: lin("action_k"),
            action_v: lin("action_v"),
            ingredient_q: lin("ingredient_q"),
            ingredient_k: lin("ingredient_k"),
            ingredient_v: lin("ingredient_v"),
            event_q: lin("event_q"),
            event_k: lin("event_k"),
            event_v: lin("event_v"),
            dim: hidden,
        }
    }

    fn select(&self, g: &mut Graph, items: Var, events: Var, q: &Linear, k: &Linear, v: &Linear) -> SelectorOutput {
        let scale = 1.0 / (self.dim as f64).sqrt();
        let qi = q.forward(g, items);
        let ke = self.event_k.forward(g, events);
        let ve = self.event_v.forward(g, events);
        let ket = g.transpose(ke);
        let logits = g.matmul(qi, ket);
        let logits = g.scale(logits, scale);
        let w = g.softmax_rows(logits);
        let weighted_items = g.matmul(w, ve);

        let qe = self.event_q.forward(g, events);
        let ki = k.forward(g, items);
        let vi = v.forward(g, items);
        let kit = g.transpose(ki);
        let s = g.matmul(qe, kit);
        let s = g.scale(s, scale);
        let w = g.softmax_rows(s);
        let weighted_events = g.matmul(w, vi);
        SelectorOutput { weighted_items, weighted_events, logits }
    }

    /// Event-weighted actions and action-weighted events.
    pub fn action_selector(&self, g: &mut Graph, actions: Var, events: Var) -> SelectorOutput {
        self.select(g, actions, events, &self.action_q, &self.action_k, &self.action_v)
    }

    /// As [`action_selector`](Self::action_selector) with the previous
    /// ingredient state in place of the actions.
    pub fn ingredient_selector(&self, g: &mut Graph, ingredients: Var, events: Var) -> SelectorOutput {
        self.select(g, ingredients, events, &self.ingredient_q, &self.ingredient_k, &self.ingredient_v)
    }
}

/// `G_t = G_{t-1} + Ghat * repeat(max over actions of Adot)`.
pub fn update_ingredients(g: &mut Graph, prev: Var, weighted_ingredients: Var, weighted_actions: Var) -> Var {
    let m = g.shape(prev).0;
    let pooled = if g.shape(weighted_actions).0 == 1 {
        weighted_actions
    } else {
        g.max_rows(weighted_actions)
    };
    let rep = g.repeat_rows(pooled, m);
    let delta = g.mul(weighted_ingredients, rep);
    g.add(prev, delta)
}

/// `H + H_a + H_g`.
pub fn fuse_event_representations(g: &mut Graph, events: Var, from_actions: Var, from_ingredients: Var) -> Var {
    let s = g.add(events, from_actions);
    g.add(s, from_ingredients)
}
