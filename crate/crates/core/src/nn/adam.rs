use ndarray::{Array2, Zip};
use serde::{Deserialize, Serialize};

use super::params::{NamedArray, ParamStore};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OptimizerConfig {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    /// Decoupled (AdamW-style) decay coefficient.
    pub weight_decay: f64,
    pub warmup_epochs: usize,
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        OptimizerConfig {
            learning_rate: 1e-4,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
            weight_decay: 0.01,
            warmup_epochs: 5,
        }
    }
}

impl OptimizerConfig {
    pub fn validate(&self) -> Result<()> {
        if self.learning_rate.is_nan() || self.learning_rate <= 0.0 {
            return Err(Error::Config("learning rate must be positive".into()));
        }
        for (name, b) in [("beta1", self.beta1), ("beta2", self.beta2)] {
            if !(0.0..1.0).contains(&b) {
                return Err(Error::Config(format!("{name} must lie in [0, 1)")));
            }
        }
        if self.weight_decay < 0.0 || self.epsilon <= 0.0 {
            return Err(Error::Config("weight decay must be >= 0 and epsilon > 0".into()));
        }
        Ok(())
    }

    /// Linear warmup: epoch `e` (0-based) uses `lr * min(1, (e + 1) / warmup)`.
    pub fn lr_at_epoch(&self, epoch: usize) -> f64 {
        if self.warmup_epochs == 0 {
            return self.learning_rate;
        }
        self.learning_rate * ((epoch + 1) as f64 / self.warmup_epochs as f64).min(1.0)
    }
}

/// First and second moment estimates plus the step counter.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamState {
    pub step: u64,
    pub m: Vec<Array2<f64>>,
    pub v: Vec<Array2<f64>>,
}

impl AdamState {
    pub fn new(store: &ParamStore) -> Self {
        AdamState {
            step: 0,
            m: store.zeros_like(),
            v: store.zeros_like(),
        }
    }

    pub fn to_named(&self, store: &ParamStore) -> (Vec<NamedArray>, Vec<NamedArray>) {
        let named = |arrs: &[Array2<f64>]| {
            store
                .ids()
                .map(|id| NamedArray::new(store.name(id), &arrs[id.index()]))
                .collect()
        };
        (named(&self.m), named(&self.v))
    }

    pub fn from_named(store: &ParamStore, step: u64, m: &[NamedArray], v: &[NamedArray]) -> Result<Self> {
        let mut state = AdamState::new(store);
        state.step = step;
        for (arrays, target) in [(m, &mut state.m), (v, &mut state.v)] {
            for a in arrays {
                let id = store
                    .find(&a.name)
                    .ok_or_else(|| Error::Config(format!("unknown optimizer slot `{}`", a.name)))?;
                let arr = a.to_array()?;
                if arr.dim() != target[id.index()].dim() {
                    return Err(Error::Config(format!("optimizer slot `{}` has wrong shape", a.name)));
                }
                target[id.index()] = arr;
            }
        }
        Ok(state)
    }
}

/// One Adam update with bias correction and decoupled weight decay, using
/// the warmup-adjusted learning rate for `epoch`.
pub fn adam_step(
    store: &mut ParamStore,
    grads: &[Array2<f64>],
    config: &OptimizerConfig,
    state: &mut AdamState,
    epoch: usize,
) {
    state.step += 1;
    let t = state.step as i32;
    let lr = config.lr_at_epoch(epoch);
    let (b1, b2) = (config.beta1, config.beta2);
    let c1 = 1.0 - b1.powi(t);
    let c2 = 1.0 - b2.powi(t);
    for (i, p) in store.values_mut().iter_mut().enumerate() {
        Zip::from(p)
            .and(&grads[i])
            .and(&mut state.m[i])
            .and(&mut state.v[i])
            .for_each(|p, &g, m, v| {
                *m = b1 * *m + (1.0 - b1) * g;
                *v = b2 * *v + (1.0 - b2) * g * g;
                let m_hat = *m / c1;
                let v_hat = *v / c2;
                *p -= lr * (m_hat / (v_hat.sqrt() + config.epsilon) + config.weight_decay * *p);
            });
    }
}
