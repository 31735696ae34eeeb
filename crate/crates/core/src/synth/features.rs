use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use sha2::{Digest, Sha256};

use crate::data::TimedEvent;

/// What happens in one step, in terms of world ids.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StepSemantics {
    pub action: usize,
    /// Indices into the world's ingredient pool.
    pub ingredients: Vec<usize>,
    /// Last action applied to each ingredient before this step.
    pub states: Vec<Option<usize>>,
    pub ordinal: usize,
}

/// Deterministic u64 derived from a seed and a string key.
pub fn derive_seed(seed: u64, key: &str) -> u64 {
    let digest = Sha256::digest(format!("{seed}/{key}").as_bytes());
    u64::from_le_bytes(digest[..8].try_into().expect("8 bytes"))
}

fn atom(seed: u64, key: &str, dim: usize) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, key));
    (0..dim).map(|_| rng.sample(StandardNormal)).collect()
}

/// Noise-free embedding of a step: normalized sum of hash-seeded atoms for
/// the action, each ingredient, each ingredient state and the ordinal.
pub fn semantic_embedding(sem: &StepSemantics, seed: u64, dim: usize) -> Vec<f64> {
    let mut keys = vec![format!("action/{}", sem.action), format!("ordinal/{}", sem.ordinal)];
    for (ing, state) in sem.ingredients.iter().zip(&sem.states) {
        keys.push(format!("ingredient/{ing}"));
        if let Some(a) = state {
            keys.push(format!("state/{ing}/{a}"));
        }
    }
    let mut out = vec![0.0; dim];
    for k in &keys {
        for (o, v) in out.iter_mut().zip(atom(seed, k, dim)) {
            *o += v;
        }
    }
    let scale = (keys.len() as f64).sqrt();
    out.iter_mut().for_each(|v| *v /= scale);
    out
}

/// Share of `candidate` covered by `step`.
pub fn overlap_fraction(candidate: &TimedEvent, step: &TimedEvent) -> f64 {
    let inter = (candidate.end.min(step.end) - candidate.start.max(step.start)).max(0.0);
    let len = candidate.duration();
    if len > 0.0 {
        inter / len
    } else {
        0.0
    }
}

/// Feature vector of an interval: overlap-weighted mixture of the step
/// embeddings it covers plus Gaussian noise.
pub fn featurize_event<R: Rng + ?Sized>(
    interval: &TimedEvent,
    steps: &[(TimedEvent, Vec<f64>)],
    dim: usize,
    noise_scale: f64,
    rng: &mut R,
) -> Vec<f64> {
    let mut out = vec![0.0; dim];
    for (span, base) in steps {
        let w = overlap_fraction(interval, span);
        if w > 0.0 {
            for (o, b) in out.iter_mut().zip(base) {
                *o += w * b;
            }
        }
    }
    for o in out.iter_mut() {
        let z: f64 = rng.sample(StandardNormal);
        *o += noise_scale * z;
    }
    out
}
