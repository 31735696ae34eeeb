use rand::Rng;

use crate::data::EventCandidateSet;
use crate::error::{Error, Result};
use crate::nn::{positional_encoding, Graph, Linear, Mat, ParamStore, Var};

/// `e_n = MLP(feature_n) + PE(n) + Rel(start/D, end/D, len/D)`, where `n` is
/// the chronological position of the candidate.
#[derive(Debug, Clone)]
pub struct EventEncoder {
    pub feature_up: Linear,
    pub feature_down: Linear,
    pub relative: Linear,
    pub hidden: usize,
}

impl EventEncoder {
    pub fn new<R: Rng + ?Sized>(
        store: &mut ParamStore,
        name: &str,
        feature_dim: usize,
        hidden: usize,
        rng: &mut R,
    ) -> Self {
        EventEncoder {
            feature_up: Linear::new(store, &format!("{name}.feature_up"), feature_dim, hidden, true, rng),
            feature_down: Linear::new(store, &format!("{name}.feature_down"), hidden, hidden, true, rng),
            relative: Linear::new(store, &format!("{name}.relative"), 3, hidden, true, rng),
            hidden,
        }
    }

    pub fn encode_events(&self, g: &mut Graph, candidates: &EventCandidateSet, duration: f64) -> Result<Var> {
        if duration.is_nan() || duration <= 0.0 {
            return Err(Error::InvalidArgument(format!("video duration must be positive, got {duration}")));
        }
        let n = candidates.len();
        if n == 0 {
            return Err(Error::InvalidArgument("no event candidates".into()));
        }
        let dim = g.store().value(self.feature_up.weight).nrows();
        if candidates.feature_dim() != dim {
            return Err(Error::Shape {
                op: "encode_events",
                detail: format!("features have {} dims, model expects {dim}", candidates.feature_dim()),
            });
        }
        let feats = Mat::from_shape_fn((n, dim), |(i, j)| candidates.features[i][j]);
        let rel = Mat::from_shape_fn((n, 3), |(i, j)| {
            let e = &candidates.events[i];
            match j {
                0 => e.start / duration,
                1 => e.end / duration,
                _ => e.duration() / duration,
            }
        });
        let x = g.constant(feats);
        let h = self.feature_up.forward(g, x);
        let h = g.relu(h);
        let h = self.feature_down.forward(g, h);
        let r = g.constant(rel);
        let r = self.relative.forward(g, r);
        let pe = g.constant(positional_encoding(n, self.hidden, 0));
        let e = g.add(h, r);
        Ok(g.add(e, pe))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::TimedEvent;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn cands(features: Vec<Vec<f64>>) -> EventCandidateSet {
        let events = (0..features.len())
            .map(|i| TimedEvent::new(i as f64, i as f64 + 2.0).unwrap())
            .collect();
        EventCandidateSet::new(events, features).unwrap()
    }

    fn encoder() -> (ParamStore, EventEncoder) {
        let mut store = ParamStore::new();
        let enc = EventEncoder::new(&mut store, "enc", 3, 8, &mut ChaCha8Rng::seed_from_u64(5));
        (store, enc)
    }

    #[test]
    fn identical_features_get_distinct_vectors() {
        let (store, enc) = encoder();
        let mut g = Graph::inference(&store);
        let e = enc.encode_events(&mut g, &cands(vec![vec![0.5, 0.1, -0.2]; 3]), 10.0).unwrap();
        let v = g.value(e);
        assert_ne!(v.row(0), v.row(1));
        assert_ne!(v.row(1), v.row(2));
    }

    #[test]
    fn zero_features_zero_relative_is_positional() {
        let (mut store, enc) = encoder();
        store.value_mut(enc.relative.weight).fill(0.0);
        let mut g = Graph::inference(&store);
        let e = enc.encode_events(&mut g, &cands(vec![vec![0.0; 3]; 4]), 10.0).unwrap();
        assert_eq!(g.value(e), &positional_encoding(4, 8, 0));
    }

    #[test]
    fn deterministic_and_validated() {
        let (store, enc) = encoder();
        let c = cands(vec![vec![0.3, -0.1, 0.9], vec![1.0, 0.0, 0.0]]);
        let run = || {
            let mut g = Graph::inference(&store);
            let e = enc.encode_events(&mut g, &c, 7.0).unwrap();
            g.value(e).clone()
        };
        assert_eq!(run(), run());
        let mut g = Graph::inference(&store);
        assert!(enc.encode_events(&mut g, &c, 0.0).is_err());
        assert!(enc.encode_events(&mut g, &cands(vec![vec![0.0; 2]]), 5.0).is_err());
    }
}
