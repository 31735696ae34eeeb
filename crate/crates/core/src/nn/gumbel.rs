use rand::Rng;

use super::graph::{Graph, Mat, Var};
use crate::error::{Error, Result};

/// Source of Gumbel(0, 1) noise. Injectable so tests can freeze it.
pub trait GumbelNoise {
    fn sample(&mut self, n: usize) -> Vec<f64>;
}

/// Draws `g = -ln(-ln u)`, `u ~ Uniform(0, 1)`.
pub struct RngNoise<R>(pub R);

impl<R: Rng> GumbelNoise for RngNoise<R> {
    fn sample(&mut self, n: usize) -> Vec<f64> {
        (0..n)
            .map(|_| {
                // open interval keeps both logs finite
                let u: f64 = loop {
                    let u = self.0.gen::<f64>();
                    if u > 0.0 {
                        break u;
                    }
                };
                -(-u.ln()).ln()
            })
            .collect()
    }
}

/// All-zero noise: the sample reduces to a tempered softmax.
pub struct ZeroNoise;

impl GumbelNoise for ZeroNoise {
    fn sample(&mut self, n: usize) -> Vec<f64> {
        vec![0.0; n]
    }
}

fn check_tau(tau: f64) -> Result<()> {
    if tau > 0.0 && tau.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidArgument(format!("gumbel temperature must be positive, got {tau}")))
    }
}

pub fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate() {
        if v > values[best] {
            best = i;
        }
    }
    best
}

/// Plain-array Gumbel-softmax over one row of logits (log-probabilities or
/// unnormalized scores; entries of -inf stay at zero).
pub fn gumbel_softmax_sample(
    logits: &[f64],
    tau: f64,
    hard: bool,
    noise: &mut dyn GumbelNoise,
) -> Result<Vec<f64>> {
    check_tau(tau)?;
    let g = noise.sample(logits.len());
    let z: Vec<f64> = logits.iter().zip(&g).map(|(l, g)| (l + g) / tau).collect();
    let m = z.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let e: Vec<f64> = z.iter().map(|v| (v - m).exp()).collect();
    let s: f64 = e.iter().sum();
    let soft: Vec<f64> = e.iter().map(|v| v / s).collect();
    if hard {
        let k = argmax(&soft);
        Ok((0..soft.len()).map(|i| if i == k { 1.0 } else { 0.0 }).collect())
    } else {
        Ok(soft)
    }
}

/// Differentiable Gumbel-softmax over a `1 x n` row of logits.
///
/// In hard mode the forward value is exactly one-hot at the argmax while the
/// gradient is that of the soft sample (straight-through). `forced` replaces
/// the one-hot position (used for label-conditioned training) without
/// changing the gradient path. Returns the output node and the chosen index.
pub fn gumbel_softmax(
    g: &mut Graph,
    logits: Var,
    tau: f64,
    hard: bool,
    forced: Option<usize>,
    noise: &mut dyn GumbelNoise,
) -> Result<(Var, usize)> {
    check_tau(tau)?;
    let n = g.shape(logits).1;
    let noise_row = Mat::from_shape_vec((1, n), noise.sample(n)).expect("noise shape");
    let noise_row = g.constant(noise_row);
    let z = g.add(logits, noise_row);
    let z = g.scale(z, 1.0 / tau);
    let soft = g.softmax_rows(z);
    let chosen = forced.unwrap_or_else(|| argmax(g.value(soft).as_slice().expect("contiguous")));
    if !hard {
        return Ok((soft, chosen));
    }
    let mut one_hot = Mat::zeros((1, n));
    one_hot[[0, chosen]] = 1.0;
    // one_hot + (soft - stop_grad(soft)): value one-hot, gradient of soft
    let frozen = g.detach(soft);
    let delta = g.sub(soft, frozen);
    let one_hot = g.constant(one_hot);
    let out = g.add(one_hot, delta);
    Ok((out, chosen))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::params::ParamStore;
    use approx::assert_relative_eq;
    use ndarray::array;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    struct Fixed(Vec<f64>);

    impl GumbelNoise for Fixed {
        fn sample(&mut self, n: usize) -> Vec<f64> {
            assert_eq!(n, self.0.len());
            self.0.clone()
        }
    }

    #[test]
    fn zero_noise_is_tempered_softmax() {
        let logits = [0.5, -1.0, 2.0];
        let y = gumbel_softmax_sample(&logits, 2.0, false, &mut ZeroNoise).unwrap();
        let e: Vec<f64> = logits.iter().map(|l| (l / 2.0f64).exp()).collect();
        let z: f64 = e.iter().sum();
        for (a, b) in y.iter().zip(e.iter()) {
            assert_relative_eq!(*a, b / z, epsilon = 1e-15);
        }
    }

    #[test]
    fn small_tau_approaches_one_hot() {
        let noise = vec![0.3, -0.2, 0.1];
        let logits = [1.0, 1.2, 0.9];
        let y = gumbel_softmax_sample(&logits, 1e-4, false, &mut Fixed(noise)).unwrap();
        // argmax of logits + noise is index 0 (1.3 vs 1.0 vs 1.0)
        assert!(y[0] > 1.0 - 1e-9);
    }

    #[test]
    fn non_positive_tau_rejected() {
        assert!(gumbel_softmax_sample(&[0.0], 0.0, false, &mut ZeroNoise).is_err());
        assert!(gumbel_softmax_sample(&[0.0], -1.0, true, &mut ZeroNoise).is_err());
    }

    #[test]
    fn hard_output_is_exact_one_hot_and_sums_to_one() {
        let mut noise = RngNoise(ChaCha8Rng::seed_from_u64(9));
        for _ in 0..100 {
            let y = gumbel_softmax_sample(&[0.1, 0.4, -0.3, 0.0], 0.7, true, &mut noise).unwrap();
            assert_eq!(y.iter().filter(|&&v| v == 1.0).count(), 1);
            assert_eq!(y.iter().filter(|&&v| v == 0.0).count(), 3);
            let soft = gumbel_softmax_sample(&[0.1, 0.4, -0.3, 0.0], 0.7, false, &mut noise).unwrap();
            assert_relative_eq!(soft.iter().sum::<f64>(), 1.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn uniform_logits_sample_uniformly() {
        let mut noise = RngNoise(ChaCha8Rng::seed_from_u64(11));
        let mut counts = [0usize; 5];
        let draws = 100_000;
        for _ in 0..draws {
            let y = gumbel_softmax_sample(&[0.0; 5], 1.0, true, &mut noise).unwrap();
            counts[argmax(&y)] += 1;
        }
        for c in counts {
            assert!((c as f64 / draws as f64 - 0.2).abs() < 0.02);
        }
    }

    #[test]
    fn straight_through_gradient_equals_soft_gradient() {
        let store = ParamStore::new();
        let weights = array![[0.3, -1.2, 2.0]];
        let run = |hard: bool| {
            let mut g = Graph::new(&store);
            let logits = g.input(array![[0.2, 0.9, -0.4]]);
            let (y, _) = gumbel_softmax(&mut g, logits, 0.8, hard, None, &mut Fixed(vec![0.1, -0.3, 0.5])).unwrap();
            let w = g.constant(weights.clone());
            let prod = g.mul(y, w);
            let loss = g.sum(prod);
            let grads = g.backward(loss);
            (g.value(y).clone(), grads.wrt(logits).unwrap().clone())
        };
        let (hard_y, hard_grad) = run(true);
        let (_, soft_grad) = run(false);
        assert_eq!(hard_y, array![[0.0, 1.0, 0.0]]);
        for (a, b) in hard_grad.iter().zip(soft_grad.iter()) {
            assert_relative_eq!(a, b, epsilon = 1e-15);
        }
    }

    #[test]
    fn forced_index_changes_value_not_gradient() {
        let store = ParamStore::new();
        let mut g = Graph::new(&store);
        let logits = g.input(array![[0.2, 0.9, -0.4]]);
        let (y, idx) = gumbel_softmax(&mut g, logits, 1.0, true, Some(2), &mut ZeroNoise).unwrap();
        assert_eq!(idx, 2);
        assert_eq!(g.value(y), &array![[0.0, 0.0, 1.0]]);
    }
}
