use super::graph::{Graph, Var};
use super::params::ParamStore;
use crate::error::Result;

/// Outcome of comparing backprop gradients with central differences.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GradCheck {
    pub max_rel_error: f64,
    pub max_abs_error: f64,
    pub checked: usize,
}

/// Compares analytic parameter gradients of `loss_fn` with central finite
/// differences of step `h`. Relative error `|a - n| / (|a| + |n|)` is only
/// taken where `|a| + |n|` exceeds `1e-6`; below that the absolute error is
/// what matters (e.g. a key bias, whose true gradient is exactly zero).
///
/// `loss_fn` must be deterministic: any sampling noise has to be frozen by
/// the caller. At most `max_per_param` entries of each parameter are probed.
pub fn check_gradients<F>(store: &ParamStore, h: f64, max_per_param: usize, loss_fn: F) -> Result<GradCheck>
where
    F: Fn(&mut Graph) -> Result<Var>,
{
    let analytic = {
        let mut g = Graph::new(store);
        let loss = loss_fn(&mut g)?;
        let mut buf = store.zeros_like();
        g.backward(loss).accumulate_into(&mut buf);
        buf
    };
    let eval = |s: &ParamStore| -> Result<f64> {
        let mut g = Graph::inference(s);
        let loss = loss_fn(&mut g)?;
        Ok(g.scalar(loss))
    };
    let mut probe = store.clone();
    let mut out = GradCheck { max_rel_error: 0.0, max_abs_error: 0.0, checked: 0 };
    for id in store.ids() {
        let n = store.value(id).len();
        let stride = (n / max_per_param.max(1)).max(1);
        for flat in (0..n).step_by(stride).take(max_per_param) {
            let orig = store.value(id).as_slice().expect("contiguous")[flat];
            probe.value_mut(id).as_slice_mut().expect("contiguous")[flat] = orig + h;
            let up = eval(&probe)?;
            probe.value_mut(id).as_slice_mut().expect("contiguous")[flat] = orig - h;
            let down = eval(&probe)?;
            probe.value_mut(id).as_slice_mut().expect("contiguous")[flat] = orig;
            let numeric = (up - down) / (2.0 * h);
            let a = analytic[id.index()].as_slice().expect("contiguous")[flat];
            let abs = (a - numeric).abs();
            let mag = a.abs() + numeric.abs();
            out.max_abs_error = out.max_abs_error.max(abs);
            if mag > 1e-6 {
                out.max_rel_error = out.max_rel_error.max(abs / mag);
            }
            out.checked += 1;
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::graph::Mat;
    use crate::nn::layers::{FeedForward, LayerNorm, MultiHeadAttention};
    use ndarray::array;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn rng() -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(3)
    }

    fn assert_close(c: GradCheck) {
        assert!(c.checked > 0);
        assert!(c.max_rel_error < 1e-6 && c.max_abs_error < 1e-7, "{c:?}");
    }

    #[test]
    fn elementwise_ops() {
        let mut s = ParamStore::new();
        let a = s.glorot("a", 3, 4, &mut rng());
        let b = s.glorot("b", 3, 4, &mut rng());
        let r = s.glorot("r", 1, 4, &mut rng());
        let c = check_gradients(&s, 1e-5, 100, |g| {
            let (a, b, r) = (g.param(a), g.param(b), g.param(r));
            let x = g.mul(a, b);
            let x = g.add_row(x, r);
            let y = g.sigmoid(x);
            let z = g.tanh(b);
            let w = g.mul_row(z, r);
            let x = g.sub(y, w);
            let x = g.scale(x, 1.7);
            let e = g.sigmoid(x);
            let l = g.log(e);
            Ok(g.sum(l))
        })
        .unwrap();
        assert_close(c);
    }

    #[test]
    fn matrix_and_reshaping_ops() {
        let mut s = ParamStore::new();
        let a = s.glorot("a", 3, 4, &mut rng());
        let b = s.glorot("b", 4, 5, &mut rng());
        let c = check_gradients(&s, 1e-5, 100, |g| {
            let (a, b) = (g.param(a), g.param(b));
            let m = g.matmul(a, b);
            let t = g.transpose(m);
            let rows = g.slice_rows(t, 1, 3);
            let cols = g.slice_cols(rows, 0, 2);
            let cat = g.concat_cols(&[cols, cols]);
            let cat = g.concat_rows(&[cat, a]);
            let gathered = g.gather_rows(cat, &[0, 2, 2, 4]);
            let mx = g.max_rows(gathered);
            let mean = g.mean_rows(cat);
            let rep = g.repeat_rows(mean, 2);
            let both = g.concat_rows(&[rep, mx]);
            let sq = g.mul(both, both);
            Ok(g.sum(sq))
        })
        .unwrap();
        assert_close(c);
    }

    #[test]
    fn softmax_family() {
        let mut s = ParamStore::new();
        let a = s.glorot("a", 3, 5, &mut rng());
        let w = s.add("w", array![[0.3, -1.0, 2.0, 0.5, 0.1]]);
        let c = check_gradients(&s, 1e-5, 100, |g| {
            let (a, w) = (g.param(a), g.param(w));
            let sm = g.softmax_rows(a);
            let x = g.mul_row(sm, w);
            let masked = g.mask_fill(a, &[(0, 1), (2, 4)]);
            let ls = g.log_softmax_rows(masked);
            let picked = g.pick(ls, &[(0, 0), (1, 3), (2, 2)]);
            let n = g.normalize_rows(a, 1e-5);
            let n = g.mul_row(n, w);
            let p1 = g.sum(picked);
            let p2 = g.sum(x);
            let p3 = g.sum(n);
            let p = g.add(p1, p2);
            Ok(g.add(p, p3))
        })
        .unwrap();
        assert_close(c);
    }

    #[test]
    fn layers() {
        let mut s = ParamStore::new();
        let mut r = rng();
        let x = s.glorot("x", 4, 8, &mut r);
        let mem = s.glorot("mem", 3, 8, &mut r);
        let mha = MultiHeadAttention::new(&mut s, "att", 8, 2, &mut r).unwrap();
        let ff = FeedForward::new(&mut s, "ff", 8, 12, &mut r);
        let ln = LayerNorm::new(&mut s, "ln", 8);
        let c = check_gradients(&s, 1e-5, 12, |g| {
            let (x, mem) = (g.param(x), g.param(mem));
            let h = mha.forward(g, x, mem, &[(0, 2), (1, 0)]);
            let h = ff.forward(g, h);
            let h = ln.forward(g, h);
            let h = g.tanh(h);
            let w = g.constant(Mat::from_shape_fn((4, 8), |(i, j)| ((i * 8 + j) as f64 * 0.37).sin()));
            let h = g.mul(h, w);
            Ok(g.sum(h))
        })
        .unwrap();
        assert_close(c);
    }
}
