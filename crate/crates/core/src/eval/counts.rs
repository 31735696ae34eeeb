use std::collections::BTreeMap;

/// Percentage of (predicted, reference) count pairs with |p - q| <= eta, for
/// every eta requested.
pub fn event_count_stats(pairs: &[(usize, usize)], etas: &[usize]) -> BTreeMap<usize, f64> {
    etas.iter()
        .map(|&eta| {
            let pct = if pairs.is_empty() {
                0.0
            } else {
                let hits = pairs.iter().filter(|&&(p, q)| p.abs_diff(q) <= eta).count();
                100.0 * hits as f64 / pairs.len() as f64
            };
            (eta, pct)
        })
        .collect()
}
