/// Exact-match METEOR ("exact-lite"): no stemming or synonym modules.
///
/// Alignment is the maximum exact unigram matching, built greedily left to
/// right (each candidate token takes the first unused identical reference
/// token). Returns 0 when either side is empty or nothing matches.
pub fn meteor_lite(candidate: &[String], reference: &[String]) -> f64 {
    if candidate.is_empty() || reference.is_empty() {
        return 0.0;
    }
    let mut used = vec![false; reference.len()];
    let mut alignment: Vec<(usize, usize)> = Vec::new();
    for (ci, tok) in candidate.iter().enumerate() {
        if let Some(ri) = (0..reference.len()).find(|&ri| !used[ri] && &reference[ri] == tok) {
            used[ri] = true;
            alignment.push((ci, ri));
        }
    }
    let m = alignment.len();
    if m == 0 {
        return 0.0;
    }
    let chunks = 1 + alignment
        .windows(2)
        .filter(|w| !(w[1].0 == w[0].0 + 1 && w[1].1 == w[0].1 + 1))
        .count();

    let m = m as f64;
    let precision = m / candidate.len() as f64;
    let recall = m / reference.len() as f64;
    let fmean = 10.0 * precision * recall / (recall + 9.0 * precision);
    let penalty = 0.5 * (chunks as f64 / m).powi(3);
    fmean * (1.0 - penalty)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::tokenize;
    use approx::assert_relative_eq;

    #[test]
    fn identical_sentence() {
        let c = tokenize("add the salt to the pan");
        let m = c.len() as f64;
        assert_relative_eq!(meteor_lite(&c, &c), 1.0 - 0.5 * (1.0 / m).powi(3), epsilon = 1e-15);
    }

    #[test]
    fn disjoint_is_zero() {
        assert_eq!(meteor_lite(&tokenize("a b"), &tokenize("c d")), 0.0);
    }

    #[test]
    fn two_chunk_hand_value() {
        // m = 2, P = R = 0.5, Fmean = 0.5, penalty = 0.5 * (2/2)^3
        let v = meteor_lite(&tokenize("a b c d"), &tokenize("a x c y"));
        assert_relative_eq!(v, 0.25, epsilon = 1e-15);
    }

    #[test]
    fn repeated_tokens_match_greedily() {
        // "the" pairs with ref[0], "cat" with ref[1]; second "the" with ref[2]
        let v = meteor_lite(&tokenize("the cat the"), &tokenize("the cat the dog"));
        let (p, r) = (1.0, 0.75);
        let fmean = 10.0 * p * r / (r + 9.0 * p);
        assert_relative_eq!(v, fmean * (1.0 - 0.5 * (1.0f64 / 3.0).powi(3)), epsilon = 1e-15);
    }

    #[test]
    fn identity_beats_partial() {
        let c = tokenize("chop the onion finely");
        let r = tokenize("chop the garlic finely");
        assert!(meteor_lite(&c, &c) > meteor_lite(&c, &r));
    }
}
