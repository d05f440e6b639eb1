use crate::error::{CatError, Result};

/// Classical unconstrained dynamic time warping with `|a_i - b_j|` local cost
/// and steps (i-1, j), (i, j-1), (i-1, j-1).
pub fn dtw_distance(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.is_empty() || b.is_empty() {
        return Err(CatError::EmptySequence);
    }
    // Two rolling rows over b; prev[0] is the (i-1, 0) boundary.
    let mut prev = vec![f64::INFINITY; b.len() + 1];
    let mut curr = vec![f64::INFINITY; b.len() + 1];
    prev[0] = 0.0;
    for &x in a {
        curr[0] = f64::INFINITY;
        for (j, &y) in b.iter().enumerate() {
            let best = prev[j].min(prev[j + 1]).min(curr[j]);
            curr[j + 1] = (x - y).abs() + best;
        }
        std::mem::swap(&mut prev, &mut curr);
    }
    Ok(prev[b.len()])
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    /// Minimum cost over every monotone alignment path, by exhaustive recursion.
    fn brute_force(a: &[f64], b: &[f64]) -> f64 {
        fn walk(a: &[f64], b: &[f64], i: usize, j: usize) -> f64 {
            let here = (a[i] - b[j]).abs();
            if i + 1 == a.len() && j + 1 == b.len() {
                return here;
            }
            let mut best = f64::INFINITY;
            if i + 1 < a.len() {
                best = best.min(walk(a, b, i + 1, j));
            }
            if j + 1 < b.len() {
                best = best.min(walk(a, b, i, j + 1));
            }
            if i + 1 < a.len() && j + 1 < b.len() {
                best = best.min(walk(a, b, i + 1, j + 1));
            }
            here + best
        }
        walk(a, b, 0, 0)
    }

    #[test]
    fn identical_sequences() {
        assert_eq!(
            dtw_distance(&[1.0, 1.0, 1.0], &[1.0, 1.0, 1.0]).unwrap(),
            0.0
        );
    }

    #[test]
    fn small_example_matches_enumeration() {
        let a = [1.0, 1.0, 1.0];
        let b = [1.0, 0.0, 0.0];
        assert_eq!(brute_force(&a, &b), 2.0);
        assert_eq!(dtw_distance(&a, &b).unwrap(), 2.0);
    }

    #[test]
    fn ideal_vs_worst_is_k_minus_one() {
        for k in 2..=6 {
            let ideal = vec![1.0; k];
            let mut worst = vec![0.0; k];
            worst[0] = 1.0;
            assert_eq!(brute_force(&ideal, &worst), (k - 1) as f64);
        }
        for k in 2..=40 {
            let ideal = vec![1.0; k];
            let mut worst = vec![0.0; k];
            worst[0] = 1.0;
            assert_eq!(dtw_distance(&ideal, &worst).unwrap(), (k - 1) as f64);
        }
    }

    #[test]
    fn run_length_expansion_is_free() {
        let a = [0.3, 0.3, 0.7, 1.0];
        let b = [0.3, 0.7, 0.7, 0.7, 1.0];
        assert_eq!(dtw_distance(&a, &b).unwrap(), 0.0);
    }

    #[test]
    fn empty_input() {
        assert!(matches!(
            dtw_distance(&[], &[1.0]),
            Err(CatError::EmptySequence)
        ));
        assert!(matches!(
            dtw_distance(&[1.0], &[]),
            Err(CatError::EmptySequence)
        ));
    }

    fn seq() -> impl Strategy<Value = Vec<f64>> {
        prop::collection::vec((0u8..=4).prop_map(|q| q as f64 * 0.25), 1..=6)
    }

    proptest! {
        #[test]
        fn equals_brute_force(a in seq(), b in seq()) {
            prop_assert_eq!(dtw_distance(&a, &b).unwrap(), brute_force(&a, &b));
        }

        #[test]
        fn symmetric_and_non_negative(a in seq(), b in seq()) {
            let ab = dtw_distance(&a, &b).unwrap();
            prop_assert!(ab >= 0.0);
            prop_assert_eq!(ab, dtw_distance(&b, &a).unwrap());
            prop_assert_eq!(dtw_distance(&a, &a).unwrap(), 0.0);
        }
    }
}
