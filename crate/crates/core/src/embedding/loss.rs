//! Triplet and dual-triplet hinge losses on plain (non-squared) Euclidean
//! distances.

pub fn distance(u: &[f64], v: &[f64]) -> f64 {
    u.iter().zip(v).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt()
}

/// `max(0, |a - p| - |a - n| + m)`.
pub fn triplet_loss(anchor: &[f64], positive: &[f64], negative: &[f64], margin: f64) -> f64 {
    (distance(anchor, positive) - distance(anchor, negative) + margin).max(0.0)
}

/// Hinge arguments of the dual-triplet loss: the positive pair distance
/// against each positive's distance to the negative.
pub fn dual_triplet_terms(p1: &[f64], p2: &[f64], negative: &[f64], margin: f64) -> [f64; 2] {
    let pos = distance(p1, p2);
    [
        pos - distance(p1, negative) + margin,
        pos - distance(p2, negative) + margin,
    ]
}

/// Two hinges sharing the positive pair `(p1, p2)`, one anchored at each
/// positive, with the chosen (odd-one-out) option as the negative.
pub fn dual_triplet_loss(p1: &[f64], p2: &[f64], negative: &[f64], margin: f64) -> f64 {
    dual_triplet_terms(p1, p2, negative, margin)
        .iter()
        .map(|t| t.max(0.0))
        .sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    const SQRT2: f64 = std::f64::consts::SQRT_2;

    #[test]
    fn triplet_examples() {
        assert_eq!(triplet_loss(&[1.0, 0.0], &[1.0, 0.0], &[0.0, 0.0], 0.2), 0.0);
        assert_eq!(triplet_loss(&[1.0, 0.0], &[0.0, 1.0], &[-1.0, 0.0], 0.2), 0.0);
        let l = triplet_loss(&[1.0, 0.0], &[-1.0, 0.0], &[0.0, 1.0], 0.2);
        assert!((l - (2.0 - SQRT2 + 0.2)).abs() < 1e-12);
        assert!((l - 0.78579).abs() < 1e-5);
    }

    #[test]
    fn dual_examples() {
        assert_eq!(dual_triplet_loss(&[0.0, 1.0], &[0.0, 1.0], &[0.0, 0.0], 0.2), 0.0);
        let l = dual_triplet_loss(&[0.0], &[0.1], &[0.15], 0.2);
        assert!((l - 0.40).abs() < 1e-12, "{l}");
        let l = dual_triplet_loss(&[1.0, 0.0], &[0.0, 1.0], &[-1.0, 0.0], 0.2);
        assert!((l - 0.2).abs() < 1e-12, "{l}");
    }

    fn vecs(dim: usize) -> impl Strategy<Value = Vec<f64>> {
        proptest::collection::vec(-2.0f64..2.0, dim)
    }

    proptest! {
        #[test]
        fn symmetric_in_positives(p1 in vecs(4), p2 in vecs(4), n in vecs(4), m in 0.01f64..1.0) {
            let a = dual_triplet_loss(&p1, &p2, &n, m);
            let b = dual_triplet_loss(&p2, &p1, &n, m);
            prop_assert!((a - b).abs() < 1e-12);
        }

        #[test]
        fn coincident_positives_reduce_to_twice_triplet(p in vecs(3), n in vecs(3), m in 0.01f64..1.0) {
            let dual = dual_triplet_loss(&p, &p, &n, m);
            prop_assert!((dual - 2.0 * triplet_loss(&p, &p, &n, m)).abs() < 1e-12);
        }

        #[test]
        fn nonnegative_and_zero_iff_inactive(p1 in vecs(3), p2 in vecs(3), n in vecs(3), m in 0.01f64..1.0) {
            let l = dual_triplet_loss(&p1, &p2, &n, m);
            let t = dual_triplet_terms(&p1, &p2, &n, m);
            prop_assert!(l >= 0.0);
            prop_assert_eq!(l == 0.0, t[0] <= 0.0 && t[1] <= 0.0);
        }

        #[test]
        fn monotone_in_margin(p1 in vecs(3), p2 in vecs(3), n in vecs(3), m in 0.0f64..1.0, dm in 0.0f64..1.0) {
            prop_assert!(dual_triplet_loss(&p1, &p2, &n, m + dm) >= dual_triplet_loss(&p1, &p2, &n, m));
        }
    }
}
