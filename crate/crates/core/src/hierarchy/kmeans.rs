use rand::Rng;

use crate::error::{Error, Result};
use crate::seed;

const MAX_ITERS: usize = 300;
const SHIFT_TOL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq)]
pub struct KMeansResult {
    pub assignment: Vec<usize>,
    pub centroids: Vec<Vec<f64>>,
    pub inertia: f64,
}

pub(crate) fn dist2(u: &[f64], v: &[f64]) -> f64 {
    u.iter().zip(v).map(|(a, b)| (a - b) * (a - b)).sum()
}

/// Best of `restarts` seeded k-means++ runs by inertia (earliest run on ties).
pub fn kmeans(points: &[Vec<f64>], k: usize, restarts: usize, seed: u64) -> Result<KMeansResult> {
    if k < 2 || k > points.len() {
        return Err(Error::arg(format!("K = {k} outside 2..={}", points.len())));
    }
    let mut best: Option<KMeansResult> = None;
    for r in 0..restarts.max(1) {
        let mut rng = seed::derived_rng(seed, &[r as u64]);
        let init = plus_plus(points, k, &mut rng);
        let (run, _) = lloyd(points, init);
        if best.as_ref().is_none_or(|b| run.inertia < b.inertia) {
            best = Some(run);
        }
    }
    Ok(best.unwrap())
}

fn plus_plus(points: &[Vec<f64>], k: usize, rng: &mut impl Rng) -> Vec<Vec<f64>> {
    let mut centroids = vec![points[rng.random_range(0..points.len())].clone()];
    let mut d2: Vec<f64> = points.iter().map(|p| dist2(p, &centroids[0])).collect();
    while centroids.len() < k {
        let total: f64 = d2.iter().sum();
        let next = if total > 0.0 {
            let mut r = rng.random_range(0.0..total);
            d2.iter()
                .position(|&d| {
                    if r < d {
                        true
                    } else {
                        r -= d;
                        false
                    }
                })
                .unwrap_or_else(|| d2.iter().rposition(|&d| d > 0.0).unwrap())
        } else {
            rng.random_range(0..points.len())
        };
        let c = points[next].clone();
        for (d, p) in d2.iter_mut().zip(points) {
            *d = d.min(dist2(p, &c));
        }
        centroids.push(c);
    }
    centroids
}

fn assign(points: &[Vec<f64>], centroids: &[Vec<f64>], assignment: &mut [usize]) -> f64 {
    let mut inertia = 0.0;
    for (a, p) in assignment.iter_mut().zip(points) {
        let (mut bi, mut bd) = (0, f64::INFINITY);
        for (ci, c) in centroids.iter().enumerate() {
            let d = dist2(p, c);
            if d < bd {
                (bi, bd) = (ci, d);
            }
        }
        *a = bi;
        inertia += bd;
    }
    inertia
}

/// Lloyd iterations from the given centroids. Returns the result and the
/// inertia after every assignment step.
pub(crate) fn lloyd(points: &[Vec<f64>], mut centroids: Vec<Vec<f64>>) -> (KMeansResult, Vec<f64>) {
    let k = centroids.len();
    let dim = points[0].len();
    let mut assignment = vec![0; points.len()];
    let mut history = Vec::new();
    let mut inertia = assign(points, &centroids, &mut assignment);
    history.push(inertia);
    for _ in 0..MAX_ITERS {
        let mut sums = vec![vec![0.0; dim]; k];
        let mut counts = vec![0usize; k];
        for (&a, p) in assignment.iter().zip(points) {
            counts[a] += 1;
            sums[a].iter_mut().zip(p).for_each(|(s, v)| *s += v);
        }
        let mut shift = 0.0f64;
        for c in 0..k {
            let next = if counts[c] == 0 {
                // reseed from the point farthest from its centroid
                let far = (0..points.len())
                    .max_by(|&i, &j| {
                        dist2(&points[i], &centroids[assignment[i]])
                            .partial_cmp(&dist2(&points[j], &centroids[assignment[j]]))
                            .unwrap()
                            .then(j.cmp(&i))
                    })
                    .unwrap();
                points[far].clone()
            } else {
                sums[c].iter().map(|s| s / counts[c] as f64).collect()
            };
            shift = shift.max(dist2(&next, &centroids[c]).sqrt());
            centroids[c] = next;
        }
        inertia = assign(points, &centroids, &mut assignment);
        history.push(inertia);
        if shift < SHIFT_TOL {
            break;
        }
    }
    (KMeansResult { assignment, centroids, inertia }, history)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;
    use proptest::prelude::*;

    #[test]
    fn duplicated_points() {
        let pts: Vec<Vec<f64>> = (0..10).map(|i| if i < 5 { vec![0.0, 0.0] } else { vec![10.0, 10.0] }).collect();
        let r = kmeans(&pts, 2, 4, 1).unwrap();
        assert_eq!(r.inertia, 0.0);
        let mut cs = r.centroids.clone();
        cs.sort_by(|a, b| a.partial_cmp(b).unwrap());
        assert_eq!(cs, vec![vec![0.0, 0.0], vec![10.0, 10.0]]);
        assert_eq!(kmeans(&pts, 2, 4, 1).unwrap().assignment, r.assignment);
    }

    #[test]
    fn one_dimensional_split_matches_brute_force() {
        let pts: Vec<Vec<f64>> = [0.0, 1.0, 10.0, 11.0].iter().map(|&v| vec![v]).collect();
        let r = kmeans(&pts, 2, 8, 3).unwrap();
        // brute force over every 2-partition
        let mut best = f64::INFINITY;
        for mask in 1u32..(1 << 4) - 1 {
            let mut inertia = 0.0;
            for side in [true, false] {
                let m: Vec<f64> = (0..4).filter(|&i| (mask >> i & 1 == 1) == side).map(|i| pts[i][0]).collect();
                let mean = m.iter().sum::<f64>() / m.len() as f64;
                inertia += m.iter().map(|v| (v - mean).powi(2)).sum::<f64>();
            }
            best = best.min(inertia);
        }
        assert!((r.inertia - best).abs() < 1e-12);
        assert_eq!(r.assignment[0], r.assignment[1]);
        assert_eq!(r.assignment[2], r.assignment[3]);
        assert_ne!(r.assignment[0], r.assignment[2]);
    }

    #[test]
    fn k_out_of_range() {
        let pts = vec![vec![0.0], vec![1.0]];
        assert!(kmeans(&pts, 1, 1, 0).is_err());
        assert!(kmeans(&pts, 3, 1, 0).is_err());
    }

    proptest! {
        #[test]
        fn inertia_never_increases(seed in 0u64..500, k in 2usize..6) {
            let mut rng = seed::rng(seed);
            let pts: Vec<Vec<f64>> = (0..40).map(|_| vec![rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)]).collect();
            let init = plus_plus(&pts, k, &mut rng);
            let (_, history) = lloyd(&pts, init);
            for w in history.windows(2) {
                prop_assert!(w[1] <= w[0] + 1e-12, "{:?}", history);
            }
        }
    }
}
