//! Deterministic inputs shared by the benchmarks.

use rand::Rng;

use psyseg_core::embedding::FEATURE_DIM;
use psyseg_core::imaging::generate_synthetic;
use psyseg_core::{seed, FeatureVector, Image, QueryResponse, ResponseSource, SyntheticSpec, TripletQuery};

/// `n` points around `k` well-separated centers in `dim` dimensions.
pub fn clustered_points(n: usize, dim: usize, k: usize, seed: u64) -> Vec<Vec<f64>> {
    let mut rng = seed::rng(seed);
    let centers: Vec<Vec<f64>> = (0..k).map(|_| (0..dim).map(|_| rng.random_range(-10.0..10.0)).collect()).collect();
    (0..n)
        .map(|i| centers[i % k].iter().map(|c| c + rng.random_range(-1.0..1.0)).collect())
        .collect()
}

/// Random descriptors of the session feature width.
pub fn random_features(n: usize, seed: u64) -> Vec<FeatureVector> {
    let mut rng = seed::rng(seed);
    (0..n).map(|_| FeatureVector((0..FEATURE_DIM).map(|_| rng.random_range(-1.0..1.0)).collect())).collect()
}

/// Random answered triplets over `patches` patches.
pub fn random_responses(count: usize, patches: usize, seed: u64) -> Vec<QueryResponse> {
    let mut rng = seed::rng(seed);
    let mut out = Vec::with_capacity(count);
    while out.len() < count {
        let (a, b, c) = (rng.random_range(0..patches), rng.random_range(0..patches), rng.random_range(0..patches));
        if let Ok(q) = TripletQuery::new(a, b, c) {
            out.push(QueryResponse::new(q, rng.random_range(0..3), ResponseSource::Oracle, 0, out.len() as u64).unwrap());
        }
    }
    out
}

/// Desk-scale synthetic image.
pub fn desk_image(seed: u64) -> Image {
    generate_synthetic(&SyntheticSpec::desk_scale(seed)).unwrap().image
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fixtures_have_requested_shapes() {
        let pts = clustered_points(30, 4, 3, 1);
        assert_eq!((pts.len(), pts[0].len()), (30, 4));
        assert_eq!(random_features(5, 1)[0].len(), FEATURE_DIM);
        let rs = random_responses(40, 10, 2);
        assert_eq!(rs.len(), 40);
        assert!(rs.iter().all(|r| r.query.patches().iter().all(|&p| p < 10)));
        assert_eq!(random_responses(40, 10, 2), rs);
    }
}
