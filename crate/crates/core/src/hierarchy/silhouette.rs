use crate::embedding::distance;
use crate::error::{Error, Result};

/// Mean silhouette over all points. Singleton clusters score 0, as does a
/// point with `a = b = 0`.
pub fn silhouette(points: &[Vec<f64>], assignment: &[usize]) -> Result<f64> {
    if points.len() != assignment.len() || points.is_empty() {
        return Err(Error::arg("silhouette needs one label per point"));
    }
    let k = assignment.iter().max().unwrap() + 1;
    let mut sizes = vec![0usize; k];
    assignment.iter().for_each(|&a| sizes[a] += 1);
    if k < 2 || sizes.contains(&0) {
        return Err(Error::arg("silhouette needs at least two non-empty clusters"));
    }
    let mut total = 0.0;
    let mut sums = vec![0.0; k];
    for (i, p) in points.iter().enumerate() {
        sums.iter_mut().for_each(|s| *s = 0.0);
        for (j, q) in points.iter().enumerate() {
            if i != j {
                sums[assignment[j]] += distance(p, q);
            }
        }
        let own = assignment[i];
        if sizes[own] == 1 {
            continue;
        }
        let a = sums[own] / (sizes[own] - 1) as f64;
        let b = (0..k)
            .filter(|&c| c != own)
            .map(|c| sums[c] / sizes[c] as f64)
            .fold(f64::INFINITY, f64::min);
        let m = a.max(b);
        if m > 0.0 {
            total += (b - a) / m;
        }
    }
    Ok(total / points.len() as f64)
}
