//! Embedding-driven color palettes (classical MDS to RGB) and overlays.

use std::path::Path;

use nalgebra::{DMatrix, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hierarchy::HierarchyTree;
use crate::imaging::{Image, SuperpixelMap};

pub const DEFAULT_ALPHA: f64 = 0.6;

/// Torgerson MDS to three dimensions. Axes with non-positive eigenvalues are
/// zero.
pub fn classical_mds(distances: &[Vec<f64>]) -> Result<Vec<[f64; 3]>> {
    let n = distances.len();
    if n < 3 || distances.iter().any(|r| r.len() != n) {
        return Err(Error::arg("MDS needs a square matrix of size at least 3"));
    }
    for i in 0..n {
        if distances[i][i] != 0.0 {
            return Err(Error::arg("MDS distance matrix must have a zero diagonal"));
        }
        for j in 0..i {
            let (a, b) = (distances[i][j], distances[j][i]);
            if !(a >= 0.0) || (a - b).abs() > 1e-9 * a.abs().max(1.0) {
                return Err(Error::arg(format!("distance matrix is not symmetric and non-negative at ({i}, {j})")));
            }
        }
    }
    let d2 = DMatrix::from_fn(n, n, |i, j| distances[i][j] * distances[i][j]);
    let row_means: Vec<f64> = (0..n).map(|i| d2.row(i).mean()).collect();
    let grand = d2.mean();
    let b = DMatrix::from_fn(n, n, |i, j| -0.5 * (d2[(i, j)] - row_means[i] - row_means[j] + grand));
    let eig = SymmetricEigen::new(b);
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&x, &y| eig.eigenvalues[y].partial_cmp(&eig.eigenvalues[x]).unwrap().then(x.cmp(&y)));
    let mut coords = vec![[0.0; 3]; n];
    for (axis, &e) in order.iter().take(3).enumerate() {
        let lambda = eig.eigenvalues[e];
        if lambda <= 1e-12 * eig.eigenvalues.amax().max(1.0) {
            continue;
        }
        let v = eig.eigenvectors.column(e);
        // fixed sign: largest-magnitude entry positive
        let pivot = (0..n).max_by(|&i, &j| v[i].abs().partial_cmp(&v[j].abs()).unwrap().then(j.cmp(&i))).unwrap();
        let sign = if v[pivot] < 0.0 { -1.0 } else { 1.0 };
        for (i, c) in coords.iter_mut().enumerate() {
            c[axis] = sign * v[i] * lambda.sqrt();
        }
    }
    Ok(coords)
}

/// Per-axis min-max scaling to 0..=255; constant axes map to 128.
pub fn coords_to_colors(coords: &[[f64; 3]]) -> Vec<[u8; 3]> {
    let mut lo = [f64::INFINITY; 3];
    let mut hi = [f64::NEG_INFINITY; 3];
    for c in coords {
        for a in 0..3 {
            lo[a] = lo[a].min(c[a]);
            hi[a] = hi[a].max(c[a]);
        }
    }
    coords
        .iter()
        .map(|c| {
            std::array::from_fn(|a| {
                let span = hi[a] - lo[a];
                if span <= 1e-12 * hi[a].abs().max(lo[a].abs()).max(1e-300) {
                    128
                } else {
                    ((c[a] - lo[a]) / span * 255.0).round().clamp(0.0, 255.0) as u8
                }
            })
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PaletteMode {
    /// MDS over the centroids of the nodes at the rendered level.
    #[default]
    Nodes,
    /// MDS over every patch embedding.
    Patches,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NodeColor {
    pub node: usize,
    pub rgb: [u8; 3],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PaletteAssignment {
    pub level: usize,
    pub mode: PaletteMode,
    pub patch_colors: Vec<[u8; 3]>,
    /// Member-mean color of each node in the level's cut.
    pub node_colors: Vec<NodeColor>,
}

fn euclid(u: &[f64], v: &[f64]) -> f64 {
    crate::embedding::distance(u, v)
}

fn spread_colors(points: &[&[f64]]) -> Result<Vec<[u8; 3]>> {
    match points.len() {
        0 => Ok(Vec::new()),
        1 => Ok(vec![[128; 3]]),
        2 => {
            let d = euclid(points[0], points[1]);
            Ok(coords_to_colors(&[[-d / 2.0, 0.0, 0.0], [d / 2.0, 0.0, 0.0]]))
        }
        _ => {
            let dist: Vec<Vec<f64>> = points.iter().map(|p| points.iter().map(|q| euclid(p, q)).collect()).collect();
            Ok(coords_to_colors(&classical_mds(&dist)?))
        }
    }
}

impl PaletteAssignment {
    pub fn build(tree: &HierarchyTree, embeddings: &[Vec<f64>], level: usize, mode: PaletteMode) -> Result<Self> {
        let cut = tree.cut(level)?;
        if embeddings.len() != tree.num_patches() {
            return Err(Error::arg("one embedding per patch required"));
        }
        let mut patch_colors = vec![[128u8; 3]; embeddings.len()];
        match mode {
            PaletteMode::Nodes => {
                let centroids: Vec<&[f64]> = cut.iter().map(|n| n.centroid.as_slice()).collect();
                for (n, rgb) in cut.iter().zip(spread_colors(&centroids)?) {
                    n.members.iter().for_each(|&m| patch_colors[m] = rgb);
                }
            }
            PaletteMode::Patches => {
                let pts: Vec<&[f64]> = embeddings.iter().map(|e| e.as_slice()).collect();
                patch_colors = spread_colors(&pts)?;
            }
        }
        let node_colors = cut
            .iter()
            .map(|n| {
                let mut sum = [0.0f64; 3];
                for &m in &n.members {
                    (0..3).for_each(|a| sum[a] += f64::from(patch_colors[m][a]));
                }
                let rgb = sum.map(|s| (s / n.members.len() as f64).round() as u8);
                NodeColor { node: n.id, rgb }
            })
            .collect();
        Ok(PaletteAssignment { level, mode, patch_colors, node_colors })
    }

    pub fn node_color(&self, node: usize) -> Option<[u8; 3]> {
        self.node_colors.iter().find(|c| c.node == node).map(|c| c.rgb)
    }
}

pub fn save_palettes(path: impl AsRef<Path>, palettes: &[PaletteAssignment]) -> Result<()> {
    std::fs::write(path, serde_json::to_vec_pretty(palettes)?)?;
    Ok(())
}

/// Blends each pixel with its level node color: `alpha * node + (1 - alpha) * pixel`.
pub fn render_overlay(
    image: &Image,
    map: &SuperpixelMap,
    tree: &HierarchyTree,
    level: usize,
    palette: &PaletteAssignment,
    alpha: f64,
) -> Result<Image> {
    if !(0.0..=1.0).contains(&alpha) {
        return Err(Error::arg(format!("alpha {alpha} outside [0, 1]")));
    }
    if (image.width(), image.height()) != (map.width, map.height) || map.len() != tree.num_patches() {
        return Err(Error::arg("image, superpixels and hierarchy disagree in size"));
    }
    let cut = tree.cut(level)?;
    let mut patch_rgb = vec![[0u8; 3]; map.len()];
    for n in &cut {
        let rgb = palette
            .node_color(n.id)
            .ok_or_else(|| Error::arg(format!("palette has no color for node {}", n.id)))?;
        n.members.iter().for_each(|&m| patch_rgb[m] = rgb);
    }
    let mut out = image.clone();
    for (p, &label) in out.pixels_mut().zip(&map.labels) {
        let c = patch_rgb[label as usize];
        for a in 0..3 {
            p[a] = (alpha * f64::from(c[a]) + (1.0 - alpha) * f64::from(p[a])).round().clamp(0.0, 255.0) as u8;
        }
    }
    Ok(out)
}

pub fn overlay_file_name(level: usize) -> String {
    format!("segmentation_L{level}.png")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hierarchy::{build_hierarchy, ClusteringConfig};
    use image::Rgb;
    use rand::Rng;

    fn dmat(pts: &[Vec<f64>]) -> Vec<Vec<f64>> {
        pts.iter().map(|p| pts.iter().map(|q| euclid(p, q)).collect()).collect()
    }

    #[test]
    fn recovers_three_dimensional_distances() {
        let mut rng = crate::seed::rng(1);
        let pts: Vec<Vec<f64>> = (0..50).map(|_| (0..3).map(|_| rng.random_range(-1.0..1.0)).collect()).collect();
        let d = dmat(&pts);
        let c = classical_mds(&d).unwrap();
        for i in 0..50 {
            for j in 0..50 {
                assert!((euclid(&c[i], &c[j]) - d[i][j]).abs() < 1e-6);
            }
        }
    }

    #[test]
    fn collinear_is_rank_one() {
        let c = classical_mds(&dmat(&[vec![0.0], vec![1.0], vec![2.0]])).unwrap();
        assert!(c.iter().all(|p| p[1] == 0.0 && p[2] == 0.0));
        assert!(((c[2][0] - c[0][0]).abs() - 2.0).abs() < 1e-12);
        assert!(classical_mds(&vec![vec![0.0; 4]; 4]).unwrap().iter().all(|p| *p == [0.0; 3]));
    }

    #[test]
    fn asymmetric_rejected() {
        let d = vec![vec![0.0, 1.0, 2.0], vec![1.5, 0.0, 1.0], vec![2.0, 1.0, 0.0]];
        assert!(classical_mds(&d).is_err());
    }

    #[test]
    fn color_scaling() {
        assert_eq!(coords_to_colors(&[[0.0; 3], [1.0; 3]]), vec![[0; 3], [255; 3]]);
        assert_eq!(coords_to_colors(&[[3.0; 3], [3.0; 3]]), vec![[128; 3], [128; 3]]);
        let c = [[0.1, 2.0, -1.0], [0.5, 3.0, 4.0], [0.35, 2.6, 0.0]];
        let scaled: Vec<[f64; 3]> = c.iter().map(|p| p.map(|v| v * 7.5)).collect();
        assert_eq!(coords_to_colors(&c), coords_to_colors(&scaled));
    }

    fn planted_clusters() -> Vec<Vec<f64>> {
        // clusters 0 and 1 close together, cluster 2 far away
        let centers = [[0.0, 0.0], [1.0, 0.0], [10.0, 3.0]];
        let mut rng = crate::seed::rng(2);
        centers
            .iter()
            .flat_map(|c| (0..10).map(|_| vec![c[0] + rng.random_range(-0.05..0.05), c[1] + rng.random_range(-0.05..0.05)]).collect::<Vec<_>>())
            .collect()
    }

    #[test]
    fn close_clusters_get_close_colors() {
        let emb = planted_clusters();
        let cfg = ClusteringConfig { min_size: 6, max_depth: 1, k_max: 3, s_min: 0.0, ..Default::default() };
        let tree = build_hierarchy(&emb, &cfg).unwrap();
        assert_eq!(tree.nodes_at_level(1).count(), 3);
        let pal = PaletteAssignment::build(&tree, &emb, 1, PaletteMode::Nodes).unwrap();
        let color_of = |patch: usize| pal.patch_colors[patch].map(f64::from);
        let rgb_d = |a: usize, b: usize| euclid(&color_of(a), &color_of(b));
        assert!(rgb_d(0, 10) < rgb_d(0, 20));
        assert!(rgb_d(0, 10) < rgb_d(10, 20));
        let pal = PaletteAssignment::build(&tree, &emb, 1, PaletteMode::Patches).unwrap();
        assert_eq!(pal.node_colors.len(), 3);
    }

    #[test]
    fn overlay_blending() {
        let emb = planted_clusters();
        let cfg = ClusteringConfig { min_size: 6, max_depth: 1, k_max: 3, s_min: 0.0, ..Default::default() };
        let tree = build_hierarchy(&emb, &cfg).unwrap();
        // 30 one-pixel-wide column patches
        let labels: Vec<u32> = (0..2).flat_map(|_| 0..30u32).collect();
        let map = SuperpixelMap::from_labels(30, 2, labels).unwrap();
        let img = Image::from_fn(30, 2, |x, y| Rgb([x as u8 * 8, y as u8 * 100, 7]));
        let pal = PaletteAssignment::build(&tree, &emb, 1, PaletteMode::Nodes).unwrap();
        assert_eq!(render_overlay(&img, &map, &tree, 1, &pal, 0.0).unwrap(), img);
        let full = render_overlay(&img, &map, &tree, 1, &pal, 1.0).unwrap();
        let distinct: std::collections::HashSet<_> = full.pixels().map(|p| p.0).collect();
        assert_eq!(distinct.len(), 3);
        assert_eq!(full.dimensions(), img.dimensions());
        assert!(render_overlay(&img, &map, &tree, 5, &pal, 0.5).is_err());
        let root = PaletteAssignment::build(&tree, &emb, 0, PaletteMode::Nodes).unwrap();
        assert_eq!(root.node_colors, vec![NodeColor { node: 0, rgb: [128; 3] }]);
    }
}
