//! SLIC superpixels: k-means over (L, a, b, x, y) restricted to a 2S x 2S
//! window around each center, followed by a connectivity pass.

use std::collections::{BTreeSet, VecDeque};

use rand::Rng;

use super::lab::{rgb_to_lab, Lab};
use super::superpixels::SuperpixelMap;
use super::Image;
use crate::error::{Error, Result};
use crate::seed;

#[derive(Debug, Clone, PartialEq)]
pub struct SlicParams {
    pub target_count: usize,
    /// Weight of spatial proximity against color distance.
    pub compactness: f64,
    pub iterations: usize,
    /// Gaussian pre-smoothing; 0 disables it.
    pub sigma: f32,
    pub seed: u64,
}

impl SlicParams {
    pub fn new(target_count: usize, compactness: f64, seed: u64) -> Self {
        SlicParams { target_count, compactness, iterations: 10, sigma: 2.0, seed }
    }
}

#[derive(Clone, Copy)]
struct Center {
    lab: Lab,
    x: f64,
    y: f64,
}

pub fn slic(image: &Image, target_count: usize, compactness: f64, seed: u64) -> Result<SuperpixelMap> {
    slic_with(image, &SlicParams::new(target_count, compactness, seed))
}

pub fn slic_with(image: &Image, params: &SlicParams) -> Result<SuperpixelMap> {
    let (w, h) = (image.width() as usize, image.height() as usize);
    let n = w * h;
    if params.target_count < 2 || params.target_count > n {
        return Err(Error::arg(format!(
            "target_count {} outside 2..={n}",
            params.target_count
        )));
    }
    if !(params.compactness > 0.0) || params.iterations == 0 {
        return Err(Error::arg("compactness and iterations must be positive"));
    }

    let smoothed;
    let source = if params.sigma > 0.0 {
        smoothed = image::imageops::blur(image, params.sigma);
        &smoothed
    } else {
        image
    };
    let lab: Vec<Lab> = source.pixels().map(|p| rgb_to_lab(p.0)).collect();
    let step = (n as f64 / params.target_count as f64).sqrt();
    let mut centers = seed_centers(&lab, w, h, step, params);
    let spatial_weight = (params.compactness / step).powi(2);
    let window = step.ceil() as i64;

    let mut labels = vec![u32::MAX; n];
    let mut dist = vec![f64::INFINITY; n];
    for _ in 0..params.iterations {
        dist.iter_mut().for_each(|d| *d = f64::INFINITY);
        for (ci, c) in centers.iter().enumerate() {
            let (cx, cy) = (c.x.round() as i64, c.y.round() as i64);
            let x0 = (cx - window).max(0) as usize;
            let x1 = ((cx + window + 1).min(w as i64)) as usize;
            let y0 = (cy - window).max(0) as usize;
            let y1 = ((cy + window + 1).min(h as i64)) as usize;
            for y in y0..y1 {
                let dy = y as f64 - c.y;
                let row = y * w;
                for x in x0..x1 {
                    let dx = x as f64 - c.x;
                    let i = row + x;
                    let d = c.lab.dist2(&lab[i]) + (dx * dx + dy * dy) * spatial_weight;
                    if d < dist[i] {
                        dist[i] = d;
                        labels[i] = ci as u32;
                    }
                }
            }
        }
        assign_uncovered(&mut labels, &lab, &centers, w, spatial_weight);
        update_centers(&mut centers, &labels, &lab, w);
    }

    let labels = enforce_connectivity(&labels, &lab, w, h, (step * step / 4.0).max(1.0) as usize);
    SuperpixelMap::from_labels(w as u32, h as u32, labels)
}

fn seed_centers(lab: &[Lab], w: usize, h: usize, step: f64, params: &SlicParams) -> Vec<Center> {
    let nx = ((w as f64 / step).round() as usize).max(1);
    let ny = ((h as f64 / step).round() as usize).max(1);
    let (sx, sy) = (w as f64 / nx as f64, h as f64 / ny as f64);
    let mut rng = seed::rng(params.seed);
    let gradient = |x: usize, y: usize| -> f64 {
        let xl = x.saturating_sub(1);
        let xr = (x + 1).min(w - 1);
        let yu = y.saturating_sub(1);
        let yd = (y + 1).min(h - 1);
        lab[y * w + xr].dist2(&lab[y * w + xl]) + lab[yd * w + x].dist2(&lab[yu * w + x])
    };
    let mut centers = Vec::with_capacity(nx * ny);
    for j in 0..ny {
        for i in 0..nx {
            // small seeded jitter, then move to the lowest-gradient pixel in the 3x3 neighbourhood
            let jx = rng.random_range(-0.125..0.125) * sx;
            let jy = rng.random_range(-0.125..0.125) * sy;
            let x = (((i as f64 + 0.5) * sx + jx).floor() as usize).min(w - 1);
            let y = (((j as f64 + 0.5) * sy + jy).floor() as usize).min(h - 1);
            let mut best = (gradient(x, y), x, y);
            for ny_ in y.saturating_sub(1)..=(y + 1).min(h - 1) {
                for nx_ in x.saturating_sub(1)..=(x + 1).min(w - 1) {
                    let g = gradient(nx_, ny_);
                    if g < best.0 {
                        best = (g, nx_, ny_);
                    }
                }
            }
            let (_, x, y) = best;
            centers.push(Center { lab: lab[y * w + x], x: x as f64, y: y as f64 });
        }
    }
    centers
}

fn assign_uncovered(labels: &mut [u32], lab: &[Lab], centers: &[Center], w: usize, spatial_weight: f64) {
    for i in 0..labels.len() {
        if labels[i] != u32::MAX {
            continue;
        }
        let (x, y) = ((i % w) as f64, (i / w) as f64);
        let mut best = (f64::INFINITY, 0u32);
        for (ci, c) in centers.iter().enumerate() {
            let d = c.lab.dist2(&lab[i]) + ((x - c.x).powi(2) + (y - c.y).powi(2)) * spatial_weight;
            if d < best.0 {
                best = (d, ci as u32);
            }
        }
        labels[i] = best.1;
    }
}

fn update_centers(centers: &mut [Center], labels: &[u32], lab: &[Lab], w: usize) {
    let mut sums = vec![[0.0f64; 6]; centers.len()];
    for (i, &l) in labels.iter().enumerate() {
        let s = &mut sums[l as usize];
        s[0] += lab[i].l;
        s[1] += lab[i].a;
        s[2] += lab[i].b;
        s[3] += (i % w) as f64;
        s[4] += (i / w) as f64;
        s[5] += 1.0;
    }
    for (c, s) in centers.iter_mut().zip(&sums) {
        // empty clusters keep their previous position
        if s[5] > 0.0 {
            let k = s[5];
            *c = Center {
                lab: Lab { l: s[0] / k, a: s[1] / k, b: s[2] / k },
                x: s[3] / k,
                y: s[4] / k,
            };
        }
    }
}

fn find(parent: &mut [usize], mut i: usize) -> usize {
    while parent[i] != i {
        parent[i] = parent[parent[i]];
        i = parent[i];
    }
    i
}

/// Splits every cluster into its 4-connected components, then folds components
/// smaller than `min_size` into the adjacent component with the closest mean
/// color. Output labels are dense and numbered in scan order.
fn enforce_connectivity(labels: &[u32], lab: &[Lab], w: usize, h: usize, min_size: usize) -> Vec<u32> {
    let n = w * h;
    let mut comp = vec![usize::MAX; n];
    let mut sizes: Vec<usize> = Vec::new();
    let mut color_sums: Vec<[f64; 3]> = Vec::new();
    let mut queue = VecDeque::new();
    for start in 0..n {
        if comp[start] != usize::MAX {
            continue;
        }
        let id = sizes.len();
        let l = labels[start];
        comp[start] = id;
        queue.push_back(start);
        let (mut size, mut sum) = (0usize, [0.0f64; 3]);
        while let Some(i) = queue.pop_front() {
            size += 1;
            sum[0] += lab[i].l;
            sum[1] += lab[i].a;
            sum[2] += lab[i].b;
            let (x, y) = (i % w, i / w);
            let neighbors = [
                (x > 0).then(|| i - 1),
                (x + 1 < w).then(|| i + 1),
                (y > 0).then(|| i - w),
                (y + 1 < h).then(|| i + w),
            ];
            for j in neighbors.into_iter().flatten() {
                if comp[j] == usize::MAX && labels[j] == l {
                    comp[j] = id;
                    queue.push_back(j);
                }
            }
        }
        sizes.push(size);
        color_sums.push(sum);
    }

    let m = sizes.len();
    let mut adjacency: Vec<BTreeSet<usize>> = vec![BTreeSet::new(); m];
    for i in 0..n {
        let (x, y) = (i % w, i / w);
        if x + 1 < w && comp[i] != comp[i + 1] {
            adjacency[comp[i]].insert(comp[i + 1]);
            adjacency[comp[i + 1]].insert(comp[i]);
        }
        if y + 1 < h && comp[i] != comp[i + w] {
            adjacency[comp[i]].insert(comp[i + w]);
            adjacency[comp[i + w]].insert(comp[i]);
        }
    }

    let mut parent: Vec<usize> = (0..m).collect();
    let mut order: Vec<usize> = (0..m).filter(|&c| sizes[c] < min_size).collect();
    order.sort_by_key(|&c| (sizes[c], c));
    let mut changed = true;
    while changed {
        changed = false;
        for &c in &order {
            let r = find(&mut parent, c);
            if sizes[r] >= min_size {
                continue;
            }
            let mean = |s: &[f64; 3], k: usize| [s[0] / k as f64, s[1] / k as f64, s[2] / k as f64];
            let own = mean(&color_sums[r], sizes[r]);
            let neighbors: BTreeSet<usize> = adjacency[r]
                .clone()
                .into_iter()
                .map(|a| find(&mut parent, a))
                .filter(|&a| a != r)
                .collect();
            let target = neighbors.into_iter().min_by(|&a, &b| {
                let da = mean(&color_sums[a], sizes[a]);
                let db = mean(&color_sums[b], sizes[b]);
                let d = |o: [f64; 3]| (0..3).map(|k| (o[k] - own[k]).powi(2)).sum::<f64>();
                d(da).total_cmp(&d(db)).then(a.cmp(&b))
            });
            if let Some(t) = target {
                parent[r] = t;
                sizes[t] += sizes[r];
                for k in 0..3 {
                    color_sums[t][k] += color_sums[r][k];
                }
                let moved = std::mem::take(&mut adjacency[r]);
                adjacency[t].extend(moved);
                changed = true;
            }
        }
    }

    let mut dense = vec![u32::MAX; m];
    let mut next = 0u32;
    let mut out = vec![0u32; n];
    for i in 0..n {
        let r = find(&mut parent, comp[i]);
        if dense[r] == u32::MAX {
            dense[r] = next;
            next += 1;
        }
        out[i] = dense[r];
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use image::Rgb;

    #[test]
    fn uniform_image_gives_grid() {
        let img = Image::from_pixel(200, 200, Rgb([90, 120, 60]));
        let map = slic(&img, 100, 10.0, 1).unwrap();
        assert!((80..=120).contains(&map.len()), "{} patches", map.len());
        map.validate().unwrap();
    }

    #[test]
    fn target_out_of_range() {
        let img = Image::from_pixel(4, 4, Rgb([0, 0, 0]));
        assert!(slic(&img, 1, 10.0, 0).is_err());
        assert!(slic(&img, 17, 10.0, 0).is_err());
        assert!(slic(&img, 16, 10.0, 0).is_ok());
    }

    #[test]
    fn deterministic_for_fixed_seed() {
        let img = Image::from_fn(64, 48, |x, y| Rgb([(x * 4) as u8, (y * 5) as u8, ((x + y) % 7 * 30) as u8]));
        let a = slic(&img, 30, 10.0, 9).unwrap();
        let b = slic(&img, 30, 10.0, 9).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn two_color_halves_are_respected() {
        let img = Image::from_fn(120, 60, |x, _| if x < 60 { Rgb([200, 30, 30]) } else { Rgb([30, 30, 200]) });
        let map = slic(&img, 18, 10.0, 3).unwrap();
        map.validate().unwrap();
        for p in &map.patches {
            let b = p.bbox;
            assert!(b.x + b.width <= 60 || b.x >= 60, "patch {} straddles the edge", p.id);
        }
    }
}
