//! Handcrafted patch descriptor: color moments, color histograms and Sobel
//! gradient statistics, computed once over the patch pixels and once over the
//! surrounding context window.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::imaging::{Image, PatchView};

pub const HIST_BINS: usize = 8;
/// Length of the descriptor for one region.
pub const REGION_DIM: usize = 6 + 3 * HIST_BINS + 2 * HIST_BINS;
pub const FEATURE_DIM: usize = 2 * REGION_DIM;

/// Upper edges of the gradient-magnitude bins; the last bin is open.
const MAGNITUDE_EDGES: [f64; HIST_BINS - 1] = [1.0, 16.0, 32.0, 64.0, 128.0, 256.0, 512.0];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct FeatureVector(pub Vec<f64>);

impl FeatureVector {
    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }
}

/// Descriptor of a patch view: crop statistics over masked pixels followed by
/// context statistics over the whole context window.
///
/// Per region: channel means and standard deviations (pixel units), 8-bin
/// histograms per channel, an 8-bin Sobel magnitude histogram and an 8-bin
/// unsigned orientation histogram (magnitude weighted, bin 0 centered on a
/// horizontal gradient). Histograms sum to 1, except an orientation histogram
/// over a flat region, which is all zero.
pub fn describe_patch(view: &PatchView) -> FeatureVector {
    let mut out = Vec::with_capacity(FEATURE_DIM);
    out.extend(region_descriptor(&view.crop, Some(&view.mask)));
    out.extend(region_descriptor(&view.context, None));
    FeatureVector(out)
}

fn gray(p: &image::Rgb<u8>) -> f64 {
    0.299 * f64::from(p[0]) + 0.587 * f64::from(p[1]) + 0.114 * f64::from(p[2])
}

/// Sobel (gx, gy) of the grayscale image with replicated borders.
fn sobel(img: &Image) -> Vec<(f64, f64)> {
    let (w, h) = (img.width() as i64, img.height() as i64);
    let g: Vec<f64> = img.pixels().map(gray).collect();
    let at = |x: i64, y: i64| g[(y.clamp(0, h - 1) * w + x.clamp(0, w - 1)) as usize];
    let mut out = Vec::with_capacity(g.len());
    for y in 0..h {
        for x in 0..w {
            let gx = (at(x + 1, y - 1) + 2.0 * at(x + 1, y) + at(x + 1, y + 1))
                - (at(x - 1, y - 1) + 2.0 * at(x - 1, y) + at(x - 1, y + 1));
            let gy = (at(x - 1, y + 1) + 2.0 * at(x, y + 1) + at(x + 1, y + 1))
                - (at(x - 1, y - 1) + 2.0 * at(x, y - 1) + at(x + 1, y - 1));
            out.push((gx, gy));
        }
    }
    out
}

pub(crate) fn magnitude_bin(m: f64) -> usize {
    MAGNITUDE_EDGES.iter().position(|&e| m < e).unwrap_or(HIST_BINS - 1)
}

pub(crate) fn orientation_bin(gx: f64, gy: f64) -> usize {
    let angle = gy.atan2(gx).rem_euclid(PI);
    let width = PI / HIST_BINS as f64;
    (((angle + width / 2.0) / width).floor() as usize) % HIST_BINS
}

fn region_descriptor(img: &Image, mask: Option<&[bool]>) -> [f64; REGION_DIM] {
    let grads = sobel(img);
    let selected = |i: usize| mask.is_none_or(|m| m[i]);

    let mut count = 0.0;
    let mut sum = [0.0f64; 3];
    let mut sum_sq = [0.0f64; 3];
    let mut color_hist = [[0.0f64; HIST_BINS]; 3];
    let mut mag_hist = [0.0f64; HIST_BINS];
    let mut ori_hist = [0.0f64; HIST_BINS];
    let mut ori_weight = 0.0;
    for (i, p) in img.pixels().enumerate() {
        if !selected(i) {
            continue;
        }
        count += 1.0;
        for c in 0..3 {
            let v = f64::from(p[c]);
            sum[c] += v;
            sum_sq[c] += v * v;
            color_hist[c][usize::from(p[c]) * HIST_BINS / 256] += 1.0;
        }
        let (gx, gy) = grads[i];
        let m = gx.hypot(gy);
        mag_hist[magnitude_bin(m)] += 1.0;
        if m >= MAGNITUDE_EDGES[0] {
            ori_hist[orientation_bin(gx, gy)] += m;
            ori_weight += m;
        }
    }

    let mut out = [0.0f64; REGION_DIM];
    if count == 0.0 {
        return out;
    }
    for c in 0..3 {
        let mean = sum[c] / count;
        out[c] = mean;
        out[3 + c] = (sum_sq[c] / count - mean * mean).max(0.0).sqrt();
        for b in 0..HIST_BINS {
            out[6 + c * HIST_BINS + b] = color_hist[c][b] / count;
        }
    }
    let base = 6 + 3 * HIST_BINS;
    for b in 0..HIST_BINS {
        out[base + b] = mag_hist[b] / count;
        if ori_weight > 0.0 {
            out[base + HIST_BINS + b] = ori_hist[b] / ori_weight;
        }
    }
    out
}
