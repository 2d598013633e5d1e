//! Nine-class synthetic test image: three greens crossed with three textures,
//! laid out on a grid of square cells.

use image::Rgb;
use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::Image;
use crate::error::{Error, Result};
use crate::oracle::{GroundTruthHierarchy, TreeNode};
use crate::seed;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ColorKind {
    Light,
    Normal,
    Dark,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TextureKind {
    Lines,
    Dots,
    Triangles,
}

impl ColorKind {
    pub const ALL: [ColorKind; 3] = [ColorKind::Light, ColorKind::Normal, ColorKind::Dark];
    pub fn name(self) -> &'static str {
        match self {
            ColorKind::Light => "light",
            ColorKind::Normal => "normal",
            ColorKind::Dark => "dark",
        }
    }
}

impl TextureKind {
    pub const ALL: [TextureKind; 3] = [TextureKind::Lines, TextureKind::Dots, TextureKind::Triangles];
    pub fn name(self) -> &'static str {
        match self {
            TextureKind::Lines => "lines",
            TextureKind::Dots => "dots",
            TextureKind::Triangles => "triangles",
        }
    }
}

// Texture geometry, in pixels.
const STRIPE_PERIOD: u32 = 12;
const STRIPE_WIDTH: u32 = 4;
const DOT_RADIUS: f64 = 3.0;
const TRIANGLE_SIDE: f64 = 16.0;
const COVERAGE: f64 = 0.2;
const FOREGROUND_DARKENING: u8 = 55;
/// Smallest cell that still holds several texture elements per side.
pub const MIN_CELL_SIZE: u32 = 64;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticSpec {
    pub width: u32,
    pub height: u32,
    /// Side of the square grid cells; border cells may be clipped.
    pub cell_size: u32,
    /// Base RGB for light, normal and dark green.
    pub colors: [[u8; 3]; 3],
    pub seed: u64,
}

impl SyntheticSpec {
    /// Full 1800 x 3600 layout (3 x 6 cells, each class twice).
    pub fn full_scale(seed: u64) -> Self {
        SyntheticSpec { width: 3600, height: 1800, cell_size: 600, ..Self::desk_scale(seed) }
    }

    /// 600 x 1200 layout with the same 3 x 6 cell grid.
    pub fn desk_scale(seed: u64) -> Self {
        SyntheticSpec {
            width: 1200,
            height: 600,
            cell_size: 200,
            colors: [[170, 230, 130], [90, 170, 70], [30, 105, 40]],
            seed,
        }
    }

    pub fn grid(&self) -> (u32, u32) {
        (self.width.div_ceil(self.cell_size), self.height.div_ceil(self.cell_size))
    }

    fn validate(&self) -> Result<()> {
        if self.cell_size < MIN_CELL_SIZE {
            return Err(Error::Config(format!(
                "cell size {} too small to render textures (minimum {MIN_CELL_SIZE})",
                self.cell_size
            )));
        }
        let (cols, rows) = self.grid();
        if cols * rows < 9 {
            return Err(Error::Config(format!(
                "a {}x{} image with {}-pixel cells has fewer than 9 cells",
                self.width, self.height, self.cell_size
            )));
        }
        for (i, a) in self.colors.iter().enumerate() {
            if self.colors[..i].contains(a) {
                return Err(Error::Config("base colors must be distinct".into()));
            }
        }
        Ok(())
    }
}

/// Class ids are `color * 3 + texture` with both in `ALL` order.
pub fn class_of(color: ColorKind, texture: TextureKind) -> usize {
    let c = ColorKind::ALL.iter().position(|&k| k == color).unwrap();
    let t = TextureKind::ALL.iter().position(|&k| k == texture).unwrap();
    c * 3 + t
}

pub fn class_name(class: usize) -> String {
    format!("{}/{}", ColorKind::ALL[class / 3].name(), TextureKind::ALL[class % 3].name())
}

#[derive(Debug, Clone)]
pub struct SyntheticImage {
    pub image: Image,
    /// Per-pixel class id in `0..9`, row-major.
    pub labels: Vec<u16>,
    /// Class of each grid cell, row-major over the cell grid.
    pub cell_classes: Vec<usize>,
    /// Participant 1: color first, then texture.
    pub color_first: GroundTruthHierarchy,
    /// Participant 2: texture first, then color.
    pub texture_first: GroundTruthHierarchy,
}

impl SyntheticImage {
    pub fn class_names() -> Vec<String> {
        (0..9).map(class_name).collect()
    }
}

pub fn color_first_tree() -> TreeNode {
    TreeNode::branch(
        "root",
        ColorKind::ALL
            .iter()
            .map(|&c| {
                TreeNode::branch(c.name(), TextureKind::ALL.iter().map(|&t| TreeNode::leaf(class_name(class_of(c, t)))).collect())
            })
            .collect(),
    )
}

pub fn texture_first_tree() -> TreeNode {
    TreeNode::branch(
        "root",
        TextureKind::ALL
            .iter()
            .map(|&t| {
                TreeNode::branch(t.name(), ColorKind::ALL.iter().map(|&c| TreeNode::leaf(class_name(class_of(c, t)))).collect())
            })
            .collect(),
    )
}

pub fn generate_synthetic(spec: &SyntheticSpec) -> Result<SyntheticImage> {
    spec.validate()?;
    let (cols, rows) = spec.grid();
    let cells = (cols * rows) as usize;

    // Balanced layout: classes repeat round-robin, then a seeded shuffle.
    let mut cell_classes: Vec<usize> = (0..cells).map(|i| i % 9).collect();
    cell_classes.shuffle(&mut seed::derived_rng(spec.seed, &[0x1a70]));

    let (w, h) = (spec.width, spec.height);
    let mut labels = vec![0u16; (w * h) as usize];
    let mut foreground = vec![false; (w * h) as usize];

    for (cell, &class) in cell_classes.iter().enumerate() {
        let cx0 = (cell as u32 % cols) * spec.cell_size;
        let cy0 = (cell as u32 / cols) * spec.cell_size;
        let cx1 = (cx0 + spec.cell_size).min(w);
        let cy1 = (cy0 + spec.cell_size).min(h);
        for y in cy0..cy1 {
            for x in cx0..cx1 {
                labels[(y * w + x) as usize] = class as u16;
            }
        }
        let mut rng = seed::derived_rng(spec.seed, &[0x7e47, cell as u64]);
        let area = f64::from((cx1 - cx0) * (cy1 - cy0));
        let mut mark = |x: i64, y: i64| {
            if x >= i64::from(cx0) && x < i64::from(cx1) && y >= i64::from(cy0) && y < i64::from(cy1) {
                foreground[(y as u32 * w + x as u32) as usize] = true;
            }
        };
        match TextureKind::ALL[class % 3] {
            TextureKind::Lines => {
                for y in cy0..cy1 {
                    for x in cx0..cx1 {
                        if (x + y) % STRIPE_PERIOD < STRIPE_WIDTH {
                            mark(i64::from(x), i64::from(y));
                        }
                    }
                }
            }
            TextureKind::Dots => {
                let count = (COVERAGE * area / (std::f64::consts::PI * DOT_RADIUS * DOT_RADIUS)).round() as usize;
                let r = DOT_RADIUS.ceil() as i64;
                for _ in 0..count {
                    let px = rng.random_range(f64::from(cx0)..f64::from(cx1));
                    let py = rng.random_range(f64::from(cy0)..f64::from(cy1));
                    for dy in -r..=r {
                        for dx in -r..=r {
                            let (x, y) = (px.floor() as i64 + dx, py.floor() as i64 + dy);
                            let (fx, fy) = (x as f64 + 0.5 - px, y as f64 + 0.5 - py);
                            if fx * fx + fy * fy <= DOT_RADIUS * DOT_RADIUS {
                                mark(x, y);
                            }
                        }
                    }
                }
            }
            TextureKind::Triangles => {
                let tri_h = TRIANGLE_SIDE * 3f64.sqrt() / 2.0;
                let count = (COVERAGE * area / (TRIANGLE_SIDE * tri_h / 2.0)).round() as usize;
                for _ in 0..count {
                    // upright triangle; (px, py) is the apex
                    let px = rng.random_range(f64::from(cx0)..f64::from(cx1));
                    let py = rng.random_range(f64::from(cy0)..f64::from(cy1));
                    let (x0, x1) = ((px - TRIANGLE_SIDE / 2.0).floor() as i64, (px + TRIANGLE_SIDE / 2.0).ceil() as i64);
                    let (y0, y1) = (py.floor() as i64, (py + tri_h).ceil() as i64);
                    for y in y0..=y1 {
                        for x in x0..=x1 {
                            let (fx, fy) = (x as f64 + 0.5, y as f64 + 0.5);
                            let depth = fy - py;
                            if depth >= 0.0 && depth <= tri_h && (fx - px).abs() <= depth / 3f64.sqrt() {
                                mark(x, y);
                            }
                        }
                    }
                }
            }
        }
    }

    let image = Image::from_fn(w, h, |x, y| {
        let i = (y * w + x) as usize;
        let base = spec.colors[labels[i] as usize / 3];
        if foreground[i] {
            Rgb(base.map(|c| c.saturating_sub(FOREGROUND_DARKENING)))
        } else {
            Rgb(base)
        }
    });

    Ok(SyntheticImage {
        image,
        labels,
        cell_classes,
        color_first: GroundTruthHierarchy::new(color_first_tree())?,
        texture_first: GroundTruthHierarchy::new(texture_first_tree())?,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn nine_classes_present() {
        let synth = generate_synthetic(&SyntheticSpec::desk_scale(5)).unwrap();
        let mut hist = [0usize; 9];
        for &l in &synth.labels {
            hist[l as usize] += 1;
        }
        assert!(hist.iter().all(|&c| c > 0), "{hist:?}");
        let mut a = synth.color_first.leaf_names().to_vec();
        let mut b = synth.texture_first.leaf_names().to_vec();
        a.sort();
        b.sort();
        assert_eq!(a, b);
    }

    #[test]
    fn deterministic_per_seed() {
        let a = generate_synthetic(&SyntheticSpec::desk_scale(11)).unwrap();
        let b = generate_synthetic(&SyntheticSpec::desk_scale(11)).unwrap();
        assert_eq!(a.image, b.image);
        let c = generate_synthetic(&SyntheticSpec::desk_scale(12)).unwrap();
        assert_ne!(a.image, c.image);
    }

    #[test]
    fn tiny_cells_rejected() {
        let spec = SyntheticSpec { cell_size: 20, ..SyntheticSpec::desk_scale(0) };
        assert!(matches!(generate_synthetic(&spec), Err(Error::Config(_))));
        let spec = SyntheticSpec { width: 200, height: 200, cell_size: 100, ..SyntheticSpec::desk_scale(0) };
        assert!(matches!(generate_synthetic(&spec), Err(Error::Config(_))));
    }
}
