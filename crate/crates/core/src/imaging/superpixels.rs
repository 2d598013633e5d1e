use std::collections::VecDeque;
use std::fs;
use std::path::Path;

use image::{ImageBuffer, Luma};
use serde::{Deserialize, Serialize};

use super::patch::Rect;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PatchRecord {
    pub id: usize,
    pub pixel_count: usize,
    /// Mean pixel position (x, y).
    pub centroid: (f64, f64),
    pub bbox: Rect,
}

/// Pixel-to-patch assignment produced by oversegmentation.
///
/// Labels are stored row-major; patch ids are dense in `0..patches.len()`.
#[derive(Debug, Clone, PartialEq)]
pub struct SuperpixelMap {
    pub width: u32,
    pub height: u32,
    pub labels: Vec<u32>,
    pub patches: Vec<PatchRecord>,
}

#[derive(Serialize, Deserialize)]
struct SuperpixelsFile {
    width: u32,
    height: u32,
    patches: Vec<PatchRecord>,
}

impl SuperpixelMap {
    /// Builds patch records from a dense label image. Labels must cover `0..B`
    /// with no gaps.
    pub fn from_labels(width: u32, height: u32, labels: Vec<u32>) -> Result<Self> {
        let n = width as usize * height as usize;
        if labels.len() != n || n == 0 {
            return Err(Error::arg(format!(
                "label buffer has {} entries for a {width}x{height} image",
                labels.len()
            )));
        }
        let count = labels.iter().copied().max().unwrap_or(0) as usize + 1;
        let mut acc = vec![(0usize, 0.0f64, 0.0f64, u32::MAX, u32::MAX, 0u32, 0u32); count];
        for y in 0..height {
            for x in 0..width {
                let l = labels[(y * width + x) as usize] as usize;
                let a = &mut acc[l];
                a.0 += 1;
                a.1 += f64::from(x);
                a.2 += f64::from(y);
                a.3 = a.3.min(x);
                a.4 = a.4.min(y);
                a.5 = a.5.max(x + 1);
                a.6 = a.6.max(y + 1);
            }
        }
        let patches = acc
            .into_iter()
            .enumerate()
            .map(|(id, (cnt, sx, sy, x0, y0, x1, y1))| {
                if cnt == 0 {
                    return Err(Error::arg(format!("patch id {id} owns no pixels")));
                }
                Ok(PatchRecord {
                    id,
                    pixel_count: cnt,
                    centroid: (sx / cnt as f64, sy / cnt as f64),
                    bbox: Rect { x: x0, y: y0, width: x1 - x0, height: y1 - y0 },
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(SuperpixelMap { width, height, labels, patches })
    }

    pub fn len(&self) -> usize {
        self.patches.len()
    }

    pub fn is_empty(&self) -> bool {
        self.patches.is_empty()
    }

    #[inline]
    pub fn label_at(&self, x: u32, y: u32) -> usize {
        self.labels[(y * self.width + x) as usize] as usize
    }

    /// Row-major pixel indices of every patch.
    pub fn pixel_lists(&self) -> Vec<Vec<usize>> {
        let mut lists: Vec<Vec<usize>> = self
            .patches
            .iter()
            .map(|p| Vec::with_capacity(p.pixel_count))
            .collect();
        for (i, &l) in self.labels.iter().enumerate() {
            lists[l as usize].push(i);
        }
        lists
    }

    /// Checks the partition invariants: every pixel labeled with a known id,
    /// every id non-empty, every patch 4-connected.
    pub fn validate(&self) -> Result<()> {
        let (w, h) = (self.width as usize, self.height as usize);
        if self.labels.len() != w * h {
            return Err(Error::State("label buffer size mismatch".into()));
        }
        let b = self.patches.len();
        let mut counts = vec![0usize; b];
        for &l in &self.labels {
            let l = l as usize;
            if l >= b {
                return Err(Error::State(format!("label {l} out of range 0..{b}")));
            }
            counts[l] += 1;
        }
        for (id, (&c, rec)) in counts.iter().zip(&self.patches).enumerate() {
            if c == 0 || c != rec.pixel_count {
                return Err(Error::State(format!("patch {id} pixel count mismatch")));
            }
        }
        // One flood fill per patch, seeded at its first pixel; a patch is
        // connected iff the fill reaches all of its pixels.
        let mut seen = vec![false; w * h];
        let mut started = vec![false; b];
        let mut queue = VecDeque::new();
        for start in 0..w * h {
            let l = self.labels[start] as usize;
            if started[l] {
                if !seen[start] {
                    return Err(Error::State(format!("patch {l} is not 4-connected")));
                }
                continue;
            }
            started[l] = true;
            seen[start] = true;
            queue.push_back(start);
            while let Some(i) = queue.pop_front() {
                let (x, y) = (i % w, i / w);
                let mut visit = |j: usize| {
                    if !seen[j] && self.labels[j] as usize == l {
                        seen[j] = true;
                        queue.push_back(j);
                    }
                };
                if x > 0 {
                    visit(i - 1);
                }
                if x + 1 < w {
                    visit(i + 1);
                }
                if y > 0 {
                    visit(i - w);
                }
                if y + 1 < h {
                    visit(i + w);
                }
            }
        }
        Ok(())
    }

    /// Writes `superpixels.json` (patch records) and `labels.png` (16-bit gray).
    pub fn save(&self, dir: impl AsRef<Path>) -> Result<()> {
        let dir = dir.as_ref();
        if self.patches.len() > usize::from(u16::MAX) + 1 {
            return Err(Error::arg("more than 65536 patches cannot be stored in a 16-bit label image"));
        }
        let file = SuperpixelsFile {
            width: self.width,
            height: self.height,
            patches: self.patches.clone(),
        };
        fs::write(dir.join("superpixels.json"), serde_json::to_vec_pretty(&file)?)?;
        let raw: Vec<u16> = self.labels.iter().map(|&l| l as u16).collect();
        let img: ImageBuffer<Luma<u16>, Vec<u16>> =
            ImageBuffer::from_raw(self.width, self.height, raw).expect("buffer size checked");
        img.save_with_format(dir.join("labels.png"), image::ImageFormat::Png)?;
        Ok(())
    }

    pub fn load(dir: impl AsRef<Path>) -> Result<Self> {
        let dir = dir.as_ref();
        let file: SuperpixelsFile = serde_json::from_slice(&fs::read(dir.join("superpixels.json"))?)?;
        let labels_path = dir.join("labels.png");
        let img = image::open(&labels_path)?;
        let img = match img {
            image::DynamicImage::ImageLuma16(buf) => buf,
            other => {
                return Err(Error::Decode {
                    path: labels_path,
                    reason: format!("expected 16-bit gray labels, found {:?}", other.color()),
                })
            }
        };
        if img.width() != file.width || img.height() != file.height {
            return Err(Error::State("labels.png does not match superpixels.json".into()));
        }
        let labels = img.into_raw().into_iter().map(u32::from).collect();
        let map = SuperpixelMap::from_labels(file.width, file.height, labels)?;
        if map.patches != file.patches {
            return Err(Error::State("superpixels.json disagrees with labels.png".into()));
        }
        Ok(map)
    }
}
