use serde::{Deserialize, Serialize};

use super::superpixels::SuperpixelMap;
use super::Image;
use crate::error::{Error, Result};

/// Axis-aligned pixel rectangle, `[x, x + width) x [y, y + height)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Rect {
    pub x: u32,
    pub y: u32,
    pub width: u32,
    pub height: u32,
}

impl Rect {
    pub fn contains_rect(&self, other: &Rect) -> bool {
        other.x >= self.x
            && other.y >= self.y
            && other.x + other.width <= self.x + self.width
            && other.y + other.height <= self.y + self.height
    }

    /// Scales the rectangle about its center, then intersects with `[0, max_w) x [0, max_h)`.
    pub fn scaled_about_center(&self, scale: f64, max_w: u32, max_h: u32) -> Rect {
        let cx = f64::from(self.x) + f64::from(self.width) / 2.0;
        let cy = f64::from(self.y) + f64::from(self.height) / 2.0;
        let w = (f64::from(self.width) * scale).round();
        let h = (f64::from(self.height) * scale).round();
        let x0 = (cx - w / 2.0).round().max(0.0);
        let y0 = (cy - h / 2.0).round().max(0.0);
        let x1 = (cx + w / 2.0).round().min(f64::from(max_w));
        let y1 = (cy + h / 2.0).round().min(f64::from(max_h));
        Rect {
            x: x0 as u32,
            y: y0 as u32,
            width: (x1 - x0) as u32,
            height: (y1 - y0) as u32,
        }
    }

    fn crop(&self, image: &Image) -> Image {
        image::imageops::crop_imm(image, self.x, self.y, self.width, self.height).to_image()
    }
}

/// What an annotator sees for one option of a 3AFC question: the patch's
/// bounding-box crop and a wider context window around it.
#[derive(Debug, Clone, PartialEq)]
pub struct PatchView {
    pub patch_id: usize,
    pub crop: Image,
    pub crop_rect: Rect,
    pub context: Image,
    pub context_rect: Rect,
    /// Row-major over `crop`; true where the pixel belongs to the patch.
    pub mask: Vec<bool>,
}

impl PatchView {
    fn in_mask(&self, x: i64, y: i64) -> bool {
        let (w, h) = (i64::from(self.crop_rect.width), i64::from(self.crop_rect.height));
        x >= 0 && y >= 0 && x < w && y < h && self.mask[(y * w + x) as usize]
    }

    /// The context window with the patch's boundary pixels painted `color`.
    pub fn outlined_context(&self, color: [u8; 3]) -> Image {
        let mut out = self.context.clone();
        let dx = self.crop_rect.x - self.context_rect.x;
        let dy = self.crop_rect.y - self.context_rect.y;
        for y in 0..i64::from(self.crop_rect.height) {
            for x in 0..i64::from(self.crop_rect.width) {
                let edge = self.in_mask(x, y)
                    && [(1, 0), (-1, 0), (0, 1), (0, -1)].iter().any(|(ox, oy)| !self.in_mask(x + ox, y + oy));
                if edge {
                    out.put_pixel(dx + x as u32, dy + y as u32, image::Rgb(color));
                }
            }
        }
        out
    }
}

pub fn extract_patch(image: &Image, map: &SuperpixelMap, patch_id: usize, context_scale: f64) -> Result<PatchView> {
    let record = map
        .patches
        .get(patch_id)
        .ok_or_else(|| Error::arg(format!("unknown patch id {patch_id} (map has {})", map.len())))?;
    if !(context_scale >= 1.0) {
        return Err(Error::arg(format!("context_scale {context_scale} must be >= 1")));
    }
    if image.width() != map.width || image.height() != map.height {
        return Err(Error::arg("image and superpixel map sizes differ"));
    }
    let crop_rect = record.bbox;
    let context_rect = crop_rect.scaled_about_center(context_scale, image.width(), image.height());
    let mut mask = Vec::with_capacity((crop_rect.width * crop_rect.height) as usize);
    for y in crop_rect.y..crop_rect.y + crop_rect.height {
        for x in crop_rect.x..crop_rect.x + crop_rect.width {
            mask.push(map.label_at(x, y) == patch_id);
        }
    }
    Ok(PatchView {
        patch_id,
        crop: crop_rect.crop(image),
        crop_rect,
        context: context_rect.crop(image),
        context_rect,
        mask,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use image::Rgb;

    fn square_map(w: u32, h: u32, inner: Rect) -> SuperpixelMap {
        let labels = (0..h)
            .flat_map(|y| (0..w).map(move |x| (x, y)))
            .map(|(x, y)| {
                u32::from(x >= inner.x && x < inner.x + inner.width && y >= inner.y && y < inner.y + inner.height)
            })
            .collect();
        SuperpixelMap::from_labels(w, h, labels).unwrap()
    }

    #[test]
    fn unit_scale_context_equals_crop() {
        let img = Image::from_fn(50, 50, |x, y| Rgb([x as u8, y as u8, 0]));
        let map = square_map(50, 50, Rect { x: 10, y: 12, width: 9, height: 7 });
        let view = extract_patch(&img, &map, 1, 1.0).unwrap();
        assert_eq!(view.context_rect, view.crop_rect);
        assert_eq!(view.context, view.crop);
        assert!(view.mask.iter().all(|&m| m));
    }

    #[test]
    fn centered_box_doubles() {
        let img = Image::new(100, 100);
        let inner = Rect { x: 40, y: 40, width: 20, height: 20 };
        let map = square_map(100, 100, inner);
        let view = extract_patch(&img, &map, 1, 2.0).unwrap();
        assert_eq!(view.context_rect, Rect { x: 30, y: 30, width: 40, height: 40 });
        assert!(view.context_rect.contains_rect(&view.crop_rect));
    }

    #[test]
    fn corner_patch_is_clamped() {
        let img = Image::new(60, 40);
        let map = square_map(60, 40, Rect { x: 0, y: 0, width: 10, height: 8 });
        let view = extract_patch(&img, &map, 1, 3.0).unwrap();
        let c = view.context_rect;
        assert_eq!((c.x, c.y), (0, 0));
        assert!(c.x + c.width <= 60 && c.y + c.height <= 40);
        assert!(c.contains_rect(&view.crop_rect));
        assert_eq!(view.context.dimensions(), (c.width, c.height));
    }

    #[test]
    fn outline_traces_the_boundary() {
        let img = Image::new(20, 20);
        let map = square_map(20, 20, Rect { x: 8, y: 8, width: 4, height: 3 });
        let view = extract_patch(&img, &map, 1, 3.0).unwrap();
        let out = view.outlined_context([255, 255, 0]);
        let painted = out.pixels().filter(|p| p.0 == [255, 255, 0]).count();
        // a 4 x 3 block has 10 boundary pixels and 2 interior ones
        assert_eq!(painted, 10);
        let (ox, oy) = (8 - view.context_rect.x, 8 - view.context_rect.y);
        assert_eq!(out.get_pixel(ox, oy).0, [255, 255, 0]);
        assert_eq!(out.get_pixel(ox + 1, oy + 1).0, [0, 0, 0]);
    }

    #[test]
    fn unknown_patch_is_an_error() {
        let img = Image::new(10, 10);
        let map = square_map(10, 10, Rect { x: 2, y: 2, width: 3, height: 3 });
        assert!(extract_patch(&img, &map, 2, 3.0).is_err());
        assert!(extract_patch(&img, &map, 0, 0.5).is_err());
    }
}
