//! Image I/O, synthetic test images, SLIC oversegmentation and patch views.

mod lab;
mod patch;
mod slic;
mod superpixels;
mod synthetic;

use std::path::Path;

use image::{DynamicImage, ImageReader};

use crate::error::{Error, Result};

pub use lab::{rgb_to_lab, Lab};
pub use patch::{extract_patch, PatchView, Rect};
pub use slic::{slic, slic_with, SlicParams};
pub use superpixels::{PatchRecord, SuperpixelMap};
pub use synthetic::{
    class_name, class_of, color_first_tree, generate_synthetic, texture_first_tree, ColorKind, SyntheticImage,
    SyntheticSpec, TextureKind, MIN_CELL_SIZE,
};

/// 8-bit RGB raster.
pub type Image = image::RgbImage;

/// Decodes an 8-bit PNG into RGB. Gray and alpha variants are widened or
/// flattened; anything with more than 8 bits per channel is rejected.
pub fn load_image(path: impl AsRef<Path>) -> Result<Image> {
    let path = path.as_ref();
    let decode_err = |reason: String| Error::Decode {
        path: path.to_path_buf(),
        reason,
    };
    let reader = ImageReader::open(path)
        .map_err(|e| decode_err(e.to_string()))?
        .with_guessed_format()
        .map_err(|e| decode_err(e.to_string()))?;
    if reader.format() != Some(image::ImageFormat::Png) {
        return Err(decode_err("unsupported format: only PNG is accepted".into()));
    }
    let decoded = reader.decode().map_err(|e| decode_err(e.to_string()))?;
    match decoded {
        DynamicImage::ImageRgb8(img) => Ok(img),
        img @ (DynamicImage::ImageRgba8(_)
        | DynamicImage::ImageLuma8(_)
        | DynamicImage::ImageLumaA8(_)) => Ok(img.to_rgb8()),
        other => Err(decode_err(format!(
            "unsupported format: {:?} (expected 8-bit RGB, RGBA or gray)",
            other.color()
        ))),
    }
}

pub fn save_image(image: &Image, path: impl AsRef<Path>) -> Result<()> {
    image.save_with_format(path, image::ImageFormat::Png)?;
    Ok(())
}

/// PNG-encodes an image into memory.
pub fn encode_png(image: &Image) -> Result<Vec<u8>> {
    let mut buf = std::io::Cursor::new(Vec::new());
    image.write_to(&mut buf, image::ImageFormat::Png)?;
    Ok(buf.into_inner())
}

/// Writes a per-pixel class map as a 16-bit gray PNG.
pub fn save_class_map(width: u32, height: u32, classes: &[u16], path: impl AsRef<Path>) -> Result<()> {
    let img = image::ImageBuffer::<image::Luma<u16>, Vec<u16>>::from_raw(width, height, classes.to_vec())
        .ok_or_else(|| Error::arg("class map length does not match its dimensions"))?;
    img.save_with_format(path, image::ImageFormat::Png)?;
    Ok(())
}

/// Reads a per-pixel class map from an 8- or 16-bit gray PNG.
pub fn load_class_map(path: impl AsRef<Path>) -> Result<(u32, u32, Vec<u16>)> {
    let path = path.as_ref();
    let img = image::open(path).map_err(|e| Error::Decode { path: path.to_path_buf(), reason: e.to_string() })?;
    let (w, h) = (img.width(), img.height());
    let data = match img {
        DynamicImage::ImageLuma8(b) => b.into_raw().into_iter().map(u16::from).collect(),
        DynamicImage::ImageLuma16(b) => b.into_raw(),
        other => {
            return Err(Error::Decode {
                path: path.to_path_buf(),
                reason: format!("unsupported format: class maps are gray, found {:?}", other.color()),
            })
        }
    };
    Ok((w, h, data))
}
