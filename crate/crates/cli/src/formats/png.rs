//! 8-bit PNG images and class-index masks.

use std::path::Path;

use image::{DynamicImage, GrayImage, ImageBuffer, Luma, Rgb, RgbImage};
use tanhpolar::{LabelMask, Tensor};

use crate::error::{CliError, Result};

fn open(path: &Path) -> Result<DynamicImage> {
    let bytes = std::fs::read(path).map_err(|e| CliError::io(path, e))?;
    image::load_from_memory_with_format(&bytes, image::ImageFormat::Png)
        .map_err(|e| CliError::decode(path, e.to_string()))
}

/// Reads a PNG as a `(1, C, H, W)` tensor scaled to `[0, 1]`. Grayscale
/// inputs give one channel, everything else three; alpha is dropped.
pub fn read_image(path: &Path) -> Result<Tensor> {
    let img = open(path)?;
    let (w, h) = (img.width() as usize, img.height() as usize);
    if img.color().has_color() {
        let rgb = img.to_rgb8();
        Ok(Tensor::from_fn([1, 3, h, w], |_, c, y, x| {
            f32::from(rgb.get_pixel(x as u32, y as u32)[c]) / 255.0
        }))
    } else {
        let g = img.to_luma8();
        Ok(Tensor::from_fn([1, 1, h, w], |_, _, y, x| {
            f32::from(g.get_pixel(x as u32, y as u32)[0]) / 255.0
        }))
    }
}

pub fn quantize(v: f32) -> u8 {
    (v.clamp(0.0, 1.0) * 255.0).round() as u8
}

/// Writes a one- or three-channel single-batch tensor as 8-bit PNG,
/// clamping to `[0, 1]`.
pub fn write_image(path: &Path, t: &Tensor) -> Result<()> {
    let [bn, cn, h, w] = t.shape();
    if bn != 1 || !(cn == 1 || cn == 3) {
        return Err(CliError::Shape(format!(
            "PNG output needs shape (1, 1|3, H, W), got {:?}",
            t.shape()
        )));
    }
    let (w32, h32) = (w as u32, h as u32);
    let result = if cn == 1 {
        let buf: GrayImage = ImageBuffer::from_fn(w32, h32, |x, y| {
            Luma([quantize(t.get(0, 0, y as usize, x as usize))])
        });
        buf.save_with_format(path, image::ImageFormat::Png)
    } else {
        let buf: RgbImage = ImageBuffer::from_fn(w32, h32, |x, y| {
            let px = |c| quantize(t.get(0, c, y as usize, x as usize));
            Rgb([px(0), px(1), px(2)])
        });
        buf.save_with_format(path, image::ImageFormat::Png)
    };
    result.map_err(|e| CliError::decode(path, e.to_string()))
}

/// Reads a single-channel PNG whose pixel values are class indices.
pub fn read_mask(path: &Path, classes: usize) -> Result<LabelMask> {
    let img = open(path)?;
    if img.color() != image::ColorType::L8 {
        return Err(CliError::decode(
            path,
            format!("masks must be 8-bit grayscale PNG, got {:?}", img.color()),
        ));
    }
    let g = img.into_luma8();
    let (w, h) = (g.width() as usize, g.height() as usize);
    let labels = g.into_raw();
    if let Some(&bad) = labels.iter().find(|&&l| usize::from(l) >= classes) {
        return Err(CliError::Shape(format!(
            "{}: pixel value {bad} is not a class index below {classes}",
            path.display()
        )));
    }
    Ok(LabelMask::new(h, w, classes, labels)?)
}

pub fn write_mask(path: &Path, mask: &LabelMask) -> Result<()> {
    let buf: GrayImage = ImageBuffer::from_raw(
        mask.width() as u32,
        mask.height() as u32,
        mask.labels().to_vec(),
    )
    .expect("mask buffer matches its dimensions");
    buf.save_with_format(path, image::ImageFormat::Png)
        .map_err(|e| CliError::decode(path, e.to_string()))
}

/// Class index to display color.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Palette(pub Vec<[u8; 3]>);

impl Palette {
    /// Colors for background, skin, l/r brow, l/r eye, nose, upper/lower
    /// lip, inner mouth, hair.
    pub fn face11() -> Self {
        Self(vec![
            [0, 0, 0],
            [255, 204, 153],
            [153, 76, 0],
            [204, 102, 0],
            [0, 102, 255],
            [0, 153, 255],
            [255, 153, 204],
            [204, 0, 51],
            [255, 51, 102],
            [102, 0, 51],
            [76, 51, 25],
        ])
    }

    /// `i:r,g,b` entries separated by `;`. Unlisted indices fall back to
    /// the default palette, then to gray.
    pub fn parse(spec: &str) -> std::result::Result<Self, String> {
        let mut colors = Self::face11().0;
        for entry in spec.split(';').map(str::trim).filter(|e| !e.is_empty()) {
            let (idx, rgb) = entry
                .split_once(':')
                .ok_or_else(|| format!("palette entry {entry:?} is not i:r,g,b"))?;
            let idx: usize = idx.trim().parse().map_err(|_| format!("bad palette index {idx:?}"))?;
            let parts: Vec<u8> = rgb
                .split(',')
                .map(|p| p.trim().parse::<u8>().map_err(|_| format!("bad color component {p:?}")))
                .collect::<std::result::Result<_, _>>()?;
            let [r, g, b] = parts[..] else {
                return Err(format!("palette entry {entry:?} needs three components"));
            };
            if idx >= 256 {
                return Err(format!("palette index {idx} above 255"));
            }
            if colors.len() <= idx {
                colors.resize(idx + 1, [128, 128, 128]);
            }
            colors[idx] = [r, g, b];
        }
        Ok(Self(colors))
    }

    pub fn color(&self, class: u8) -> [u8; 3] {
        self.0.get(usize::from(class)).copied().unwrap_or([128, 128, 128])
    }
}

/// Writes a mask as an RGB PNG using `palette`.
pub fn write_overlay(path: &Path, mask: &LabelMask, palette: &Palette) -> Result<()> {
    let buf: RgbImage = ImageBuffer::from_fn(mask.width() as u32, mask.height() as u32, |x, y| {
        Rgb(palette.color(mask.get(y as usize, x as usize)))
    });
    buf.save_with_format(path, image::ImageFormat::Png)
        .map_err(|e| CliError::decode(path, e.to_string()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn palette_parsing() {
        let p = Palette::parse("1: 10,20,30; 12:1,2,3").unwrap();
        assert_eq!(p.color(1), [10, 20, 30]);
        assert_eq!(p.color(0), [0, 0, 0]);
        assert_eq!(p.color(11), [128, 128, 128]);
        assert_eq!(p.color(12), [1, 2, 3]);
        assert!(Palette::parse("1:10,20").is_err());
        assert!(Palette::parse("x:1,2,3").is_err());
        assert!(Palette::parse("1:1,2,300").is_err());
    }

    #[test]
    fn quantize_clamps_and_rounds() {
        assert_eq!(quantize(-0.2), 0);
        assert_eq!(quantize(2.0), 255);
        assert_eq!(quantize(0.5), 128);
        assert_eq!(quantize(100.0 / 255.0), 100);
    }
}
