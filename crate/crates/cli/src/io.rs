//! Image files: 8-bit PGM/PPM and PNG, grayscale or RGB.

use std::path::Path;

use deblur_core::{DeblurError, Image, Result};
use image::{DynamicImage, GrayImage, ImageFormat, RgbImage};
use ndarray::Array2;

/// Decoded image: one plane for grayscale, three for color.
#[derive(Debug, Clone)]
pub struct Planes {
    pub channels: Vec<Image>,
}

impl Planes {
    pub fn is_color(&self) -> bool {
        self.channels.len() == 3
    }

    /// Rec. 601 luma of a color image, or the single plane.
    pub fn luma(&self) -> Result<Image> {
        if !self.is_color() {
            return Ok(self.channels[0].clone());
        }
        let (r, g, b) = (self.channels[0].pixels(), self.channels[1].pixels(), self.channels[2].pixels());
        Image::new(r * 0.299 + g * 0.587 + b * 0.114)
    }
}

fn io_err(path: &Path, e: impl std::fmt::Display) -> DeblurError {
    DeblurError::InvalidArgument(format!("{}: {e}", path.display()))
}

pub fn read_image(path: &Path) -> Result<Planes> {
    let img = image::open(path).map_err(|e| io_err(path, e))?;
    let has_color = matches!(
        img,
        DynamicImage::ImageRgb8(_) | DynamicImage::ImageRgba8(_) | DynamicImage::ImageRgb16(_) | DynamicImage::ImageRgba16(_)
    );
    if has_color {
        let rgb = img.to_rgb8();
        let (w, h) = rgb.dimensions();
        let plane = |c: usize| Image::new(Array2::from_shape_fn((h as usize, w as usize), |(i, j)| rgb.get_pixel(j as u32, i as u32)[c] as f64));
        Ok(Planes { channels: vec![plane(0)?, plane(1)?, plane(2)?] })
    } else {
        let gray = img.to_luma8();
        let (w, h) = gray.dimensions();
        let plane = Image::new(Array2::from_shape_fn((h as usize, w as usize), |(i, j)| gray.get_pixel(j as u32, i as u32)[0] as f64))?;
        Ok(Planes { channels: vec![plane] })
    }
}

fn to_u8(v: f64) -> u8 {
    v.round().clamp(0.0, 255.0) as u8
}

/// Output format from an explicit choice or the file extension.
pub fn output_format(path: &Path, explicit: Option<&str>) -> Result<ImageFormat> {
    let name = match explicit {
        Some(f) => f.to_ascii_lowercase(),
        None => path.extension().and_then(|e| e.to_str()).unwrap_or("").to_ascii_lowercase(),
    };
    match name.as_str() {
        "png" => Ok(ImageFormat::Png),
        "pgm" | "ppm" | "pnm" => Ok(ImageFormat::Pnm),
        other => Err(DeblurError::InvalidArgument(format!("unsupported image format '{other}' (use pgm or png)"))),
    }
}

/// Write planes, clipping to `[0, 255]`.
pub fn write_image(path: &Path, planes: &Planes, format: Option<&str>) -> Result<()> {
    let fmt = output_format(path, format)?;
    let (h, w) = planes.channels[0].shape();
    let dynamic = if planes.is_color() {
        let mut out = RgbImage::new(w as u32, h as u32);
        for (x, y, px) in out.enumerate_pixels_mut() {
            for c in 0..3 {
                px[c] = to_u8(planes.channels[c].pixels()[[y as usize, x as usize]]);
            }
        }
        DynamicImage::ImageRgb8(out)
    } else {
        let p = planes.channels[0].pixels();
        DynamicImage::ImageLuma8(GrayImage::from_fn(w as u32, h as u32, |x, y| image::Luma([to_u8(p[[y as usize, x as usize]])])))
    };
    dynamic.save_with_format(path, fmt).map_err(|e| io_err(path, e))
}
