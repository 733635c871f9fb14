//! Deterministic test images in `[0, 255]`.

use crate::circulant::Image;
use crate::error::{invalid, Result};

pub const NAMES: [&str; 4] = ["texture", "shapes", "rings", "mosaic"];

/// Cheap integer hash for reproducible per-pixel jitter.
fn hash01(i: usize, j: usize, salt: u64) -> f64 {
    let mut h = (i as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15) ^ (j as u64).wrapping_mul(0xC2B2_AE3D_27D4_EB4F) ^ salt;
    h ^= h >> 33;
    h = h.wrapping_mul(0xFF51_AFD7_ED55_8CCD);
    h ^= h >> 33;
    (h >> 11) as f64 / (1u64 << 53) as f64
}

fn clamp(v: f64) -> f64 {
    v.clamp(0.0, 255.0)
}

/// Generate one of [`NAMES`] at `rows x cols`.
pub fn synthetic_image(name: &str, rows: usize, cols: usize) -> Result<Image> {
    if rows == 0 || cols == 0 {
        return invalid("synthetic image must be non-empty");
    }
    let (h, w) = (rows as f64, cols as f64);
    match name {
        // smooth waves over a checkerboard with fine jitter
        "texture" => Image::from_fn(rows, cols, |(i, j)| {
            let (y, x) = (i as f64, j as f64);
            let waves = 45.0 * (x / 4.0).sin() * (y / 6.0).cos() + 25.0 * ((x + y) / 9.0).sin();
            let check = if (i / 16 + j / 11) % 2 == 0 { 35.0 } else { -35.0 };
            clamp(128.0 + waves + check + 20.0 * (hash01(i, j, 1) - 0.5))
        }),
        // flat-shaded rectangles and discs
        "shapes" => Image::from_fn(rows, cols, |(i, j)| {
            let (y, x) = (i as f64 / h, j as f64 / w);
            let mut v = 40.0;
            if (0.15..0.55).contains(&x) && (0.2..0.7).contains(&y) {
                v = 200.0;
            }
            if (x - 0.7).powi(2) + (y - 0.35).powi(2) < 0.04 {
                v = 120.0;
            }
            if (x - 0.45).powi(2) + (y - 0.8).powi(2) < 0.015 {
                v = 240.0;
            }
            if (0.75..0.9).contains(&x) && (0.6..0.95).contains(&y) {
                v = 90.0;
            }
            v
        }),
        // concentric rings with rising frequency
        "rings" => Image::from_fn(rows, cols, |(i, j)| {
            let (y, x) = (i as f64 - h / 2.0, j as f64 - w / 2.0);
            let r = (x * x + y * y).sqrt();
            clamp(128.0 + 100.0 * (r * r / (3.0 * h.max(w))).cos())
        }),
        // piecewise-constant cells with random levels
        "mosaic" => Image::from_fn(rows, cols, |(i, j)| 30.0 + 200.0 * hash01(i / 12, j / 12, 7)),
        _ => invalid(format!("unknown synthetic image '{name}' (known: {})", NAMES.join(", "))),
    }
}
