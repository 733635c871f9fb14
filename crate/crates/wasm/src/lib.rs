//! wasm-bindgen surface for the browser demo in `www/`.
//!
//! Images cross the boundary as row-major `f64` buffers in `[0, 255]`.

use deblur_core::bench::{blur_symmetric, make_kernel, synthetic_image, KernelSpec};
use deblur_core::dictionary::KernelCoefficients;
use deblur_core::pipeline::{coefficients_psf, restore_image};
use deblur_core::{DeblurError, Image, RestorationConfig};
use ndarray::Array2;
use wasm_bindgen::prelude::*;

/// Row-major image or PSF handed back to JavaScript.
#[wasm_bindgen]
#[derive(Debug, Clone)]
pub struct Grid {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

#[wasm_bindgen]
impl Grid {
    #[wasm_bindgen(getter)]
    pub fn rows(&self) -> usize {
        self.rows
    }

    #[wasm_bindgen(getter)]
    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn data(&self) -> Vec<f64> {
        self.data.clone()
    }
}

impl From<&Array2<f64>> for Grid {
    fn from(a: &Array2<f64>) -> Self {
        let (rows, cols) = a.dim();
        Self { rows, cols, data: a.iter().copied().collect() }
    }
}

/// Result of a blind restoration: image, PSF and the consensus coefficients.
#[wasm_bindgen]
#[derive(Debug, Clone)]
pub struct Restoration {
    image: Grid,
    psf: Grid,
    alpha: Vec<f64>,
    beta: Vec<f64>,
}

#[wasm_bindgen]
impl Restoration {
    pub fn image(&self) -> Grid {
        self.image.clone()
    }

    pub fn psf(&self) -> Grid {
        self.psf.clone()
    }

    pub fn alpha(&self) -> Vec<f64> {
        self.alpha.clone()
    }

    pub fn beta(&self) -> Vec<f64> {
        self.beta.clone()
    }
}

fn js_err(e: DeblurError) -> JsError {
    JsError::new(&e.to_string())
}

fn to_image(data: &[f64], rows: usize, cols: usize) -> Result<Image, DeblurError> {
    let a = Array2::from_shape_vec((rows, cols), data.to_vec())
        .map_err(|e| DeblurError::InvalidArgument(format!("buffer does not match {rows}x{cols}: {e}")))?;
    Image::new(a)
}

fn demo_config(max_iters: usize, delta: f64) -> RestorationConfig {
    RestorationConfig { max_iters, delta, ..RestorationConfig::default() }
}

pub fn synthetic_grid(name: &str, size: usize) -> Result<Grid, DeblurError> {
    Ok(Grid::from(synthetic_image(name, size, size)?.pixels()))
}

pub fn kernel_grid(spec: &str) -> Result<Grid, DeblurError> {
    Ok(Grid::from(&make_kernel(&KernelSpec::parse(spec)?)?))
}

pub fn blur_grid(data: &[f64], rows: usize, cols: usize, spec: &str) -> Result<Grid, DeblurError> {
    let psf = make_kernel(&KernelSpec::parse(spec)?)?;
    Ok(Grid::from(blur_symmetric(&to_image(data, rows, cols)?, &psf)?.pixels()))
}

pub fn coefficient_psf_grid(alpha: &[f64], beta: &[f64]) -> Result<Grid, DeblurError> {
    let cfg = RestorationConfig::default();
    let dict = cfg.dictionary(cfg.pad_block)?;
    let coeffs = KernelCoefficients::new(alpha.to_vec(), beta.to_vec())?;
    Ok(Grid::from(&coefficients_psf(&coeffs, &dict)?))
}

pub fn restore_grid(data: &[f64], rows: usize, cols: usize, max_iters: usize, delta: f64) -> Result<Restoration, DeblurError> {
    let result = restore_image(&to_image(data, rows, cols)?, &demo_config(max_iters, delta))?;
    Ok(Restoration {
        image: Grid::from(result.image.pixels()),
        psf: Grid::from(&result.psf),
        alpha: result.coefficients.alpha.clone(),
        beta: result.coefficients.beta.clone(),
    })
}

/// Built-in test image (`texture`, `shapes`, `rings`, `mosaic`).
#[wasm_bindgen(js_name = syntheticImage)]
pub fn synthetic_image_js(name: &str, size: usize) -> Result<Grid, JsError> {
    synthetic_grid(name, size).map_err(js_err)
}

/// Blur with a named kernel such as `kernel3` or `gaussian:2`.
#[wasm_bindgen]
pub fn blur(data: &[f64], rows: usize, cols: usize, spec: &str) -> Result<Grid, JsError> {
    blur_grid(data, rows, cols, spec).map_err(js_err)
}

/// PSF for a named kernel.
#[wasm_bindgen]
pub fn kernel(spec: &str) -> Result<Grid, JsError> {
    kernel_grid(spec).map_err(js_err)
}

/// PSF synthesized from dictionary coefficients on the default σ grid.
#[wasm_bindgen(js_name = coefficientPsf)]
pub fn coefficient_psf(alpha: &[f64], beta: &[f64]) -> Result<Grid, JsError> {
    coefficient_psf_grid(alpha, beta).map_err(js_err)
}

/// Blind restoration of a grayscale image.
#[wasm_bindgen]
pub fn restore(data: &[f64], rows: usize, cols: usize, max_iters: usize, delta: f64) -> Result<Restoration, JsError> {
    restore_grid(data, rows, cols, max_iters, delta).map_err(js_err)
}

/// Default σ grid of the dictionary.
#[wasm_bindgen(js_name = defaultSigmas)]
pub fn default_sigmas() -> Vec<f64> {
    RestorationConfig::default().sigmas
}
