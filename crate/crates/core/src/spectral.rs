//! Discrete Fourier transforms used by the circulant machinery.
//!
//! Forward transforms are unnormalized; inverse transforms divide by the
//! transform length so that `inverse(forward(x)) == x`.

use std::sync::Arc;

use ndarray::Array2;
use rustfft::num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use crate::error::{invalid, Result};

/// Forward 1-D DFT of a complex sequence.
pub fn dft(input: &[Complex64]) -> Result<Vec<Complex64>> {
    if input.is_empty() {
        return invalid("dft of an empty sequence");
    }
    let mut buf = input.to_vec();
    FftPlanner::new().plan_fft_forward(buf.len()).process(&mut buf);
    Ok(buf)
}

/// Forward 1-D DFT of a real sequence.
pub fn dft_real(input: &[f64]) -> Result<Vec<Complex64>> {
    let buf: Vec<Complex64> = input.iter().map(|&v| Complex64::new(v, 0.0)).collect();
    dft(&buf)
}

/// Inverse 1-D DFT, scaled by `1/n`.
pub fn idft(input: &[Complex64]) -> Result<Vec<Complex64>> {
    if input.is_empty() {
        return invalid("inverse dft of an empty sequence");
    }
    let mut buf = input.to_vec();
    FftPlanner::new().plan_fft_inverse(buf.len()).process(&mut buf);
    let scale = 1.0 / buf.len() as f64;
    buf.iter_mut().for_each(|c| *c *= scale);
    Ok(buf)
}

/// Planned 2-D transform for a fixed `rows x cols` shape.
///
/// Index `[k, l]` of a spectrum holds vertical frequency `k` and horizontal
/// frequency `l`.
#[derive(Clone)]
pub struct Fft2 {
    rows: usize,
    cols: usize,
    row_fwd: Arc<dyn Fft<f64>>,
    row_inv: Arc<dyn Fft<f64>>,
    col_fwd: Arc<dyn Fft<f64>>,
    col_inv: Arc<dyn Fft<f64>>,
}

impl std::fmt::Debug for Fft2 {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Fft2").field("rows", &self.rows).field("cols", &self.cols).finish()
    }
}

impl Fft2 {
    pub fn new(rows: usize, cols: usize) -> Result<Self> {
        if rows == 0 || cols == 0 {
            return invalid(format!("2-D transform of empty shape {rows}x{cols}"));
        }
        let mut planner = FftPlanner::new();
        Ok(Self {
            rows,
            cols,
            row_fwd: planner.plan_fft_forward(cols),
            row_inv: planner.plan_fft_inverse(cols),
            col_fwd: planner.plan_fft_forward(rows),
            col_inv: planner.plan_fft_inverse(rows),
        })
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    pub fn forward(&self, image: &Array2<f64>) -> Array2<Complex64> {
        let buf: Vec<Complex64> = image.iter().map(|&v| Complex64::new(v, 0.0)).collect();
        self.transform(buf, false)
    }

    pub fn forward_complex(&self, field: &Array2<Complex64>) -> Array2<Complex64> {
        self.transform(field.iter().copied().collect(), false)
    }

    /// Inverse transform keeping only the real part.
    pub fn inverse_real(&self, spectrum: &Array2<Complex64>) -> Array2<f64> {
        self.inverse(spectrum).mapv(|c| c.re)
    }

    pub fn inverse(&self, spectrum: &Array2<Complex64>) -> Array2<Complex64> {
        let mut out = self.transform(spectrum.iter().copied().collect(), true);
        let scale = 1.0 / (self.rows * self.cols) as f64;
        out.mapv_inplace(|c| c * scale);
        out
    }

    fn transform(&self, mut buf: Vec<Complex64>, inverse: bool) -> Array2<Complex64> {
        assert_eq!(buf.len(), self.rows * self.cols, "shape mismatch in Fft2");
        let (row_fft, col_fft) = if inverse {
            (&self.row_inv, &self.col_inv)
        } else {
            (&self.row_fwd, &self.col_fwd)
        };
        row_fft.process(&mut buf);
        let mut cols = transpose(&buf, self.rows, self.cols);
        col_fft.process(&mut cols);
        let out = transpose(&cols, self.cols, self.rows);
        Array2::from_shape_vec((self.rows, self.cols), out).expect("buffer sized to shape")
    }
}

fn transpose(buf: &[Complex64], rows: usize, cols: usize) -> Vec<Complex64> {
    let mut out = vec![Complex64::new(0.0, 0.0); buf.len()];
    for r in 0..rows {
        for c in 0..cols {
            out[c * rows + r] = buf[r * cols + c];
        }
    }
    out
}
