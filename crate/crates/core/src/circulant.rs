//! Circulant and Kronecker-separable operators on images.
//!
//! A circulant matrix `C` generated by a sequence `c` has entries
//! `C[i][j] = c[(i - j) mod n]`, so `C x` is the circular convolution `c * x`.
//! Index 0 of every generating sequence is the filter's center tap.

use std::sync::OnceLock;

use ndarray::{Array2, Axis};
use rustfft::num_complex::Complex64;

use crate::error::{invalid, DeblurError, Result};
use crate::spectral::{dft_real, idft, Fft2};

/// Tolerance on the tap sum of a normalized sequence.
pub const NORMALIZED_TOL: f64 = 1e-9;

/// Periodic filter taps defining a circulant operator, with a lazily cached
/// spectrum.
#[derive(Debug, Clone)]
pub struct GeneratingSequence {
    values: Vec<f64>,
    spectrum: OnceLock<Vec<Complex64>>,
}

impl PartialEq for GeneratingSequence {
    fn eq(&self, other: &Self) -> bool {
        self.values == other.values
    }
}

impl GeneratingSequence {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return invalid("generating sequence must have at least one tap");
        }
        if values.iter().any(|v| !v.is_finite()) {
            return invalid("generating sequence has non-finite taps");
        }
        Ok(Self { values, spectrum: OnceLock::new() })
    }

    /// Sequence of length `n` with a single unit tap at the center.
    pub fn delta(n: usize) -> Result<Self> {
        if n == 0 {
            return invalid("delta sequence of length 0");
        }
        let mut v = vec![0.0; n];
        v[0] = 1.0;
        Self::new(v)
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn sum(&self) -> f64 {
        self.values.iter().sum()
    }

    pub fn is_normalized(&self) -> bool {
        (self.sum() - 1.0).abs() <= NORMALIZED_TOL
    }

    pub fn spectrum(&self) -> &[Complex64] {
        self.spectrum.get_or_init(|| dft_real(&self.values).expect("non-empty by construction"))
    }

    /// Circular convolution `self * x`, computed spectrally.
    pub fn convolve(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.len() {
            return invalid(format!("convolve: sequence length {} vs signal length {}", self.len(), x.len()));
        }
        let xs = dft_real(x)?;
        let prod: Vec<Complex64> = xs.iter().zip(self.spectrum()).map(|(a, b)| a * b).collect();
        Ok(idft(&prod)?.into_iter().map(|c| c.re).collect())
    }

    /// Linear combination `sum_i w_i s_i` of equal-length sequences.
    pub fn combine(weights: &[f64], seqs: &[&GeneratingSequence]) -> Result<Self> {
        if weights.len() != seqs.len() || seqs.is_empty() {
            return invalid("combine: weights and sequences differ in count");
        }
        let n = seqs[0].len();
        if seqs.iter().any(|s| s.len() != n) {
            return invalid("combine: sequences differ in length");
        }
        let mut out = vec![0.0; n];
        for (w, s) in weights.iter().zip(seqs) {
            for (o, v) in out.iter_mut().zip(s.values()) {
                *o += w * v;
            }
        }
        Self::new(out)
    }
}

/// Grayscale image with finite real intensities (working range `[0, 255]`).
#[derive(Debug, Clone, PartialEq)]
pub struct Image {
    pixels: Array2<f64>,
}

impl Image {
    pub fn new(pixels: Array2<f64>) -> Result<Self> {
        if pixels.nrows() == 0 || pixels.ncols() == 0 {
            return invalid("image must have positive dimensions");
        }
        if pixels.iter().any(|v| !v.is_finite()) {
            return invalid("image has non-finite pixels");
        }
        Ok(Self { pixels })
    }

    pub fn filled(rows: usize, cols: usize, value: f64) -> Result<Self> {
        Self::new(Array2::from_elem((rows, cols), value))
    }

    pub fn from_fn(rows: usize, cols: usize, f: impl FnMut((usize, usize)) -> f64) -> Result<Self> {
        Self::new(Array2::from_shape_fn((rows, cols), f))
    }

    pub fn pixels(&self) -> &Array2<f64> {
        &self.pixels
    }

    pub fn into_pixels(self) -> Array2<f64> {
        self.pixels
    }

    pub fn rows(&self) -> usize {
        self.pixels.nrows()
    }

    pub fn cols(&self) -> usize {
        self.pixels.ncols()
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.rows(), self.cols())
    }

    pub fn mean(&self) -> f64 {
        self.pixels.mean().unwrap_or(0.0)
    }
}

/// Separable blur `H = H2 ⊗ H1`: `h_col` blurs along columns (vertical),
/// `h_row` along rows (horizontal). The image operator is `H1 X H2ᵀ`.
#[derive(Debug, Clone, PartialEq)]
pub struct SeparableBlur {
    h_col: GeneratingSequence,
    h_row: GeneratingSequence,
}

impl SeparableBlur {
    pub fn new(h_col: GeneratingSequence, h_row: GeneratingSequence) -> Result<Self> {
        if !h_col.is_normalized() || !h_row.is_normalized() {
            return invalid(format!(
                "separable blur must be normalized (sums {} and {})",
                h_col.sum(),
                h_row.sum()
            ));
        }
        Ok(Self { h_col, h_row })
    }

    pub fn identity(rows: usize, cols: usize) -> Result<Self> {
        Self::new(GeneratingSequence::delta(rows)?, GeneratingSequence::delta(cols)?)
    }

    pub fn h_col(&self) -> &GeneratingSequence {
        &self.h_col
    }

    pub fn h_row(&self) -> &GeneratingSequence {
        &self.h_row
    }

    /// 2-D point spread function in circular layout (center at `[0, 0]`).
    pub fn psf(&self) -> Array2<f64> {
        separable_psf(self)
    }

    /// PSF cropped to `(2r+1) x (2r+1)` with the center tap in the middle.
    pub fn centered_psf(&self, radius: usize) -> Array2<f64> {
        let full = self.psf();
        centered_window(&full, radius)
    }
}

/// Extract a `(2r+1)²` window centered on index `[0, 0]` of a circular array.
pub fn centered_window(full: &Array2<f64>, radius: usize) -> Array2<f64> {
    let (rows, cols) = full.dim();
    let size = 2 * radius + 1;
    // offsets that map to distinct circular positions: [-(n-1)/2, n/2]
    let fits = |d: isize, n: usize| d >= -((n as isize - 1) / 2) && d <= n as isize / 2;
    Array2::from_shape_fn((size, size), |(i, j)| {
        let di = i as isize - radius as isize;
        let dj = j as isize - radius as isize;
        if fits(di, rows) && fits(dj, cols) {
            full[[di.rem_euclid(rows as isize) as usize, dj.rem_euclid(cols as isize) as usize]]
        } else {
            0.0
        }
    })
}

/// Convolve every column of `x` circularly with `seq` (left multiply by the
/// circulant).
pub fn convolve_columns(x: &Array2<f64>, seq: &GeneratingSequence) -> Result<Array2<f64>> {
    if x.nrows() != seq.len() {
        return invalid(format!("column pass: {} rows vs sequence length {}", x.nrows(), seq.len()));
    }
    let mut out = x.clone();
    for mut col in out.axis_iter_mut(Axis(1)) {
        let v: Vec<f64> = col.iter().copied().collect();
        let conv = seq.convolve(&v)?;
        col.iter_mut().zip(conv).for_each(|(o, c)| *o = c);
    }
    Ok(out)
}

/// Convolve every row of `x` circularly with `seq` (right multiply by the
/// transposed circulant).
pub fn convolve_rows(x: &Array2<f64>, seq: &GeneratingSequence) -> Result<Array2<f64>> {
    if x.ncols() != seq.len() {
        return invalid(format!("row pass: {} cols vs sequence length {}", x.ncols(), seq.len()));
    }
    let mut out = x.clone();
    for mut row in out.axis_iter_mut(Axis(0)) {
        let v: Vec<f64> = row.iter().copied().collect();
        let conv = seq.convolve(&v)?;
        row.iter_mut().zip(conv).for_each(|(o, c)| *o = c);
    }
    Ok(out)
}

/// `H1 X H2ᵀ`: per-column pass with `h_col`, then per-row pass with `h_row`.
pub fn apply_separable_blur(x: &Image, blur: &SeparableBlur) -> Result<Image> {
    let cols_done = convolve_columns(x.pixels(), blur.h_col())?;
    Image::new(convolve_rows(&cols_done, blur.h_row())?)
}

/// Outer product `h_col · h_rowᵀ` in circular layout.
pub fn separable_psf(blur: &SeparableBlur) -> Array2<f64> {
    let a = blur.h_col().values();
    let b = blur.h_row().values();
    Array2::from_shape_fn((a.len(), b.len()), |(i, j)| a[i] * b[j])
}

/// 2-D multiplier field of a circular blur operator on a fixed image shape.
#[derive(Debug, Clone)]
pub struct BlurSpectrum {
    field: Array2<Complex64>,
}

impl BlurSpectrum {
    pub fn from_separable(blur: &SeparableBlur) -> Self {
        let a = blur.h_col().spectrum();
        let b = blur.h_row().spectrum();
        Self { field: Array2::from_shape_fn((a.len(), b.len()), |(k, l)| a[k] * b[l]) }
    }

    /// Embed a centered PSF (center at `[rows/2, cols/2]` of the array)
    /// circularly into a `rows x cols` frame.
    pub fn from_centered_psf(psf: &Array2<f64>, rows: usize, cols: usize, plan: &Fft2) -> Result<Self> {
        if plan.shape() != (rows, cols) {
            return invalid("psf embedding: plan shape mismatch");
        }
        let embedded = embed_centered(psf, rows, cols)?;
        Ok(Self { field: plan.forward(&embedded) })
    }

    pub fn field(&self) -> &Array2<Complex64> {
        &self.field
    }

    pub fn shape(&self) -> (usize, usize) {
        self.field.dim()
    }

    /// Apply the blur to `x` (shape must match).
    pub fn apply(&self, x: &Array2<f64>, plan: &Fft2) -> Result<Array2<f64>> {
        if x.dim() != self.shape() {
            return invalid("blur spectrum shape mismatch");
        }
        let mut spec = plan.forward(x);
        spec.zip_mut_with(&self.field, |s, f| *s *= f);
        Ok(plan.inverse_real(&spec))
    }
}

/// Half-sample symmetric reflection of `i` into `0..n` (`-1 → 0`, `n → n-1`).
pub fn reflect_index(i: isize, n: usize) -> usize {
    let n = n as isize;
    let m = i.rem_euclid(2 * n);
    (if m < n { m } else { 2 * n - 1 - m }) as usize
}

/// Circular placement of a centered kernel into a `rows x cols` frame.
pub fn embed_centered(psf: &Array2<f64>, rows: usize, cols: usize) -> Result<Array2<f64>> {
    let (pr, pc) = psf.dim();
    if pr > rows || pc > cols {
        return Err(DeblurError::InvalidArgument(format!(
            "psf {pr}x{pc} does not fit a {rows}x{cols} frame"
        )));
    }
    let (cr, cc) = (pr / 2, pc / 2);
    let mut out = Array2::zeros((rows, cols));
    for ((i, j), &v) in psf.indexed_iter() {
        let r = (i as isize - cr as isize).rem_euclid(rows as isize) as usize;
        let c = (j as isize - cc as isize).rem_euclid(cols as isize) as usize;
        out[[r, c]] += v;
    }
    Ok(out)
}
