//! Image estimation for a fixed blur: anisotropic total variation with
//! variable splitting.
//!
//! The split objective is
//! `‖y − A x‖² + δ Σᵢ (‖vᵢ‖₁ + γ/2 ‖vᵢ − Dᵢ x‖²)`,
//! minimized alternately over `v` (soft thresholding) and `x` (exact
//! solve of the normal equations, diagonal in the 2-D Fourier basis).

use ndarray::{Array2, Zip};
use rustfft::num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::circulant::{BlurSpectrum, GeneratingSequence, Image};
use crate::dictionary::{synthesize_blur, GaussianDictionary, KernelCoefficients};
use crate::error::{invalid, DeblurError, Result};
use crate::spectral::Fft2;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TvParams {
    /// TV weight `δ`.
    pub delta: f64,
    /// Splitting penalty `γ`.
    pub gamma_split: f64,
    /// Shrink/x-update alternations per call.
    pub inner_iters: usize,
    /// Guard added to the spectral denominator.
    pub eps_div: f64,
}

impl Default for TvParams {
    fn default() -> Self {
        Self { delta: 1e-2, gamma_split: 1.0, inner_iters: 4, eps_div: 1e-12 }
    }
}

impl TvParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.delta >= 0.0) || !self.delta.is_finite() {
            return invalid(format!("delta must be finite and >= 0, got {}", self.delta));
        }
        if !(self.gamma_split > 0.0) || !self.gamma_split.is_finite() {
            return invalid(format!("gamma_split must be positive, got {}", self.gamma_split));
        }
        if !(self.eps_div >= 0.0) {
            return invalid(format!("eps_div must be >= 0, got {}", self.eps_div));
        }
        Ok(())
    }
}

/// Periodic forward-difference generators for the horizontal and vertical
/// directions: `-1` at the center tap and `+1` at the wrapped tap `n-1`, so
/// `(d * x)[j] = x[j+1] − x[j]`.
pub fn difference_sequences(n: usize) -> Result<(GeneratingSequence, GeneratingSequence)> {
    if n < 2 {
        return invalid(format!("difference sequence needs n >= 2, got {n}"));
    }
    let mut d = vec![0.0; n];
    d[0] = -1.0;
    d[n - 1] = 1.0;
    let seq = GeneratingSequence::new(d)?;
    Ok((seq.clone(), seq))
}

/// `D₁x`: `x[i][j+1] − x[i][j]` with wraparound.
pub fn horizontal_diff(x: &Array2<f64>) -> Array2<f64> {
    let (_, cols) = x.dim();
    Array2::from_shape_fn(x.dim(), |(i, j)| x[[i, (j + 1) % cols]] - x[[i, j]])
}

/// `D₂x`: `x[i+1][j] − x[i][j]` with wraparound.
pub fn vertical_diff(x: &Array2<f64>) -> Array2<f64> {
    let (rows, _) = x.dim();
    Array2::from_shape_fn(x.dim(), |(i, j)| x[[(i + 1) % rows, j]] - x[[i, j]])
}

/// `D₁ᵀv + D₂ᵀw`.
fn diff_adjoint_sum(v1: &Array2<f64>, v2: &Array2<f64>) -> Array2<f64> {
    let (rows, cols) = v1.dim();
    Array2::from_shape_fn(v1.dim(), |(i, j)| {
        v1[[i, (j + cols - 1) % cols]] - v1[[i, j]] + v2[[(i + rows - 1) % rows, j]] - v2[[i, j]]
    })
}

/// Scalar proximal map of `(1/γ)|·|`.
pub fn shrink_scalar(d: f64, gamma_split: f64) -> f64 {
    let t = 1.0 / gamma_split;
    (d.abs() - t).max(0.0) * d.signum()
}

/// Elementwise `max{|d| − 1/γ, 0}·sign(d)`.
pub fn shrink(d: &Array2<f64>, gamma_split: f64) -> Array2<f64> {
    d.mapv(|v| shrink_scalar(v, gamma_split))
}

/// Current iterate of the split problem for one block.
#[derive(Debug, Clone)]
pub struct SplitState {
    pub x: Image,
    pub v1: Array2<f64>,
    pub v2: Array2<f64>,
    /// Split objective at the final state.
    pub objective: f64,
    /// `‖y − A x‖²` at the final state.
    pub fidelity: f64,
    /// Split objective after every alternation.
    pub trace: Vec<f64>,
}

/// Precomputed spectral quantities for repeated x-updates against one
/// observation and one blur.
#[derive(Debug, Clone)]
pub struct TvProblem {
    y: Array2<f64>,
    plan: Fft2,
    blur: BlurSpectrum,
    y_hat: Array2<Complex64>,
    /// `conj(Â)·Ŷ`
    aty_hat: Array2<Complex64>,
    /// `|Â|²`
    a_pow: Array2<f64>,
    /// `|D̂₁|² + |D̂₂|²`
    d_pow: Array2<f64>,
    delta: f64,
    eps_div: f64,
}

impl TvProblem {
    pub fn new(y: &Image, blur: BlurSpectrum, delta: f64, eps_div: f64) -> Result<Self> {
        let (rows, cols) = y.shape();
        if blur.shape() != (rows, cols) {
            return invalid(format!("blur spectrum {:?} vs image {rows}x{cols}", blur.shape()));
        }
        if rows < 2 || cols < 2 {
            return invalid("image must be at least 2x2 for differences");
        }
        let plan = Fft2::new(rows, cols)?;
        Self::with_plan(y, blur, delta, eps_div, plan)
    }

    pub fn with_plan(y: &Image, blur: BlurSpectrum, delta: f64, eps_div: f64, plan: Fft2) -> Result<Self> {
        let (rows, cols) = y.shape();
        if plan.shape() != (rows, cols) || blur.shape() != (rows, cols) {
            return invalid("tv problem: shape mismatch between image, plan and blur");
        }
        let y_hat = plan.forward(y.pixels());
        let field = blur.field();
        let aty_hat = Zip::from(field).and(&y_hat).map_collect(|a, yv| a.conj() * yv);
        let a_pow = field.mapv(|a| a.norm_sqr());
        let (dh, _) = difference_sequences(cols)?;
        let (_, dv) = difference_sequences(rows)?;
        let (dh_spec, dv_spec) = (dh.spectrum(), dv.spectrum());
        let d_pow = Array2::from_shape_fn((rows, cols), |(k, l)| dh_spec[l].norm_sqr() + dv_spec[k].norm_sqr());
        Ok(Self { y: y.pixels().clone(), plan, blur, y_hat, aty_hat, a_pow, d_pow, delta, eps_div })
    }

    pub fn plan(&self) -> &Fft2 {
        &self.plan
    }

    pub fn observation(&self) -> &Array2<f64> {
        &self.y
    }

    pub fn blur(&self) -> &BlurSpectrum {
        &self.blur
    }

    /// Exact minimizer over `x` for fixed `v₁, v₂`. Returns `x` and its
    /// spectrum.
    ///
    /// Solves `(Σ DᵢᵀDᵢ + (2/δγ) AᵀA) x = Σ Dᵢᵀvᵢ + (2/δγ) Aᵀy`, scaled by
    /// `δγ/2` so that `δ = 0` reduces to regularized spectral division.
    pub fn x_update(&self, v1: &Array2<f64>, v2: &Array2<f64>, gamma_split: f64) -> Result<(Array2<f64>, Array2<Complex64>)> {
        if v1.dim() != self.y.dim() || v2.dim() != self.y.dim() {
            return invalid("x-update: splitting variables have the wrong shape");
        }
        let w = self.delta * gamma_split / 2.0;
        let adj_hat = if w > 0.0 { Some(self.plan.forward(&diff_adjoint_sum(v1, v2))) } else { None };
        let mut x_hat = Array2::<Complex64>::zeros(self.y.dim());
        let mut singular = false;
        Zip::indexed(&mut x_hat).for_each(|(k, l), out| {
            let den = w * self.d_pow[[k, l]] + self.a_pow[[k, l]] + self.eps_div;
            if !(den > 0.0) {
                singular = true;
                return;
            }
            let mut num = self.aty_hat[[k, l]];
            if let Some(adj) = &adj_hat {
                num += adj[[k, l]] * w;
            }
            *out = num / den;
        });
        if singular {
            return Err(DeblurError::NumericalSingularity(
                "zero spectral denominator; raise eps_div or delta".into(),
            ));
        }
        Ok((self.plan.inverse_real(&x_hat), x_hat))
    }

    /// `‖y − A x‖²` from the spectrum of `x` (Parseval).
    pub fn fidelity_from_spectrum(&self, x_hat: &Array2<Complex64>) -> f64 {
        let n = self.y.len() as f64;
        let mut acc = 0.0;
        Zip::from(&self.y_hat).and(self.blur.field()).and(x_hat).for_each(|y, a, x| {
            acc += (y - a * x).norm_sqr();
        });
        acc / n
    }

    pub fn fidelity(&self, x: &Array2<f64>) -> f64 {
        self.fidelity_from_spectrum(&self.plan.forward(x))
    }

    /// `δ Σᵢ (‖vᵢ‖₁ + γ/2 ‖vᵢ − Dᵢx‖²)`.
    pub fn split_penalty(&self, x: &Array2<f64>, v1: &Array2<f64>, v2: &Array2<f64>, gamma_split: f64) -> f64 {
        if self.delta == 0.0 {
            return 0.0;
        }
        let term = |v: &Array2<f64>, dx: &Array2<f64>| {
            let l1: f64 = v.iter().map(|a| a.abs()).sum();
            let sq: f64 = v.iter().zip(dx.iter()).map(|(a, b)| (a - b) * (a - b)).sum();
            l1 + 0.5 * gamma_split * sq
        };
        self.delta * (term(v1, &horizontal_diff(x)) + term(v2, &vertical_diff(x)))
    }

    pub fn objective(&self, x: &Array2<f64>, v1: &Array2<f64>, v2: &Array2<f64>, gamma_split: f64) -> f64 {
        self.fidelity(x) + self.split_penalty(x, v1, v2, gamma_split)
    }

    /// Run `iters` alternations of shrinkage and x-update from `x0`.
    pub fn solve(&self, x0: &Array2<f64>, gamma_split: f64, iters: usize) -> Result<SplitState> {
        if x0.dim() != self.y.dim() {
            return invalid("tv solve: initial image has the wrong shape");
        }
        let mut x = x0.clone();
        let mut v1 = shrink(&horizontal_diff(&x), gamma_split);
        let mut v2 = shrink(&vertical_diff(&x), gamma_split);
        let mut trace = Vec::with_capacity(iters);
        let mut fidelity = self.fidelity(&x);
        let mut objective = fidelity + self.split_penalty(&x, &v1, &v2, gamma_split);
        for it in 0..iters {
            if it > 0 {
                v1 = shrink(&horizontal_diff(&x), gamma_split);
                v2 = shrink(&vertical_diff(&x), gamma_split);
            }
            let (next, next_hat) = self.x_update(&v1, &v2, gamma_split)?;
            x = next;
            fidelity = self.fidelity_from_spectrum(&next_hat);
            objective = fidelity + self.split_penalty(&x, &v1, &v2, gamma_split);
            if !objective.is_finite() {
                return Err(DeblurError::Divergence(format!(
                    "split objective became {objective} at iteration {it}"
                )));
            }
            trace.push(objective);
        }
        Ok(SplitState { x: Image::new(x)?, v1, v2, objective, fidelity, trace })
    }
}

/// One exact x-update for blur coefficients over a dictionary.
pub fn x_update(
    y: &Image,
    coeffs: &KernelCoefficients,
    dict: &GaussianDictionary,
    v1: &Array2<f64>,
    v2: &Array2<f64>,
    params: &TvParams,
) -> Result<Image> {
    params.validate()?;
    let blur = BlurSpectrum::from_separable(&synthesize_blur(coeffs, dict)?);
    let problem = TvProblem::new(y, blur, params.delta, params.eps_div)?;
    Image::new(problem.x_update(v1, v2, params.gamma_split)?.0)
}

/// `inner_iters` alternations starting from `x = y`.
pub fn tv_solve(y: &Image, coeffs: &KernelCoefficients, dict: &GaussianDictionary, params: &TvParams) -> Result<SplitState> {
    params.validate()?;
    let blur = BlurSpectrum::from_separable(&synthesize_blur(coeffs, dict)?);
    let problem = TvProblem::new(y, blur, params.delta, params.eps_div)?;
    problem.solve(y.pixels(), params.gamma_split, params.inner_iters)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::circulant::SeparableBlur;
    use crate::dense::{circulant_dense, vec_col_major};
    use crate::dictionary::build_dictionary;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn constant_image_has_zero_differences() {
        let x = Array2::from_elem((5, 6), 3.0);
        assert!(horizontal_diff(&x).iter().all(|&v| v == 0.0));
        assert!(vertical_diff(&x).iter().all(|&v| v == 0.0));
    }

    #[test]
    fn step_edge_differences() {
        let x = Array2::from_shape_fn((4, 6), |(_, j)| if j >= 3 { 1.0 } else { 0.0 });
        let d = horizontal_diff(&x);
        for i in 0..4 {
            assert_eq!(d[[i, 2]], 1.0);
            assert_eq!(d[[i, 5]], -1.0); // wraparound
            for j in [0, 1, 3, 4] {
                assert_eq!(d[[i, j]], 0.0);
            }
        }
    }

    #[test]
    fn differences_match_dense_circulant() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let x = Array2::from_shape_fn((8, 8), |_| rng.random_range(0.0..1.0));
        let (dh, dv) = difference_sequences(8).unwrap();
        let ch = circulant_dense(&dh).unwrap();
        let cv = circulant_dense(&dv).unwrap();
        let h = x.dot(&ch.t());
        let v = cv.dot(&x);
        assert!(h.iter().zip(horizontal_diff(&x).iter()).all(|(a, b)| (a - b).abs() < 1e-12));
        assert!(v.iter().zip(vertical_diff(&x).iter()).all(|(a, b)| (a - b).abs() < 1e-12));
        // adjoint
        let w1 = Array2::from_shape_fn((8, 8), |_| rng.random_range(-1.0..1.0));
        let w2 = Array2::from_shape_fn((8, 8), |_| rng.random_range(-1.0..1.0));
        let expected = w1.dot(&ch) + cv.t().dot(&w2);
        let got = diff_adjoint_sum(&w1, &w2);
        assert!(vec_col_major(&expected).iter().zip(vec_col_major(&got).iter()).all(|(a, b)| (a - b).abs() < 1e-12));
    }

    #[test]
    fn shrink_examples() {
        assert!((shrink_scalar(0.5, 4.0) - 0.25).abs() < 1e-15);
        assert_eq!(shrink_scalar(0.1, 5.0), 0.0);
        assert!((shrink_scalar(-0.5, 4.0) + 0.25).abs() < 1e-15);
    }

    #[test]
    fn shrink_matches_grid_prox() {
        let mut rng = ChaCha8Rng::seed_from_u64(10);
        for _ in 0..50 {
            let d = rng.random_range(-3.0..3.0);
            let g = rng.random_range(0.5..10.0);
            let obj = |v: f64| v.abs() + 0.5 * g * (v - d) * (v - d);
            let best = (-40000..=40000).map(|k| k as f64 * 1e-4).min_by(|a, b| obj(*a).total_cmp(&obj(*b))).unwrap();
            assert!((shrink_scalar(d, g) - best).abs() <= 1e-4 + 1e-12);
        }
    }

    #[test]
    fn zero_data_gives_zero() {
        let dict = build_dictionary(&[1.0, 2.0], 24).unwrap();
        let y = Image::filled(24, 24, 0.0).unwrap();
        let z = Array2::zeros((24, 24));
        let x = x_update(&y, &KernelCoefficients::uniform(2).unwrap(), &dict, &z, &z, &TvParams::default()).unwrap();
        assert!(x.pixels().iter().all(|v| v.abs() < 1e-14));
    }

    #[test]
    fn identity_blur_fixed_point() {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let truth = Array2::from_shape_fn((8, 8), |_| rng.random_range(0.0..255.0));
        let y = Image::new(truth.clone()).unwrap();
        let blur = BlurSpectrum::from_separable(&SeparableBlur::identity(8, 8).unwrap());
        let p = TvProblem::new(&y, blur, 0.05, 0.0).unwrap();
        let (x, _) = p.x_update(&horizontal_diff(&truth), &vertical_diff(&truth), 3.0).unwrap();
        assert!(x.iter().zip(truth.iter()).all(|(a, b)| (a - b).abs() < 1e-8));
    }

    #[test]
    fn singular_denominator_reported() {
        let half = GeneratingSequence::new(vec![0.5, 0.5, 0.0, 0.0]).unwrap();
        let blur = BlurSpectrum::from_separable(&SeparableBlur::new(half.clone(), half).unwrap());
        let y = Image::filled(4, 4, 1.0).unwrap();
        let p = TvProblem::new(&y, blur, 0.0, 0.0).unwrap();
        let z = Array2::zeros((4, 4));
        assert!(matches!(p.x_update(&z, &z, 1.0), Err(DeblurError::NumericalSingularity(_))));
    }

    #[test]
    fn objective_trace_is_monotone() {
        let dict = build_dictionary(&[0.5, 1.0, 2.0], 32).unwrap();
        let coeffs = KernelCoefficients::new(vec![0.2, 0.3, 0.5], vec![0.1, 0.6, 0.3]).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        let y = Image::from_fn(32, 32, |_| rng.random_range(0.0..255.0)).unwrap();
        let params = TvParams { inner_iters: 20, gamma_split: 2.0, ..TvParams::default() };
        let state = tv_solve(&y, &coeffs, &dict, &params).unwrap();
        assert_eq!(state.trace.len(), 20);
        for w in state.trace.windows(2) {
            assert!(w[1] <= w[0] + 1e-9 * (1.0 + w[0].abs()), "{} -> {}", w[0], w[1]);
        }
        assert!(state.objective >= 0.0);
    }

    #[test]
    fn rejects_bad_params() {
        let bad = TvParams { gamma_split: 0.0, ..TvParams::default() };
        assert!(bad.validate().is_err());
        let bad = TvParams { delta: -1.0, ..TvParams::default() };
        assert!(bad.validate().is_err());
    }
}
