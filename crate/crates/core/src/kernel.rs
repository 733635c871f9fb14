//! Kernel coefficient estimation for a fixed image.
//!
//! With `Z_{i,j} = Gᵢ X Gⱼᵀ` the fit `‖y − Z u‖²` is linear in
//! `u = vec(αβᵀ)`. The unconstrained sparse problem
//! `½‖y − Z u‖² + μ‖u‖₁` is solved by proximal gradient with backtracking,
//! and the result is projected to a rank-one matrix whose factors are
//! rescaled to unit sum.

use nalgebra::DMatrix;
use ndarray::{Array1, Array2, Zip};
use rustfft::num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::circulant::Image;
use crate::dictionary::{GaussianDictionary, KernelCoefficients};
use crate::error::{invalid, DeblurError, Result};
use crate::spectral::Fft2;

/// Columns `vec(Gᵢ X Gⱼᵀ)` of the blur design matrix, held implicitly by
/// the spectrum of `X`, together with the cached normal-equation terms.
///
/// Column `(i, j)` sits at index `i + N·j`, matching `vec(U)` for
/// `U[i][j] = αᵢβⱼ`.
#[derive(Debug, Clone)]
pub struct BlurDesignMatrix {
    n_atoms: usize,
    side: usize,
    x_hat: Array2<Complex64>,
    atom_spectra: Vec<Vec<Complex64>>,
    plan: Fft2,
    gram: Array2<f64>,
    zty: Array1<f64>,
    yty: f64,
}

impl BlurDesignMatrix {
    pub fn n_atoms(&self) -> usize {
        self.n_atoms
    }

    /// `ZᵀZ`, shape `N² x N²`.
    pub fn gram(&self) -> &Array2<f64> {
        &self.gram
    }

    /// `Zᵀy`.
    pub fn zty(&self) -> &Array1<f64> {
        &self.zty
    }

    /// `‖y‖²`.
    pub fn yty(&self) -> f64 {
        self.yty
    }

    /// Column `(i, j)` as an image `Gᵢ X Gⱼᵀ`.
    pub fn column_image(&self, i: usize, j: usize) -> Array2<f64> {
        let (a, b) = (&self.atom_spectra[i], &self.atom_spectra[j]);
        let spec = Array2::from_shape_fn(self.x_hat.dim(), |(r, c)| a[r] * b[c] * self.x_hat[[r, c]]);
        self.plan.inverse_real(&spec)
    }

    /// Column `(i, j)` vectorized column-major.
    pub fn column(&self, i: usize, j: usize) -> Array1<f64> {
        crate::dense::vec_col_major(&self.column_image(i, j))
    }

    /// `∇f(u) = ZᵀZ u − Zᵀy`.
    pub fn gradient(&self, u: &[f64]) -> Array1<f64> {
        self.gram.dot(&Array1::from(u.to_vec())) - &self.zty
    }

    /// `‖y − Z u‖²`.
    pub fn fidelity(&self, u: &[f64]) -> f64 {
        let u = Array1::from(u.to_vec());
        (u.dot(&self.gram.dot(&u)) - 2.0 * u.dot(&self.zty) + self.yty).max(0.0)
    }

    /// `f(u) = ½‖y − Z u‖²`.
    pub fn smooth_objective(&self, u: &[f64]) -> f64 {
        0.5 * self.fidelity(u)
    }

    /// `½‖y − Z u‖² + μ‖u‖₁`.
    pub fn composite_objective(&self, u: &[f64], mu_reg: f64) -> f64 {
        self.smooth_objective(u) + mu_reg * u.iter().map(|v| v.abs()).sum::<f64>()
    }

    /// Largest eigenvalue of `ZᵀZ` (Lipschitz constant of `∇f`).
    pub fn lipschitz(&self) -> f64 {
        let n = self.gram.nrows();
        let m = DMatrix::from_fn(n, n, |i, j| self.gram[[i, j]]);
        m.symmetric_eigenvalues().iter().cloned().fold(0.0, f64::max)
    }

    /// Default sparsity weight `10⁻³·‖Zᵀy‖_∞`.
    pub fn default_mu_reg(&self) -> f64 {
        1e-3 * self.zty.iter().fold(0.0f64, |m, v| m.max(v.abs()))
    }
}

/// Build the design matrix for image `x` against observation `y`.
///
/// The Gram matrix and `Zᵀy` are evaluated in the Fourier domain:
/// `⟨Z_{ij}, Z_{kl}⟩ = n⁻² Σ conj(âᵢ âⱼ) âₖ âₗ |X̂|²`.
pub fn build_design_matrix(x: &Image, y: &Image, dict: &GaussianDictionary) -> Result<BlurDesignMatrix> {
    let n = dict.len();
    if x.shape() != (n, n) || y.shape() != (n, n) {
        return invalid(format!(
            "design matrix: image {:?} / observation {:?} must be {n}x{n}",
            x.shape(),
            y.shape()
        ));
    }
    let plan = Fft2::new(n, n)?;
    let x_hat = plan.forward(x.pixels());
    let y_hat = plan.forward(y.pixels());
    let atoms: Vec<Vec<Complex64>> = dict.atoms().iter().map(|a| a.spectrum().to_vec()).collect();
    let big_n = atoms.len();
    let norm = 1.0 / (n * n) as f64;

    let power = x_hat.mapv(|c| c.norm_sqr());
    // pair products conj(a_i) a_k, indexed i + N·k
    let pairs: Vec<Vec<Complex64>> = (0..big_n * big_n)
        .map(|p| {
            let (i, k) = (p % big_n, p / big_n);
            atoms[i].iter().zip(&atoms[k]).map(|(a, b)| a.conj() * b).collect()
        })
        .collect();
    // M[(i,k)][c] = Σ_r conj(a_i[r]) a_k[r] P[r, c]
    let mixed: Vec<Vec<Complex64>> = pairs
        .iter()
        .map(|b| {
            let mut row = vec![Complex64::new(0.0, 0.0); n];
            for (r, br) in b.iter().enumerate() {
                for (c, out) in row.iter_mut().enumerate() {
                    *out += br * power[[r, c]];
                }
            }
            row
        })
        .collect();
    let dim = big_n * big_n;
    let mut gram = Array2::<f64>::zeros((dim, dim));
    for p in 0..dim {
        let (i, j) = (p % big_n, p / big_n);
        for q in p..dim {
            let (k, l) = (q % big_n, q / big_n);
            let row = &mixed[i + big_n * k];
            let col = &pairs[j + big_n * l];
            let acc: Complex64 = row.iter().zip(col).map(|(m, b)| m * b).sum();
            let v = acc.re * norm;
            gram[[p, q]] = v;
            gram[[q, p]] = v;
        }
    }

    let cross = Zip::from(&x_hat).and(&y_hat).map_collect(|x, y| x.conj() * y);
    let mut zty = Array1::<f64>::zeros(dim);
    for i in 0..big_n {
        // inner[c] = Σ_r conj(a_i[r]) Q[r, c]
        let mut inner = vec![Complex64::new(0.0, 0.0); n];
        for r in 0..n {
            let w = atoms[i][r].conj();
            for (c, out) in inner.iter_mut().enumerate() {
                *out += w * cross[[r, c]];
            }
        }
        for j in 0..big_n {
            let acc: Complex64 = inner.iter().zip(&atoms[j]).map(|(v, b)| v * b.conj()).sum();
            zty[i + big_n * j] = acc.re * norm;
        }
    }
    let yty = y.pixels().iter().map(|v| v * v).sum();
    Ok(BlurDesignMatrix { n_atoms: big_n, side: n, x_hat, atom_spectra: atoms, plan, gram, zty, yty })
}

/// Design matrix whose normal equations only count pixels at least
/// `margin` away from every block edge.
///
/// With `margin` at least the largest atom radius, every kept row of `Z`
/// is a blur of pixels inside the block, so the unblurred wrap seam of a
/// window cut from a larger image does not enter the kernel fit. The
/// kept rows are computed by direct convolution.
pub fn build_design_matrix_interior(x: &Image, y: &Image, dict: &GaussianDictionary, margin: usize) -> Result<BlurDesignMatrix> {
    if margin == 0 {
        return build_design_matrix(x, y, dict);
    }
    let n = dict.len();
    if x.shape() != (n, n) || y.shape() != (n, n) {
        return invalid(format!("design matrix: image {:?} / observation {:?} must be {n}x{n}", x.shape(), y.shape()));
    }
    if 2 * margin >= n {
        return invalid(format!("interior margin {margin} leaves nothing of a {n}x{n} block"));
    }
    let radius = dict.max_radius();
    if margin < radius {
        return invalid(format!("interior margin {margin} is below the largest atom radius {radius}"));
    }
    let big_n = dict.size();
    let inner = n - 2 * margin;
    let taps: Vec<Vec<(isize, f64)>> = dict
        .atoms()
        .iter()
        .map(|a| {
            let v = a.values();
            (-(radius as isize)..=radius as isize)
                .map(|k| (k, v[k.rem_euclid(n as isize) as usize]))
                .filter(|&(_, w)| w != 0.0)
                .collect()
        })
        .collect();
    let xp = x.pixels();
    // columns of x as contiguous rows
    let xt = xp.t().as_standard_layout().into_owned();
    let mut t = vec![0.0; n];
    // Zᵀ[i + N·j, p] for interior pixel p (column-major over the interior)
    let mut zt = Array2::<f64>::zeros((big_n * big_n, inner * inner));
    for j in 0..big_n {
        for c in 0..inner {
            // column `margin + c` of x filtered along the rows by atom j
            t.iter_mut().for_each(|v| *v = 0.0);
            for &(k, w) in &taps[j] {
                let src = xt.row((margin as isize + c as isize - k) as usize);
                t.iter_mut().zip(src.iter()).for_each(|(o, s)| *o += w * s);
            }
            for i in 0..big_n {
                let mut row = zt.row_mut(i + big_n * j);
                let out = &mut row.as_slice_mut().expect("standard layout")[inner * c..inner * (c + 1)];
                for &(k, w) in &taps[i] {
                    let start = (margin as isize - k) as usize;
                    out.iter_mut().zip(&t[start..start + inner]).for_each(|(o, s)| *o += w * s);
                }
            }
        }
    }
    let yc = Array1::from_shape_fn(inner * inner, |p| y.pixels()[[margin + p % inner, margin + p / inner]]);
    let gram = zt.dot(&zt.t());
    let zty = zt.dot(&yc);
    let plan = Fft2::new(n, n)?;
    let x_hat = plan.forward(xp);
    let atom_spectra = dict.atoms().iter().map(|a| a.spectrum().to_vec()).collect();
    Ok(BlurDesignMatrix { n_atoms: big_n, side: n, x_hat, atom_spectra, plan, gram, zty, yty: yc.dot(&yc) })
}

impl BlurDesignMatrix {
    pub fn side(&self) -> usize {
        self.side
    }
}

/// Step-size control for [`prox_grad_solve`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ProxParams {
    /// Initial trial step `μ⁰` for every iteration.
    pub step_init: f64,
    /// Smallest step tried before the line search gives up.
    pub step_floor: f64,
    /// Backtracking factor in `(0, 1)`.
    pub linesearch_beta: f64,
    pub max_steps: usize,
    /// Relative change below which the iteration stops.
    pub tol: f64,
}

impl Default for ProxParams {
    fn default() -> Self {
        Self { step_init: 5e-11, step_floor: 5e-13, linesearch_beta: 0.5, max_steps: 500, tol: 1e-12 }
    }
}

impl ProxParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.step_init > 0.0) || !(self.step_floor > 0.0) || self.step_floor > self.step_init {
            return invalid(format!(
                "step window must satisfy 0 < floor <= init (got {}, {})",
                self.step_floor, self.step_init
            ));
        }
        if !(self.linesearch_beta > 0.0 && self.linesearch_beta < 1.0) {
            return invalid(format!("linesearch beta must lie in (0, 1), got {}", self.linesearch_beta));
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct ProxSolution {
    pub u: Vec<f64>,
    pub accepted_steps: usize,
    /// Composite objective at the start and after every accepted step.
    pub objectives: Vec<f64>,
    /// Accepted step sizes.
    pub steps: Vec<f64>,
    /// The line search hit the floor after at least one accepted step.
    pub exhausted: bool,
    pub converged: bool,
}

fn soft_threshold(v: f64, t: f64) -> f64 {
    (v.abs() - t).max(0.0) * v.signum()
}

/// Proximal gradient with backtracking on `½‖y − Z u‖² + μ‖u‖₁`.
///
/// A trial `z = prox(u − μ∇f(u))` is accepted once
/// `f(z) ≤ f(u) + ∇f(u)ᵀ(z − u) + ‖z − u‖²/2μ`; otherwise `μ ← βμ`.
/// Returns [`DeblurError::StepFailure`] if not even the first step can be
/// accepted above the floor.
pub fn prox_grad_solve(design: &BlurDesignMatrix, mu_reg: f64, u0: &[f64], params: &ProxParams) -> Result<ProxSolution> {
    params.validate()?;
    let dim = design.gram.nrows();
    if u0.len() != dim {
        return invalid(format!("initial coefficient vector has length {} instead of {dim}", u0.len()));
    }
    if !(mu_reg >= 0.0) {
        return invalid(format!("mu_reg must be >= 0, got {mu_reg}"));
    }
    let mut u = Array1::from(u0.to_vec());
    let mut objectives = vec![design.composite_objective(u0, mu_reg)];
    let mut steps = Vec::new();
    let mut exhausted = false;
    let mut converged = false;

    for _ in 0..params.max_steps {
        let grad = design.gram.dot(&u) - &design.zty;
        let mut mu = params.step_init;
        let accepted = loop {
            let z: Array1<f64> = Zip::from(&u).and(&grad).map_collect(|&ui, &gi| soft_threshold(ui - mu * gi, mu * mu_reg));
            let d = &z - &u;
            let dd = d.dot(&d);
            // f(z) − f(u) − ∇f(u)ᵀd = ½ dᵀ(ZᵀZ)d, evaluated without cancellation
            let curvature = 0.5 * d.dot(&design.gram.dot(&d));
            if curvature <= dd / (2.0 * mu) {
                break Some((z, dd, mu));
            }
            mu *= params.linesearch_beta;
            if mu < params.step_floor {
                break None;
            }
        };
        match accepted {
            Some((z, dd, mu)) => {
                let scale = u.dot(&u).max(1e-300);
                u = z;
                steps.push(mu);
                objectives.push(design.composite_objective(u.as_slice().unwrap(), mu_reg));
                if dd <= params.tol * params.tol * scale {
                    converged = true;
                    break;
                }
            }
            None => {
                if steps.is_empty() {
                    return Err(DeblurError::StepFailure { floor: params.step_floor });
                }
                exhausted = true;
                break;
            }
        }
    }
    Ok(ProxSolution { u: u.to_vec(), accepted_steps: steps.len(), objectives, steps, exhausted, converged })
}

/// Leading singular triple of `U = vec⁻¹(u)` and its rank-one projection.
#[derive(Debug, Clone)]
pub struct CoeffMatrixState {
    /// `vec(σ s vᵀ)`
    pub u: Vec<f64>,
    pub matrix: Array2<f64>,
    pub sigma1: f64,
    /// Second singular value of the input (0 for `N = 1`).
    pub sigma2: f64,
    pub s: Vec<f64>,
    pub v: Vec<f64>,
}

fn square_side(len: usize) -> Result<usize> {
    let n = (len as f64).sqrt().round() as usize;
    if n == 0 || n * n != len {
        return invalid(format!("coefficient vector length {len} is not a perfect square"));
    }
    Ok(n)
}

/// `(Û + Ûᵀ)/2` for `Û = vec⁻¹(u)`.
pub fn symmetrize(u: &[f64]) -> Result<Vec<f64>> {
    let n = square_side(u.len())?;
    let mut out = vec![0.0; u.len()];
    for j in 0..n {
        for i in 0..n {
            out[i + n * j] = 0.5 * (u[i + n * j] + u[j + n * i]);
        }
    }
    Ok(out)
}

/// Best Frobenius rank-one approximation `σ s vᵀ` of `vec⁻¹(u)`.
///
/// Signs are fixed so that `Σ s > 0`, falling back to `Σ v > 0` when the
/// first sum vanishes.
pub fn rank_one_project(u: &[f64]) -> Result<CoeffMatrixState> {
    let n = square_side(u.len())?;
    if u.iter().any(|v| !v.is_finite()) {
        return invalid("coefficient vector has non-finite entries");
    }
    let m = DMatrix::from_column_slice(n, n, u);
    let svd = m.svd(true, true);
    let (lu, lvt) = (svd.u.as_ref().expect("requested"), svd.v_t.as_ref().expect("requested"));
    let sv = &svd.singular_values;
    let lead = (0..n).max_by(|&a, &b| sv[a].total_cmp(&sv[b])).expect("n >= 1");
    let sigma1 = sv[lead];
    if !(sigma1 > 0.0) {
        return Err(DeblurError::DegenerateKernel("coefficient matrix is zero".into()));
    }
    let sigma2 = (0..n).filter(|&k| k != lead).map(|k| sv[k]).fold(0.0, f64::max);
    let mut s: Vec<f64> = lu.column(lead).iter().copied().collect();
    let mut v: Vec<f64> = lvt.row(lead).iter().copied().collect();
    let (ss, vs): (f64, f64) = (s.iter().sum(), v.iter().sum());
    let tie = 1e-12;
    if ss < -tie || (ss.abs() <= tie && vs < 0.0) {
        s.iter_mut().for_each(|x| *x = -*x);
        v.iter_mut().for_each(|x| *x = -*x);
    }
    let matrix = Array2::from_shape_fn((n, n), |(i, j)| sigma1 * s[i] * v[j]);
    let u = crate::dense::vec_col_major(&matrix).to_vec();
    Ok(CoeffMatrixState { u, matrix, sigma1, sigma2, s, v })
}

/// `α = s/Σs`, `β = v/Σv`.
///
/// Normalizing the two factors independently enforces both unit-sum
/// constraints; the leftover scalar gain is dropped since the blur must
/// have unit DC gain.
pub fn normalize_coefficients(state: &CoeffMatrixState) -> Result<KernelCoefficients> {
    let norm_guard = |x: &[f64]| 1e-12 * x.iter().map(|v| v.abs()).sum::<f64>().max(1e-300);
    let (ss, vs): (f64, f64) = (state.s.iter().sum(), state.v.iter().sum());
    if ss.abs() <= norm_guard(&state.s) || vs.abs() <= norm_guard(&state.v) {
        return Err(DeblurError::DegenerateKernel(format!(
            "projected kernel has no DC component (sums {ss:e}, {vs:e})"
        )));
    }
    let alpha: Vec<f64> = state.s.iter().map(|x| x / ss).collect();
    let beta: Vec<f64> = state.v.iter().map(|x| x / vs).collect();
    KernelCoefficients::new(alpha, beta)
}

/// Settings of one kernel-coefficient update.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct KernelStepParams {
    /// Sparsity weight; `None` selects `10⁻³·‖Zᵀy‖_∞`.
    pub mu_reg: Option<f64>,
    pub prox: ProxParams,
    /// Average `Û` with its transpose before the SVD (`H₁ = H₂`).
    pub symmetric_kernel: bool,
}

impl Default for KernelStepParams {
    fn default() -> Self {
        Self { mu_reg: None, prox: ProxParams::default(), symmetric_kernel: false }
    }
}

#[derive(Debug, Clone)]
pub struct KernelStepOutcome {
    pub coefficients: KernelCoefficients,
    /// `None` when the line search failed on its first step and the
    /// previous coefficients were kept.
    pub projection: Option<CoeffMatrixState>,
    pub mu_reg: f64,
    pub accepted_steps: usize,
    pub step_failure: bool,
}

/// Build, solve, project and normalize: one full coefficient update
/// starting from `current`.
pub fn kernel_step(
    x: &Image,
    y: &Image,
    dict: &GaussianDictionary,
    current: &KernelCoefficients,
    params: &KernelStepParams,
) -> Result<KernelStepOutcome> {
    let design = build_design_matrix(x, y, dict)?;
    kernel_step_with_design(&design, current, params)
}

pub fn kernel_step_with_design(
    design: &BlurDesignMatrix,
    current: &KernelCoefficients,
    params: &KernelStepParams,
) -> Result<KernelStepOutcome> {
    if current.len() != design.n_atoms() {
        return invalid(format!("{} coefficients for {} atoms", current.len(), design.n_atoms()));
    }
    let mu_reg = params.mu_reg.unwrap_or_else(|| design.default_mu_reg());
    let solution = match prox_grad_solve(design, mu_reg, &current.vectorized(), &params.prox) {
        Ok(sol) => sol,
        Err(DeblurError::StepFailure { .. }) => {
            return Ok(KernelStepOutcome {
                coefficients: current.clone(),
                projection: None,
                mu_reg,
                accepted_steps: 0,
                step_failure: true,
            })
        }
        Err(e) => return Err(e),
    };
    let u = if params.symmetric_kernel { symmetrize(&solution.u)? } else { solution.u };
    let state = rank_one_project(&u)?;
    let coefficients = normalize_coefficients(&state)?;
    Ok(KernelStepOutcome {
        coefficients,
        projection: Some(state),
        mu_reg,
        accepted_steps: solution.accepted_steps,
        step_failure: false,
    })
}
