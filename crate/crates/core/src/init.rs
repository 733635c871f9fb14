//! Initial kernel coefficients from the blurred image.
//!
//! Per axis, the Gaussian width is estimated by reblurring: an edge blurred
//! by `σ` and reblurred by `c` loses gradient magnitude by the factor
//! `√(σ² + c²)/σ`, which equals `√2` exactly when `c = σ`. Each estimated
//! 1-D Gaussian is then expanded over the dictionary by basis pursuit
//! denoising.

use nalgebra::{DMatrix, DVector};
use ndarray::{Array1, Array2, Axis};
use serde::{Deserialize, Serialize};

use crate::circulant::{reflect_index, GeneratingSequence, Image};
use crate::dictionary::{gaussian_radius, gaussian_sequence, GaussianDictionary, KernelCoefficients};
use crate::error::{invalid, DeblurError, Result};

/// Spacing of the candidate grid searched by [`estimate_sigmas`].
pub const SIGMA_STEP: f64 = 0.05;
/// Default relative BPDN error bound, `τ = 0.05·‖target‖₂`.
pub const DEFAULT_TAU_REL: f64 = 0.05;
/// Coefficients below this magnitude are outside the support.
pub const SUPPORT_TOL: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SigmaEstimate {
    /// Blur width along rows (horizontal direction).
    pub sigma_h: f64,
    /// Blur width along columns (vertical direction).
    pub sigma_v: f64,
    pub candidates: Vec<f64>,
    /// `|median ratio − √2|` per candidate, horizontal axis.
    pub residuals_h: Vec<f64>,
    pub residuals_v: Vec<f64>,
    pub edges_h: usize,
    pub edges_v: usize,
}

fn gaussian_taps(sigma: f64) -> Vec<f64> {
    let r = gaussian_radius(sigma) as i64;
    let mut taps: Vec<f64> = (-r..=r).map(|d| (-((d * d) as f64) / (2.0 * sigma * sigma)).exp()).collect();
    let total: f64 = taps.iter().sum();
    taps.iter_mut().for_each(|t| *t /= total);
    taps
}

/// Value at `pos` of a 1-D line convolved with centered `taps` under
/// symmetric boundary extension.
fn reblur_at(line: &[f64], taps: &[f64], pos: i64) -> f64 {
    let r = (taps.len() / 2) as i64;
    taps.iter().enumerate().map(|(k, w)| w * line[reflect_index((pos + k as i64 - r) as isize, line.len())]).sum()
}

/// Central-difference gradients `(∂/∂col, ∂/∂row)` on interior pixels; zero on
/// the one-pixel border.
fn gradients(x: &Array2<f64>) -> (Array2<f64>, Array2<f64>) {
    let (rows, cols) = x.dim();
    let mut gh = Array2::zeros((rows, cols));
    let mut gv = Array2::zeros((rows, cols));
    for i in 1..rows.saturating_sub(1) {
        for j in 1..cols.saturating_sub(1) {
            gh[[i, j]] = 0.5 * (x[[i, j + 1]] - x[[i, j - 1]]);
            gv[[i, j]] = 0.5 * (x[[i + 1, j]] - x[[i - 1, j]]);
        }
    }
    (gh, gv)
}

/// Edge pixels for the axis whose gradient is `along`: local maxima of
/// `|along|` in that direction, at least half the global maximum, and
/// dominating the cross gradient by a factor of two.
fn edge_pixels(along: &Array2<f64>, across: &Array2<f64>, axis: Axis) -> Vec<(usize, usize)> {
    let (rows, cols) = along.dim();
    let peak = along.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    if !(peak > 0.0) {
        return Vec::new();
    }
    let mut out = Vec::new();
    for i in 1..rows.saturating_sub(1) {
        for j in 1..cols.saturating_sub(1) {
            let g = along[[i, j]].abs();
            if g < 0.5 * peak || g < 2.0 * across[[i, j]].abs() {
                continue;
            }
            let (prev, next) = match axis {
                Axis(0) => (along[[i - 1, j]].abs(), along[[i + 1, j]].abs()),
                _ => (along[[i, j - 1]].abs(), along[[i, j + 1]].abs()),
            };
            if g >= prev && g >= next {
                out.push((i, j));
            }
        }
    }
    out
}

fn median(values: &mut [f64]) -> f64 {
    values.sort_by(f64::total_cmp);
    let n = values.len();
    if n % 2 == 1 {
        values[n / 2]
    } else {
        0.5 * (values[n / 2 - 1] + values[n / 2])
    }
}

/// Score every candidate width on one axis; `Axis(1)` is horizontal.
fn axis_scores(x: &Array2<f64>, grad: &Array2<f64>, edges: &[(usize, usize)], axis: Axis, candidates: &[f64]) -> Vec<f64> {
    let lines: Vec<Vec<f64>> = match axis {
        Axis(0) => x.columns().into_iter().map(|c| c.to_vec()).collect(),
        _ => x.rows().into_iter().map(|r| r.to_vec()).collect(),
    };
    candidates
        .iter()
        .map(|&c| {
            let taps = gaussian_taps(c);
            let mut ratios: Vec<f64> = edges
                .iter()
                .filter_map(|&(i, j)| {
                    let (line, pos) = match axis {
                        Axis(0) => (&lines[j], i as i64),
                        _ => (&lines[i], j as i64),
                    };
                    let g = 0.5 * (reblur_at(line, &taps, pos + 1) - reblur_at(line, &taps, pos - 1));
                    (g.abs() > 0.0).then(|| grad[[i, j]].abs() / g.abs())
                })
                .collect();
            if ratios.is_empty() {
                f64::INFINITY
            } else {
                (median(&mut ratios) - std::f64::consts::SQRT_2).abs()
            }
        })
        .collect()
}

fn argmin(scores: &[f64]) -> usize {
    let mut best = 0;
    for (k, s) in scores.iter().enumerate() {
        if *s < scores[best] {
            best = k;
        }
    }
    best
}

/// Reblur estimate of the horizontal and vertical Gaussian blur widths.
///
/// Candidates run from half the smallest to 1.5 times the largest
/// dictionary width in steps of [`SIGMA_STEP`]. When only one axis has
/// usable edges its estimate is used for both.
pub fn estimate_sigmas(y: &Image, dict: &GaussianDictionary) -> Result<SigmaEstimate> {
    let sig = dict.sigmas();
    let (lo, hi) = (sig[0] / 2.0, sig[sig.len() - 1] * 1.5);
    let count = ((hi - lo) / SIGMA_STEP + 1e-9).floor() as usize + 1;
    let candidates: Vec<f64> = (0..count).map(|k| lo + SIGMA_STEP * k as f64).collect();

    let x = y.pixels();
    let (gh, gv) = gradients(x);
    let edges_h = edge_pixels(&gh, &gv, Axis(1));
    let edges_v = edge_pixels(&gv, &gh, Axis(0));
    if edges_h.is_empty() && edges_v.is_empty() {
        return Err(DeblurError::NoEdges);
    }
    let residuals_h = if edges_h.is_empty() { Vec::new() } else { axis_scores(x, &gh, &edges_h, Axis(1), &candidates) };
    let residuals_v = if edges_v.is_empty() { Vec::new() } else { axis_scores(x, &gv, &edges_v, Axis(0), &candidates) };
    let pick = |r: &[f64]| (!r.is_empty() && r.iter().any(|v| v.is_finite())).then(|| candidates[argmin(r)]);
    let (sigma_h, sigma_v) = match (pick(&residuals_h), pick(&residuals_v)) {
        (Some(h), Some(v)) => (h, v),
        (Some(h), None) => (h, h),
        (None, Some(v)) => (v, v),
        (None, None) => return Err(DeblurError::NoEdges),
    };
    Ok(SigmaEstimate { sigma_h, sigma_v, candidates, residuals_h, residuals_v, edges_h: edges_h.len(), edges_v: edges_v.len() })
}

/// Piecewise-linear lasso solution path of `½‖t − A c‖² + λ‖c‖₁`.
#[derive(Debug, Clone)]
pub struct LassoPath {
    /// Breakpoints in order of decreasing `λ`.
    pub lambdas: Vec<f64>,
    pub coefficients: Vec<Array1<f64>>,
}

impl LassoPath {
    /// Largest `λ` on the path; the solution is zero from here up.
    pub fn lambda_max(&self) -> f64 {
        self.lambdas[0]
    }

    /// Solution at `λ`, interpolated between breakpoints.
    pub fn at(&self, lambda: f64) -> Array1<f64> {
        if lambda >= self.lambdas[0] {
            return self.coefficients[0].clone();
        }
        for k in 1..self.lambdas.len() {
            let (l0, l1) = (self.lambdas[k - 1], self.lambdas[k]);
            if lambda >= l1 {
                let w = if l0 > l1 { (l0 - lambda) / (l0 - l1) } else { 1.0 };
                return &self.coefficients[k - 1] * (1.0 - w) + &self.coefficients[k] * w;
            }
        }
        self.coefficients.last().expect("non-empty path").clone()
    }
}

/// Homotopy (LARS with lasso drops) over the full `λ` range.
pub fn lasso_path(a: &Array2<f64>, t: &Array1<f64>) -> Result<LassoPath> {
    let (m, p) = a.dim();
    if t.len() != m || p == 0 {
        return invalid(format!("lasso: matrix {m}x{p} against vector of length {}", t.len()));
    }
    let gram = a.t().dot(a);
    let corr0 = a.t().dot(t);
    let lambda0 = corr0.iter().fold(0.0f64, |mx, v| mx.max(v.abs()));
    let mut c = Array1::<f64>::zeros(p);
    let mut lambdas = vec![lambda0];
    let mut coefficients = vec![c.clone()];
    if lambda0 == 0.0 {
        return Ok(LassoPath { lambdas, coefficients });
    }
    let tiny = 1e-12 * lambda0;
    let first = (0..p).max_by(|&i, &j| corr0[i].abs().total_cmp(&corr0[j].abs())).expect("p >= 1");
    let mut active = vec![first];
    let mut signs = vec![corr0[first].signum()];
    let mut lambda = lambda0;
    let mut just_dropped: Option<usize> = None;

    for _ in 0..(20 * p + 20) {
        let k = active.len();
        let g_aa = DMatrix::from_fn(k, k, |r, s| gram[[active[r], active[s]]]);
        let s_a = DVector::from_column_slice(&signs);
        let Some(d_a) = g_aa.cholesky().map(|ch| ch.solve(&s_a)) else { break };
        let corr = &corr0 - &gram.dot(&c);
        let mut step = lambda;
        let mut event: Option<(usize, bool)> = None; // (index, joins)
        for j in 0..p {
            if active.contains(&j) {
                continue;
            }
            let v: f64 = active.iter().zip(d_a.iter()).map(|(&a_idx, d)| gram[[j, a_idx]] * d).sum();
            for cand in [(lambda - corr[j]) / (1.0 - v), (lambda + corr[j]) / (1.0 + v)] {
                let fresh = just_dropped != Some(j) || cand > 1e-9 * lambda0;
                if cand.is_finite() && cand > tiny && cand < step && fresh {
                    step = cand;
                    event = Some((j, true));
                }
            }
        }
        for (r, &a_idx) in active.iter().enumerate() {
            let cand = -c[a_idx] / d_a[r];
            if cand.is_finite() && cand > tiny && cand < step {
                step = cand;
                event = Some((a_idx, false));
            }
        }
        for (r, &a_idx) in active.iter().enumerate() {
            c[a_idx] += step * d_a[r];
        }
        lambda -= step;
        just_dropped = None;
        match event {
            Some((j, true)) => {
                let cj = corr0[j] - gram.row(j).dot(&c);
                active.push(j);
                signs.push(cj.signum());
            }
            Some((j, false)) => {
                c[j] = 0.0;
                let r = active.iter().position(|&v| v == j).expect("active");
                active.remove(r);
                signs.remove(r);
                just_dropped = Some(j);
            }
            None => lambda = 0.0,
        }
        lambdas.push(lambda.max(0.0));
        coefficients.push(c.clone());
        if lambda <= 0.0 || active.is_empty() || active.len() > m {
            break;
        }
    }
    Ok(LassoPath { lambdas, coefficients })
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BpdnSolution {
    pub coefficients: Vec<f64>,
    /// Indices with `|cᵢ| > 10⁻⁸`.
    pub support: Vec<usize>,
    pub residual: f64,
    pub lambda: f64,
    /// `false` when even the path end misses the error bound; the
    /// coefficients are then the smallest-residual point found.
    pub feasible: bool,
}

fn residual_norm(a: &Array2<f64>, t: &Array1<f64>, c: &Array1<f64>) -> f64 {
    (t - &a.dot(c)).iter().map(|v| v * v).sum::<f64>().sqrt()
}

/// `min ‖c‖₁` subject to `‖t − A c‖₂ ≤ τ`, through the Lagrangian form with
/// `λ` bisected on the exact lasso path until the bound is active.
pub fn bpdn(a: &Array2<f64>, t: &Array1<f64>, tau: f64) -> Result<BpdnSolution> {
    if !(tau >= 0.0) {
        return invalid(format!("tau must be >= 0, got {tau}"));
    }
    let path = lasso_path(a, t)?;
    let finish = |c: Array1<f64>, lambda: f64, feasible: bool| {
        let residual = residual_norm(a, t, &c);
        let support = (0..c.len()).filter(|&i| c[i].abs() > SUPPORT_TOL).collect();
        BpdnSolution { coefficients: c.to_vec(), support, residual, lambda, feasible }
    };
    let t_norm = t.iter().map(|v| v * v).sum::<f64>().sqrt();
    if t_norm <= tau {
        return Ok(finish(Array1::zeros(a.ncols()), path.lambda_max(), true));
    }
    let lambda_end = *path.lambdas.last().expect("non-empty");
    let end = path.at(lambda_end);
    if residual_norm(a, t, &end) > tau {
        return Ok(finish(end, lambda_end, false));
    }
    let (mut lo, mut hi) = (lambda_end, path.lambda_max());
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        let r = residual_norm(a, t, &path.at(mid));
        if r <= tau {
            lo = mid;
            if r >= (1.0 - 1e-10) * tau {
                break;
            }
        } else {
            hi = mid;
        }
        if hi - lo <= 1e-16 * hi {
            break;
        }
    }
    Ok(finish(path.at(lo), lo, true))
}

/// Expand `target` over the dictionary atoms by BPDN.
///
/// The atoms are scaled to unit ℓ₂ norm for the fit and the coefficients
/// mapped back, so the penalty is `Σ ‖atomᵢ‖₂·|cᵢ|`. Without this the broad
/// atoms, which have small ℓ₂ norm at unit sum, are penalized far less than
/// narrow ones and an on-grid target is not reproduced by its own atom.
pub fn bpdn_fit(target: &GeneratingSequence, dict: &GaussianDictionary, tau: f64) -> Result<BpdnSolution> {
    if target.len() != dict.len() {
        return invalid(format!("target length {} does not match dictionary length {}", target.len(), dict.len()));
    }
    let norms: Vec<f64> = dict.atoms().iter().map(|a| a.values().iter().map(|v| v * v).sum::<f64>().sqrt()).collect();
    let a = Array2::from_shape_fn((dict.len(), dict.size()), |(r, k)| dict.atom(k).values()[r] / norms[k]);
    let t = Array1::from(target.values().to_vec());
    let mut sol = bpdn(&a, &t, tau)?;
    for (c, n) in sol.coefficients.iter_mut().zip(&norms) {
        *c /= n;
    }
    Ok(sol)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct InitialGuess {
    pub coefficients: KernelCoefficients,
    pub estimate: Option<SigmaEstimate>,
    /// The estimator failed and the smallest-width atom was used.
    pub fallback: bool,
    pub feasible: bool,
}

fn nearest_atom(dict: &GaussianDictionary, sigma: f64) -> usize {
    let s = dict.sigmas();
    (0..s.len()).min_by(|&i, &j| (s[i] - sigma).abs().total_cmp(&(s[j] - sigma).abs())).expect("non-empty")
}

/// Unit-sum coefficients approximating `G(σ)` over the dictionary.
pub fn coefficients_for_sigma(sigma: f64, dict: &GaussianDictionary, tau_rel: f64) -> Result<(Vec<f64>, bool)> {
    let n = dict.len();
    // keep the target representable at this length
    let mut s = sigma;
    while 2 * gaussian_radius(s) >= n && s > 0.05 {
        s -= 0.05;
    }
    let target = gaussian_sequence(s, n)?;
    let t_norm = target.values().iter().map(|v| v * v).sum::<f64>().sqrt();
    let sol = bpdn_fit(&target, dict, tau_rel * t_norm)?;
    let total: f64 = sol.coefficients.iter().sum();
    if total.abs() <= 1e-12 {
        let k = nearest_atom(dict, s);
        let mut one = vec![0.0; dict.size()];
        one[k] = 1.0;
        return Ok((one, false));
    }
    Ok((sol.coefficients.iter().map(|c| c / total).collect(), sol.feasible))
}

/// Initial `(α⁰, β⁰)`: `α⁰` from the vertical width, `β⁰` from the
/// horizontal one; one-hot on the smallest atom when no edges are found.
pub fn initial_coefficients(y: &Image, dict: &GaussianDictionary, tau_rel: f64) -> Result<InitialGuess> {
    if !(tau_rel >= 0.0) {
        return invalid(format!("tau must be >= 0, got {tau_rel}"));
    }
    match estimate_sigmas(y, dict) {
        Ok(est) => {
            let (alpha, fa) = coefficients_for_sigma(est.sigma_v, dict, tau_rel)?;
            let (beta, fb) = coefficients_for_sigma(est.sigma_h, dict, tau_rel)?;
            Ok(InitialGuess {
                coefficients: KernelCoefficients::new(alpha, beta)?,
                estimate: Some(est),
                fallback: false,
                feasible: fa && fb,
            })
        }
        Err(DeblurError::NoEdges) => Ok(InitialGuess {
            coefficients: KernelCoefficients::one_hot(dict.size(), 0)?,
            estimate: None,
            fallback: true,
            feasible: true,
        }),
        Err(e) => Err(e),
    }
}
