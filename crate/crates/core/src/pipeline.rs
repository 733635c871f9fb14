//! Alternating blind restoration with γ continuation and block tiling.

use std::io::Write;

use ndarray::{s, Array2};
use serde::{Deserialize, Serialize};

use crate::circulant::{reflect_index, BlurSpectrum, Image};
use crate::dictionary::{build_dictionary, synthesize_blur, GaussianDictionary, KernelCoefficients, DEFAULT_SIGMAS};
use crate::error::{invalid, DeblurError, Result};
use crate::init::{initial_coefficients, DEFAULT_TAU_REL};
use crate::kernel::{build_design_matrix_interior, kernel_step_with_design, KernelStepParams, ProxParams};
use crate::spectral::Fft2;
use crate::tv::TvProblem;

/// Every parameter of a restoration run. Field names double as config-file
/// keys.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RestorationConfig {
    pub gamma_init: f64,
    /// Continuation cap `p`.
    pub gamma_cap: f64,
    pub gamma_factor: f64,
    /// Image/kernel alternations per γ stage (`M`).
    pub max_iters: usize,
    pub tile: usize,
    pub pad_block: usize,
    /// TV weight `δ`.
    pub delta: f64,
    /// Shrink/x-update passes per image step.
    pub inner_iters: usize,
    pub eps_div: f64,
    /// Kernel sparsity weight; absent selects `10⁻³·‖Zᵀy‖_∞` per step.
    pub mu_reg: Option<f64>,
    pub step_init: f64,
    pub step_floor: f64,
    pub linesearch_beta: f64,
    pub max_prox_steps: usize,
    pub symmetric_kernel: bool,
    /// Dictionary standard deviations.
    pub sigmas: Vec<f64>,
    /// Relative BPDN bound for the initializer.
    pub tau: f64,
    /// Try each one-hot initial kernel on the central block and keep the
    /// best one instead of the estimated initializer.
    pub init_sweep: bool,
    /// Fit the kernel only on pixels whose blur footprint stays inside the
    /// block (a band of the largest atom radius is dropped at each edge).
    /// Ignored when that band would cover more than half the block side.
    pub interior_kernel_fit: bool,
}

impl Default for RestorationConfig {
    fn default() -> Self {
        let prox = ProxParams::default();
        Self {
            gamma_init: 1.0,
            gamma_cap: 100.0,
            gamma_factor: 2.0,
            max_iters: 20,
            tile: 32,
            pad_block: 96,
            delta: 0.1,
            inner_iters: 4,
            eps_div: 1e-12,
            mu_reg: None,
            step_init: prox.step_init,
            step_floor: prox.step_floor,
            linesearch_beta: prox.linesearch_beta,
            max_prox_steps: prox.max_steps,
            symmetric_kernel: false,
            sigmas: DEFAULT_SIGMAS.to_vec(),
            tau: DEFAULT_TAU_REL,
            init_sweep: false,
            interior_kernel_fit: true,
        }
    }
}

impl RestorationConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.gamma_init > 0.0) || !(self.gamma_init <= self.gamma_cap) || !self.gamma_cap.is_finite() {
            return invalid(format!(
                "need 0 < gamma_init <= gamma_cap < inf (got {}, {})",
                self.gamma_init, self.gamma_cap
            ));
        }
        if !(self.gamma_factor > 1.0) || !self.gamma_factor.is_finite() {
            return invalid(format!("gamma_factor must exceed 1, got {}", self.gamma_factor));
        }
        if self.tile == 0 || self.pad_block < self.tile || (self.pad_block - self.tile) % 2 != 0 {
            return invalid(format!(
                "need pad_block >= tile > 0 with an even difference (got tile {}, pad_block {})",
                self.tile, self.pad_block
            ));
        }
        if !(self.delta >= 0.0) || !self.delta.is_finite() {
            return invalid(format!("delta must be finite and >= 0, got {}", self.delta));
        }
        if !(self.eps_div >= 0.0) {
            return invalid(format!("eps_div must be >= 0, got {}", self.eps_div));
        }
        if let Some(mu) = self.mu_reg {
            if !(mu >= 0.0) {
                return invalid(format!("mu_reg must be >= 0, got {mu}"));
            }
        }
        if !(self.tau >= 0.0) {
            return invalid(format!("tau must be >= 0, got {}", self.tau));
        }
        self.kernel_params().prox.validate()
    }

    pub fn kernel_params(&self) -> KernelStepParams {
        KernelStepParams {
            mu_reg: self.mu_reg,
            prox: ProxParams {
                step_init: self.step_init,
                step_floor: self.step_floor,
                linesearch_beta: self.linesearch_beta,
                max_steps: self.max_prox_steps,
                ..ProxParams::default()
            },
            symmetric_kernel: self.symmetric_kernel,
        }
    }

    /// γ values of the continuation: `γ₀, γ₀f, …` while below the cap
    /// (always at least one stage).
    pub fn gamma_schedule(&self) -> Vec<f64> {
        let mut out = vec![self.gamma_init];
        let mut g = self.gamma_init * self.gamma_factor;
        while g < self.gamma_cap {
            out.push(g);
            g *= self.gamma_factor;
        }
        out
    }

    /// Dictionary on `n`-sample atoms.
    pub fn dictionary(&self, n: usize) -> Result<GaussianDictionary> {
        build_dictionary(&self.sigmas, n)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TraceRow {
    pub iter: usize,
    pub gamma: f64,
    /// `‖y − H x‖²` after the alternation.
    pub fidelity: f64,
    /// Split objective after the alternation.
    pub objective: f64,
}

/// Write `iter,gamma,fidelity,objective` rows.
pub fn write_trace_csv<W: Write>(rows: &[TraceRow], mut out: W) -> std::io::Result<()> {
    writeln!(out, "iter,gamma,fidelity,objective")?;
    for r in rows {
        writeln!(out, "{},{},{:e},{:e}", r.iter, r.gamma, r.fidelity, r.objective)?;
    }
    Ok(())
}

#[derive(Debug, Clone)]
pub struct BlockResult {
    pub image: Image,
    pub coefficients: KernelCoefficients,
    pub trace: Vec<TraceRow>,
    /// The kernel collapsed; `image` is the input and `coefficients` the
    /// smallest-width atom.
    pub degenerate: bool,
    /// Kernel steps whose line search failed immediately.
    pub step_failures: usize,
    /// Kernel steps rejected because the data fit did not improve.
    pub rejected_kernels: usize,
}

/// Alternate image and kernel steps on one square block.
///
/// Starts from `x = y`. Each γ stage runs `max_iters` alternations; a new
/// kernel is kept only if it strictly lowers `‖y − H x‖²` for the current
/// image.
pub fn restore_block(y: &Image, config: &RestorationConfig, init: &KernelCoefficients) -> Result<BlockResult> {
    let dict = config.dictionary(y.rows())?;
    restore_block_with(y, config, init, &dict)
}

pub fn restore_block_with(
    y: &Image,
    config: &RestorationConfig,
    init: &KernelCoefficients,
    dict: &GaussianDictionary,
) -> Result<BlockResult> {
    config.validate()?;
    let (rows, cols) = y.shape();
    if rows != cols || rows != dict.len() {
        return invalid(format!("block must be square with side {}, got {rows}x{cols}", dict.len()));
    }
    if init.len() != dict.size() {
        return invalid(format!("{} initial coefficients for {} atoms", init.len(), dict.size()));
    }
    let mut result = BlockResult {
        image: y.clone(),
        coefficients: init.clone(),
        trace: Vec::new(),
        degenerate: false,
        step_failures: 0,
        rejected_kernels: 0,
    };
    if config.max_iters == 0 {
        return Ok(result);
    }
    let plan = Fft2::new(rows, cols)?;
    let kparams = config.kernel_params();
    let problem_for = |coeffs: &KernelCoefficients| -> Result<TvProblem> {
        let blur = BlurSpectrum::from_separable(&synthesize_blur(coeffs, dict)?);
        TvProblem::with_plan(y, blur, config.delta, config.eps_div, plan.clone())
    };
    let radius = dict.max_radius();
    let kernel_margin = if config.interior_kernel_fit && 4 * radius <= rows { radius } else { 0 };
    let mut coeffs = init.clone();
    let mut problem = problem_for(&coeffs)?;
    let mut x = y.pixels().clone();
    let mut iter = 0;
    for gamma in config.gamma_schedule() {
        for _ in 0..config.max_iters {
            let state = problem.solve(&x, gamma, config.inner_iters.max(1))?;
            x = state.x.pixels().clone();
            let x_img = Image::new(x.clone())?;
            let design = build_design_matrix_interior(&x_img, y, dict, kernel_margin)?;
            let current_fit = design.fidelity(&coeffs.vectorized());
            match kernel_step_with_design(&design, &coeffs, &kparams) {
                Ok(step) => {
                    if step.step_failure {
                        result.step_failures += 1;
                    } else {
                        let fit = design.fidelity(&step.coefficients.vectorized());
                        if fit < current_fit * (1.0 - 1e-12) {
                            coeffs = step.coefficients;
                            problem = problem_for(&coeffs)?;
                        } else {
                            result.rejected_kernels += 1;
                        }
                    }
                }
                Err(DeblurError::DegenerateKernel(_)) => {
                    result.image = y.clone();
                    result.coefficients = KernelCoefficients::one_hot(dict.size(), 0)?;
                    result.degenerate = true;
                    return Ok(result);
                }
                Err(e) => return Err(e),
            }
            iter += 1;
            let fidelity = problem.fidelity(&x);
            let objective = fidelity + problem.split_penalty(&x, &state.v1, &state.v2, gamma);
            result.trace.push(TraceRow { iter, gamma, fidelity, objective });
        }
    }
    result.image = Image::new(x)?;
    result.coefficients = coeffs;
    Ok(result)
}

/// `rows x cols` window with top-left corner `(r0, c0)`, reflecting
/// outside the image.
fn reflect_window(x: &Array2<f64>, r0: isize, c0: isize, rows: usize, cols: usize) -> Array2<f64> {
    let (h, w) = x.dim();
    Array2::from_shape_fn((rows, cols), |(i, j)| x[[reflect_index(r0 + i as isize, h), reflect_index(c0 + j as isize, w)]])
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BlockCoefficients {
    /// Top-left corner of the tile in the image.
    pub row: usize,
    pub col: usize,
    pub coefficients: KernelCoefficients,
    pub degenerate: bool,
}

#[derive(Debug, Clone)]
pub struct RestorationResult {
    pub image: Image,
    pub blocks: Vec<BlockCoefficients>,
    /// Consensus coefficients (elementwise median over blocks).
    pub coefficients: KernelCoefficients,
    /// Centered PSF of the consensus kernel.
    pub psf: Array2<f64>,
    /// Per-iteration totals over all blocks that ran to completion.
    pub trace: Vec<TraceRow>,
    pub initial: KernelCoefficients,
    pub warnings: Vec<String>,
}

/// Layout of processing blocks over an image.
#[derive(Debug, Clone, PartialEq)]
pub enum Tiling {
    /// The whole image, reflect-padded to one block.
    Single { offset: (usize, usize) },
    /// Tile corners on a `tile`-stride grid.
    Grid { corners: Vec<(usize, usize)> },
}

pub fn plan_tiling(rows: usize, cols: usize, tile: usize, pad_block: usize) -> Tiling {
    if rows <= pad_block && cols <= pad_block {
        return Tiling::Single { offset: ((pad_block - rows) / 2, (pad_block - cols) / 2) };
    }
    let mut corners = Vec::new();
    for r in (0..rows).step_by(tile) {
        for c in (0..cols).step_by(tile) {
            corners.push((r, c));
        }
    }
    Tiling::Grid { corners }
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

fn unit_sum(v: Vec<f64>) -> Option<Vec<f64>> {
    let s: f64 = v.iter().sum();
    (s.abs() > 1e-12).then(|| v.iter().map(|x| x / s).collect())
}

/// Elementwise median of block coefficient vectors, renormalized.
pub fn consensus_coefficients(blocks: &[KernelCoefficients]) -> Result<KernelCoefficients> {
    let Some(first) = blocks.first() else {
        return invalid("no block coefficients to combine");
    };
    let n = first.len();
    let med = |pick: &dyn Fn(&KernelCoefficients) -> &Vec<f64>| -> Vec<f64> {
        (0..n).map(|k| median(&mut blocks.iter().map(|b| pick(b)[k]).collect::<Vec<_>>())).collect()
    };
    match (unit_sum(med(&|b| &b.alpha)), unit_sum(med(&|b| &b.beta))) {
        (Some(a), Some(b)) => KernelCoefficients::new(a, b),
        _ => Ok(first.clone()),
    }
}

/// Centered `(2r+1)²` PSF of `coeffs`, `r` the widest atom radius.
pub fn coefficients_psf(coeffs: &KernelCoefficients, dict: &GaussianDictionary) -> Result<Array2<f64>> {
    Ok(synthesize_blur(coeffs, dict)?.centered_psf(dict.max_radius()))
}

#[cfg(feature = "parallel")]
fn map_blocks<T: Send, F: Fn(&(usize, usize)) -> T + Sync + Send>(corners: &[(usize, usize)], f: F) -> Vec<T> {
    use rayon::prelude::*;
    corners.par_iter().map(f).collect()
}

#[cfg(not(feature = "parallel"))]
fn map_blocks<T, F: Fn(&(usize, usize)) -> T>(corners: &[(usize, usize)], f: F) -> Vec<T> {
    corners.iter().map(f).collect()
}

/// Pick the best one-hot initial kernel by final data fit on the block
/// nearest the image center.
fn sweep_initial(y: &Image, config: &RestorationConfig, dict: &GaussianDictionary) -> Result<KernelCoefficients> {
    let p = config.pad_block as isize;
    let r0 = y.rows() as isize / 2 - p / 2;
    let c0 = y.cols() as isize / 2 - p / 2;
    let block = Image::new(reflect_window(y.pixels(), r0, c0, config.pad_block, config.pad_block))?;
    let mut best: Option<(f64, KernelCoefficients)> = None;
    for k in 0..dict.size() {
        for l in 0..dict.size() {
            let init = KernelCoefficients::new(one_hot(dict.size(), k), one_hot(dict.size(), l))?;
            let out = restore_block_with(&block, config, &init, dict)?;
            if out.degenerate {
                continue;
            }
            let fit = out.trace.last().map_or(f64::INFINITY, |r| r.fidelity);
            if best.as_ref().is_none_or(|(f, _)| fit < *f) {
                best = Some((fit, init));
            }
        }
    }
    Ok(best.map_or_else(|| KernelCoefficients::one_hot(dict.size(), 0), |(_, c)| Ok(c))?)
}

fn one_hot(n: usize, k: usize) -> Vec<f64> {
    let mut v = vec![0.0; n];
    v[k] = 1.0;
    v
}

/// Blind restoration with the initializer run on the whole image.
pub fn restore_image(y: &Image, config: &RestorationConfig) -> Result<RestorationResult> {
    config.validate()?;
    let dict = config.dictionary(config.pad_block)?;
    let init = if config.init_sweep {
        sweep_initial(y, config, &dict)?
    } else {
        initial_coefficients(y, &dict, config.tau)?.coefficients
    };
    restore_image_from(y, config, &init)
}

/// Blind restoration from given initial coefficients.
pub fn restore_image_from(y: &Image, config: &RestorationConfig, init: &KernelCoefficients) -> Result<RestorationResult> {
    config.validate()?;
    let (rows, cols) = y.shape();
    if rows < 2 || cols < 2 {
        return invalid(format!("image must be at least 2x2, got {rows}x{cols}"));
    }
    let dict = config.dictionary(config.pad_block)?;
    let (p, t) = (config.pad_block, config.tile);
    let mut out = Array2::<f64>::zeros((rows, cols));
    let mut blocks = Vec::new();
    let mut traces = Vec::new();
    let mut warnings = Vec::new();
    match plan_tiling(rows, cols, t, p) {
        Tiling::Single { offset } => {
            let padded = reflect_window(y.pixels(), -(offset.0 as isize), -(offset.1 as isize), p, p);
            let res = restore_block_with(&Image::new(padded)?, config, init, &dict)?;
            out.assign(&res.image.pixels().slice(s![offset.0..offset.0 + rows, offset.1..offset.1 + cols]));
            if res.degenerate {
                warnings.push("block (0, 0): degenerate kernel, input returned".to_string());
            }
            blocks.push(BlockCoefficients { row: 0, col: 0, coefficients: res.coefficients, degenerate: res.degenerate });
            traces.push(res.trace);
        }
        Tiling::Grid { corners } => {
            let margin = ((p - t) / 2) as isize;
            let results = map_blocks(&corners, |&(r, c)| {
                let window = reflect_window(y.pixels(), r as isize - margin, c as isize - margin, p, p);
                restore_block_with(&Image::new(window)?, config, init, &dict)
            });
            for (&(r, c), res) in corners.iter().zip(results) {
                let res = res?;
                let (h, w) = (t.min(rows - r), t.min(cols - c));
                let m = margin as usize;
                out.slice_mut(s![r..r + h, c..c + w]).assign(&res.image.pixels().slice(s![m..m + h, m..m + w]));
                if res.degenerate {
                    warnings.push(format!("block ({r}, {c}): degenerate kernel, input returned"));
                }
                blocks.push(BlockCoefficients { row: r, col: c, coefficients: res.coefficients, degenerate: res.degenerate });
                traces.push(res.trace);
            }
        }
    }
    let healthy: Vec<KernelCoefficients> =
        blocks.iter().filter(|b| !b.degenerate).map(|b| b.coefficients.clone()).collect();
    let coefficients = if healthy.is_empty() {
        KernelCoefficients::one_hot(dict.size(), 0)?
    } else {
        consensus_coefficients(&healthy)?
    };
    let psf = coefficients_psf(&coefficients, &dict)?;
    let full = traces.iter().map(Vec::len).max().unwrap_or(0);
    let mut trace: Vec<TraceRow> = Vec::with_capacity(full);
    for tr in traces.iter().filter(|tr| tr.len() == full) {
        for (k, row) in tr.iter().enumerate() {
            if k == trace.len() {
                trace.push(TraceRow { fidelity: 0.0, objective: 0.0, ..*row });
            }
            trace[k].fidelity += row.fidelity;
            trace[k].objective += row.objective;
        }
    }
    Ok(RestorationResult { image: Image::new(out)?, blocks, coefficients, psf, trace, initial: init.clone(), warnings })
}

/// Restoration with a known, fixed blur given by a centered PSF.
///
/// The image is reflect-padded by `(pad_block − tile)/2` on every side,
/// solved as one circular problem with γ continuation, and cropped.
pub fn restore_nonblind_psf(y: &Image, psf: &Array2<f64>, config: &RestorationConfig) -> Result<Image> {
    config.validate()?;
    let (rows, cols) = y.shape();
    if rows < 2 || cols < 2 {
        return invalid(format!("image must be at least 2x2, got {rows}x{cols}"));
    }
    if config.max_iters == 0 {
        return Ok(y.clone());
    }
    let margin = ((config.pad_block - config.tile) / 2).max(psf.nrows().max(psf.ncols()) / 2);
    let (pr, pc) = (rows + 2 * margin, cols + 2 * margin);
    let padded = Image::new(reflect_window(y.pixels(), -(margin as isize), -(margin as isize), pr, pc))?;
    let plan = Fft2::new(pr, pc)?;
    let blur = BlurSpectrum::from_centered_psf(psf, pr, pc, &plan)?;
    let problem = TvProblem::with_plan(&padded, blur, config.delta, config.eps_div, plan)?;
    let iters = config.max_iters * config.inner_iters.max(1);
    let mut x = padded.pixels().clone();
    for gamma in config.gamma_schedule() {
        x = problem.solve(&x, gamma, iters)?.x.into_pixels();
    }
    Image::new(x.slice(s![margin..margin + rows, margin..margin + cols]).to_owned())
}

/// Restoration with known dictionary coefficients.
pub fn restore_nonblind(y: &Image, coeffs: &KernelCoefficients, config: &RestorationConfig) -> Result<Image> {
    let dict = config.dictionary(config.pad_block)?;
    if coeffs.len() != dict.size() {
        return invalid(format!("{} coefficients for {} atoms", coeffs.len(), dict.size()));
    }
    restore_nonblind_psf(y, &coefficients_psf(coeffs, &dict)?, config)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::circulant::apply_separable_blur;

    fn quick() -> RestorationConfig {
        RestorationConfig { max_iters: 2, gamma_cap: 4.0, max_prox_steps: 50, ..RestorationConfig::default() }
    }

    fn texture(n: usize) -> Image {
        Image::from_fn(n, n, |(i, j)| {
            let (x, y) = (i as f64, j as f64);
            128.0 + 60.0 * ((x / 5.0).sin() * (y / 7.0).cos()) + if (i / 12 + j / 12) % 2 == 0 { 40.0 } else { -40.0 }
        })
        .unwrap()
    }

    #[test]
    fn default_schedule_has_seven_stages() {
        let g = RestorationConfig::default().gamma_schedule();
        assert_eq!(g, vec![1.0, 2.0, 4.0, 8.0, 16.0, 32.0, 64.0]);
        let c = RestorationConfig { gamma_init: 100.0, ..RestorationConfig::default() };
        assert_eq!(c.gamma_schedule(), vec![100.0]);
    }

    #[test]
    fn config_validation() {
        assert!(RestorationConfig::default().validate().is_ok());
        for bad in [
            RestorationConfig { gamma_init: 200.0, ..RestorationConfig::default() },
            RestorationConfig { gamma_factor: 1.0, ..RestorationConfig::default() },
            RestorationConfig { pad_block: 16, ..RestorationConfig::default() },
            RestorationConfig { pad_block: 95, ..RestorationConfig::default() },
            RestorationConfig { linesearch_beta: 1.5, ..RestorationConfig::default() },
        ] {
            assert!(matches!(bad.validate(), Err(DeblurError::InvalidArgument(_))), "{bad:?}");
        }
    }

    #[test]
    fn config_keys_are_field_names() {
        let v = serde_json::json!({"max_iters": 3, "gamma_cap": 10.0, "symmetric_kernel": true});
        let c: RestorationConfig = serde_json::from_value(v).unwrap();
        assert_eq!(c.max_iters, 3);
        assert!(c.symmetric_kernel);
        assert_eq!(c.tile, 32);
        assert!(serde_json::from_value::<RestorationConfig>(serde_json::json!({"nope": 1})).is_err());
    }

    #[test]
    fn tiling_counts() {
        match plan_tiling(512, 512, 32, 96) {
            Tiling::Grid { corners } => assert_eq!(corners.len(), 256),
            t => panic!("{t:?}"),
        }
        assert_eq!(plan_tiling(96, 96, 32, 96), Tiling::Single { offset: (0, 0) });
        assert_eq!(plan_tiling(60, 90, 32, 96), Tiling::Single { offset: (18, 3) });
    }

    #[test]
    fn reflect_window_identity_and_mirror() {
        let x = Array2::from_shape_fn((3, 4), |(i, j)| (10 * i + j) as f64);
        assert_eq!(reflect_window(&x, 0, 0, 3, 4), x);
        let w = reflect_window(&x, -1, -2, 1, 3);
        assert_eq!(w.row(0).to_vec(), vec![1.0, 0.0, 0.0]);
    }

    #[test]
    fn zero_iterations_return_input() {
        let cfg = RestorationConfig { max_iters: 0, ..RestorationConfig::default() };
        let y = texture(96);
        let init = KernelCoefficients::one_hot(8, 3).unwrap();
        let res = restore_block(&y, &cfg, &init).unwrap();
        assert_eq!(res.image, y);
        assert_eq!(res.coefficients, init);
        assert!(res.trace.is_empty());

        let y = texture(130);
        let res = restore_image_from(&y, &cfg, &init).unwrap();
        assert_eq!(res.image, y);
    }

    #[test]
    fn constant_block_keeps_kernel() {
        let y = Image::filled(96, 96, 80.0).unwrap();
        let init = KernelCoefficients::one_hot(8, 2).unwrap();
        let res = restore_block(&y, &quick(), &init).unwrap();
        assert_eq!(res.coefficients, init);
        assert!(res.image.pixels().iter().all(|v| (v - 80.0).abs() < 1e-9));
    }

    #[test]
    fn consensus_is_elementwise_median() {
        let a = KernelCoefficients::new(vec![0.2, 0.8], vec![0.5, 0.5]).unwrap();
        let b = KernelCoefficients::new(vec![0.4, 0.6], vec![0.5, 0.5]).unwrap();
        let c = KernelCoefficients::new(vec![0.3, 0.7], vec![1.0, 0.0]).unwrap();
        let m = consensus_coefficients(&[a, b, c]).unwrap();
        assert!((m.alpha[0] - 0.3).abs() < 1e-12 && (m.alpha[1] - 0.7).abs() < 1e-12);
        assert!((m.beta[0] - 0.5).abs() < 1e-12);
    }

    #[test]
    fn nonblind_delta_returns_input() {
        let y = texture(40);
        let mut psf = Array2::zeros((3, 3));
        psf[[1, 1]] = 1.0;
        let cfg = RestorationConfig { max_iters: 2, ..RestorationConfig::default() };
        let x = restore_nonblind_psf(&y, &psf, &cfg).unwrap();
        let err = x.pixels().iter().zip(y.pixels()).fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
        assert!(err < 1.0, "{err}");
    }

    #[test]
    fn psf_sums_to_one() {
        let dict = RestorationConfig::default().dictionary(96).unwrap();
        let c = KernelCoefficients::new(vec![0.0, 0.0, 0.0, 0.5, 0.5, 0.0, 0.0, 0.0], vec![0.0; 7].into_iter().chain([1.0]).collect()).unwrap();
        let psf = coefficients_psf(&c, &dict).unwrap();
        assert!((psf.sum() - 1.0).abs() < 1e-9);
        assert_eq!(psf.dim(), (33, 33));
    }

    #[test]
    fn trace_csv_header() {
        let mut buf = Vec::new();
        write_trace_csv(&[TraceRow { iter: 1, gamma: 2.0, fidelity: 3.0, objective: 4.0 }], &mut buf).unwrap();
        let s = String::from_utf8(buf).unwrap();
        assert!(s.starts_with("iter,gamma,fidelity,objective\n1,2,"));
    }

    #[test]
    fn blurred_block_improves() {
        let dict = RestorationConfig::default().dictionary(96).unwrap();
        let x = texture(96);
        let truth = KernelCoefficients::one_hot(8, 3).unwrap();
        let y = apply_separable_blur(&x, &synthesize_blur(&truth, &dict).unwrap()).unwrap();
        let res = restore_block_with(&y, &quick(), &truth, &dict).unwrap();
        let err = |a: &Image| a.pixels().iter().zip(x.pixels()).map(|(p, q)| (p - q).powi(2)).sum::<f64>();
        assert!(err(&res.image) < err(&y));
    }
}
