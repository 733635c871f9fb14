//! Gaussian blur dictionary: `N` normalized 1-D Gaussian sequences whose
//! Kronecker products form the `N²` separable 2-D atoms.

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::circulant::{GeneratingSequence, SeparableBlur};
use crate::error::{invalid, Result};

/// Default standard deviations `0.5, 1.0, …, 4.0`.
pub const DEFAULT_SIGMAS: [f64; 8] = [0.5, 1.0, 1.5, 2.0, 2.5, 3.0, 3.5, 4.0];
/// Default atom length, equal to the processing block side.
pub const DEFAULT_LENGTH: usize = 96;

/// Truncation radius of a sampled Gaussian.
pub fn gaussian_radius(sigma: f64) -> usize {
    (4.0 * sigma).ceil() as usize
}

/// Circularly centered Gaussian taps `exp(-d²/2σ²)` truncated at `⌈4σ⌉` and
/// normalized to unit sum.
pub fn gaussian_sequence(sigma: f64, n: usize) -> Result<GeneratingSequence> {
    if !(sigma > 0.0) || !sigma.is_finite() {
        return invalid(format!("gaussian sigma must be positive, got {sigma}"));
    }
    if n < 3 {
        return invalid(format!("gaussian sequence length must be at least 3, got {n}"));
    }
    let radius = gaussian_radius(sigma);
    if 2 * radius >= n {
        return invalid(format!("gaussian radius {radius} (sigma {sigma}) too large for length {n}"));
    }
    let mut taps = vec![0.0; n];
    for d in 0..=radius {
        let w = (-((d * d) as f64) / (2.0 * sigma * sigma)).exp();
        taps[d] = w;
        taps[(n - d) % n] = w;
    }
    let total: f64 = taps.iter().sum();
    taps.iter_mut().for_each(|t| *t /= total);
    GeneratingSequence::new(taps)
}

/// Parse a `start:stop:step` grid (inclusive of `stop` up to rounding).
pub fn parse_sigma_grid(spec: &str) -> Result<Vec<f64>> {
    let parts: Vec<&str> = spec.split(':').collect();
    if parts.len() != 3 {
        return invalid(format!("sigma grid '{spec}' is not start:stop:step"));
    }
    let nums: Vec<f64> = parts
        .iter()
        .map(|p| p.trim().parse::<f64>())
        .collect::<std::result::Result<_, _>>()
        .map_err(|e| crate::DeblurError::InvalidArgument(format!("sigma grid '{spec}': {e}")))?;
    let (start, stop, step) = (nums[0], nums[1], nums[2]);
    if !(step > 0.0) || !(start > 0.0) || stop < start {
        return invalid(format!("sigma grid '{spec}' must have 0 < start <= stop and step > 0"));
    }
    let count = ((stop - start) / step + 1e-9).floor() as usize + 1;
    Ok((0..count).map(|i| start + step * i as f64).collect())
}

/// Ordered set of Gaussian atoms sharing a common length.
#[derive(Debug, Clone)]
pub struct GaussianDictionary {
    sigmas: Vec<f64>,
    atoms: Vec<GeneratingSequence>,
    n: usize,
}

impl GaussianDictionary {
    pub fn new(sigmas: &[f64], n: usize) -> Result<Self> {
        build_dictionary(sigmas, n)
    }

    pub fn sigmas(&self) -> &[f64] {
        &self.sigmas
    }

    pub fn atoms(&self) -> &[GeneratingSequence] {
        &self.atoms
    }

    pub fn atom(&self, i: usize) -> &GeneratingSequence {
        &self.atoms[i]
    }

    /// Number of 1-D atoms `N`.
    pub fn size(&self) -> usize {
        self.atoms.len()
    }

    /// Sequence length `n`.
    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.atoms.is_empty()
    }

    /// Largest support radius of any atom.
    pub fn max_radius(&self) -> usize {
        self.sigmas.iter().map(|&s| gaussian_radius(s)).max().unwrap_or(0)
    }

    /// `Σ wᵢ·atomᵢ`.
    pub fn combine(&self, weights: &[f64]) -> Result<GeneratingSequence> {
        if weights.len() != self.size() {
            return invalid(format!("{} weights for {} atoms", weights.len(), self.size()));
        }
        let refs: Vec<&GeneratingSequence> = self.atoms.iter().collect();
        GeneratingSequence::combine(weights, &refs)
    }
}

impl Default for GaussianDictionary {
    fn default() -> Self {
        build_dictionary(&DEFAULT_SIGMAS, DEFAULT_LENGTH).expect("default grid is valid")
    }
}

pub fn build_dictionary(sigmas: &[f64], n: usize) -> Result<GaussianDictionary> {
    if sigmas.is_empty() {
        return invalid("dictionary needs at least one sigma");
    }
    if sigmas.windows(2).any(|w| !(w[1] > w[0])) {
        return invalid("dictionary sigmas must be strictly increasing");
    }
    let atoms = sigmas
        .iter()
        .map(|&s| {
            let atom = gaussian_sequence(s, n)?;
            atom.spectrum();
            Ok(atom)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(GaussianDictionary { sigmas: sigmas.to_vec(), atoms, n })
}

/// Coefficient vectors `α` (vertical) and `β` (horizontal), each summing to 1.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KernelCoefficients {
    pub alpha: Vec<f64>,
    pub beta: Vec<f64>,
}

impl KernelCoefficients {
    pub const SUM_TOL: f64 = 1e-9;

    pub fn new(alpha: Vec<f64>, beta: Vec<f64>) -> Result<Self> {
        if alpha.len() != beta.len() || alpha.is_empty() {
            return invalid("alpha and beta must be non-empty and equal length");
        }
        if alpha.iter().chain(&beta).any(|v| !v.is_finite()) {
            return invalid("kernel coefficients must be finite");
        }
        let (sa, sb): (f64, f64) = (alpha.iter().sum(), beta.iter().sum());
        if (sa - 1.0).abs() > Self::SUM_TOL || (sb - 1.0).abs() > Self::SUM_TOL {
            return invalid(format!("kernel coefficients must sum to 1 (got {sa}, {sb})"));
        }
        Ok(Self { alpha, beta })
    }

    pub fn one_hot(size: usize, index: usize) -> Result<Self> {
        if index >= size {
            return invalid(format!("one-hot index {index} out of range {size}"));
        }
        let mut v = vec![0.0; size];
        v[index] = 1.0;
        Self::new(v.clone(), v)
    }

    pub fn uniform(size: usize) -> Result<Self> {
        let v = vec![1.0 / size as f64; size];
        Self::new(v.clone(), v)
    }

    pub fn len(&self) -> usize {
        self.alpha.len()
    }

    pub fn is_empty(&self) -> bool {
        self.alpha.is_empty()
    }

    /// Coefficient matrix `U = αβᵀ`.
    pub fn outer(&self) -> Array2<f64> {
        let n = self.len();
        Array2::from_shape_fn((n, n), |(i, j)| self.alpha[i] * self.beta[j])
    }

    /// `vec(αβᵀ)`, column-major: index `i + N·j`.
    pub fn vectorized(&self) -> Vec<f64> {
        let n = self.len();
        let mut u = vec![0.0; n * n];
        for j in 0..n {
            for i in 0..n {
                u[i + n * j] = self.alpha[i] * self.beta[j];
            }
        }
        u
    }
}

/// `h_col = Σ αᵢ·atomᵢ`, `h_row = Σ βⱼ·atomⱼ`.
pub fn synthesize_blur(coeffs: &KernelCoefficients, dict: &GaussianDictionary) -> Result<SeparableBlur> {
    SeparableBlur::new(dict.combine(&coeffs.alpha)?, dict.combine(&coeffs.beta)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::circulant::separable_psf;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn taps_sum_to_one_and_are_symmetric() {
        for &(s, n) in &[(0.3, 8), (1.0, 16), (2.6, 96), (4.0, 96), (7.3, 64)] {
            let g = gaussian_sequence(s, n).unwrap();
            assert!((g.sum() - 1.0).abs() < 1e-12);
            for k in 0..n {
                assert!((g.values()[k] - g.values()[(n - k) % n]).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn tiny_sigma_is_delta_like() {
        let g = gaussian_sequence(0.1, 16).unwrap();
        // exp(-50) side taps against a unit center
        let side = (-50.0f64).exp();
        assert!((g.values()[0] - 1.0 / (1.0 + 2.0 * side)).abs() < 1e-15);
        assert!(g.values()[0] > 0.999);
    }

    #[test]
    fn sigma_2_6_matches_formula() {
        let g = gaussian_sequence(2.6, 96).unwrap();
        let r = 11;
        let raw: Vec<f64> = (0..=r).map(|d| (-(d as f64).powi(2) / (2.0 * 2.6 * 2.6)).exp()).collect();
        let total = raw[0] + 2.0 * raw[1..].iter().sum::<f64>();
        for d in 0..=r {
            assert!((g.values()[d] - raw[d] / total).abs() < 1e-15);
        }
        assert!(g.values()[r + 1..96 - r].iter().all(|&v| v == 0.0));
    }

    #[test]
    fn radius_guard() {
        assert!(gaussian_sequence(2.0, 16).is_err());
        assert!(gaussian_sequence(1.5, 16).is_ok());
        assert!(gaussian_sequence(-1.0, 16).is_err());
        assert!(gaussian_sequence(1.0, 2).is_err());
    }

    #[test]
    fn default_dictionary_shape() {
        let d = GaussianDictionary::default();
        assert_eq!(d.size(), 8);
        assert_eq!(d.len(), 96);
        assert_eq!(d.sigmas(), &DEFAULT_SIGMAS);
    }

    #[test]
    fn single_atom_and_duplicates() {
        let d = build_dictionary(&[1.0], 16).unwrap();
        assert_eq!(d.size(), 1);
        assert!(build_dictionary(&[1.0, 1.0], 16).is_err());
        assert!(build_dictionary(&[2.0, 1.0], 16).is_err());
    }

    #[test]
    fn center_tap_decreases_with_sigma() {
        let d = GaussianDictionary::default();
        for w in d.atoms().windows(2) {
            assert!(w[1].values()[0] < w[0].values()[0]);
        }
    }

    #[test]
    fn grid_parsing() {
        assert_eq!(parse_sigma_grid("0.5:4.0:0.5").unwrap(), DEFAULT_SIGMAS.to_vec());
        assert_eq!(parse_sigma_grid("1:2:1").unwrap(), vec![1.0, 2.0]);
        assert!(parse_sigma_grid("1:2").is_err());
        assert!(parse_sigma_grid("1:2:0").is_err());
        assert!(parse_sigma_grid("a:2:1").is_err());
    }

    #[test]
    fn synthesize_one_hot_and_anisotropic() {
        let d = GaussianDictionary::default();
        let c = KernelCoefficients::one_hot(8, 2).unwrap();
        let blur = synthesize_blur(&c, &d).unwrap();
        assert_eq!(blur.h_col().values(), d.atom(2).values());
        assert_eq!(blur.h_row().values(), d.atom(2).values());

        let mut a = vec![0.0; 8];
        let mut b = vec![0.0; 8];
        a[0] = 1.0;
        b[1] = 1.0;
        let blur = synthesize_blur(&KernelCoefficients::new(a, b).unwrap(), &d).unwrap();
        let psf = separable_psf(&blur);
        let (g0, g1) = (d.atom(0).values(), d.atom(1).values());
        for i in [0, 1, 95] {
            for j in [0, 2, 94] {
                assert_eq!(psf[[i, j]], g0[i] * g1[j]);
            }
        }
    }

    #[test]
    fn uniform_coefficients_give_unit_psf() {
        let d = GaussianDictionary::default();
        let blur = synthesize_blur(&KernelCoefficients::uniform(8).unwrap(), &d).unwrap();
        let total: f64 = separable_psf(&blur).iter().sum();
        assert!((total - 1.0).abs() < 1e-12);
    }

    #[test]
    fn coefficient_validation() {
        assert!(KernelCoefficients::new(vec![0.5, 0.4], vec![0.5, 0.5]).is_err());
        assert!(KernelCoefficients::new(vec![1.0], vec![0.5, 0.5]).is_err());
        assert!(KernelCoefficients::new(vec![1.5, -0.5], vec![0.5, 0.5]).is_ok());
        let c = KernelCoefficients::new(vec![0.25, 0.75], vec![0.5, 0.5]).unwrap();
        assert_eq!(c.vectorized(), vec![0.125, 0.375, 0.125, 0.375]);
    }

    #[test]
    fn synthesis_is_linear_in_each_factor() {
        let d = GaussianDictionary::default();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let rand_simplex = |rng: &mut ChaCha8Rng| {
            let v: Vec<f64> = (0..8).map(|_| rng.random_range(0.0..1.0)).collect();
            let s: f64 = v.iter().sum();
            v.into_iter().map(|x| x / s).collect::<Vec<_>>()
        };
        for _ in 0..10 {
            let (a1, a2, b) = (rand_simplex(&mut rng), rand_simplex(&mut rng), rand_simplex(&mut rng));
            let t = rng.random_range(0.0..1.0);
            let mix: Vec<f64> = a1.iter().zip(&a2).map(|(x, y)| t * x + (1.0 - t) * y).collect();
            let psf = |a: &[f64]| {
                separable_psf(&synthesize_blur(&KernelCoefficients::new(a.to_vec(), b.clone()).unwrap(), &d).unwrap())
            };
            let lhs = psf(&mix);
            let rhs = psf(&a1) * t + psf(&a2) * (1.0 - t);
            assert!(lhs.iter().zip(rhs.iter()).all(|(x, y)| (x - y).abs() < 1e-12));
            assert!((lhs.sum() - 1.0).abs() < 1e-9);
        }
    }
}
