//! Benchmark point spread functions.

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::dictionary::{build_dictionary, KernelCoefficients};
use crate::error::{invalid, DeblurError, Result};

/// Binomial taps of the second benchmark kernel.
pub const BINOMIAL_TAPS: [f64; 10] = [1.0, 9.0, 36.0, 84.0, 126.0, 126.0, 84.0, 36.0, 9.0, 1.0];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum KernelSpec {
    /// Normalized indicator of `x² + y² ≤ r²` on a `(2r+1)²` grid.
    Disk { radius: usize },
    /// Normalized outer product `h hᵀ`.
    Binomial { taps: Vec<f64> },
    /// Isotropic Gaussian truncated at `radius`.
    Gaussian2d { sigma: f64, radius: usize },
    /// `1/(1 + x² + y²)` for `|x|, |y| ≤ half_width`.
    Cauchy2d { half_width: usize },
    Delta,
    /// Dictionary blur `Σ αᵢβⱼ gᵢ gⱼᵀ`, cropped to the widest atom.
    SeparableFromCoeffs { alpha: Vec<f64>, beta: Vec<f64>, sigmas: Vec<f64> },
}

impl KernelSpec {
    /// Benchmark kernel 1–4.
    pub fn table(index: usize) -> Result<Self> {
        match index {
            1 => Ok(Self::Disk { radius: 5 }),
            2 => Ok(Self::Binomial { taps: BINOMIAL_TAPS.to_vec() }),
            3 => Ok(Self::Gaussian2d { sigma: 2.6, radius: 11 }),
            4 => Ok(Self::Cauchy2d { half_width: 7 }),
            _ => invalid(format!("benchmark kernels are numbered 1-4, got {index}")),
        }
    }

    /// Parse `kernel1`…`kernel4`, `disk[:r]`, `binomial`, `gaussian[:σ]`,
    /// `cauchy[:w]` or `delta`.
    pub fn parse(text: &str) -> Result<Self> {
        let (name, arg) = match text.split_once(':') {
            Some((n, a)) => (n, Some(a)),
            None => (text, None),
        };
        let num = |default: f64| -> Result<f64> {
            arg.map_or(Ok(default), |a| a.parse::<f64>().map_err(|e| DeblurError::Parse(format!("kernel '{text}': {e}"))))
        };
        match name {
            "kernel1" | "kernel2" | "kernel3" | "kernel4" => Self::table(name[6..].parse().expect("digit")),
            "disk" => Ok(Self::Disk { radius: num(5.0)? as usize }),
            "binomial" => Ok(Self::Binomial { taps: BINOMIAL_TAPS.to_vec() }),
            "gaussian" => {
                let sigma = num(2.6)?;
                Ok(Self::Gaussian2d { sigma, radius: (4.0 * sigma).ceil() as usize })
            }
            "cauchy" => Ok(Self::Cauchy2d { half_width: num(7.0)? as usize }),
            "delta" => Ok(Self::Delta),
            _ => invalid(format!("unknown kernel kind '{name}'")),
        }
    }

    pub fn label(&self) -> String {
        match self {
            Self::Disk { radius } => format!("disk{radius}"),
            Self::Binomial { taps } => format!("binomial{}", taps.len()),
            Self::Gaussian2d { sigma, .. } => format!("gaussian{sigma}"),
            Self::Cauchy2d { half_width } => format!("cauchy{half_width}"),
            Self::Delta => "delta".into(),
            Self::SeparableFromCoeffs { .. } => "separable".into(),
        }
    }
}

fn normalized(mut k: Array2<f64>) -> Result<Array2<f64>> {
    let total = k.sum();
    if !(total > 0.0) || !total.is_finite() {
        return invalid("kernel has no positive mass");
    }
    k.mapv_inplace(|v| v / total);
    Ok(k)
}

pub fn make_kernel(spec: &KernelSpec) -> Result<Array2<f64>> {
    match spec {
        KernelSpec::Disk { radius } => {
            let r = *radius as isize;
            let side = 2 * *radius + 1;
            normalized(Array2::from_shape_fn((side, side), |(i, j)| {
                let (y, x) = (i as isize - r, j as isize - r);
                if x * x + y * y <= r * r {
                    1.0
                } else {
                    0.0
                }
            }))
        }
        KernelSpec::Binomial { taps } => {
            if taps.is_empty() || taps.iter().any(|t| !t.is_finite()) {
                return invalid("binomial taps must be finite and non-empty");
            }
            normalized(Array2::from_shape_fn((taps.len(), taps.len()), |(i, j)| taps[i] * taps[j]))
        }
        KernelSpec::Gaussian2d { sigma, radius } => {
            if !(*sigma > 0.0) {
                return invalid(format!("gaussian sigma must be positive, got {sigma}"));
            }
            let r = *radius as f64;
            let side = 2 * radius + 1;
            normalized(Array2::from_shape_fn((side, side), |(i, j)| {
                let (y, x) = (i as f64 - r, j as f64 - r);
                (-(x * x + y * y) / (2.0 * sigma * sigma)).exp()
            }))
        }
        KernelSpec::Cauchy2d { half_width } => {
            let w = *half_width as f64;
            let side = 2 * half_width + 1;
            normalized(Array2::from_shape_fn((side, side), |(i, j)| {
                let (y, x) = (i as f64 - w, j as f64 - w);
                1.0 / (1.0 + x * x + y * y)
            }))
        }
        KernelSpec::Delta => Ok(Array2::from_elem((1, 1), 1.0)),
        KernelSpec::SeparableFromCoeffs { alpha, beta, sigmas } => {
            let coeffs = KernelCoefficients::new(alpha.clone(), beta.clone())?;
            let r = sigmas.iter().map(|&s| crate::dictionary::gaussian_radius(s)).max().unwrap_or(0);
            let dict = build_dictionary(sigmas, 2 * r + 2)?;
            crate::pipeline::coefficients_psf(&coeffs, &dict)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rot180(k: &Array2<f64>) -> Array2<f64> {
        let (r, c) = k.dim();
        Array2::from_shape_fn((r, c), |(i, j)| k[[r - 1 - i, c - 1 - j]])
    }

    #[test]
    fn table_kernels_normalized_and_point_symmetric() {
        for idx in 1..=4 {
            let k = make_kernel(&KernelSpec::table(idx).unwrap()).unwrap();
            assert!((k.sum() - 1.0).abs() < 1e-12, "kernel {idx}");
            let r = rot180(&k);
            assert!(k.iter().zip(r.iter()).all(|(a, b)| (a - b).abs() < 1e-15), "kernel {idx}");
        }
    }

    #[test]
    fn binomial_is_outer_product_over_512_squared() {
        assert_eq!(BINOMIAL_TAPS.iter().sum::<f64>(), 512.0);
        let k = make_kernel(&KernelSpec::table(2).unwrap()).unwrap();
        assert_eq!(k.dim(), (10, 10));
        for i in 0..10 {
            for j in 0..10 {
                let want = BINOMIAL_TAPS[i] * BINOMIAL_TAPS[j] / (512.0 * 512.0);
                assert!((k[[i, j]] - want).abs() < 1e-17);
            }
        }
        assert!((k[[4, 4]] - 126.0 * 126.0 / 262144.0).abs() < 1e-17);
    }

    #[test]
    fn disk_has_expected_support() {
        let k = make_kernel(&KernelSpec::table(1).unwrap()).unwrap();
        assert_eq!(k.dim(), (11, 11));
        let count = k.iter().filter(|&&v| v > 0.0).count();
        // lattice points with x² + y² ≤ 25
        assert_eq!(count, 81);
        assert!(k.iter().all(|&v| v == 0.0 || (v - 1.0 / 81.0).abs() < 1e-15));
    }

    #[test]
    fn cauchy_center_value() {
        let k = make_kernel(&KernelSpec::table(4).unwrap()).unwrap();
        let mut total = 0.0;
        for x in -7i32..=7 {
            for y in -7i32..=7 {
                total += 1.0 / (1.0 + (x * x + y * y) as f64);
            }
        }
        assert!((k[[7, 7]] - 1.0 / total).abs() < 1e-15);
        assert!(k.iter().all(|&v| v <= k[[7, 7]]));
    }

    #[test]
    fn delta_and_parsing() {
        assert_eq!(make_kernel(&KernelSpec::Delta).unwrap(), Array2::from_elem((1, 1), 1.0));
        assert_eq!(KernelSpec::parse("kernel3").unwrap(), KernelSpec::table(3).unwrap());
        assert_eq!(KernelSpec::parse("disk:3").unwrap(), KernelSpec::Disk { radius: 3 });
        assert!(KernelSpec::parse("motion").is_err());
        assert!(KernelSpec::table(5).is_err());
    }

    #[test]
    fn separable_from_coeffs_sums_to_one() {
        let spec = KernelSpec::SeparableFromCoeffs { alpha: vec![0.5, 0.5], beta: vec![1.0, 0.0], sigmas: vec![1.0, 2.0] };
        let k = make_kernel(&spec).unwrap();
        assert!((k.sum() - 1.0).abs() < 1e-12);
        assert_eq!(k.dim(), (17, 17));
    }
}
