//! Additive white Gaussian noise at a target signal-to-noise ratio.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::circulant::Image;
use crate::error::{invalid, Result};

/// Mean of squared mean-removed intensities.
pub fn signal_power(x: &Image) -> f64 {
    let m = x.mean();
    x.pixels().iter().map(|v| (v - m) * (v - m)).sum::<f64>() / x.pixels().len() as f64
}

/// Add zero-mean Gaussian noise of variance `power / 10^(snr/10)`.
/// `snr_db = +∞` returns the input unchanged.
pub fn add_awgn(x: &Image, snr_db: f64, seed: u64) -> Result<Image> {
    if snr_db == f64::INFINITY {
        return Ok(x.clone());
    }
    if !snr_db.is_finite() {
        return invalid(format!("snr must be finite or +inf, got {snr_db}"));
    }
    let sd = (signal_power(x) / 10f64.powf(snr_db / 10.0)).sqrt();
    if sd == 0.0 {
        return Ok(x.clone());
    }
    let normal = Normal::new(0.0, sd).map_err(|e| crate::DeblurError::InvalidArgument(e.to_string()))?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Image::new(x.pixels().mapv(|v| v + normal.sample(&mut rng)))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample(n: usize) -> Image {
        Image::from_fn(n, n, |(i, j)| 128.0 + 80.0 * ((i as f64 / 9.0).sin() * (j as f64 / 13.0).cos())).unwrap()
    }

    #[test]
    fn infinite_snr_is_identity() {
        let x = sample(16);
        assert_eq!(add_awgn(&x, f64::INFINITY, 1).unwrap(), x);
        assert!(add_awgn(&x, f64::NAN, 1).is_err());
    }

    #[test]
    fn deterministic_per_seed() {
        let x = sample(32);
        assert_eq!(add_awgn(&x, 20.0, 7).unwrap(), add_awgn(&x, 20.0, 7).unwrap());
        assert_ne!(add_awgn(&x, 20.0, 7).unwrap(), add_awgn(&x, 20.0, 8).unwrap());
    }

    #[test]
    fn empirical_snr_matches_request() {
        let x = sample(512);
        for snr in [10.0, 30.0] {
            let y = add_awgn(&x, snr, 3).unwrap();
            let noise = Image::new(y.pixels() - x.pixels()).unwrap();
            let measured = 10.0 * (signal_power(&x) / signal_power(&noise)).log10();
            assert!((measured - snr).abs() <= 0.5, "{measured} vs {snr}");
        }
    }
}
