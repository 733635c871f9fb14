//! Image and kernel quality scores.

use ndarray::{s, Array2};

use crate::circulant::Image;
use crate::error::{invalid, Result};

/// `10·log₁₀(peak²/MSE)`; identical images give `f64::INFINITY`.
pub fn psnr(x: &Image, reference: &Image, peak: f64) -> Result<f64> {
    if x.shape() != reference.shape() {
        return invalid(format!("psnr: shapes {:?} and {:?} differ", x.shape(), reference.shape()));
    }
    let mse = x.pixels().iter().zip(reference.pixels()).map(|(a, b)| (a - b) * (a - b)).sum::<f64>() / x.pixels().len() as f64;
    if mse == 0.0 {
        return Ok(f64::INFINITY);
    }
    Ok(10.0 * (peak * peak / mse).log10())
}

fn centroid(k: &Array2<f64>) -> (f64, f64) {
    let total: f64 = k.sum();
    if total == 0.0 {
        return (0.0, 0.0);
    }
    let (mut r, mut c) = (0.0, 0.0);
    for ((i, j), v) in k.indexed_iter() {
        r += i as f64 * v;
        c += j as f64 * v;
    }
    (r / total, c / total)
}

/// Place `k` centered in a `side x side` frame.
fn pad_centered(k: &Array2<f64>, side: usize) -> Array2<f64> {
    let (r, c) = k.dim();
    let (r0, c0) = ((side - r) / 2, (side - c) / 2);
    let mut out = Array2::zeros((side, side));
    out.slice_mut(s![r0..r0 + r, c0..c0 + c]).assign(k);
    out
}

fn shifted_ssd(a: &Array2<f64>, b: &Array2<f64>, dr: isize, dc: isize) -> f64 {
    // Σ (a[p] − b[p − d])² with zero outside both supports
    let side = a.nrows() as isize;
    let at = |m: &Array2<f64>, i: isize, j: isize| if (0..side).contains(&i) && (0..side).contains(&j) { m[[i as usize, j as usize]] } else { 0.0 };
    let mut acc = 0.0;
    for i in (-side)..(2 * side) {
        for j in (-side)..(2 * side) {
            let d = at(a, i, j) - at(b, i - dr, j - dc);
            acc += d * d;
        }
    }
    acc
}

/// Sum of squared differences between two PSFs after zero-padding to a
/// common odd square support and aligning by the rounded centroid offset,
/// refined over integer shifts within ±2.
pub fn ssd_kernel(estimate: &Array2<f64>, truth: &Array2<f64>) -> f64 {
    let largest = estimate.nrows().max(estimate.ncols()).max(truth.nrows()).max(truth.ncols());
    let side = largest | 1;
    let (a, b) = (pad_centered(estimate, side), pad_centered(truth, side));
    let (ca, cb) = (centroid(&a), centroid(&b));
    let (br, bc) = ((ca.0 - cb.0).round() as isize, (ca.1 - cb.1).round() as isize);
    let mut best = f64::INFINITY;
    for dr in br - 2..=br + 2 {
        for dc in bc - 2..=bc + 2 {
            best = best.min(shifted_ssd(&a, &b, dr, dc));
        }
    }
    best
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bench::kernels::{make_kernel, KernelSpec};

    #[test]
    fn psnr_examples() {
        let x = Image::from_fn(8, 8, |(i, j)| (i * 8 + j) as f64).unwrap();
        assert_eq!(psnr(&x, &x, 255.0).unwrap(), f64::INFINITY);
        let plus = Image::new(x.pixels() + 1.0).unwrap();
        let want = 10.0 * (255.0f64 * 255.0).log10();
        assert!((psnr(&plus, &x, 255.0).unwrap() - want).abs() < 1e-12);
        assert!((want - 48.1308).abs() < 1e-4);
        let zero = Image::filled(4, 4, 0.0).unwrap();
        let full = Image::filled(4, 4, 255.0).unwrap();
        assert!(psnr(&zero, &full, 255.0).unwrap().abs() < 1e-12);
        assert!(psnr(&zero, &x, 255.0).is_err());
    }

    #[test]
    fn psnr_symmetric_and_decreasing() {
        let x = Image::from_fn(6, 6, |(i, j)| (i * j) as f64).unwrap();
        let mut last = f64::INFINITY;
        for k in 1..10 {
            let y = Image::new(x.pixels() + 0.5 * k as f64).unwrap();
            let p = psnr(&y, &x, 255.0).unwrap();
            assert_eq!(p, psnr(&x, &y, 255.0).unwrap());
            assert!(p < last);
            last = p;
        }
    }

    #[test]
    fn ssd_zero_for_identical_and_shifted() {
        let k = make_kernel(&KernelSpec::table(3).unwrap()).unwrap();
        assert_eq!(ssd_kernel(&k, &k), 0.0);
        let mut a = Array2::zeros((3, 3));
        a[[1, 1]] = 1.0;
        let mut b = Array2::zeros((3, 3));
        b[[1, 2]] = 1.0;
        assert_eq!(ssd_kernel(&a, &b), 0.0);
        // same kernel embedded off-center in a larger frame
        let mut big = Array2::zeros((31, 31));
        big.slice_mut(s![2..25, 5..28]).assign(&k);
        assert!(ssd_kernel(&big, &k) < 1e-30);
    }

    #[test]
    fn ssd_positive_for_different_kernels() {
        let k2 = make_kernel(&KernelSpec::table(2).unwrap()).unwrap();
        let k3 = make_kernel(&KernelSpec::table(3).unwrap()).unwrap();
        let v = ssd_kernel(&k3, &k2);
        assert!(v > 0.0);
        assert_eq!(v, ssd_kernel(&k3, &k2));
    }
}
