//! Dense reference operators. These exist to check the spectral paths and
//! are only practical for small sizes.

use ndarray::{Array1, Array2};

use crate::circulant::GeneratingSequence;
use crate::error::{invalid, Result};

/// Largest sequence length accepted by [`circulant_dense`].
pub const DENSE_LIMIT: usize = 64;

/// Dense circulant matrix `C[i][j] = seq[(i - j) mod n]`; row `k` is the
/// reversed sequence cyclically shifted by `k`, and `C x` is circular
/// convolution.
pub fn circulant_dense(seq: &GeneratingSequence) -> Result<Array2<f64>> {
    let n = seq.len();
    if n > DENSE_LIMIT {
        return invalid(format!("dense circulant refused for n = {n} > {DENSE_LIMIT}"));
    }
    let v = seq.values();
    Ok(Array2::from_shape_fn((n, n), |(i, j)| v[(i + n - j) % n]))
}

/// Kronecker product `a ⊗ b`.
pub fn kron(a: &Array2<f64>, b: &Array2<f64>) -> Array2<f64> {
    let (ar, ac) = a.dim();
    let (br, bc) = b.dim();
    Array2::from_shape_fn((ar * br, ac * bc), |(i, j)| a[[i / br, j / bc]] * b[[i % br, j % bc]])
}

/// Column-major vectorization.
pub fn vec_col_major(x: &Array2<f64>) -> Array1<f64> {
    x.t().iter().copied().collect()
}

/// Inverse of [`vec_col_major`].
pub fn unvec_col_major(v: &[f64], rows: usize, cols: usize) -> Result<Array2<f64>> {
    if v.len() != rows * cols {
        return invalid(format!("unvec: length {} is not {rows}x{cols}", v.len()));
    }
    Ok(Array2::from_shape_fn((rows, cols), |(i, j)| v[i + rows * j]))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn delta_gives_identity() {
        let c = circulant_dense(&GeneratingSequence::new(vec![1.0, 0.0, 0.0]).unwrap()).unwrap();
        assert_eq!(c, Array2::<f64>::eye(3));
    }

    #[test]
    fn unit_shift_gives_cyclic_shift() {
        let c = circulant_dense(&GeneratingSequence::new(vec![0.0, 1.0, 0.0]).unwrap()).unwrap();
        let expected = ndarray::arr2(&[[0.0, 0.0, 1.0], [1.0, 0.0, 0.0], [0.0, 1.0, 0.0]]);
        assert_eq!(c, expected);
    }

    #[test]
    fn refuses_large() {
        let seq = GeneratingSequence::delta(65).unwrap();
        assert!(circulant_dense(&seq).is_err());
    }

    #[test]
    fn vec_identity_on_random_instances() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..20 {
            let a = Array2::from_shape_fn((4, 4), |_| rng.random_range(-1.0..1.0));
            let b = Array2::from_shape_fn((4, 4), |_| rng.random_range(-1.0..1.0));
            let x = Array2::from_shape_fn((4, 4), |_| rng.random_range(-1.0..1.0));
            let lhs = vec_col_major(&a.dot(&x).dot(&b.t()));
            let rhs = kron(&b, &a).dot(&vec_col_major(&x));
            for (l, r) in lhs.iter().zip(rhs.iter()) {
                assert!((l - r).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn vec_round_trip() {
        let x = Array2::from_shape_fn((3, 2), |(i, j)| (i * 10 + j) as f64);
        let v = vec_col_major(&x);
        assert_eq!(v.to_vec(), vec![0.0, 10.0, 20.0, 1.0, 11.0, 21.0]);
        assert_eq!(unvec_col_major(v.as_slice().unwrap(), 3, 2).unwrap(), x);
    }
}
