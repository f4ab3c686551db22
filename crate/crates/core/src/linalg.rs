//! Tiny dense helpers for per-point metric algebra (n ≤ 8 or so).

use crate::scalar::Real;

/// Cholesky factor of a symmetric matrix (row-major, lower triangle used).
/// `None` unless strictly positive definite.
pub fn cholesky<T: Real>(a: &[T], n: usize) -> Option<Vec<T>> {
    let mut l = vec![T::zero(); n * n];
    for i in 0..n {
        for j in 0..=i {
            let mut sum = a[i * n + j];
            for k in 0..j {
                sum = sum - l[i * n + k] * l[j * n + k];
            }
            if i == j {
                if !(sum > T::zero()) || !sum.is_finite() {
                    return None;
                }
                l[i * n + i] = sum.sqrt();
            } else {
                l[i * n + j] = sum / l[j * n + j];
            }
        }
    }
    Some(l)
}

/// Inverse and `sqrt(det)` of a symmetric positive definite matrix.
pub fn spd_inverse<T: Real>(a: &[T], n: usize) -> Option<(Vec<T>, T)> {
    let l = cholesky(a, n)?;
    let sqrt_det = (0..n).fold(T::one(), |acc, i| acc * l[i * n + i]);
    // Solve L Lᵀ X = I column by column.
    let mut inv = vec![T::zero(); n * n];
    let mut y = vec![T::zero(); n];
    for c in 0..n {
        for i in 0..n {
            let mut s = if i == c { T::one() } else { T::zero() };
            for k in 0..i {
                s = s - l[i * n + k] * y[k];
            }
            y[i] = s / l[i * n + i];
        }
        for i in (0..n).rev() {
            let mut s = y[i];
            for k in i + 1..n {
                s = s - l[k * n + i] * inv[k * n + c];
            }
            inv[i * n + c] = s / l[i * n + i];
        }
    }
    Some((inv, sqrt_det))
}

pub fn is_symmetric<T: Real>(a: &[T], n: usize) -> bool {
    (0..n).all(|i| {
        (0..i).all(|j| {
            let (x, y) = (a[i * n + j], a[j * n + i]);
            (x - y).abs() <= T::epsilon() * T::from_f64(64.0).unwrap() * (x.abs() + y.abs() + T::one())
        })
    })
}
