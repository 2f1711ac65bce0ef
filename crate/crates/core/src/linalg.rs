// SPDX-License-Identifier: MIT OR Apache-2.0

//! Small dense kernels: Cholesky factorization, log-determinants, rank-one
//! factor updates and packed upper-triangle accumulation.
//!
//! Matrices are row-major `n x n` slices. Cholesky factors are lower
//! triangular; entries above the diagonal are left at zero.

/// Lower Cholesky factor of a symmetric positive definite matrix, or `None`
/// when a pivot is not strictly positive.
pub fn cholesky(a: &[f64], n: usize) -> Option<Vec<f64>> {
    debug_assert_eq!(a.len(), n * n);
    let mut l = vec![0.0; n * n];
    for j in 0..n {
        let mut diag = a[j * n + j];
        for k in 0..j {
            diag -= l[j * n + k] * l[j * n + k];
        }
        if !(diag > 0.0) || !diag.is_finite() {
            return None;
        }
        let pivot = diag.sqrt();
        l[j * n + j] = pivot;
        for i in j + 1..n {
            let mut s = a[i * n + j];
            for k in 0..j {
                s -= l[i * n + k] * l[j * n + k];
            }
            l[i * n + j] = s / pivot;
        }
    }
    Some(l)
}

/// `log det(L L^T)` from a lower Cholesky factor.
pub fn factor_logdet(l: &[f64], n: usize) -> f64 {
    2.0 * (0..n).map(|i| l[i * n + i].ln()).sum::<f64>()
}

pub fn logdet_spd(a: &[f64], n: usize) -> Option<f64> {
    cholesky(a, n).map(|l| factor_logdet(&l, n))
}

/// Replaces the factor `L` of `A` by the factor of `A + x x^T`.
///
/// `x` is used as scratch and is clobbered.
pub fn rank_one_update(l: &mut [f64], n: usize, x: &mut [f64]) {
    for k in 0..n {
        let lkk = l[k * n + k];
        let xk = x[k];
        let r = lkk.hypot(xk);
        let c = r / lkk;
        let s = xk / lkk;
        l[k * n + k] = r;
        for i in k + 1..n {
            let lik = (l[i * n + k] + s * x[i]) / c;
            l[i * n + k] = lik;
            x[i] = c * x[i] - s * lik;
        }
    }
}

/// Length of the packed upper triangle of an `n x n` matrix.
pub const fn packed_len(n: usize) -> usize {
    n * (n + 1) / 2
}

/// `acc += y y^T` on the packed upper triangle (row by row, `u <= v`).
#[inline]
pub fn add_outer_packed(acc: &mut [f64], y: &[f64]) {
    let mut idx = 0;
    for (u, &yu) in y.iter().enumerate() {
        for &yv in &y[u..] {
            acc[idx] += yu * yv;
            idx += 1;
        }
    }
}

/// Expands a packed upper triangle to a dense symmetric matrix.
pub fn unpack_symmetric(packed: &[f64], n: usize, scale: f64) -> Vec<f64> {
    let mut out = vec![0.0; n * n];
    let mut idx = 0;
    for u in 0..n {
        for v in u..n {
            let x = packed[idx] * scale;
            out[u * n + v] = x;
            out[v * n + u] = x;
            idx += 1;
        }
    }
    out
}

/// Multiplies a lower-triangular factor by a vector: `out = L z`.
pub fn lower_mul(l: &[f64], n: usize, z: &[f64], out: &mut [f64]) {
    for i in 0..n {
        out[i] = l[i * n..i * n + i + 1]
            .iter()
            .zip(z)
            .map(|(a, b)| a * b)
            .sum();
    }
}
