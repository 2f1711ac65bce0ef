// SPDX-License-Identifier: MIT OR Apache-2.0

//! Null expectation of the squared Frobenius distance.
//!
//! For i.i.d. columns `Y_t ~ N(0, Sigma)` the split statistic satisfies
//!
//! ```text
//! E[d(k)] = (1/k + 1/(T-k)) (tr(Sigma^2) + (tr Sigma)^2)
//! ```
//!
//! so the raw profile is U-shaped with its minimum at `T/2`. The Monte Carlo
//! routines check this on raw, unstandardized draws.

use nalgebra::{DMatrix, SymmetricEigen};
use ndarray::Array2;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg;
use crate::metrics::{CovMatrix, DistanceMetricKind, ProfileEngine};
use crate::streams::stream;

/// Eigenvalues below this are clipped up to it by the sampling fallback.
pub const EIGEN_CLIP: f64 = 1e-12;

fn traces(sigma: &CovMatrix) -> (f64, f64) {
    let v = sigma.values();
    let tr = v.diag().sum();
    let tr2 = v.iter().map(|x| x * x).sum();
    (tr2, tr * tr)
}

/// Closed-form `E[d(k)]` for `2 <= k <= T-1`.
pub fn expected_null_distance(sigma: &CovMatrix, len: usize, k: usize) -> Result<f64> {
    if k < 2 || k + 1 > len {
        return Err(Error::BadRange { start: k, end: k, len });
    }
    let (tr2, trsq) = traces(sigma);
    Ok((1.0 / k as f64 + 1.0 / (len - k) as f64) * (tr2 + trsq))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NullExpectationCurve {
    pub len: usize,
    pub trace_sigma_sq: f64,
    pub trace_sq: f64,
    pub k_values: Vec<usize>,
    pub values: Vec<f64>,
}

impl NullExpectationCurve {
    pub fn new(sigma: &CovMatrix, len: usize) -> Result<Self> {
        if len < 4 {
            return Err(Error::InsufficientLength { len, delta: 1 });
        }
        let (tr2, trsq) = traces(sigma);
        let k_values: Vec<usize> = (2..len).collect();
        let values = k_values
            .iter()
            .map(|&k| (1.0 / k as f64 + 1.0 / (len - k) as f64) * (tr2 + trsq))
            .collect();
        Ok(Self {
            len,
            trace_sigma_sq: tr2,
            trace_sq: trsq,
            k_values,
            values,
        })
    }

    /// Candidate with the smallest expectation (smallest `k` on ties).
    pub fn argmin(&self) -> usize {
        let mut best = 0;
        for i in 1..self.values.len() {
            if self.values[i] < self.values[best] - 1e-12 * self.values[best] {
                best = i;
            }
        }
        self.k_values[best]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct McEstimate {
    pub mean: f64,
    pub std_error: f64,
}

/// Dense sampling factor `F` with `F F^T = Sigma`: the Cholesky factor when it
/// exists, otherwise `Q diag(sqrt(max(lambda, EIGEN_CLIP)))` for positive
/// semidefinite input.
pub fn sampling_factor(sigma: &CovMatrix) -> Result<Vec<f64>> {
    let n = sigma.order();
    let dense = sigma.dense();
    if let Some(l) = linalg::cholesky(&dense, n) {
        return Ok(l);
    }
    let eig = SymmetricEigen::new(DMatrix::from_row_slice(n, n, &dense));
    let scale = eig.eigenvalues.iter().fold(0f64, |m, x| m.max(x.abs()));
    if eig.eigenvalues.iter().any(|&l| l < -1e-8 * scale.max(1.0)) {
        return Err(Error::CholeskyFailure);
    }
    let mut f = vec![0.0; n * n];
    for j in 0..n {
        let root = eig.eigenvalues[j].max(EIGEN_CLIP).sqrt();
        for i in 0..n {
            f[i * n + j] = eig.eigenvectors[(i, j)] * root;
        }
    }
    Ok(f)
}

fn draw_raw<R: Rng + ?Sized>(factor: &[f64], n: usize, len: usize, rng: &mut R) -> Array2<f64> {
    let mut out = Array2::zeros((n, len));
    let mut z = vec![0.0; n];
    for t in 0..len {
        z.iter_mut().for_each(|x| *x = StandardNormal.sample(rng));
        for i in 0..n {
            out[[i, t]] = factor[i * n..(i + 1) * n].iter().zip(&z).map(|(a, b)| a * b).sum();
        }
    }
    out
}

fn mean_and_se(xs: &[f64]) -> McEstimate {
    let m = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / m;
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (m - 1.0);
    McEstimate {
        mean,
        std_error: (var / m).sqrt(),
    }
}

/// Monte Carlo estimate of `E[d(k)]` from `reps` raw panels.
pub fn monte_carlo_null_distance<R: Rng + ?Sized>(
    sigma: &CovMatrix,
    len: usize,
    k: usize,
    reps: usize,
    rng: &mut R,
) -> Result<McEstimate> {
    expected_null_distance(sigma, len, k)?;
    if reps < 2 {
        return Err(Error::InvalidConfig("need at least 2 replications".into()));
    }
    let n = sigma.order();
    let factor = sampling_factor(sigma)?;
    let draws: Vec<f64> = (0..reps)
        .map(|_| {
            let y = draw_raw(&factor, n, len, rng);
            let left = y.slice(ndarray::s![.., ..k]);
            let right = y.slice(ndarray::s![.., k..]);
            let s1 = left.dot(&left.t()) / k as f64;
            let s2 = right.dot(&right.t()) / (len - k) as f64;
            (s1 - s2).iter().map(|x| x * x).sum()
        })
        .collect();
    Ok(mean_and_se(&draws))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CurveRow {
    pub k: usize,
    pub analytic: f64,
    pub mc_mean: f64,
    pub mc_se: f64,
}

/// Analytic curve and Monte Carlo profile means for every `k` in `2..T-1`.
/// Replicate `r` uses stream `r` of `seed`.
pub fn monte_carlo_curve(sigma: &CovMatrix, len: usize, reps: usize, seed: u64) -> Result<Vec<CurveRow>> {
    let curve = NullExpectationCurve::new(sigma, len)?;
    if reps < 2 {
        return Err(Error::InvalidConfig("need at least 2 replications".into()));
    }
    let n = sigma.order();
    let factor = sampling_factor(sigma)?;
    let m = curve.k_values.len();
    let profiles: Vec<Vec<f64>> = (0..reps)
        .into_par_iter()
        .map_init(
            || ProfileEngine::new(n, len, 1, DistanceMetricKind::FrobeniusSq),
            |engine, r| {
                let engine = engine.as_mut().map_err(|e| e.clone())?;
                let y = draw_raw(&factor, n, len, &mut stream(seed, r as u64));
                let mut out = vec![0.0; m];
                engine.compute(&[&y], &mut out)?;
                Ok(out)
            },
        )
        .collect::<Result<_>>()?;
    Ok((0..m)
        .map(|i| {
            let col: Vec<f64> = profiles.iter().map(|p| p[i]).collect();
            let est = mean_and_se(&col);
            CurveRow {
                k: curve.k_values[i],
                analytic: curve.values[i],
                mc_mean: est.mean,
                mc_se: est.std_error,
            }
        })
        .collect())
}

pub fn curve_to_csv(rows: &[CurveRow]) -> String {
    let mut out = String::from("k,analytic,mc_mean,mc_se\n");
    for r in rows {
        out.push_str(&format!("{},{},{},{}\n", r.k, r.analytic, r.mc_mean, r.mc_se));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use ndarray::array;
    use proptest::prelude::*;

    #[test]
    fn identity_examples() {
        let s = CovMatrix::identity(20);
        assert_relative_eq!(expected_null_distance(&s, 200, 100).unwrap(), 8.4, epsilon = 1e-12);
        let edge = expected_null_distance(&s, 200, 10).unwrap();
        assert_relative_eq!(edge, (0.1 + 1.0 / 190.0) * 420.0, epsilon = 1e-12);
        assert!((edge - 44.21).abs() < 0.005);
    }

    #[test]
    fn bad_k_rejected() {
        let s = CovMatrix::identity(2);
        assert!(matches!(expected_null_distance(&s, 10, 1), Err(Error::BadRange { .. })));
        assert!(matches!(expected_null_distance(&s, 10, 10), Err(Error::BadRange { .. })));
        assert!(expected_null_distance(&s, 10, 9).is_ok());
    }

    #[test]
    fn curve_minimum_at_half() {
        let c = NullExpectationCurve::new(&CovMatrix::identity(5), 101).unwrap();
        assert_eq!(c.argmin(), 50);
        let c = NullExpectationCurve::new(&CovMatrix::identity(5), 100).unwrap();
        assert_eq!(c.argmin(), 50);
    }

    proptest! {
        #[test]
        fn symmetric_in_k(len in 4usize..300, frac in 0.0f64..1.0) {
            let s = CovMatrix::new(array![[2.0, 0.3], [0.3, 1.0]], (0, 0)).unwrap();
            let k = 2 + ((len - 3) as f64 * frac) as usize;
            let k = k.min(len - 1);
            let a = expected_null_distance(&s, len, k).unwrap();
            let b = expected_null_distance(&s, len, len - k).unwrap();
            prop_assert!((a - b).abs() <= 1e-12 * a);
        }

        #[test]
        fn scales_with_c_squared(c in 0.1f64..10.0, k in 2usize..49) {
            let base = CovMatrix::new(array![[1.0, 0.4], [0.4, 3.0]], (0, 0)).unwrap();
            let scaled = CovMatrix::new(base.values() * c, (0, 0)).unwrap();
            let a = expected_null_distance(&base, 50, k).unwrap();
            let b = expected_null_distance(&scaled, 50, k).unwrap();
            prop_assert!((b - c * c * a).abs() <= 1e-10 * b);
        }
    }

    #[test]
    fn monte_carlo_within_three_se() {
        let s = CovMatrix::new(array![[2.0, 0.0], [0.0, 2.0]], (0, 0)).unwrap();
        let mut rng = stream(17, 0);
        for k in [5, 25, 50] {
            let est = monte_carlo_null_distance(&s, 100, k, 4000, &mut rng).unwrap();
            let exact = expected_null_distance(&s, 100, k).unwrap();
            assert!((est.mean - exact).abs() < 3.0 * est.std_error, "k={k}: {est:?} vs {exact}");
        }
    }

    #[test]
    fn curve_matches_pointwise_estimator() {
        let s = CovMatrix::identity(3);
        let rows = monte_carlo_curve(&s, 30, 3000, 8).unwrap();
        assert_eq!(rows.len(), 28);
        assert_eq!((rows[0].k, rows[27].k), (2, 29));
        let outside = rows
            .iter()
            .filter(|r| (r.mc_mean - r.analytic).abs() > 3.0 * r.mc_se)
            .count();
        assert!(outside <= 2, "{outside} rows outside 3 SE");
        assert!(curve_to_csv(&rows).starts_with("k,analytic,mc_mean,mc_se\n2,"));
    }

    #[test]
    fn singular_sigma_uses_eigen_fallback() {
        let s = CovMatrix::new(array![[1.0, 1.0], [1.0, 1.0]], (0, 0)).unwrap();
        let f = sampling_factor(&s).unwrap();
        let recon = [f[0] * f[0] + f[1] * f[1], f[0] * f[2] + f[1] * f[3], f[2] * f[2] + f[3] * f[3]];
        assert_relative_eq!(recon[0], 1.0, epsilon = 1e-9);
        assert_relative_eq!(recon[1], 1.0, epsilon = 1e-9);
        assert_relative_eq!(recon[2], 1.0, epsilon = 1e-9);
        let est = monte_carlo_null_distance(&s, 40, 20, 500, &mut stream(1, 0)).unwrap();
        assert!(est.mean.is_finite());
        let bad = CovMatrix::new(array![[1.0, 2.0], [2.0, 1.0]], (0, 0)).unwrap();
        assert_eq!(sampling_factor(&bad), Err(Error::CholeskyFailure));
    }
}
