// SPDX-License-Identifier: MIT OR Apache-2.0

//! Resampling under the no-change hypothesis.
//!
//! Two schemes are provided. [`iid_resample`] draws whole columns of the
//! panel with replacement. The sieve bootstrap fits an AR(s) filter to every
//! node by Yule-Walker, resamples the whitened residual columns jointly
//! (keeping the contemporaneous cross-node covariance intact) and runs the
//! filter forward again, seeded with the first `s` observed columns.
//!
//! Both resamplers return raw panels. [`resample_standardized`] is the form
//! the detector uses: it resamples and then re-standardizes every row.

use ndarray::{Array2, Axis};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::panel::{self, SeriesPanel};

const CV_FOLDS: usize = 5;
const TOEPLITZ_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BootstrapMode {
    Iid,
    Sieve(usize),
}

impl BootstrapMode {
    /// Orders above `T/4` are rejected.
    pub fn validate(self, len: usize) -> Result<()> {
        match self {
            Self::Sieve(s) if s > len / 4 => Err(Error::InvalidConfig(format!(
                "sieve order {s} exceeds T/4 = {}",
                len / 4
            ))),
            _ => Ok(()),
        }
    }
}

/// Per-node autoregressive fit.
#[derive(Debug, Clone, PartialEq)]
pub struct ArFit {
    order: usize,
    /// `coefficients[i][k-1]` multiplies lag `k` of node `i`.
    coefficients: Vec<Vec<f64>>,
    /// `n x (T - order)`; column `j` is the residual at time `order + j`.
    residuals: Array2<f64>,
    len: usize,
}

impl ArFit {
    pub fn order(&self) -> usize {
        self.order
    }

    pub fn coefficients(&self) -> &[Vec<f64>] {
        &self.coefficients
    }

    pub fn residuals(&self) -> &Array2<f64> {
        &self.residuals
    }

    /// A fit with prescribed coefficients and residuals. Residuals are used
    /// as given (no centering).
    pub fn from_parts(coefficients: Vec<Vec<f64>>, residuals: Array2<f64>) -> Result<Self> {
        let order = coefficients.first().map_or(0, Vec::len);
        if coefficients.iter().any(|c| c.len() != order) || coefficients.len() != residuals.nrows() {
            return Err(Error::FitMismatch("ragged coefficients".into()));
        }
        let len = residuals.ncols() + order;
        Ok(Self {
            order,
            coefficients,
            residuals,
            len,
        })
    }

    fn check_panel(&self, panel: &Array2<f64>) -> Result<()> {
        if panel.nrows() != self.coefficients.len() || panel.ncols() != self.len {
            return Err(Error::FitMismatch(format!(
                "fit is for {}x{}, panel is {}x{}",
                self.coefficients.len(),
                self.len,
                panel.nrows(),
                panel.ncols()
            )));
        }
        Ok(())
    }
}

/// Biased sample autocovariances `gamma_0..=gamma_s` of a mean-zero series.
pub fn autocovariances(ys: &[f64], s: usize) -> Vec<f64> {
    let len = ys.len() as f64;
    (0..=s)
        .map(|h| ys[h..].iter().zip(ys).map(|(a, b)| a * b).sum::<f64>() / len)
        .collect()
}

/// Solves the order-`s` Yule-Walker system for autocovariances
/// `gamma_0..=gamma_s` with the Levinson-Durbin recursion.
///
/// Returns the coefficients and the innovation variance, or `None` when
/// the Toeplitz matrix is numerically singular.
pub fn solve_yule_walker(gamma: &[f64]) -> Option<(Vec<f64>, f64)> {
    let s = gamma.len() - 1;
    let mut err = gamma[0];
    if !(err > 0.0) {
        return None;
    }
    let scale = err;
    let mut phi: Vec<f64> = Vec::with_capacity(s);
    for m in 1..=s {
        let acc = gamma[m] - phi.iter().enumerate().map(|(j, p)| p * gamma[m - 1 - j]).sum::<f64>();
        let kappa = acc / err;
        let prev = phi.clone();
        for j in 0..m - 1 {
            phi[j] = prev[j] - kappa * prev[m - 2 - j];
        }
        phi.push(kappa);
        err *= 1.0 - kappa * kappa;
        if !(err > TOEPLITZ_TOL * scale) {
            return None;
        }
    }
    Some((phi, err))
}

/// Fits an AR(`s`) filter to every node and computes the residuals
/// `y[j] - sum_k phi[k] y[j-k]` for `j > s`. For `s > 0` residuals are
/// centered per node; for `s = 0` they are the observations themselves.
pub fn fit_ar_yule_walker(panel: &SeriesPanel, s: usize) -> Result<ArFit> {
    if !panel.is_standardized() {
        return Err(Error::NotStandardized);
    }
    let (n, len) = panel.values().dim();
    BootstrapMode::Sieve(s).validate(len)?;
    if s == 0 {
        return Ok(ArFit {
            order: 0,
            coefficients: vec![Vec::new(); n],
            residuals: panel.values().clone(),
            len,
        });
    }
    let mut coefficients = Vec::with_capacity(n);
    let mut residuals = Array2::zeros((n, len - s));
    for (node, row) in panel.values().axis_iter(Axis(0)).enumerate() {
        let ys = row.to_vec();
        let (phi, _) =
            solve_yule_walker(&autocovariances(&ys, s)).ok_or(Error::SingularToeplitz { node })?;
        let mut res: Vec<f64> = (s..len)
            .map(|j| ys[j] - phi.iter().enumerate().map(|(k, p)| p * ys[j - 1 - k]).sum::<f64>())
            .collect();
        let mean = res.iter().sum::<f64>() / res.len() as f64;
        res.iter_mut().for_each(|e| *e -= mean);
        residuals
            .row_mut(node)
            .iter_mut()
            .zip(res)
            .for_each(|(dst, e)| *dst = e);
        coefficients.push(phi);
    }
    Ok(ArFit {
        order: s,
        coefficients,
        residuals,
        len,
    })
}

fn iid_into<R: Rng + ?Sized>(source: &Array2<f64>, out: &mut Array2<f64>, rng: &mut R) {
    let len = source.ncols();
    for j in 0..len {
        let pick = rng.random_range(0..len);
        out.column_mut(j).assign(&source.column(pick));
    }
}

fn sieve_into<R: Rng + ?Sized>(
    source: &Array2<f64>,
    fit: &ArFit,
    out: &mut Array2<f64>,
    rng: &mut R,
) {
    let (n, len) = source.dim();
    let s = fit.order;
    let m = fit.residuals.ncols();
    for j in 0..s {
        out.column_mut(j).assign(&source.column(j));
    }
    for j in s..len {
        let pick = rng.random_range(0..m);
        for i in 0..n {
            let ar: f64 = fit.coefficients[i]
                .iter()
                .enumerate()
                .map(|(k, p)| p * out[[i, j - 1 - k]])
                .sum();
            out[[i, j]] = ar + fit.residuals[[i, pick]];
        }
    }
}

/// Draws `T` columns uniformly with replacement. The result is not
/// re-standardized, so every output column is an exact input column.
pub fn iid_resample<R: Rng + ?Sized>(panel: &SeriesPanel, rng: &mut R) -> SeriesPanel {
    let mut out = Array2::zeros(panel.values().dim());
    iid_into(panel.values(), &mut out, rng);
    panel.replace_values(out)
}

/// Regenerates the panel from jointly resampled residual columns.
///
/// With `s = 0` this consumes the random stream exactly like
/// [`iid_resample`] and produces the same panel.
pub fn sieve_resample<R: Rng + ?Sized>(
    panel: &SeriesPanel,
    fit: &ArFit,
    rng: &mut R,
) -> Result<SeriesPanel> {
    fit.check_panel(panel.values())?;
    let mut out = Array2::zeros(panel.values().dim());
    sieve_into(panel.values(), fit, &mut out, rng);
    Ok(panel.replace_values(out))
}

/// A resampling scheme bound to one observed panel.
#[derive(Debug, Clone)]
pub enum Resampler {
    Iid,
    Sieve(ArFit),
}

impl Resampler {
    pub fn new(panel: &SeriesPanel, mode: BootstrapMode) -> Result<Self> {
        match mode {
            BootstrapMode::Iid => Ok(Self::Iid),
            BootstrapMode::Sieve(s) => fit_ar_yule_walker(panel, s).map(Self::Sieve),
        }
    }

    /// Raw resample of `source` written into `out`, then re-standardized.
    pub(crate) fn draw_standardized<R: Rng + ?Sized>(
        &self,
        source: &Array2<f64>,
        out: &mut Array2<f64>,
        rng: &mut R,
    ) -> Result<()> {
        match self {
            Self::Iid => iid_into(source, out, rng),
            Self::Sieve(fit) => {
                fit.check_panel(source)?;
                sieve_into(source, fit, out, rng);
            }
        }
        panel::standardize_in_place(out)
    }
}

/// One bootstrap replicate as the detector sees it: resampled, then
/// re-standardized.
pub fn resample_standardized<R: Rng + ?Sized>(
    panel: &SeriesPanel,
    resampler: &Resampler,
    rng: &mut R,
) -> Result<SeriesPanel> {
    let mut out = Array2::zeros(panel.values().dim());
    resampler.draw_standardized(panel.values(), &mut out, rng)?;
    Ok(panel.replace_standardized_values(out))
}

fn fold_bounds(len: usize) -> Vec<(usize, usize)> {
    (0..CV_FOLDS)
        .map(|f| (f * len / CV_FOLDS, (f + 1) * len / CV_FOLDS))
        .collect()
}

/// One-step-ahead prediction MSE of an AR(`s`) fit on the data outside
/// `fold`, evaluated inside `fold`. Lag pairs are only used when both ends
/// are in the training set, so the held-out gap never creates spurious
/// lags.
fn fold_mse(ys: &[f64], s: usize, fold: (usize, usize)) -> f64 {
    let in_train = |t: usize| t < fold.0 || t >= fold.1;
    let train_count = ys.len() - (fold.1 - fold.0);
    let phi = if s == 0 {
        Vec::new()
    } else {
        let gamma: Vec<f64> = (0..=s)
            .map(|h| {
                (h..ys.len())
                    .filter(|&t| in_train(t) && in_train(t - h))
                    .map(|t| ys[t] * ys[t - h])
                    .sum::<f64>()
                    / train_count as f64
            })
            .collect();
        match solve_yule_walker(&gamma) {
            Some((phi, _)) => phi,
            None => return f64::INFINITY,
        }
    };
    let start = fold.0.max(s);
    if start >= fold.1 {
        return f64::INFINITY;
    }
    let sse: f64 = (start..fold.1)
        .map(|t| {
            let pred: f64 = phi.iter().enumerate().map(|(k, p)| p * ys[t - 1 - k]).sum();
            (ys[t] - pred).powi(2)
        })
        .sum();
    sse / (fold.1 - start) as f64
}

/// Cross-validated one-step prediction MSE for each order `0..=s_max`,
/// averaged over nodes and five contiguous folds.
pub fn ar_order_cv_errors(panel: &SeriesPanel, s_max: usize) -> Result<Vec<f64>> {
    let (n, len) = panel.values().dim();
    if s_max > len / 4 {
        return Err(Error::InvalidConfig(format!(
            "maximum AR order {s_max} exceeds T/4 = {}",
            len / 4
        )));
    }
    let folds = fold_bounds(len);
    let rows: Vec<Vec<f64>> = panel.values().axis_iter(Axis(0)).map(|r| r.to_vec()).collect();
    Ok((0..=s_max)
        .map(|s| {
            let total: f64 = rows
                .iter()
                .flat_map(|ys| folds.iter().map(move |&f| fold_mse(ys, s, f)))
                .sum();
            total / (n * CV_FOLDS) as f64
        })
        .collect())
}

/// AR order in `0..=s_max` minimizing cross-validated prediction error;
/// ties go to the smaller order.
pub fn select_ar_order(panel: &SeriesPanel, s_max: usize) -> Result<usize> {
    let errors = ar_order_cv_errors(panel, s_max)?;
    let mut best = 0;
    for (s, &e) in errors.iter().enumerate() {
        if e < errors[best] {
            best = s;
        }
    }
    Ok(best)
}
