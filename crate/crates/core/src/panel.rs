// SPDX-License-Identifier: MIT OR Apache-2.0

//! Panel data model, standardization, log returns and autocorrelation
//! diagnostics.
//!
//! A [`SeriesPanel`] holds `n` node series observed at `T` time points as an
//! `n x T` matrix: row `i` is the series of node `i`, column `t` is the
//! cross-section observed at time `t`. Variances use the population divisor
//! `T`, so a standardized panel has a full-range covariance with an exactly
//! unit diagonal.

use ndarray::{Array2, ArrayView1, Axis};
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

use crate::error::{Error, Result};

/// Rows with population variance below this are rejected by [`standardize`].
pub const MIN_ROW_VARIANCE: f64 = 1e-14;

const MIN_NODES: usize = 2;
const MIN_TIMES: usize = 4;
const MIN_DW_TIMES: usize = 10;

#[derive(Debug, Clone, PartialEq)]
pub struct SeriesPanel {
    values: Array2<f64>,
    node_labels: Vec<String>,
    time_labels: Option<Vec<String>>,
    standardized: bool,
}

impl SeriesPanel {
    /// Builds an unstandardized panel from an `n x T` matrix.
    pub fn new(values: Array2<f64>, node_labels: Vec<String>) -> Result<Self> {
        let (n, t) = values.dim();
        if n < MIN_NODES {
            return Err(Error::InvalidPanel(format!(
                "need at least {MIN_NODES} nodes, got {n}"
            )));
        }
        if t < MIN_TIMES {
            return Err(Error::InvalidPanel(format!(
                "need at least {MIN_TIMES} time points, got {t}"
            )));
        }
        if node_labels.len() != n {
            return Err(Error::InvalidPanel(format!(
                "{} node labels for {n} nodes",
                node_labels.len()
            )));
        }
        if let Some(((i, j), _)) = values.indexed_iter().find(|(_, v)| !v.is_finite()) {
            return Err(Error::InvalidPanel(format!(
                "non-finite value at node {}, time {}",
                i + 1,
                j + 1
            )));
        }
        Ok(Self {
            values,
            node_labels,
            time_labels: None,
            standardized: false,
        })
    }

    /// Builds a panel from node rows, labelling nodes `node1..noden`.
    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let n = rows.len();
        let t = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != t) {
            return Err(Error::InvalidPanel("rows differ in length".into()));
        }
        let flat: Vec<f64> = rows.iter().flatten().copied().collect();
        let values = Array2::from_shape_vec((n, t), flat)
            .map_err(|e| Error::InvalidPanel(e.to_string()))?;
        Self::new(values, default_labels(n))
    }

    pub fn with_time_labels(mut self, labels: Vec<String>) -> Result<Self> {
        if labels.len() != self.n_times() {
            return Err(Error::InvalidPanel(format!(
                "{} time labels for {} time points",
                labels.len(),
                self.n_times()
            )));
        }
        self.time_labels = Some(labels);
        Ok(self)
    }

    pub fn n_nodes(&self) -> usize {
        self.values.nrows()
    }

    pub fn n_times(&self) -> usize {
        self.values.ncols()
    }

    pub fn values(&self) -> &Array2<f64> {
        &self.values
    }

    pub fn node_labels(&self) -> &[String] {
        &self.node_labels
    }

    pub fn time_labels(&self) -> Option<&[String]> {
        self.time_labels.as_deref()
    }

    pub fn is_standardized(&self) -> bool {
        self.standardized
    }

    pub fn row(&self, node: usize) -> ArrayView1<'_, f64> {
        self.values.row(node)
    }

    /// Columns `start..=end` (1-based) as a fresh unstandardized panel.
    pub fn segment(&self, start: usize, end: usize) -> Result<Self> {
        let t = self.n_times();
        if start < 1 || start > end || end > t {
            return Err(Error::BadRange {
                start,
                end,
                len: t,
            });
        }
        let values = self
            .values
            .slice(ndarray::s![.., start - 1..end])
            .to_owned();
        let mut out = Self::new(values, self.node_labels.clone())?;
        if let Some(labels) = &self.time_labels {
            out.time_labels = Some(labels[start - 1..end].to_vec());
        }
        Ok(out)
    }

    /// Reorders rows so that row `i` of the result is row `perm[i]` of `self`.
    pub fn permute_rows(&self, perm: &[usize]) -> Result<Self> {
        let n = self.n_nodes();
        let mut seen = vec![false; n];
        if perm.len() != n || perm.iter().any(|&p| p >= n || std::mem::replace(&mut seen[p], true)) {
            return Err(Error::InvalidPanel("not a permutation of the rows".into()));
        }
        let values = self.values.select(Axis(0), perm);
        let node_labels = perm.iter().map(|&p| self.node_labels[p].clone()).collect();
        Ok(Self {
            values,
            node_labels,
            time_labels: self.time_labels.clone(),
            standardized: self.standardized,
        })
    }

    /// Same labels, new values of identical shape. Used by resamplers.
    pub(crate) fn replace_values(&self, values: Array2<f64>) -> Self {
        debug_assert_eq!(values.dim(), self.values.dim());
        Self {
            values,
            node_labels: self.node_labels.clone(),
            time_labels: self.time_labels.clone(),
            standardized: false,
        }
    }

    /// As [`Self::replace_values`] for values already standardized by row.
    pub(crate) fn replace_standardized_values(&self, values: Array2<f64>) -> Self {
        Self {
            standardized: true,
            ..self.replace_values(values)
        }
    }
}

pub(crate) fn default_labels(n: usize) -> Vec<String> {
    (1..=n).map(|i| format!("node{i}")).collect()
}

/// Population mean and variance of a series.
pub fn mean_and_variance(xs: &[f64]) -> (f64, f64) {
    let len = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / len;
    let var = xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / len;
    (mean, var)
}

/// Centers and scales one series to mean 0 and population variance 1.
///
/// Returns `None` for a (near) constant series.
pub fn standardize_series(xs: &[f64]) -> Option<Vec<f64>> {
    let (mean, var) = mean_and_variance(xs);
    if !(var >= MIN_ROW_VARIANCE) {
        return None;
    }
    let scale = var.sqrt().recip();
    Some(xs.iter().map(|x| (x - mean) * scale).collect())
}

/// In-place row standardization of a raw `n x T` matrix.
pub(crate) fn standardize_in_place(values: &mut Array2<f64>) -> Result<()> {
    let t = values.ncols() as f64;
    for (node, mut row) in values.axis_iter_mut(Axis(0)).enumerate() {
        let mean = row.sum() / t;
        let var = row.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / t;
        if !(var >= MIN_ROW_VARIANCE) {
            return Err(Error::ConstantRow { node });
        }
        let scale = var.sqrt().recip();
        row.mapv_inplace(|x| (x - mean) * scale);
    }
    Ok(())
}

/// Standardizes every row to temporal mean 0 and unit population variance.
///
/// Fails with [`Error::ConstantRow`] naming the first degenerate node
/// (0-based), which the caller is expected to drop.
pub fn standardize(panel: &SeriesPanel) -> Result<SeriesPanel> {
    let mut values = panel.values.clone();
    standardize_in_place(&mut values)?;
    Ok(SeriesPanel {
        values,
        node_labels: panel.node_labels.clone(),
        time_labels: panel.time_labels.clone(),
        standardized: true,
    })
}

/// Log differences `log p[t+1] - log p[t]` of a strictly positive series.
///
/// On failure returns the 0-based index of the first non-positive price.
pub fn log_return_series(prices: &[f64]) -> std::result::Result<Vec<f64>, usize> {
    if let Some(pos) = prices.iter().position(|&p| !(p > 0.0)) {
        return Err(pos);
    }
    Ok(prices
        .windows(2)
        .map(|w| w[1].ln() - w[0].ln())
        .collect())
}

/// Per-node log returns; the result has one column fewer than the input.
///
/// Time labels, if present, are shifted so each return carries the label of
/// the later price.
pub fn log_returns(prices: &SeriesPanel) -> Result<SeriesPanel> {
    let (n, t) = prices.values.dim();
    let mut out = Array2::zeros((n, t - 1));
    for (node, row) in prices.values.axis_iter(Axis(0)).enumerate() {
        let row = row.to_vec();
        let returns = log_return_series(&row).map_err(|pos| Error::NonPositivePrice {
            node,
            time: pos + 1,
        })?;
        out.row_mut(node).assign(&ArrayView1::from(&returns));
    }
    let mut panel = SeriesPanel::new(out, prices.node_labels.clone())?;
    if let Some(labels) = &prices.time_labels {
        panel.time_labels = Some(labels[1..].to_vec());
    }
    Ok(panel)
}

/// Durbin-Watson statistics and lag-1 autocorrelations, one entry per node.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AutocorrDiagnostic {
    pub per_node_dw: Vec<f64>,
    pub per_node_r1: Vec<f64>,
    /// Two-sided normal-approximation p-values of `r1 * sqrt(T)`.
    pub per_node_p: Vec<f64>,
    pub any_significant: bool,
    pub alpha_used: f64,
}

/// `(DW, r1)` for a mean-zero series.
pub fn durbin_watson_series(ys: &[f64]) -> (f64, f64) {
    let energy: f64 = ys.iter().map(|y| y * y).sum();
    let (mut diff_sq, mut lag1) = (0.0, 0.0);
    for w in ys.windows(2) {
        diff_sq += (w[1] - w[0]) * (w[1] - w[0]);
        lag1 += w[1] * w[0];
    }
    (diff_sq / energy, lag1 / energy)
}

/// Per-node Durbin-Watson check with a Bonferroni-corrected significance flag.
pub fn durbin_watson(panel: &SeriesPanel, alpha: f64) -> Result<AutocorrDiagnostic> {
    if !panel.standardized {
        return Err(Error::NotStandardized);
    }
    let (n, t) = panel.values.dim();
    if t < MIN_DW_TIMES {
        return Err(Error::InvalidPanel(format!(
            "Durbin-Watson needs at least {MIN_DW_TIMES} time points, got {t}"
        )));
    }
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::InvalidConfig(format!("alpha {alpha} not in (0,1)")));
    }
    let normal = Normal::standard();
    let threshold = alpha / n as f64;
    let mut diag = AutocorrDiagnostic {
        per_node_dw: Vec::with_capacity(n),
        per_node_r1: Vec::with_capacity(n),
        per_node_p: Vec::with_capacity(n),
        any_significant: false,
        alpha_used: alpha,
    };
    for row in panel.values.axis_iter(Axis(0)) {
        let row = row.to_vec();
        let (dw, r1) = durbin_watson_series(&row);
        let z = r1 * (t as f64).sqrt();
        let p = 2.0 * (1.0 - normal.cdf(z.abs()));
        diag.any_significant |= p < threshold;
        diag.per_node_dw.push(dw);
        diag.per_node_r1.push(r1);
        diag.per_node_p.push(p);
    }
    Ok(diag)
}
