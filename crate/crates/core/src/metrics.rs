// SPDX-License-Identifier: MIT OR Apache-2.0

//! Segment covariances, covariance distances and scan profiles.
//!
//! For a standardized panel `Y` the segment covariance over columns
//! `i..=j` is `S(i,j) = sum_t Y_t Y_t^T / (j - i + 1)`. A distance profile
//! evaluates `d(k) = dist(S(1,k), S(k+1,T))` at every candidate split
//! `k` in `1+delta ..= T-delta`.
//!
//! Profiles are computed from running sums of column outer products, so a
//! full profile costs `O(n^2 T)` rather than `O(n^2 T^2)`. The
//! likelihood-ratio metric additionally keeps Cholesky factors of the left
//! and right running sums and advances them with rank-one updates.

use std::fmt;
use std::str::FromStr;

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg;
use crate::panel::SeriesPanel;

const SYMMETRY_TOL: f64 = 1e-10;

/// Covariance estimate of one time segment.
#[derive(Debug, Clone, PartialEq)]
pub struct CovMatrix {
    values: Array2<f64>,
    segment: (usize, usize),
}

impl CovMatrix {
    /// Wraps a symmetric matrix. `segment` is the inclusive 1-based column
    /// range it summarizes.
    pub fn new(values: Array2<f64>, segment: (usize, usize)) -> Result<Self> {
        let (rows, cols) = values.dim();
        if rows != cols || rows == 0 {
            return Err(Error::InvalidConfig(format!(
                "covariance must be square, got {rows}x{cols}"
            )));
        }
        for u in 0..rows {
            for v in u + 1..rows {
                let (a, b) = (values[[u, v]], values[[v, u]]);
                if (a - b).abs() > SYMMETRY_TOL * (1.0 + a.abs().max(b.abs())) {
                    return Err(Error::InvalidConfig(format!(
                        "covariance not symmetric at ({u},{v})"
                    )));
                }
            }
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidConfig("non-finite covariance entry".into()));
        }
        Ok(Self { values, segment })
    }

    pub fn identity(n: usize) -> Self {
        Self {
            values: Array2::eye(n),
            segment: (0, 0),
        }
    }

    pub fn order(&self) -> usize {
        self.values.nrows()
    }

    pub fn values(&self) -> &Array2<f64> {
        &self.values
    }

    pub fn segment(&self) -> (usize, usize) {
        self.segment
    }

    pub fn length(&self) -> usize {
        self.segment.1 + 1 - self.segment.0
    }

    /// Log-determinant via Cholesky; `None` if not positive definite.
    pub fn logdet(&self) -> Option<f64> {
        let n = self.order();
        linalg::logdet_spd(self.values.as_slice()?, n)
    }

    pub(crate) fn dense(&self) -> Vec<f64> {
        self.values.iter().copied().collect()
    }
}

/// Covariance distance used by the scan.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum DistanceMetricKind {
    /// Squared Frobenius norm of the difference.
    #[serde(rename = "frobenius")]
    FrobeniusSq,
    /// Largest absolute entry of the difference.
    #[serde(rename = "max")]
    MaxAbs,
    /// `-2 log` of the Gaussian likelihood-ratio statistic for equal
    /// covariances on either side of the split.
    #[serde(rename = "lr")]
    LikelihoodRatio,
}

impl DistanceMetricKind {
    pub const ALL: [DistanceMetricKind; 3] = [Self::FrobeniusSq, Self::MaxAbs, Self::LikelihoodRatio];

    pub fn as_str(self) -> &'static str {
        match self {
            Self::FrobeniusSq => "frobenius",
            Self::MaxAbs => "max",
            Self::LikelihoodRatio => "lr",
        }
    }
}

impl fmt::Display for DistanceMetricKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for DistanceMetricKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "frobenius" => Ok(Self::FrobeniusSq),
            "max" => Ok(Self::MaxAbs),
            "lr" => Ok(Self::LikelihoodRatio),
            other => Err(Error::InvalidConfig(format!(
                "unknown metric '{other}' (expected frobenius, max or lr)"
            ))),
        }
    }
}

/// What the likelihood-ratio distance needs besides the two segment
/// covariances: the full-range covariance and the split geometry.
#[derive(Debug, Clone, Copy)]
pub struct LrContext<'a> {
    pub full: &'a CovMatrix,
    pub k: usize,
    pub len: usize,
}

/// Observed distances at every candidate split.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DistanceProfile {
    pub delta: usize,
    pub k_values: Vec<usize>,
    pub d_values: Vec<f64>,
}

fn check_standardized(panel: &SeriesPanel) -> Result<()> {
    if panel.is_standardized() {
        Ok(())
    } else {
        Err(Error::NotStandardized)
    }
}

fn check_range(len: usize, i: usize, j: usize) -> Result<()> {
    if i < 1 || i >= j || j > len {
        return Err(Error::BadRange {
            start: i,
            end: j,
            len,
        });
    }
    Ok(())
}

fn raw_segment_covariance(values: &Array2<f64>, i: usize, j: usize) -> Array2<f64> {
    let seg = values.slice(ndarray::s![.., i - 1..j]);
    seg.dot(&seg.t()) / (j + 1 - i) as f64
}

/// `S(i,j)` of a standardized panel (1-based inclusive range).
pub fn segment_covariance(panel: &SeriesPanel, i: usize, j: usize) -> Result<CovMatrix> {
    check_standardized(panel)?;
    check_range(panel.n_times(), i, j)?;
    Ok(CovMatrix {
        values: symmetrize(raw_segment_covariance(panel.values(), i, j)),
        segment: (i, j),
    })
}

fn symmetrize(mut m: Array2<f64>) -> Array2<f64> {
    let n = m.nrows();
    for u in 0..n {
        for v in u + 1..n {
            let x = m[[u, v]];
            m[[v, u]] = x;
        }
    }
    m
}

fn check_shapes(panels: &[SeriesPanel]) -> Result<(usize, usize)> {
    let first = panels
        .first()
        .ok_or_else(|| Error::InvalidConfig("empty panel list".into()))?;
    let expected = (first.n_nodes(), first.n_times());
    for p in panels {
        let found = (p.n_nodes(), p.n_times());
        if found != expected {
            return Err(Error::ShapeMismatch { expected, found });
        }
        check_standardized(p)?;
    }
    Ok(expected)
}

/// Elementwise mean of `S(i,j)` over replicate panels sharing `n` and `T`.
pub fn pooled_segment_covariance(panels: &[SeriesPanel], i: usize, j: usize) -> Result<CovMatrix> {
    let (n, t) = check_shapes(panels)?;
    check_range(t, i, j)?;
    let mut acc = Array2::<f64>::zeros((n, n));
    for p in panels {
        acc += &raw_segment_covariance(p.values(), i, j);
    }
    acc /= panels.len() as f64;
    Ok(CovMatrix {
        values: symmetrize(acc),
        segment: (i, j),
    })
}

/// Distance between two covariance matrices of the same order.
pub fn distance(
    a: &CovMatrix,
    b: &CovMatrix,
    kind: DistanceMetricKind,
    context: Option<LrContext<'_>>,
) -> Result<f64> {
    if a.order() != b.order() {
        return Err(Error::ShapeMismatch {
            expected: (a.order(), a.order()),
            found: (b.order(), b.order()),
        });
    }
    match kind {
        DistanceMetricKind::FrobeniusSq => Ok(a
            .values
            .iter()
            .zip(&b.values)
            .map(|(x, y)| (x - y) * (x - y))
            .sum()),
        DistanceMetricKind::MaxAbs => Ok(a
            .values
            .iter()
            .zip(&b.values)
            .fold(0.0, |m, (x, y)| f64::max(m, (x - y).abs()))),
        DistanceMetricKind::LikelihoodRatio => {
            let ctx = context.ok_or_else(|| {
                Error::InvalidConfig("likelihood-ratio distance needs the full-range covariance".into())
            })?;
            if ctx.k < 1 || ctx.k >= ctx.len {
                return Err(Error::BadRange {
                    start: ctx.k,
                    end: ctx.k + 1,
                    len: ctx.len,
                });
            }
            let ld = |m: &CovMatrix| {
                m.logdet().ok_or(Error::SingularCovariance {
                    start: m.segment.0,
                    end: m.segment.1,
                })
            };
            Ok(lr_statistic(ld(a)?, ld(b)?, ld(ctx.full)?, ctx.k, ctx.len))
        }
    }
}

/// `-2 log Lambda_k` from the three log-determinants.
#[inline]
fn lr_statistic(left: f64, right: f64, full: f64, k: usize, len: usize) -> f64 {
    let (k, len) = (k as f64, len as f64);
    (len - 1.0) * full - (k - 1.0) * left - (len - k - 1.0) * right
}

fn validate_geometry(n: usize, len: usize, delta: usize, kind: DistanceMetricKind) -> Result<()> {
    if delta < 1 {
        return Err(Error::InvalidConfig("buffer delta must be at least 1".into()));
    }
    if len <= 2 * delta + 1 {
        return Err(Error::InsufficientLength { len, delta });
    }
    if kind == DistanceMetricKind::LikelihoodRatio && delta < n + 1 {
        return Err(Error::InvalidConfig(format!(
            "likelihood-ratio metric needs buffer delta > n (delta = {delta}, n = {n}) so \
             every segment covariance is invertible"
        )));
    }
    Ok(())
}

/// Candidate change points `1+delta ..= len-delta`.
pub fn candidates(len: usize, delta: usize) -> Vec<usize> {
    (1 + delta..=len - delta).collect()
}

/// Reusable buffers for repeated profile evaluation on panels of one shape.
///
/// Panels are raw `n x T` matrices; pooling over several replicate panels
/// averages their segment covariances.
#[derive(Debug, Clone)]
pub(crate) struct ProfileEngine {
    n: usize,
    len: usize,
    delta: usize,
    kind: DistanceMetricKind,
    weights: Vec<f64>,
    left: Vec<f64>,
    total: Vec<f64>,
    col: Vec<f64>,
    right_logdet: Vec<f64>,
}

impl ProfileEngine {
    pub fn new(n: usize, len: usize, delta: usize, kind: DistanceMetricKind) -> Result<Self> {
        validate_geometry(n, len, delta, kind)?;
        let p = linalg::packed_len(n);
        let mut weights = Vec::with_capacity(p);
        for u in 0..n {
            for v in u..n {
                weights.push(if u == v { 1.0 } else { 2.0 });
            }
        }
        Ok(Self {
            n,
            len,
            delta,
            kind,
            weights,
            left: vec![0.0; p],
            total: vec![0.0; p],
            col: vec![0.0; n],
            right_logdet: Vec::new(),
        })
    }

    pub fn n_candidates(&self) -> usize {
        self.len - 2 * self.delta
    }

    fn load_column(&mut self, values: &Array2<f64>, t: usize) {
        for (c, v) in self.col.iter_mut().zip(values.column(t)) {
            *c = *v;
        }
    }

    fn accumulate(&mut self, panels: &[&Array2<f64>], t: usize, into_left: bool) {
        for values in panels {
            self.load_column(values, t);
            let target = if into_left { &mut self.left } else { &mut self.total };
            linalg::add_outer_packed(target, &self.col);
        }
    }

    /// Writes `d(k)` for every candidate, in increasing `k`, into `out`.
    pub fn compute(&mut self, panels: &[&Array2<f64>], out: &mut [f64]) -> Result<()> {
        debug_assert!(panels.iter().all(|p| p.dim() == (self.n, self.len)));
        debug_assert_eq!(out.len(), self.n_candidates());
        match self.kind {
            DistanceMetricKind::LikelihoodRatio => self.compute_lr(panels, out),
            _ => {
                self.compute_entrywise(panels, out);
                Ok(())
            }
        }
    }

    /// Like [`compute`](Self::compute), but a likelihood ratio whose segment
    /// covariance is singular is written as NaN instead of failing. Used for
    /// bootstrap replicates, where repeated columns can make short edge
    /// segments rank deficient.
    pub fn compute_lenient(&mut self, panels: &[&Array2<f64>], out: &mut [f64]) {
        if self.compute(panels, out).is_err() {
            self.compute_lr_direct(panels, out);
        }
    }

    /// Refactors every split from scratch; NaN where a factorization fails.
    fn compute_lr_direct(&mut self, panels: &[&Array2<f64>], out: &mut [f64]) {
        let (n, len, delta) = (self.n, self.len, self.delta);
        let pooled = panels.len() as f64;
        let nf = n as f64;
        self.total.fill(0.0);
        self.left.fill(0.0);
        for t in 0..len {
            self.accumulate(panels, t, false);
        }
        let full_logdet = linalg::logdet_spd(&linalg::unpack_symmetric(&self.total, n, 1.0), n)
            .map(|l| l - nf * (pooled * len as f64).ln());
        let mut right = vec![0.0; self.total.len()];
        for t in 0..len - delta {
            self.accumulate(panels, t, true);
            let k = t + 1;
            if k < 1 + delta {
                continue;
            }
            for ((r, &tot), &l) in right.iter_mut().zip(&self.total).zip(&self.left) {
                *r = tot - l;
            }
            let logdet = |packed: &[f64], m: usize| {
                linalg::logdet_spd(&linalg::unpack_symmetric(packed, n, 1.0), n)
                    .map(|l| l - nf * (pooled * m as f64).ln())
            };
            out[k - 1 - delta] = match (logdet(&self.left, k), logdet(&right, len - k), full_logdet) {
                (Some(l), Some(r), Some(f)) => {
                    let d = lr_statistic(l, r, f, k, len);
                    if d.is_finite() {
                        d
                    } else {
                        f64::NAN
                    }
                }
                _ => f64::NAN,
            };
        }
    }

    fn compute_entrywise(&mut self, panels: &[&Array2<f64>], out: &mut [f64]) {
        let (len, delta) = (self.len, self.delta);
        let pooled = panels.len() as f64;
        self.total.fill(0.0);
        self.left.fill(0.0);
        for t in 0..len {
            self.accumulate(panels, t, false);
        }
        for t in 0..len - delta {
            self.accumulate(panels, t, true);
            let k = t + 1;
            if k < 1 + delta {
                continue;
            }
            let ls = 1.0 / (pooled * k as f64);
            let rs = 1.0 / (pooled * (len - k) as f64);
            let d = match self.kind {
                DistanceMetricKind::FrobeniusSq => self
                    .left
                    .iter()
                    .zip(&self.total)
                    .zip(&self.weights)
                    .map(|((&l, &tot), &w)| {
                        let diff = l * ls - (tot - l) * rs;
                        w * diff * diff
                    })
                    .sum(),
                _ => self
                    .left
                    .iter()
                    .zip(&self.total)
                    .fold(0.0, |m, (&l, &tot)| f64::max(m, (l * ls - (tot - l) * rs).abs())),
            };
            out[k - 1 - delta] = d;
        }
    }

    fn compute_lr(&mut self, panels: &[&Array2<f64>], out: &mut [f64]) -> Result<()> {
        let (n, len, delta) = (self.n, self.len, self.delta);
        let pooled = panels.len() as f64;
        let first = 1 + delta;
        let last = len - delta;
        let nf = n as f64;

        self.total.fill(0.0);
        for t in 0..len {
            self.accumulate(panels, t, false);
        }
        let full = linalg::unpack_symmetric(&self.total, n, 1.0);
        let full_logdet = linalg::logdet_spd(&full, n)
            .ok_or(Error::SingularCovariance { start: 1, end: len })?
            - nf * (pooled * len as f64).ln();

        // Right sweep: k runs from `last` down to `first`, S(k+1, len).
        self.left.fill(0.0);
        for t in last..len {
            self.accumulate(panels, t, true);
        }
        let dense = linalg::unpack_symmetric(&self.left, n, 1.0);
        let mut factor = linalg::cholesky(&dense, n).ok_or(Error::SingularCovariance {
            start: last + 1,
            end: len,
        })?;
        self.right_logdet.clear();
        self.right_logdet.resize(self.n_candidates(), 0.0);
        for k in (first..=last).rev() {
            if k < last {
                // Column k+1 (1-based) joins the right segment.
                for values in panels {
                    self.load_column(values, k);
                    linalg::rank_one_update(&mut factor, n, &mut self.col);
                }
            }
            self.right_logdet[k - first] =
                linalg::factor_logdet(&factor, n) - nf * (pooled * (len - k) as f64).ln();
        }

        // Left sweep: S(1, k).
        self.left.fill(0.0);
        for t in 0..first {
            self.accumulate(panels, t, true);
        }
        let dense = linalg::unpack_symmetric(&self.left, n, 1.0);
        let mut factor = linalg::cholesky(&dense, n)
            .ok_or(Error::SingularCovariance { start: 1, end: first })?;
        for k in first..=last {
            if k > first {
                for values in panels {
                    self.load_column(values, k - 1);
                    linalg::rank_one_update(&mut factor, n, &mut self.col);
                }
            }
            let left = linalg::factor_logdet(&factor, n) - nf * (pooled * k as f64).ln();
            let d = lr_statistic(left, self.right_logdet[k - first], full_logdet, k, len);
            if !d.is_finite() {
                return Err(Error::SingularCovariance { start: 1, end: k });
            }
            out[k - first] = d;
        }
        Ok(())
    }
}

/// Distance profile of a standardized panel.
pub fn distance_profile(
    panel: &SeriesPanel,
    kind: DistanceMetricKind,
    delta: usize,
) -> Result<DistanceProfile> {
    pooled_distance_profile(std::slice::from_ref(panel), kind, delta)
}

/// Distance profile on pooled segment covariances of replicate panels.
pub fn pooled_distance_profile(
    panels: &[SeriesPanel],
    kind: DistanceMetricKind,
    delta: usize,
) -> Result<DistanceProfile> {
    let (n, len) = check_shapes(panels)?;
    let mut engine = ProfileEngine::new(n, len, delta, kind)?;
    let views: Vec<&Array2<f64>> = panels.iter().map(SeriesPanel::values).collect();
    let mut d_values = vec![0.0; engine.n_candidates()];
    engine.compute(&views, &mut d_values)?;
    Ok(DistanceProfile {
        delta,
        k_values: candidates(len, delta),
        d_values,
    })
}

/// Profile recomputed from scratch at every `k` with [`segment_covariance`]
/// and [`distance`]. Quadratic in `T`; a reference for testing.
pub fn naive_distance_profile(
    panel: &SeriesPanel,
    kind: DistanceMetricKind,
    delta: usize,
) -> Result<DistanceProfile> {
    check_standardized(panel)?;
    let len = panel.n_times();
    validate_geometry(panel.n_nodes(), len, delta, kind)?;
    let full = segment_covariance(panel, 1, len)?;
    let k_values = candidates(len, delta);
    let d_values = k_values
        .iter()
        .map(|&k| {
            // With delta = 1 the outermost candidates leave a one-point segment.
            let seg = |i, j| CovMatrix {
                values: symmetrize(raw_segment_covariance(panel.values(), i, j)),
                segment: (i, j),
            };
            let (left, right) = (seg(1, k), seg(k + 1, len));
            distance(&left, &right, kind, Some(LrContext { full: &full, k, len }))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(DistanceProfile {
        delta,
        k_values,
        d_values,
    })
}

/// An edge of a thresholded correlation network (0-based node indices).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Edge {
    pub u: usize,
    pub v: usize,
    pub correlation: f64,
}

/// All pairs `u < v` with `|cov[u][v]| > tau`.
pub fn threshold_network(cov: &CovMatrix, tau: f64) -> Vec<Edge> {
    let n = cov.order();
    let mut edges = Vec::new();
    for u in 0..n {
        for v in u + 1..n {
            let c = cov.values[[u, v]];
            if c.abs() > tau {
                edges.push(Edge { u, v, correlation: c });
            }
        }
    }
    edges
}

/// Threshold chosen so that the `m` strongest pairs are kept, and those
/// edges. Pairs tied with the `m`-th strongest are all kept, so more than
/// `m` edges can be returned.
pub fn top_edges(cov: &CovMatrix, m: usize) -> (f64, Vec<Edge>) {
    let mut all = threshold_network(cov, -1.0);
    all.sort_by(|a, b| b.correlation.abs().total_cmp(&a.correlation.abs()));
    if m == 0 || all.is_empty() {
        return (f64::INFINITY, Vec::new());
    }
    let tau = all[m.min(all.len()) - 1].correlation.abs();
    let mut edges: Vec<Edge> = all.into_iter().filter(|e| e.correlation.abs() >= tau).collect();
    edges.sort_by_key(|e| (e.u, e.v));
    (tau, edges)
}

/// Edge list as CSV with header `node_u,node_v,correlation`.
pub fn edges_to_csv(edges: &[Edge], labels: &[String]) -> String {
    let mut out = String::from("node_u,node_v,correlation\n");
    for e in edges {
        out.push_str(&format!("{},{},{:?}\n", labels[e.u], labels[e.v], e.correlation));
    }
    out
}
