// SPDX-License-Identifier: MIT OR Apache-2.0

//! Bootstrap scan statistic and binary segmentation.
//!
//! For every candidate split `k` the observed distance `d(k)` is compared
//! with `B` distances computed on bootstrap replicates drawn under the
//! no-change hypothesis:
//!
//! ```text
//! mu0(k)     = mean_b d_b(k)
//! sigma0(k)  = sd_b d_b(k)            (divisor B - 1)
//! z(k)       = (d(k) - mu0(k)) / sigma0(k)
//! Z          = max_k z(k),  Z_b = max_k (d_b(k) - mu0(k)) / sigma0(k)
//! p          = #{b : Z_b >= Z} / B
//! ```
//!
//! A change point is declared at `argmax_k z(k)` when `p <= alpha`.
//! [`detect_recursive`] then splits the series there and repeats on both
//! halves, each at level `alpha`.

use ndarray::Array2;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bootstrap::{BootstrapMode, Resampler};
use crate::error::{Error, Result};
use crate::metrics::{candidates, DistanceMetricKind, ProfileEngine};
use crate::panel::{standardize, SeriesPanel};
use crate::streams::{derive_seed, stream};

pub const DEFAULT_B: usize = 500;
pub const DEFAULT_ALPHA: f64 = 0.05;
pub const DEFAULT_MAX_DEPTH: usize = 8;
pub const MIN_B: usize = 100;

/// Null standard deviations below this make `z(k)` undefined.
pub const DEGENERATE_SIGMA: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DetectorConfig {
    pub metric: DistanceMetricKind,
    /// Buffer: candidates are `1+delta ..= T-delta`.
    pub delta: usize,
    /// Number of bootstrap replicates `B`.
    pub b_count: usize,
    pub alpha: f64,
    pub mode: BootstrapMode,
    pub seed: u64,
    pub max_depth: usize,
    /// Segments shorter than this are not re-tested.
    pub min_segment: usize,
}

impl DetectorConfig {
    /// Defaults for an `n`-node panel: Frobenius metric, `delta = n`,
    /// `B = 500`, `alpha = 0.05`, i.i.d. bootstrap.
    pub fn for_nodes(n: usize) -> Self {
        Self {
            metric: DistanceMetricKind::FrobeniusSq,
            delta: n,
            b_count: DEFAULT_B,
            alpha: DEFAULT_ALPHA,
            mode: BootstrapMode::Iid,
            seed: 0,
            max_depth: DEFAULT_MAX_DEPTH,
            min_segment: 2 * n + 2,
        }
    }

    /// Sets the buffer and the matching minimum segment length `2 delta + 2`.
    pub fn with_delta(mut self, delta: usize) -> Self {
        self.delta = delta;
        self.min_segment = 2 * delta + 2;
        self
    }

    pub fn with_metric(mut self, metric: DistanceMetricKind) -> Self {
        self.metric = metric;
        self
    }

    pub fn with_b(mut self, b_count: usize) -> Self {
        self.b_count = b_count;
        self
    }

    pub fn with_mode(mut self, mode: BootstrapMode) -> Self {
        self.mode = mode;
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn with_alpha(mut self, alpha: f64) -> Self {
        self.alpha = alpha;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.b_count < MIN_B {
            return Err(Error::InvalidConfig(format!(
                "B = {} is below the minimum of {MIN_B}",
                self.b_count
            )));
        }
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(Error::InvalidConfig(format!("alpha {} not in (0,1)", self.alpha)));
        }
        if self.delta < 1 {
            return Err(Error::InvalidConfig("delta must be at least 1".into()));
        }
        if self.min_segment < 2 * self.delta + 2 {
            return Err(Error::InvalidConfig(format!(
                "min_segment {} is below 2*delta+2 = {}",
                self.min_segment,
                2 * self.delta + 2
            )));
        }
        Ok(())
    }
}

/// Everything computed by one scan.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScanProfile {
    pub k_values: Vec<usize>,
    pub d_values: Vec<f64>,
    pub mu0: Vec<f64>,
    pub sigma0: Vec<f64>,
    pub z_values: Vec<f64>,
    pub z_observed_max: f64,
    pub z_argmax: usize,
    /// `Z_b` for every replicate, in replicate order.
    pub boot_maxima: Vec<f64>,
    /// `max_b z_b(k)` at every candidate.
    pub boot_envelope: Vec<f64>,
    /// Candidates whose null standard deviation vanished; `z` is 0 there.
    pub degenerate_k: Vec<usize>,
}

impl ScanProfile {
    pub fn b_count(&self) -> usize {
        self.boot_maxima.len()
    }
}

fn check_panels(panels: &[SeriesPanel]) -> Result<(usize, usize)> {
    let first = panels
        .first()
        .ok_or_else(|| Error::InvalidConfig("no panels to scan".into()))?;
    let expected = (first.n_nodes(), first.n_times());
    for p in panels {
        if !p.is_standardized() {
            return Err(Error::NotStandardized);
        }
        let found = (p.n_nodes(), p.n_times());
        if found != expected {
            return Err(Error::ShapeMismatch { expected, found });
        }
    }
    Ok(expected)
}

/// Bootstrap scan of one standardized panel.
pub fn scan(panel: &SeriesPanel, config: &DetectorConfig) -> Result<ScanProfile> {
    scan_pooled(std::slice::from_ref(panel), config)
}

/// Bootstrap scan on covariances pooled over replicate panels. Each
/// bootstrap replicate resamples every panel independently.
pub fn scan_pooled(panels: &[SeriesPanel], config: &DetectorConfig) -> Result<ScanProfile> {
    config.validate()?;
    let (n, len) = check_panels(panels)?;
    config.mode.validate(len)?;
    let mut engine = ProfileEngine::new(n, len, config.delta, config.metric)?;
    let k_count = engine.n_candidates();

    let resamplers = panels
        .iter()
        .map(|p| Resampler::new(p, config.mode))
        .collect::<Result<Vec<_>>>()?;

    let observed: Vec<&Array2<f64>> = panels.iter().map(SeriesPanel::values).collect();
    let mut d_values = vec![0.0; k_count];
    engine.compute(&observed, &mut d_values)?;

    let replicates: Vec<Vec<f64>> = (0..config.b_count)
        .into_par_iter()
        .map_init(
            || {
                (
                    engine.clone(),
                    vec![Array2::<f64>::zeros((n, len)); panels.len()],
                )
            },
            |(engine, buffers), b| {
                let mut rng = stream(config.seed, b as u64);
                for ((resampler, source), out) in resamplers.iter().zip(panels).zip(buffers.iter_mut()) {
                    resampler.draw_standardized(source.values(), out, &mut rng)?;
                }
                let views: Vec<&Array2<f64>> = buffers.iter().collect();
                let mut d = vec![0.0; k_count];
                engine.compute_lenient(&views, &mut d);
                Ok(d)
            },
        )
        .collect::<Result<Vec<_>>>()?;

    Ok(summarize(candidates(len, config.delta), d_values, &replicates))
}

/// Null moments, z-scores and maxima from observed and replicate profiles.
/// Replicate values that are undefined (NaN, from a singular replicate
/// segment) are left out of the moments at that `k` and of that replicate's
/// maximum.
fn summarize(k_values: Vec<usize>, d_values: Vec<f64>, replicates: &[Vec<f64>]) -> ScanProfile {
    let k_count = d_values.len();
    let mut mu0 = vec![0.0; k_count];
    let mut counts = vec![0usize; k_count];
    for rep in replicates {
        for ((m, c), d) in mu0.iter_mut().zip(counts.iter_mut()).zip(rep) {
            if d.is_finite() {
                *m += d;
                *c += 1;
            }
        }
    }
    mu0.iter_mut().zip(&counts).for_each(|(m, &c)| *m /= c as f64);
    let mut sigma0 = vec![0.0; k_count];
    for rep in replicates {
        for ((s, d), m) in sigma0.iter_mut().zip(rep).zip(&mu0) {
            if d.is_finite() {
                *s += (d - m) * (d - m);
            }
        }
    }
    sigma0
        .iter_mut()
        .zip(&counts)
        .for_each(|(s, &c)| *s = (*s / (c as f64 - 1.0)).sqrt());

    let degenerate: Vec<bool> = sigma0.iter().map(|&s| !(s >= DEGENERATE_SIGMA)).collect();
    let zscore = |j: usize, d: f64| {
        if degenerate[j] {
            0.0
        } else {
            (d - mu0[j]) / sigma0[j]
        }
    };

    let z_values: Vec<f64> = d_values.iter().enumerate().map(|(j, &d)| zscore(j, d)).collect();
    let (z_argmax_idx, z_observed_max) = argmax_first(&z_values);

    let mut boot_envelope = vec![f64::NEG_INFINITY; k_count];
    let boot_maxima = replicates
        .iter()
        .map(|rep| {
            let mut best = f64::NEG_INFINITY;
            for (j, &d) in rep.iter().enumerate().filter(|(_, d)| d.is_finite()) {
                let z = zscore(j, d);
                best = best.max(z);
                boot_envelope[j] = boot_envelope[j].max(z);
            }
            best
        })
        .collect();

    ScanProfile {
        z_argmax: k_values[z_argmax_idx],
        degenerate_k: k_values
            .iter()
            .zip(&degenerate)
            .filter(|(_, &g)| g)
            .map(|(&k, _)| k)
            .collect(),
        k_values,
        d_values,
        mu0,
        sigma0,
        z_values,
        z_observed_max,
        boot_maxima,
        boot_envelope,
    }
}

/// Index and value of the first maximum.
fn argmax_first(xs: &[f64]) -> (usize, f64) {
    let mut best = (0, xs[0]);
    for (i, &x) in xs.iter().enumerate().skip(1) {
        if x > best.1 {
            best = (i, x);
        }
    }
    best
}

/// Fraction of bootstrap maxima at least as large as the observed maximum.
pub fn p_value(profile: &ScanProfile) -> f64 {
    let hits = profile
        .boot_maxima
        .iter()
        .filter(|&&zb| zb >= profile.z_observed_max)
        .count();
    hits as f64 / profile.b_count() as f64
}

/// Human-readable p-value: a zero count is shown as `< 1/B`.
pub fn format_p_value(p: f64, b_count: usize) -> String {
    if p == 0.0 {
        format!("< {}", 1.0 / b_count as f64)
    } else {
        format!("{p}")
    }
}

/// Outcome of a single-change test.
#[derive(Debug, Clone, PartialEq)]
pub enum Detection {
    ChangePoint {
        location: usize,
        z: f64,
        p_value: f64,
        profile: ScanProfile,
    },
    NoChangePoint {
        p_value: f64,
        profile: ScanProfile,
    },
}

impl Detection {
    pub fn profile(&self) -> &ScanProfile {
        match self {
            Self::ChangePoint { profile, .. } | Self::NoChangePoint { profile, .. } => profile,
        }
    }

    pub fn p_value(&self) -> f64 {
        match self {
            Self::ChangePoint { p_value, .. } | Self::NoChangePoint { p_value, .. } => *p_value,
        }
    }

    pub fn location(&self) -> Option<usize> {
        match self {
            Self::ChangePoint { location, .. } => Some(*location),
            Self::NoChangePoint { .. } => None,
        }
    }

    pub fn is_significant(&self) -> bool {
        matches!(self, Self::ChangePoint { .. })
    }

    fn from_profile(profile: ScanProfile, alpha: f64) -> Self {
        let p_value = p_value(&profile);
        if p_value <= alpha {
            Self::ChangePoint {
                location: profile.z_argmax,
                z: profile.z_observed_max,
                p_value,
                profile,
            }
        } else {
            Self::NoChangePoint { p_value, profile }
        }
    }
}

pub fn detect_single(panel: &SeriesPanel, config: &DetectorConfig) -> Result<Detection> {
    detect_single_pooled(std::slice::from_ref(panel), config)
}

pub fn detect_single_pooled(panels: &[SeriesPanel], config: &DetectorConfig) -> Result<Detection> {
    Ok(Detection::from_profile(scan_pooled(panels, config)?, config.alpha))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChangePoint {
    /// Global 1-based time index `k`; the split is between `k` and `k+1`.
    pub location: usize,
    pub z: f64,
    pub p_value: f64,
    /// Inclusive segment that was scanned.
    pub segment: (usize, usize),
    pub depth: usize,
}

/// A sub-segment whose test could not be carried out.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AbortedBranch {
    pub segment: (usize, usize),
    pub depth: usize,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChangePointReport {
    pub points: Vec<ChangePoint>,
    pub config_echo: DetectorConfig,
    pub total_tests: usize,
    pub aborted: Vec<AbortedBranch>,
    pub n: usize,
    pub len: usize,
}

/// Seed used for the scan of segment `start..=end`. The full range uses the
/// master seed itself, so the root scan equals [`detect_single`].
pub fn segment_seed(master: u64, start: usize, end: usize, len: usize) -> u64 {
    if (start, end) == (1, len) {
        master
    } else {
        derive_seed(master, &[start as u64, end as u64])
    }
}

pub fn detect_recursive(panel: &SeriesPanel, config: &DetectorConfig) -> Result<ChangePointReport> {
    detect_recursive_pooled(std::slice::from_ref(panel), config).map(|(report, _)| report)
}

/// Binary segmentation on pooled panels. Also returns the root scan.
pub fn detect_recursive_pooled(
    panels: &[SeriesPanel],
    config: &DetectorConfig,
) -> Result<(ChangePointReport, ScanProfile)> {
    let (n, len) = check_panels(panels)?;
    let root = detect_single_pooled(panels, config)?;
    let mut report = ChangePointReport {
        points: Vec::new(),
        config_echo: config.clone(),
        total_tests: 1,
        aborted: Vec::new(),
        n,
        len,
    };
    if let Detection::ChangePoint { location, z, p_value, .. } = &root {
        report.points.push(ChangePoint {
            location: *location,
            z: *z,
            p_value: *p_value,
            segment: (1, len),
            depth: 0,
        });
        let mut pending = vec![(1, *location, 1), (*location + 1, len, 1)];
        while let Some((start, end, depth)) = pending.pop() {
            if depth >= config.max_depth || end + 1 - start < config.min_segment {
                continue;
            }
            match test_segment(panels, config, start, end, len) {
                Ok(outcome) => {
                    report.total_tests += 1;
                    if let Detection::ChangePoint { location, z, p_value, .. } = outcome {
                        let global = start - 1 + location;
                        report.points.push(ChangePoint {
                            location: global,
                            z,
                            p_value,
                            segment: (start, end),
                            depth,
                        });
                        // Right half pushed first so the left half is tested first.
                        pending.push((global + 1, end, depth + 1));
                        pending.push((start, global, depth + 1));
                    }
                }
                Err(err) => report.aborted.push(AbortedBranch {
                    segment: (start, end),
                    depth,
                    reason: localize(err, start).to_string(),
                }),
            }
        }
    }
    report.points.sort_by_key(|p| p.location);
    let profile = match root {
        Detection::ChangePoint { profile, .. } | Detection::NoChangePoint { profile, .. } => profile,
    };
    Ok((report, profile))
}

fn test_segment(
    panels: &[SeriesPanel],
    config: &DetectorConfig,
    start: usize,
    end: usize,
    len: usize,
) -> Result<Detection> {
    let sub = panels
        .iter()
        .map(|p| standardize(&p.segment(start, end)?))
        .collect::<Result<Vec<_>>>()?;
    let sub_config = DetectorConfig {
        seed: segment_seed(config.seed, start, end, len),
        ..config.clone()
    };
    detect_single_pooled(&sub, &sub_config)
}

/// Shifts segment-local time indices in an error to global ones.
fn localize(err: Error, start: usize) -> Error {
    match err {
        Error::SingularCovariance { start: s, end: e } => Error::SingularCovariance {
            start: s + start - 1,
            end: e + start - 1,
        },
        other => other,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::simlab::{block_exchangeable_sigma, Regime, SyntheticSpec};
    use crate::metrics::CovMatrix;

    fn null_panel(n: usize, t: usize, seed: u64) -> SeriesPanel {
        let spec = SyntheticSpec::new(n, vec![Regime::new(t, CovMatrix::identity(n))], seed).unwrap();
        standardize(&spec.generate().unwrap()).unwrap()
    }

    fn change_panel(n: usize, t: usize, at: usize, block: usize, rho: f64, seed: u64) -> SeriesPanel {
        let spec = SyntheticSpec::new(
            n,
            vec![
                Regime::new(at, CovMatrix::identity(n)),
                Regime::new(t - at, block_exchangeable_sigma(n, block, rho).unwrap()),
            ],
            seed,
        )
        .unwrap();
        standardize(&spec.generate().unwrap()).unwrap()
    }

    fn config(n: usize, b: usize, seed: u64) -> DetectorConfig {
        DetectorConfig::for_nodes(n).with_b(b).with_seed(seed)
    }

    fn fake_profile(z_max: f64, boots: Vec<f64>) -> ScanProfile {
        ScanProfile {
            k_values: vec![3],
            d_values: vec![0.0],
            mu0: vec![0.0],
            sigma0: vec![1.0],
            z_values: vec![z_max],
            z_observed_max: z_max,
            z_argmax: 3,
            boot_envelope: vec![0.0],
            boot_maxima: boots,
            degenerate_k: vec![],
        }
    }

    #[test]
    fn config_validation() {
        let c = DetectorConfig::for_nodes(5);
        assert_eq!((c.delta, c.b_count, c.alpha, c.min_segment), (5, 500, 0.05, 12));
        assert!(c.validate().is_ok());
        assert!(c.clone().with_b(99).validate().is_err());
        assert!(c.clone().with_alpha(1.0).validate().is_err());
        assert!(DetectorConfig { min_segment: 11, ..c.clone() }.validate().is_err());
        assert!(c.with_delta(0).validate().is_err());
    }

    #[test]
    fn p_value_counting() {
        let b: Vec<f64> = (0..500).map(|i| i as f64 / 1000.0).collect();
        assert_eq!(p_value(&fake_profile(10.0, b.clone())), 0.0);
        assert_eq!(format_p_value(0.0, 500), "< 0.002");
        assert_eq!(p_value(&fake_profile(-1.0, b.clone())), 1.0);
        // 25 of the maxima are >= 0.475.
        assert_eq!(p_value(&fake_profile(0.475, b)), 0.05);
        assert_eq!(format_p_value(0.05, 500), "0.05");
    }

    #[test]
    fn summarize_zero_when_observed_equals_null_mean() {
        let reps = vec![vec![1.0, 2.0], vec![3.0, 4.0], vec![2.0, 3.0]];
        let prof = summarize(vec![5, 6], vec![2.0, 3.0], &reps);
        assert_eq!(prof.z_values, vec![0.0, 0.0]);
        assert_eq!(prof.z_observed_max, 0.0);
        assert_eq!(prof.z_argmax, 5);
        assert_eq!(prof.mu0, vec![2.0, 3.0]);
        assert_eq!(prof.sigma0, vec![1.0, 1.0]);
    }

    #[test]
    fn summarize_degenerate_null() {
        let reps = vec![vec![1.0, 2.0], vec![1.0, 4.0]];
        let prof = summarize(vec![5, 6], vec![7.0, 3.0], &reps);
        assert_eq!(prof.degenerate_k, vec![5]);
        assert_eq!(prof.z_values[0], 0.0);
    }

    #[test]
    fn scan_is_deterministic() {
        let p = null_panel(4, 60, 1);
        let c = config(4, 120, 9);
        let a = scan(&p, &c).unwrap();
        assert_eq!(a, scan(&p, &c).unwrap());
        assert_eq!(a.boot_maxima.len(), 120);
        assert_eq!(a.k_values.first(), Some(&5));
        assert_eq!(a.k_values.last(), Some(&56));
        let other = scan(&p, &c.clone().with_seed(10)).unwrap();
        assert_ne!(a.boot_maxima, other.boot_maxima);
        let p = p_value(&a);
        assert!((p * 120.0 - (p * 120.0).round()).abs() < 1e-9);
    }

    #[test]
    fn scan_preconditions() {
        let p = null_panel(4, 9, 1);
        assert!(matches!(scan(&p, &config(4, 100, 0)), Err(Error::InsufficientLength { .. })));
        let raw = SeriesPanel::from_rows(&[vec![1.0, 2.0, 3.0, 5.0], vec![0.0, 1.0, 0.0, 1.0]]).unwrap();
        assert_eq!(scan(&raw, &config(2, 100, 0)), Err(Error::NotStandardized));
        let p = null_panel(4, 40, 1);
        assert!(scan(&p, &config(4, 100, 0).with_mode(BootstrapMode::Sieve(11))).is_err());
    }

    #[test]
    fn lr_scan_survives_rank_deficient_replicates() {
        let p = null_panel(5, 60, 3);
        let prof = scan(&p, &config(5, 200, 4).with_metric(DistanceMetricKind::LikelihoodRatio).with_delta(6)).unwrap();
        assert!(prof.boot_maxima.iter().all(|z| !z.is_nan()));
        assert!(prof.z_values.iter().all(|z| z.is_finite()));
        assert!(prof.mu0.iter().all(|m| m.is_finite()));
    }

    #[test]
    fn single_change_is_localized() {
        let reps = 60;
        let (mut found, mut near) = (0, 0);
        for seed in 0..reps {
            let p = change_panel(4, 42, 21, 4, 0.9, seed);
            if let Some(location) = detect_single(&p, &config(4, 200, seed)).unwrap().location() {
                found += 1;
                near += usize::from(location.abs_diff(21) <= 3);
            }
        }
        assert!(found * 2 >= reps as usize, "power {found}/{reps}");
        assert!(near * 4 >= reps as usize, "{near}/{reps} within 3");
    }

    #[test]
    fn permutation_invariance() {
        let p = change_panel(5, 80, 40, 3, 0.8, 4);
        let perm = [4, 2, 0, 1, 3];
        let q = p.permute_rows(&perm).unwrap();
        for metric in DistanceMetricKind::ALL {
            let c = config(5, 100, 3).with_metric(metric).with_delta(6);
            let a = detect_single(&p, &c).unwrap();
            let b = detect_single(&q, &c).unwrap();
            assert_eq!(a.location(), b.location(), "{metric}");
            assert_eq!(a.p_value(), b.p_value(), "{metric}");
            assert!((a.profile().z_observed_max - b.profile().z_observed_max).abs() < 1e-9);
        }
    }

    #[test]
    fn recursive_report_contract() {
        let p = change_panel(4, 120, 60, 4, 0.9, 7);
        let c = config(4, 150, 5);
        let report = detect_recursive(&p, &c).unwrap();
        let single = detect_single(&p, &c).unwrap();
        assert_eq!(report.points.iter().find(|pt| pt.depth == 0).map(|pt| pt.location), single.location());
        let mut last = 0;
        for pt in &report.points {
            assert!(pt.location > last);
            last = pt.location;
            assert!(pt.p_value <= c.alpha);
            assert!(pt.location >= pt.segment.0 + c.delta && pt.location <= pt.segment.1 - c.delta);
        }
        assert!(report.total_tests <= 1 + 2 * report.points.len());
        assert_eq!(report, detect_recursive(&p, &c).unwrap());
    }

    #[test]
    fn recursion_counts_tests() {
        // A single strong change in a series long enough that both halves
        // are re-tested.
        let p = change_panel(3, 200, 100, 3, 0.95, 2);
        let c = config(3, 100, 1);
        let report = detect_recursive(&p, &c).unwrap();
        assert!(!report.points.is_empty());
        assert!(report.aborted.is_empty());
        assert_eq!(report.total_tests, 1 + 2 * report.points.len());
    }

    #[test]
    fn recursion_respects_max_depth() {
        let p = change_panel(3, 200, 100, 3, 0.95, 2);
        let c = DetectorConfig { max_depth: 1, ..config(3, 100, 1) };
        let report = detect_recursive(&p, &c).unwrap();
        assert!(report.points.iter().all(|pt| pt.depth == 0));
        assert_eq!(report.total_tests, 1);
    }

    #[test]
    fn pooled_scan_of_one_panel_equals_scan() {
        let p = null_panel(3, 40, 2);
        let c = config(3, 100, 8);
        assert_eq!(scan_pooled(std::slice::from_ref(&p), &c).unwrap(), scan(&p, &c).unwrap());
    }

    #[test]
    fn pooled_identical_panels_share_observed_profile() {
        let p = null_panel(3, 40, 3);
        let c = config(3, 100, 8);
        let single = scan(&p, &c).unwrap();
        let pooled = scan_pooled(&vec![p; 48], &c).unwrap();
        for (a, b) in single.d_values.iter().zip(&pooled.d_values) {
            assert!((a - b).abs() < 1e-12 * (1.0 + a.abs()));
        }
    }

    #[test]
    fn pooled_shape_mismatch() {
        let c = config(3, 100, 8);
        assert!(matches!(
            scan_pooled(&[null_panel(3, 40, 1), null_panel(3, 41, 1)], &c),
            Err(Error::ShapeMismatch { .. })
        ));
    }

    #[test]
    fn pooling_reduces_null_mean_monte_carlo() {
        let c = config(4, 100, 0);
        let mut all_smaller = 0;
        let seeds = 200;
        for seed in 0..seeds {
            let panels: Vec<SeriesPanel> = (0..48).map(|i| null_panel(4, 30, seed * 100 + i)).collect();
            let pooled = scan_pooled(&panels, &c.clone().with_seed(seed)).unwrap();
            let single = scan(&panels[0], &c.clone().with_seed(seed)).unwrap();
            all_smaller += pooled.mu0.iter().zip(&single.mu0).all(|(a, b)| a < b) as u64;
        }
        assert_eq!(all_smaller, seeds);
    }

    #[test]
    fn segment_seeds() {
        assert_eq!(segment_seed(42, 1, 100, 100), 42);
        assert_ne!(segment_seed(42, 1, 50, 100), segment_seed(42, 51, 100, 100));
    }
}
