// SPDX-License-Identifier: MIT OR Apache-2.0

//! Synthetic panels and the power experiments built on them.
//!
//! All experiments are deterministic in their seed. Replicate `r` draws its
//! data from a stream that depends only on `(seed, r)`, so sweeping a
//! parameter such as the correlation `rho` reuses the same underlying
//! normal draws (common random numbers).

use ndarray::Array2;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal, StudentT};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::detector::{detect_recursive, detect_single, DetectorConfig};
use crate::error::{Error, Result};
use crate::linalg;
use crate::metrics::{CovMatrix, DistanceMetricKind};
use crate::panel::{default_labels, standardize, SeriesPanel};
use crate::streams::{derive_seed, stream};

/// Additive constant in `T(n) = n(n-1) + C`.
pub const DEFAULT_C: usize = 30;
pub const DEFAULT_RHO: f64 = 0.9;
pub const DESK_REPS: usize = 300;
pub const DESK_B: usize = 200;
pub const FULL_REPS: usize = 10_000;
pub const CALIBRATION_REPS: usize = 200;
pub const CALIBRATION_MAX_STEPS: usize = 12;
pub const CALIBRATION_TOL: f64 = 0.03;
/// Bin width of the multiple change point histogram.
pub const BIN_WIDTH: usize = 5;

/// Identity with an exchangeable upper-left `block x block` block:
/// unit diagonal and `rho` off the diagonal inside the block.
pub fn block_exchangeable_sigma(n: usize, block: usize, rho: f64) -> Result<CovMatrix> {
    if block < 2 || block > n {
        return Err(Error::InvalidConfig(format!("block {block} not in 2..={n}")));
    }
    let lower = -1.0 / (block as f64 - 1.0);
    if !(rho > lower && rho < 1.0) {
        return Err(Error::BadRho { rho, block });
    }
    let mut m = Array2::eye(n);
    for u in 0..block {
        for v in 0..block {
            if u != v {
                m[[u, v]] = rho;
            }
        }
    }
    CovMatrix::new(m, (0, 0))
}

#[derive(Debug, Clone, PartialEq)]
pub struct Regime {
    pub length: usize,
    pub sigma: CovMatrix,
}

impl Regime {
    pub fn new(length: usize, sigma: CovMatrix) -> Self {
        Self { length, sigma }
    }
}

/// Piecewise-stationary Gaussian panel description.
#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticSpec {
    pub n: usize,
    pub regimes: Vec<Regime>,
    pub seed: u64,
}

impl SyntheticSpec {
    pub fn new(n: usize, regimes: Vec<Regime>, seed: u64) -> Result<Self> {
        for r in &regimes {
            if r.sigma.order() != n {
                return Err(Error::ShapeMismatch {
                    expected: (n, n),
                    found: (r.sigma.order(), r.sigma.order()),
                });
            }
            r.sigma.logdet().ok_or(Error::CholeskyFailure)?;
        }
        Ok(Self { n, regimes, seed })
    }

    pub fn len(&self) -> usize {
        self.regimes.iter().map(|r| r.length).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Regime boundaries: the last time index of every regime but the final one.
    pub fn change_points(&self) -> Vec<usize> {
        let mut acc = 0;
        let mut out: Vec<usize> = self
            .regimes
            .iter()
            .map(|r| {
                acc += r.length;
                acc
            })
            .collect();
        out.pop();
        out
    }

    /// Generates the panel from the spec's own seed.
    pub fn generate(&self) -> Result<SeriesPanel> {
        generate_panel(self, &mut stream(self.seed, 0))
    }
}

/// Columns drawn independently from `MVN(0, sigma)` regime by regime.
/// The panel is returned unstandardized.
pub fn generate_panel<R: Rng + ?Sized>(spec: &SyntheticSpec, rng: &mut R) -> Result<SeriesPanel> {
    let n = spec.n;
    let mut values = Array2::zeros((n, spec.len()));
    let mut z = vec![0.0; n];
    let mut col = vec![0.0; n];
    let mut t = 0;
    for regime in &spec.regimes {
        let factor = linalg::cholesky(&regime.sigma.dense(), n).ok_or(Error::CholeskyFailure)?;
        for _ in 0..regime.length {
            z.iter_mut().for_each(|x| *x = StandardNormal.sample(rng));
            linalg::lower_mul(&factor, n, &z, &mut col);
            values.column_mut(t).iter_mut().zip(&col).for_each(|(d, s)| *d = *s);
            t += 1;
        }
    }
    SeriesPanel::new(values, default_labels(n))
}

/// `n` independent AR(1) series with unit-variance Gaussian innovations,
/// started from the stationary distribution.
pub fn ar1_panel(n: usize, len: usize, phi: f64, seed: u64) -> Result<SeriesPanel> {
    if !(phi.abs() < 1.0) {
        return Err(Error::InvalidConfig(format!("AR coefficient {phi} is not stationary")));
    }
    let mut rng = stream(seed, 0);
    let mut values = Array2::zeros((n, len));
    let sd0 = (1.0 - phi * phi).sqrt().recip();
    for i in 0..n {
        let z0: f64 = StandardNormal.sample(&mut rng);
        let mut y = sd0 * z0;
        for t in 0..len {
            let e: f64 = StandardNormal.sample(&mut rng);
            y = phi * y + e;
            values[[i, t]] = y;
        }
    }
    SeriesPanel::new(values, default_labels(n))
}

/// Geometry of a synthetic price panel with one correlation regime break.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MarketSpec {
    pub n: usize,
    /// Number of returns; the price panel has one more column.
    pub len: usize,
    /// Last return index (1-based) of the calm regime.
    pub break_at: usize,
    /// Market-factor loading before and after the break.
    pub loading: (f64, f64),
    /// Daily return volatility before and after the break.
    pub volatility: (f64, f64),
    /// Degrees of freedom of the Student-t shocks.
    pub dof: f64,
    pub seed: u64,
}

impl MarketSpec {
    pub fn desk_default(seed: u64) -> Self {
        Self {
            n: 50,
            len: 2000,
            break_at: 1200,
            loading: (0.3, 0.5),
            volatility: (0.01, 0.015),
            dof: 5.0,
            seed,
        }
    }
}

/// Prices `100 exp(cumsum r)` from one-factor heavy-tailed returns whose
/// market loading jumps after `break_at`. Labels are `STK01..`; time
/// labels are `d0..d{len}`.
pub fn market_prices(spec: &MarketSpec) -> Result<SeriesPanel> {
    let student = StudentT::new(spec.dof).map_err(|e| Error::InvalidConfig(e.to_string()))?;
    let unit = (spec.dof / (spec.dof - 2.0)).sqrt().recip();
    let mut rng = stream(spec.seed, 0);
    let mut values = Array2::zeros((spec.n, spec.len + 1));
    values.column_mut(0).fill(100.0);
    let mut log_price = vec![100f64.ln(); spec.n];
    for t in 1..=spec.len {
        let (beta, vol) = if t <= spec.break_at {
            (spec.loading.0, spec.volatility.0)
        } else {
            (spec.loading.1, spec.volatility.1)
        };
        let idio = (1.0 - beta * beta).sqrt();
        let market = student.sample(&mut rng) * unit;
        for (i, lp) in log_price.iter_mut().enumerate() {
            let shock = student.sample(&mut rng) * unit;
            *lp += vol * (beta * market + idio * shock);
            values[[i, t]] = lp.exp();
        }
    }
    let labels = (1..=spec.n).map(|i| format!("STK{i:02}")).collect();
    SeriesPanel::new(values, labels)?.with_time_labels((0..=spec.len).map(|t| format!("d{t}")).collect())
}

/// Buffer used by the experiments: `n`, or `n + 1` for the likelihood ratio.
pub fn experiment_delta(metric: DistanceMetricKind, n: usize) -> usize {
    match metric {
        DistanceMetricKind::LikelihoodRatio => n + 1,
        _ => n,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentResult {
    pub label: String,
    pub n: usize,
    pub len: usize,
    pub true_change_points: Vec<usize>,
    /// `(key, probability)`; the key is a signed offset from the true change
    /// point or the first time index of a bin, depending on the experiment.
    pub detection_histogram: Vec<(i64, f64)>,
    /// Fraction of replicates reporting at least one significant point.
    pub power: f64,
    pub replications: usize,
    pub config_echo: DetectorConfig,
    /// Significant locations found in every replicate.
    pub detections: Vec<Vec<usize>>,
}

impl ExperimentResult {
    /// Fraction of replicates with a detection within `radius` of `target`.
    pub fn frequency_near(&self, target: usize, radius: usize) -> f64 {
        let hits = self
            .detections
            .iter()
            .filter(|d| d.iter().any(|&k| k.abs_diff(target) <= radius))
            .count();
        hits as f64 / self.replications as f64
    }

    /// Key of the most probable histogram entry (first on ties).
    pub fn histogram_peak(&self) -> Option<i64> {
        self.detection_histogram
            .iter()
            .fold(None::<(i64, f64)>, |best, &(k, p)| match best {
                Some((_, bp)) if bp >= p => best,
                _ => Some((k, p)),
            })
            .map(|(k, _)| k)
    }
}

/// `T(n) = n(n-1) + C`.
pub fn power_law_length(n: usize, c: usize) -> usize {
    n * (n - 1) + c
}

fn two_regime_spec(n: usize, len: usize, at: usize, block: usize, rho: f64, seed: u64) -> Result<SyntheticSpec> {
    let after = if rho == 0.0 {
        CovMatrix::identity(n)
    } else {
        block_exchangeable_sigma(n, block, rho)?
    };
    SyntheticSpec::new(
        n,
        vec![Regime::new(at, CovMatrix::identity(n)), Regime::new(len - at, after)],
        seed,
    )
}

/// Runs `detect_single` on `reps` replicates of a single change from `I`
/// to a block-exchangeable covariance at `at`. Returns per-replicate
/// significant locations.
#[allow(clippy::too_many_arguments)]
pub fn single_change_detections(
    n: usize,
    len: usize,
    at: usize,
    block: usize,
    rho: f64,
    config: &DetectorConfig,
    reps: usize,
    seed: u64,
) -> Result<Vec<Option<usize>>> {
    (0..reps)
        .into_par_iter()
        .map(|r| {
            let spec = two_regime_spec(n, len, at, block, rho, derive_seed(seed, &[0xDA7A, r as u64]))?;
            let panel = standardize(&spec.generate()?)?;
            let cfg = DetectorConfig {
                seed: derive_seed(seed, &[0xB007, r as u64]),
                ..config.clone()
            };
            Ok(detect_single(&panel, &cfg)?.location())
        })
        .collect()
}

fn power_of(detections: &[Option<usize>]) -> f64 {
    detections.iter().filter(|d| d.is_some()).count() as f64 / detections.len() as f64
}

/// Power as a function of `n` with `T = n(n-1) + C` and a single change at
/// `floor(T/2)` from `I` to a 4-node exchangeable block with correlation
/// `rho`. The histogram is keyed by the signed offset of the detected
/// location from the true change point.
pub fn power_experiment(
    n_list: &[usize],
    c: usize,
    rho: f64,
    reps: usize,
    template: &DetectorConfig,
) -> Result<Vec<ExperimentResult>> {
    if reps == 0 {
        return Err(Error::InvalidConfig("reps must be positive".into()));
    }
    n_list
        .iter()
        .map(|&n| {
            let len = power_law_length(n, c);
            let at = len / 2;
            let config = template.clone().with_delta(experiment_delta(template.metric, n));
            let seed = derive_seed(template.seed, &[n as u64]);
            let found = single_change_detections(n, len, at, 4.min(n), rho, &config, reps, seed)?;
            let mut counts = std::collections::BTreeMap::<i64, usize>::new();
            for k in found.iter().flatten() {
                *counts.entry(*k as i64 - at as i64).or_default() += 1;
            }
            Ok(ExperimentResult {
                label: format!("n={n}"),
                n,
                len,
                true_change_points: vec![at],
                detection_histogram: counts
                    .into_iter()
                    .map(|(k, c)| (k, c as f64 / reps as f64))
                    .collect(),
                power: power_of(&found),
                replications: reps,
                config_echo: config,
                detections: found.into_iter().map(|d| d.into_iter().collect()).collect(),
            })
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Calibration {
    pub rho: f64,
    pub power: f64,
    /// Every `(rho, power)` evaluated, in order.
    pub evaluations: Vec<(f64, f64)>,
}

/// Upper end of the bisection bracket for `rho`.
const RHO_MAX: f64 = 0.99;

/// Bisects `rho` until the Frobenius-metric power of a single mid-series
/// change is within [`CALIBRATION_TOL`] of `target_power`.
pub fn calibrate_rho_for_power(
    n: usize,
    len: usize,
    altered_block: usize,
    target_power: f64,
    template: &DetectorConfig,
    reps: usize,
) -> Result<Calibration> {
    if !(target_power > template.alpha && target_power < 1.0) {
        return Err(Error::InvalidConfig(format!(
            "target power {target_power} must lie in (alpha, 1)"
        )));
    }
    let config = template
        .clone()
        .with_metric(DistanceMetricKind::FrobeniusSq)
        .with_delta(experiment_delta(DistanceMetricKind::LikelihoodRatio, n));
    let seed = derive_seed(template.seed, &[n as u64, len as u64, altered_block as u64]);
    let mut evaluations = Vec::new();
    let mut evaluate = |rho: f64| -> Result<f64> {
        let power = power_of(&single_change_detections(n, len, len / 2, altered_block, rho, &config, reps, seed)?);
        evaluations.push((rho, power));
        Ok(power)
    };

    let top = evaluate(RHO_MAX)?;
    if top < target_power - CALIBRATION_TOL {
        return Err(Error::NoSolution { target: target_power });
    }
    let (mut lo, mut hi) = (0.0, RHO_MAX);
    let mut best = (RHO_MAX, top);
    if (top - target_power).abs() > CALIBRATION_TOL {
        for _ in 0..CALIBRATION_MAX_STEPS {
            let mid = 0.5 * (lo + hi);
            let power = evaluate(mid)?;
            if (power - target_power).abs() < (best.1 - target_power).abs() {
                best = (mid, power);
            }
            if (power - target_power).abs() <= CALIBRATION_TOL {
                break;
            }
            if power < target_power {
                lo = mid;
            } else {
                hi = mid;
            }
        }
    }
    Ok(Calibration {
        rho: best.0,
        power: best.1,
        evaluations,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NormComparisonRow {
    pub block: usize,
    pub proportion: f64,
    pub rho: f64,
    pub metric: DistanceMetricKind,
    pub power: f64,
}

/// For each altered block size, calibrates `rho` to 50% Frobenius power and
/// measures all three metrics at that `rho` on the same replicates. All
/// metrics use the buffer `n + 1` the likelihood ratio needs.
pub fn norm_comparison_experiment(
    n: usize,
    len: usize,
    blocks: &[usize],
    template: &DetectorConfig,
    reps: usize,
) -> Result<Vec<NormComparisonRow>> {
    let delta = experiment_delta(DistanceMetricKind::LikelihoodRatio, n);
    let mut rows = Vec::new();
    for &block in blocks {
        let cal = calibrate_rho_for_power(n, len, block, 0.5, template, reps)?;
        let seed = derive_seed(template.seed, &[n as u64, len as u64, block as u64]);
        for metric in DistanceMetricKind::ALL {
            let power = if metric == DistanceMetricKind::FrobeniusSq {
                cal.power
            } else {
                let config = template.clone().with_metric(metric).with_delta(delta);
                power_of(&single_change_detections(n, len, len / 2, block, cal.rho, &config, reps, seed)?)
            };
            rows.push(NormComparisonRow {
                block,
                proportion: block as f64 / n as f64,
                rho: cal.rho,
                metric,
                power,
            });
        }
    }
    Ok(rows)
}

/// Geometry of the alternating-regime experiment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MultipleCpSettings {
    pub n: usize,
    pub len: usize,
    pub block: usize,
    pub rho: f64,
    /// Start with the block covariance instead of the identity.
    pub reversed: bool,
}

impl Default for MultipleCpSettings {
    fn default() -> Self {
        Self {
            n: 10,
            len: 400,
            block: 5,
            rho: DEFAULT_RHO,
            reversed: false,
        }
    }
}

/// Four equal regimes alternating between `I` and the block covariance,
/// analysed with recursive segmentation. The histogram is keyed by the first
/// time index of each [`BIN_WIDTH`]-point bin.
pub fn multiple_cp_experiment(
    settings: &MultipleCpSettings,
    template: &DetectorConfig,
    reps: usize,
) -> Result<ExperimentResult> {
    let MultipleCpSettings { n, len, block, rho, reversed } = *settings;
    let quarter = len / 4;
    let base = CovMatrix::identity(n);
    let alt = if rho == 0.0 {
        CovMatrix::identity(n)
    } else {
        block_exchangeable_sigma(n, block, rho)?
    };
    let (first, second) = if reversed { (alt, base) } else { (base, alt) };
    let lengths = [quarter, quarter, quarter, len - 3 * quarter];
    let config = template.clone().with_delta(experiment_delta(template.metric, n));
    let seed = derive_seed(template.seed, &[n as u64, len as u64, reversed as u64]);

    let detections: Vec<Vec<usize>> = (0..reps)
        .into_par_iter()
        .map(|r| {
            let regimes = lengths
                .iter()
                .enumerate()
                .map(|(i, &l)| Regime::new(l, if i % 2 == 0 { first.clone() } else { second.clone() }))
                .collect();
            let spec = SyntheticSpec::new(n, regimes, derive_seed(seed, &[0xDA7A, r as u64]))?;
            let panel = standardize(&spec.generate()?)?;
            let cfg = DetectorConfig {
                seed: derive_seed(seed, &[0xB007, r as u64]),
                ..config.clone()
            };
            Ok(detect_recursive(&panel, &cfg)?.points.iter().map(|p| p.location).collect())
        })
        .collect::<Result<_>>()?;

    let bins = len.div_ceil(BIN_WIDTH);
    let mut counts = vec![0usize; bins];
    for k in detections.iter().flatten() {
        counts[(k - 1) / BIN_WIDTH] += 1;
    }
    let power = detections.iter().filter(|d| !d.is_empty()).count() as f64 / reps as f64;
    Ok(ExperimentResult {
        label: if reversed { "sigma2-first" } else { "sigma1-first" }.into(),
        n,
        len,
        true_change_points: vec![quarter, 2 * quarter, 3 * quarter],
        detection_histogram: counts
            .iter()
            .enumerate()
            .map(|(b, &c)| ((b * BIN_WIDTH + 1) as i64, c as f64 / reps as f64))
            .collect(),
        power,
        replications: reps,
        config_echo: config,
        detections,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::metrics::segment_covariance;

    #[test]
    fn block_sigma_examples() {
        let s = block_exchangeable_sigma(6, 4, 0.9).unwrap();
        for u in 0..6 {
            for v in 0..6 {
                let want = if u == v {
                    1.0
                } else if u < 4 && v < 4 {
                    0.9
                } else {
                    0.0
                };
                assert_eq!(s.values()[[u, v]], want);
            }
        }
        assert_eq!(block_exchangeable_sigma(5, 3, 0.0).unwrap().values(), &Array2::<f64>::eye(5));
        let s = block_exchangeable_sigma(3, 3, 0.5).unwrap();
        assert_eq!(
            s.values(),
            &ndarray::array![[1.0, 0.5, 0.5], [0.5, 1.0, 0.5], [0.5, 0.5, 1.0]]
        );
    }

    #[test]
    fn block_sigma_rejects_indefinite() {
        assert!(matches!(block_exchangeable_sigma(4, 3, -0.5), Err(Error::BadRho { .. })));
        assert!(matches!(block_exchangeable_sigma(4, 3, 1.0), Err(Error::BadRho { .. })));
        assert!(block_exchangeable_sigma(4, 3, -0.49).is_ok());
        assert!(block_exchangeable_sigma(4, 5, 0.5).is_err());
    }

    #[test]
    fn generated_identity_panel_has_identity_covariance() {
        let len = 4000;
        let spec = SyntheticSpec::new(3, vec![Regime::new(len, CovMatrix::identity(3))], 1).unwrap();
        let p = spec.generate().unwrap();
        assert!(!p.is_standardized());
        let v = p.values();
        let tol = 5.0 / (len as f64).sqrt();
        for u in 0..3 {
            for w in 0..3 {
                let c = v.row(u).dot(&v.row(w)) / len as f64;
                let want = if u == w { 1.0 } else { 0.0 };
                assert!((c - want).abs() < tol, "({u},{w}) = {c}");
            }
        }
    }

    #[test]
    fn empty_regime_changes_nothing() {
        let sigma = block_exchangeable_sigma(3, 2, 0.4).unwrap();
        let one = SyntheticSpec::new(3, vec![Regime::new(50, sigma.clone())], 3).unwrap();
        let two = SyntheticSpec::new(
            3,
            vec![Regime::new(0, CovMatrix::identity(3)), Regime::new(50, sigma)],
            3,
        )
        .unwrap();
        assert_eq!(one.generate().unwrap(), two.generate().unwrap());
        assert_eq!(two.change_points(), vec![0]);
    }

    #[test]
    fn generation_is_deterministic_with_exact_regimes() {
        let spec = two_regime_spec(4, 30, 12, 4, 0.5, 9).unwrap();
        assert_eq!(spec.generate().unwrap(), spec.generate().unwrap());
        assert_eq!(spec.len(), 30);
        assert_eq!(spec.change_points(), vec![12]);
        assert_eq!(spec.regimes[0].length + spec.regimes[1].length, 30);
    }

    #[test]
    fn spec_rejects_bad_sigma() {
        let bad = CovMatrix::new(ndarray::array![[1.0, 2.0], [2.0, 1.0]], (0, 0)).unwrap();
        assert_eq!(
            SyntheticSpec::new(2, vec![Regime::new(10, bad)], 0),
            Err(Error::CholeskyFailure)
        );
        assert!(SyntheticSpec::new(3, vec![Regime::new(10, CovMatrix::identity(2))], 0).is_err());
    }

    #[test]
    fn power_law_lengths() {
        assert_eq!(power_law_length(4, 30), 42);
        assert_eq!(power_law_length(8, 30), 86);
        assert_eq!(power_law_length(12, 30), 162);
    }

    #[test]
    fn market_prices_shape_and_break() {
        let spec = MarketSpec { n: 6, len: 600, break_at: 300, ..MarketSpec::desk_default(4) };
        let prices = market_prices(&spec).unwrap();
        assert_eq!((prices.n_nodes(), prices.n_times()), (6, 601));
        assert!(prices.values().iter().all(|&p| p > 0.0));
        let r = standardize(&crate::panel::log_returns(&prices).unwrap()).unwrap();
        let before = segment_covariance(&r, 1, 300).unwrap();
        let after = segment_covariance(&r, 301, 600).unwrap();
        let mean_off = |c: &CovMatrix| {
            let v = c.values();
            (0..6).flat_map(|u| (0..6).filter(move |&w| w != u).map(move |w| (u, w)))
                .map(|(u, w)| v[[u, w]] / (v[[u, u]] * v[[w, w]]).sqrt())
                .sum::<f64>()
                / 30.0
        };
        assert!(mean_off(&after) > mean_off(&before) + 0.05);
    }

    #[test]
    fn ar1_panel_is_autocorrelated() {
        let p = standardize(&ar1_panel(3, 3000, 0.5, 2).unwrap()).unwrap();
        for i in 0..3 {
            let (_, r1) = crate::panel::durbin_watson_series(&p.row(i).to_vec());
            assert!((r1 - 0.5).abs() < 0.06);
        }
        assert!(ar1_panel(3, 10, 1.0, 0).is_err());
    }

    #[test]
    fn power_experiment_small_scale() {
        let template = DetectorConfig::for_nodes(4).with_b(100).with_seed(5);
        let res = power_experiment(&[4], DEFAULT_C, 0.9, 40, &template).unwrap();
        assert_eq!(res[0].len, 42);
        let total: f64 = res[0].detection_histogram.iter().map(|(_, p)| p).sum();
        assert!((total - res[0].power).abs() < 1e-12);
        assert!(res[0].power > 0.5);
        assert_eq!(res, power_experiment(&[4], DEFAULT_C, 0.9, 40, &template).unwrap());
    }

    #[test]
    fn power_monotone_in_rho() {
        let config = DetectorConfig::for_nodes(4).with_b(100);
        let reps = 100;
        let powers: Vec<f64> = [0.2, 0.5, 0.8]
            .iter()
            .map(|&rho| power_of(&single_change_detections(4, 42, 21, 4, rho, &config, reps, 11).unwrap()))
            .collect();
        let se = (0.25 / reps as f64).sqrt();
        assert!(powers[1] + 3.0 * se >= powers[0], "{powers:?}");
        assert!(powers[2] + 3.0 * se >= powers[1], "{powers:?}");
        assert!(powers[2] > powers[0]);
    }

    #[test]
    fn calibration_preconditions() {
        let template = DetectorConfig::for_nodes(4).with_b(100);
        assert!(matches!(
            calibrate_rho_for_power(4, 42, 2, 0.05, &template, 10),
            Err(Error::InvalidConfig(_))
        ));
        // Too short to ever reach full power.
        assert!(matches!(
            calibrate_rho_for_power(4, 12, 2, 0.99, &template, 20),
            Err(Error::NoSolution { .. })
        ));
    }

    #[test]
    fn null_multiple_cp_histogram_is_low() {
        let template = DetectorConfig::for_nodes(4).with_b(100).with_seed(3);
        let settings = MultipleCpSettings { n: 4, len: 80, block: 2, rho: 0.0, reversed: false };
        let res = multiple_cp_experiment(&settings, &template, 60).unwrap();
        assert_eq!(res.detection_histogram.len(), 16);
        assert!(res.power <= 0.2, "null power {}", res.power);
        assert!(res.detection_histogram.iter().all(|&(_, p)| p <= 0.1));
    }
}
