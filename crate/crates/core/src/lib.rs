// SPDX-License-Identifier: MIT OR Apache-2.0

//! Change point detection in the correlation structure of multivariate
//! time series.
//!
//! The detector scans every admissible split of an `n x T` panel, measures
//! how far the covariance before the split is from the covariance after it,
//! and calibrates that distance against bootstrap replicates drawn under the
//! no-change hypothesis (i.i.d. column resampling, or a sieve bootstrap for
//! autocorrelated series). Multiple change points are found by binary
//! segmentation.
//!
//! Modules:
//! - [`panel`]: the panel type, standardization, log returns, Durbin-Watson.
//! - [`metrics`]: segment covariances, distances, incremental profiles.
//! - [`bootstrap`]: i.i.d. and sieve resampling, Yule-Walker fits.
//! - [`detector`]: scan statistic, p-values, recursive segmentation.
//! - [`theory`]: closed-form null expectation of the Frobenius distance.
//! - [`simlab`]: synthetic generators and power experiments.

// Negated comparisons deliberately treat NaN as a failed check.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod bootstrap;
pub mod detector;
pub mod error;
pub mod linalg;
pub mod metrics;
pub mod panel;
pub mod simlab;
pub mod streams;
pub mod theory;

pub use bootstrap::{ArFit, BootstrapMode};
pub use detector::{ChangePoint, ChangePointReport, DetectorConfig, ScanProfile};
pub use error::{Error, Result};
pub use metrics::{CovMatrix, DistanceMetricKind, DistanceProfile};
pub use panel::{standardize, AutocorrDiagnostic, SeriesPanel};
