// SPDX-License-Identifier: MIT OR Apache-2.0

use thiserror::Error;

/// Errors raised by panel handling, estimation and detection.
///
/// Time indices carried by variants are 1-based and inclusive, the same
/// convention used throughout the public API.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid panel: {0}")]
    InvalidPanel(String),

    #[error("node {node} has (near) zero variance and cannot be standardized")]
    ConstantRow { node: usize },

    #[error("non-positive price at node {node}, time {time}")]
    NonPositivePrice { node: usize, time: usize },

    #[error("panel must be standardized before this operation")]
    NotStandardized,

    #[error("bad time range ({start}, {end}) for a series of length {len}")]
    BadRange { start: usize, end: usize, len: usize },

    #[error("panels differ in shape: expected {expected:?}, found {found:?}")]
    ShapeMismatch {
        expected: (usize, usize),
        found: (usize, usize),
    },

    #[error(
        "series of length {len} is too short for buffer {delta}: need at least {} time points",
        2 * delta + 2
    )]
    InsufficientLength { len: usize, delta: usize },

    #[error(
        "segment covariance S({start},{end}) is singular; the buffer must exceed the node count"
    )]
    SingularCovariance { start: usize, end: usize },

    #[error("autocovariance Toeplitz system of node {node} is singular")]
    SingularToeplitz { node: usize },

    #[error("AR fit does not match the panel: {0}")]
    FitMismatch(String),

    #[error("covariance matrix is not positive definite")]
    CholeskyFailure,

    #[error("correlation {rho} is outside the positive definite range for block size {block}")]
    BadRho { rho: f64, block: usize },

    #[error("no correlation reaches the target power {target}")]
    NoSolution { target: f64 },

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
}

pub type Result<T> = std::result::Result<T, Error>;
