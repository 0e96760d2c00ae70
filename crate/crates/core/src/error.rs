use thiserror::Error;

use crate::expr::{EvalError, ParseError};

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("grid function shape {got:?} does not match grid shape {expected:?}")]
    ShapeMismatch { expected: (usize, usize), got: (usize, usize) },

    #[error("explicit scheme unstable: (1 - 2 theta) * dt * sigma^2 / dx^2 = {ratio:.4} exceeds 1 (theta = {theta})")]
    Unstable { theta: f64, ratio: f64 },

    #[error("tridiagonal solver broke down at row {row} (pivot {pivot:e})")]
    SolverBreakdown { row: usize, pivot: f64 },

    #[error("non-finite value {value} at x = {x}, t = {t}{}", control.map(|d| format!(", control = {d}")).unwrap_or_default())]
    NonFinite { value: f64, x: f64, t: f64, control: Option<f64> },

    #[error("no contractive kappa found up to {max_kappa}; measured ratios {ratios:?}")]
    NoContractiveKappa { max_kappa: f64, ratios: Vec<(f64, f64)> },

    #[error(
        "consumption bounds failed to self-stabilize after {widenings} widenings: c in [{c_min}, {c_max}], bounds [{m1}, {m2}]"
    )]
    SelfConsistency { widenings: usize, c_min: f64, c_max: f64, m1: f64, m2: f64 },

    #[error("wealth underflow on path {path} at t = {t}")]
    WealthUnderflow { path: usize, t: f64 },

    #[error(transparent)]
    Parse(#[from] ParseError),

    #[error(transparent)]
    Eval(#[from] EvalError),

    #[error("io: {0}")]
    Io(#[from] std::io::Error),

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidArgument(msg.into())
}
