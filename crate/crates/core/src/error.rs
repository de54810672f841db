use thiserror::Error;

use crate::geometry::Vec2;

/// Errors produced by the toolkit.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    /// A hypothesis required by the operation does not hold at the given point.
    #[error("hypothesis `{hypothesis}` violated: {detail}")]
    Hypothesis { hypothesis: String, detail: String },

    #[error("point ({}, {}) lies outside the working region", .0.x1, .0.x2)]
    OutsideRegion(Vec2),

    #[error("Legendre transform did not converge (residual {residual:e})")]
    Legendre { residual: f64 },

    #[error("non-finite state in Hamiltonian flow at t = {time}")]
    BlowUp { time: f64 },

    #[error("matrix is not symmetric positive definite: {0}")]
    NotSpd(String),

    #[error("expression error: {0}")]
    Expression(String),

    #[error("t = {t} exceeds the local horizon t0 = {t0}")]
    HorizonExceeded { t: f64, t0: f64 },

    #[error("covector ({}, {}) is not a reachable gradient", .0.x1, .0.x2)]
    NotReachable(Vec2),

    #[error("i/o error: {0}")]
    Io(String),

    #[error("internal error: {0}")]
    Internal(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl From<csv::Error> for Error {
    fn from(e: csv::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl Error {
    pub(crate) fn hypothesis(hypothesis: &str, detail: impl Into<String>) -> Self {
        Error::Hypothesis {
            hypothesis: hypothesis.to_string(),
            detail: detail.into(),
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;

/// Name of the noncriticality hypothesis used in error messages and reports.
pub const NONCRITICAL: &str = "0 ∉ co H_p(x0, D⁺u(x0))";
/// Name of the singular-start hypothesis.
pub const SINGULAR_START: &str = "x0 ∈ Sing(u)";
