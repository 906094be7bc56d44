//! Error type shared by every module of the crate.

use thiserror::Error;

/// Coarse classification used by front ends to pick exit codes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ErrorKind {
    /// Malformed input: bad grid, kernel too wide, period mismatch.
    Input,
    /// A mathematical hypothesis required by the computation does not hold.
    Precondition,
    /// An iteration ran out of budget.
    Convergence,
    /// Blow-up, non-finite values, or a front reaching the domain edge.
    Numerical,
    /// Filesystem failures while exporting.
    Io,
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("{what} did not converge after {iterations} iterations (last residual {residual:.3e})")]
    NoConvergence {
        what: String,
        iterations: usize,
        residual: f64,
        /// Diagnostic history (growth ratios, period deltas, ...).
        history: Vec<f64>,
    },

    #[error("non-finite value at t = {t}, grid index {index}")]
    BlowUp { t: f64, index: usize },

    #[error("front reached the boundary margin at t = {t} (position {position}, limit {limit})")]
    FrontLeftDomain { t: f64, position: f64, limit: f64 },

    #[error("monotone iteration broke order in period {period} by {amount:.3e}")]
    MonotonicityViolated { period: usize, amount: f64 },

    #[error("front speed fit failed: {0}")]
    FitFailed(String),

    #[error("time step {dt} violates the stability bound {bound} ({reason})")]
    Stability { dt: f64, bound: f64, reason: &'static str },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub fn kind(&self) -> ErrorKind {
        match self {
            Error::InvalidInput(_) | Error::Stability { .. } => ErrorKind::Input,
            Error::Precondition(_) => ErrorKind::Precondition,
            Error::NoConvergence { .. } => ErrorKind::Convergence,
            Error::BlowUp { .. } | Error::FrontLeftDomain { .. } | Error::FitFailed(_)
            | Error::MonotonicityViolated { .. } => ErrorKind::Numerical,
            Error::Io(_) => ErrorKind::Io,
        }
    }

    pub(crate) fn input(msg: impl Into<String>) -> Self {
        Error::InvalidInput(msg.into())
    }

    pub(crate) fn precondition(msg: impl Into<String>) -> Self {
        Error::Precondition(msg.into())
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
