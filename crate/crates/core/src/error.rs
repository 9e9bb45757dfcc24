use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("dimension mismatch in {context}: expected {expected}, got {got}")]
    DimensionMismatch {
        context: &'static str,
        expected: usize,
        got: usize,
    },

    #[error("time step {dt} violates stability bound {bound} at t = {time}")]
    Stability { dt: f64, bound: f64, time: f64 },

    #[error("state blew up (non-finite or unbounded values) at t = {time}")]
    BlowUp { time: f64 },

    #[error("{what} did not converge: residual {residual:e} after {iterations} iterations")]
    NonConvergence {
        what: &'static str,
        residual: f64,
        iterations: usize,
    },

    #[error("matrix is not positive definite (pivot {pivot} at row {row})")]
    NotPositiveDefinite { row: usize, pivot: f64 },

    #[error("singular matrix in {0}")]
    Singular(&'static str),

    #[error("requested rank {requested} exceeds numerical rank {rank} (sigma_{requested} = {sigma:e})")]
    RankDeficient { requested: usize, rank: usize, sigma: f64 },

    #[error("DEIM interpolation matrix singular at step {k}")]
    DeimSingular { k: usize },

    #[error("snapshot time {0} not present in trajectory")]
    MissingTime(f64),

    #[error("time {time} beyond horizon {horizon}")]
    BeyondHorizon { time: f64, horizon: f64 },

    #[error("{0}")]
    Empty(&'static str),

    #[error("unsupported format version `{found}` in {path:?} (expected `{expected}`)")]
    Version {
        path: PathBuf,
        expected: &'static str,
        found: String,
    },

    #[error("malformed file {path:?}: {reason}")]
    Format { path: PathBuf, reason: String },

    #[error("I/O error on {path:?}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn param(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            name,
            reason: reason.into(),
        }
    }

    pub(crate) fn dims(context: &'static str, expected: usize, got: usize) -> Self {
        Error::DimensionMismatch { context, expected, got }
    }

    /// True for failures of the numerics (blow-up, nonconvergence, rank), as
    /// opposed to bad input or I/O.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::Stability { .. }
                | Error::BlowUp { .. }
                | Error::NonConvergence { .. }
                | Error::NotPositiveDefinite { .. }
                | Error::Singular(_)
                | Error::RankDeficient { .. }
                | Error::DeimSingular { .. }
        )
    }

    pub fn is_io(&self) -> bool {
        matches!(self, Error::Io { .. })
    }
}
