use thiserror::Error;

/// Errors produced by the numerical routines and the experiment runner.
#[derive(Debug, Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("pole: 1 + conj(lambda)*z vanishes at the input")]
    Pole,

    #[error("accuracy check failed for {what}: residual {residual:.3e} exceeds {tolerance:.1e}")]
    Accuracy {
        what: &'static str,
        residual: f64,
        tolerance: f64,
    },

    #[error("{what} did not converge within {iterations} iterations")]
    NoConvergence { what: &'static str, iterations: usize },

    #[error("degree {0} exceeds the supported maximum {max}", max = crate::MAX_DEGREE)]
    DegreeTooLarge(usize),

    #[error("overdetermined: total multiplicity {total} exceeds dim P_k = {dim}")]
    Overdetermined { total: usize, dim: usize },

    #[error("analysis operator is rank deficient (sigma_min = {sigma_min:.3e}, sigma_max = {sigma_max:.3e})")]
    RankDeficient { sigma_min: f64, sigma_max: f64 },

    #[error("{id} outside its regime: {reason}")]
    Regime { id: String, reason: String },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    /// True when a write failed because the reader closed its end.
    pub fn is_broken_pipe(&self) -> bool {
        let kind = match self {
            Error::Io(e) => Some(e.kind()),
            Error::Json(e) => e.io_error_kind(),
            Error::Csv(e) => match e.kind() {
                csv::ErrorKind::Io(e) => Some(e.kind()),
                _ => None,
            },
            _ => None,
        };
        kind == Some(std::io::ErrorKind::BrokenPipe)
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

pub(crate) fn domain<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::Domain(msg.into()))
}
