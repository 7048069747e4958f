use thiserror::Error;

use crate::amp::AmpTrace;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid prior: {0}")]
    InvalidPrior(String),

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("invalid parameter: {0}")]
    Parameter(String),

    #[error("iteration diverged at t = {iteration}: {reason}")]
    Divergence {
        iteration: usize,
        reason: String,
        /// Records produced before the divergence, when available.
        trace: Option<Box<AmpTrace>>,
    },

    #[error("unsupported combination: {0}")]
    Capability(String),

    #[error("no convergence after {iterations} iterations (last value {last})")]
    Convergence { iterations: usize, last: f64 },

    #[error("value {value} outside achievable range [{lo}, {hi}]")]
    Range { value: f64, lo: f64, hi: f64 },

    #[error("calibration invalid at tau = {tau}: lambda = {lambda} < 0")]
    OutOfValidity { tau: f64, lambda: f64 },

    #[error("lambda = 0 requires n >= N (got n = {n}, N = {big_n}); use the zero-lambda AMP policy instead")]
    Underdetermined { n: usize, big_n: usize },

    #[error("lasso did not converge in {sweeps} sweeps (kkt residual {kkt_residual:e})")]
    LassoNonConvergence {
        sweeps: usize,
        kkt_residual: f64,
        best: Vec<f64>,
    },

    #[error("config error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Toml(#[from] toml::de::Error),
}
