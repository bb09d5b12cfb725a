use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = FogError> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum FogError {
    /// A model or scenario parameter violates its invariant.
    #[error("invalid parameter: {0}")]
    Parameter(String),

    /// An argument lies outside the domain of the operation (e.g. alpha outside [0, C]).
    #[error("domain error: {0}")]
    Domain(String),

    /// The G/D/1 estimator was evaluated where service < mean input.
    #[error("outside validity region: service {service} < mean input {mean}")]
    Validity { service: f64, mean: f64 },

    /// An autocovariance sequence produced a non-positive aggregate variance.
    #[error("invalid autocovariance: aggregate variance over {n} slots is {value}")]
    Model { n: usize, value: f64 },

    #[error("lag {lag} out of range for trace of length {len}")]
    Range { lag: usize, len: usize },

    #[error("{path}:{line}: {msg}")]
    Parse {
        path: PathBuf,
        line: usize,
        msg: String,
    },

    #[error("{0}: no samples")]
    EmptyInput(PathBuf),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl FogError {
    pub(crate) fn param(msg: impl Into<String>) -> Self {
        FogError::Parameter(msg.into())
    }

    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        FogError::Domain(msg.into())
    }
}
