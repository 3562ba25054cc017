use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("infeasible privacy parameters: {0}")]
    InfeasiblePrivacy(String),

    #[error("infeasible plan: n = {n} is below the group count; need n >= {min_n}")]
    InfeasiblePlan { n: u64, min_n: u64 },

    #[error("divergence undefined: {0}")]
    DivergenceUndefined(String),

    #[error("illegal state: {0}")]
    IllegalState(String),

    #[error("parse error at `{token}`: {reason}")]
    Parse { token: String, reason: String },

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("csv error on {path}: {source}")]
    Csv {
        path: PathBuf,
        #[source]
        source: csv::Error,
    },
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidParameter(msg.into())
    }

    pub(crate) fn parse(token: impl Into<String>, reason: impl Into<String>) -> Self {
        Error::Parse {
            token: token.into(),
            reason: reason.into(),
        }
    }
}
