use thiserror::Error;

/// Errors raised anywhere in the engine.
#[derive(Debug, Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("missing key `{0}`")]
    MissingKey(String),

    #[error("unknown key `{0}`")]
    UnknownKey(String),

    #[error("invalid value for `{key}`: {reason}")]
    InvalidValue { key: String, reason: String },

    #[error("parse error: {0}")]
    Parse(String),

    #[error("fixed-point iteration did not converge after {iterations} iterations (last residual {residual:e})")]
    Convergence { iterations: usize, residual: f64 },

    #[error("integration failed at t = {t}: {reason}")]
    Integration { t: f64, reason: String },

    #[error("Fock truncation too coarse: {0}")]
    Truncation(String),

    #[error("fit did not converge after {iterations} iterations (A = {amplitude}, t_half = {t_half}, A0 = {offset})")]
    FitConvergence {
        iterations: usize,
        amplitude: f64,
        t_half: f64,
        offset: f64,
    },

    #[error("sweep run at {delay} failed: {source}")]
    Sweep {
        delay: f64,
        #[source]
        source: Box<Error>,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// True for errors caused by user input rather than by a solver.
    pub fn is_validation(&self) -> bool {
        if let Error::Sweep { source, .. } = self {
            return source.is_validation();
        }
        matches!(
            self,
            Error::Domain(_)
                | Error::MissingKey(_)
                | Error::UnknownKey(_)
                | Error::InvalidValue { .. }
                | Error::Parse(_)
                | Error::Truncation(_)
        )
    }

    pub(crate) fn invalid(key: &str, reason: impl Into<String>) -> Self {
        Error::InvalidValue { key: key.to_string(), reason: reason.into() }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
