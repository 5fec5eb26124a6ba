use thiserror::Error;

/// Errors produced by estimators, solvers, and pipelines.
#[derive(Debug, Error)]
pub enum Error {
    /// A pointwise estimator has no usable neighborhood at `x0`.
    #[error("estimator undefined at x0 = {x0}: {reason}")]
    UndefinedAtPoint { x0: f64, reason: String },

    /// An iterative solver ran out of iterations.
    #[error("{what} failed to converge after {iterations} iterations ({detail})")]
    NonConvergence {
        what: String,
        iterations: usize,
        detail: String,
    },

    /// An expression was evaluated outside its mathematical domain.
    #[error("domain error: {0}")]
    Domain(String),

    /// A global-parameter estimator could not produce a value.
    #[error("estimation error: {0}")]
    Estimation(String),

    /// Bandwidth selection failed on every candidate.
    #[error("bandwidth selection error: {0}")]
    Selection(String),

    /// Invalid arguments or malformed configuration.
    #[error("invalid input: {0}")]
    InvalidInput(String),

    /// Malformed CSV input.
    #[error("{path}:{line}: {reason}")]
    Csv {
        path: String,
        line: usize,
        reason: String,
    },

    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub fn undefined_at(x0: f64, reason: impl Into<String>) -> Self {
        Error::UndefinedAtPoint {
            x0,
            reason: reason.into(),
        }
    }

    pub fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidInput(msg.into())
    }

    /// True for failures of the numerics rather than of the input.
    pub fn is_numeric(&self) -> bool {
        matches!(
            self,
            Error::UndefinedAtPoint { .. }
                | Error::NonConvergence { .. }
                | Error::Domain(_)
                | Error::Estimation(_)
                | Error::Selection(_)
        )
    }
}

pub type Result<T> = std::result::Result<T, Error>;
