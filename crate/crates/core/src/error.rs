use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("linear system is singular at pivot {pivot}")]
    Singular { pivot: usize },

    #[error("steady state is not unique: null-space diagnostic {ratio:.3e} exceeds {limit:.1e}")]
    NullSpace { ratio: f64, limit: f64 },

    #[error("steady state violates positivity: min eigenvalue {min_eigenvalue:.3e}")]
    Positivity { min_eigenvalue: f64 },

    #[error("steady-state residual {residual:.3e} exceeds {limit:.3e}")]
    Residual { residual: f64, limit: f64 },

    #[error("fit did not converge: {0}")]
    NonConvergence(String),

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("grid mismatch: {0}")]
    GridMismatch(String),

    #[error("Dicke domain of {n} spins exceeds the configured cap of {cap}")]
    DomainTooLarge { n: usize, cap: usize },

    #[error("{failed} of {total} Monte Carlo trials failed")]
    TooManyFailures { failed: usize, total: usize },

    #[error("malformed input: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            name,
            reason: reason.into(),
        }
    }

    /// True for failures of the numerical machinery rather than of the inputs.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::Singular { .. }
                | Error::NullSpace { .. }
                | Error::Positivity { .. }
                | Error::Residual { .. }
                | Error::NonConvergence(_)
                | Error::TooManyFailures { .. }
        )
    }
}
