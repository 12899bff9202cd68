use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// A parameter violates its type invariant or produced a non-finite result.
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    /// Input lies outside the domain an operation is defined on.
    #[error("domain error: {0}")]
    Domain(String),

    /// Division by (near) zero or a singular linear response.
    #[error("singular: {0}")]
    Singular(String),

    #[error("fit failed after {iterations} iterations (residual {residual:e}): {reason}")]
    FitFailure {
        reason: String,
        residual: f64,
        iterations: usize,
        /// Best parameters found before giving up, if any.
        best: Option<Vec<f64>>,
    },

    #[error("analysis error: {0}")]
    Analysis(String),

    #[error("config error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidParameter(msg.into())
    }

    /// Stable machine-readable code used on the CLI's stderr line.
    pub fn code(&self) -> &'static str {
        match self {
            Error::InvalidParameter(_) => "invalid_parameter",
            Error::Domain(_) => "domain",
            Error::Singular(_) => "singular",
            Error::FitFailure { .. } => "fit_failure",
            Error::Analysis(_) => "analysis",
            Error::Config(_) => "config",
            Error::Io(_) => "io",
            Error::Csv(_) => "csv",
            Error::Json(_) => "json",
        }
    }

    /// True for failures that originate in the numerics rather than the inputs.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::Singular(_) | Error::FitFailure { .. } | Error::Analysis(_)
        )
    }
}
