use thiserror::Error;

/// Errors raised across the laboratory.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("configuration error at `{path}`: {message}")]
    Config { path: String, message: String },

    #[error("resolution rule violated: h = {h:.6e} exceeds eps/16 = {limit:.6e} (eps = {eps})")]
    Resolution { h: f64, limit: f64, eps: f64 },

    #[error("lambda = {re} + {im}i lies on the positive real axis")]
    SpectralDomain { re: f64, im: f64 },

    #[error("solver did not converge after {iterations} iterations (relative residual {residual:.3e})")]
    SolverFailure {
        iterations: usize,
        residual: f64,
        history: Vec<f64>,
    },

    #[error("singular system: {0}")]
    Singular(String),

    #[error("inconsistent result: {0}")]
    Inconsistent(String),

    #[error("domain mismatch: {0}")]
    DomainMismatch(String),

    #[error("non-zero mean input: |mean| = {mean:.3e} exceeds {tol:.3e}")]
    NonZeroMean { mean: f64, tol: f64 },

    #[error("refused: {0}")]
    Refused(String),

    #[error("fit error: {0}")]
    Fit(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn param(msg: impl Into<String>) -> Self {
        Error::InvalidParameter(msg.into())
    }

    pub fn config(path: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Config {
            path: path.into(),
            message: message.into(),
        }
    }
}
