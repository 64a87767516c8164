use thiserror::Error;

/// Errors raised by the solver library.
///
/// Every variant maps onto a short machine-readable class via
/// [`CrsvmError::class`], which the command-line front end prints on failure.
#[derive(Debug, Error)]
pub enum CrsvmError {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("linear solver did not converge (residual norm {residual:.3e} after {iterations} iterations)")]
    SolverFailure { residual: f64, iterations: usize },

    #[error("non-finite iterate at iteration {iteration}: {detail}")]
    Divergence { iteration: usize, detail: String },

    #[error("protocol error: {0}")]
    Protocol(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error("data error: {0}")]
    Data(String),

    #[error("all {} grid fits failed: {}", .0.len(), .0.join("; "))]
    GridFailed(Vec<String>),

    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },

    #[error("parse error: {0}")]
    Parse(String),
}

impl CrsvmError {
    pub fn class(&self) -> &'static str {
        match self {
            CrsvmError::InvalidArgument(_) => "invalid-argument",
            CrsvmError::Shape(_) => "shape",
            CrsvmError::SolverFailure { .. } => "solver-failure",
            CrsvmError::Divergence { .. } => "divergence",
            CrsvmError::Protocol(_) => "protocol",
            CrsvmError::Config(_) => "config",
            CrsvmError::Unsupported(_) => "unsupported",
            CrsvmError::Data(_) => "data",
            CrsvmError::GridFailed(_) => "grid-failed",
            CrsvmError::Io { .. } => "io",
            CrsvmError::Parse(_) => "parse",
        }
    }

    pub(crate) fn io(path: impl AsRef<std::path::Path>, source: std::io::Error) -> Self {
        CrsvmError::Io {
            path: path.as_ref().display().to_string(),
            source,
        }
    }
}

pub type Result<T> = std::result::Result<T, CrsvmError>;
