use thiserror::Error;

/// Errors raised anywhere in the multiscale pipeline.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid mesh: {0}")]
    InvalidMesh(String),

    #[error("incompatible grids: fine subdivisions {fine} not divisible by coarse subdivisions {coarse}")]
    IncompatibleGrid { fine: usize, coarse: usize },

    #[error("invalid coefficient: {0}")]
    InvalidCoefficient(String),

    #[error("index {index} out of range for dimension {dim}")]
    Index { index: usize, dim: usize },

    #[error("solver failed to reach tolerance: relative residual {residual:e} (target {target:e})")]
    SolverFailure { residual: f64, target: f64 },

    #[error("local solve failed on {region}: {reason}")]
    LocalSolver { region: String, reason: String },

    #[error("singular metric matrix in {context}")]
    SingularMetric { context: String },

    #[error("regularization failed on {context}")]
    Regularization { context: String },

    #[error("singular reduced system: rank defect detected in {test}x{test} test block with {trial} trial columns")]
    SingularReduced { test: usize, trial: usize },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("parse error at line {line}: {reason}")]
    Parse { line: usize, reason: String },

    #[error("I/O error: {0}")]
    Io(#[from] std::io::Error),

    #[error("serialization error: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// Process exit code grouping errors by category.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::InvalidMesh(_) | Error::IncompatibleGrid { .. } => 2,
            Error::InvalidCoefficient(_) => 3,
            Error::Index { .. } => 4,
            Error::SolverFailure { .. }
            | Error::LocalSolver { .. }
            | Error::SingularMetric { .. }
            | Error::Regularization { .. }
            | Error::SingularReduced { .. } => 5,
            Error::Config(_) | Error::Parse { .. } => 6,
            Error::Io(_) | Error::Json(_) => 7,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
