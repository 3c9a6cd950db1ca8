use thiserror::Error;

/// Errors produced by the geometry, engine and experiment layers.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid probability vector: {0}")]
    InvalidProbVector(String),

    #[error("non-finite value in {context}")]
    NonFinite { context: &'static str },

    #[error("length mismatch: expected {expected}, got {got}")]
    LengthMismatch { expected: usize, got: usize },

    #[error("input is not normalized: sum = {sum}")]
    NotNormalized { sum: f64 },

    #[error("conjugate solver did not converge after {iterations} iterations (simplex residual {residual:e})")]
    SolverNonConvergence { iterations: usize, residual: f64 },

    #[error("regularizer is not convex at {value} (convex region ends at {limit})")]
    NonConvexRegion { value: f64, limit: f64 },

    #[error("invalid regularizer spec `{0}`")]
    ParseRegularizer(String),

    #[error("invalid schedule spec `{0}`")]
    ParseSchedule(String),

    #[error("step index {t} out of range (1..={max})")]
    StepOutOfRange { t: usize, max: usize },

    #[error("combined natural parameter is not a valid Gaussian: {0}")]
    Inadmissible(String),

    #[error("optimizer did not converge: final gradient norm {grad_norm:e} after {iterations} iterations")]
    OptimizerNonConvergence { iterations: usize, grad_norm: f64 },

    #[error("insufficient data: need at least {needed} records, got {got}")]
    InsufficientData { needed: usize, got: usize },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("config error at `{path}`: {message}")]
    Config { path: String, message: String },

    #[error("i/o error: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl From<csv::Error> for Error {
    fn from(e: csv::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
