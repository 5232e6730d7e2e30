use thiserror::Error;

/// Errors raised by grids, solvers, experiments and file I/O.
#[derive(Debug, Error)]
pub enum Error {
    #[error("grid mismatch: {0}")]
    GridMismatch(String),
    #[error("invalid grid: {0}")]
    InvalidGrid(String),
    #[error("invalid parameter: {0}")]
    Parameter(String),
    #[error("compatibility violated: defect {defect:.3e} exceeds tolerance {tol:.3e}")]
    Compatibility { defect: f64, tol: f64 },
    #[error("non-finite values in {0}")]
    NonFinite(String),
    #[error("solver failure: {0}")]
    Solver(String),
    #[error("search exhausted: {0}")]
    SearchExhausted(String),
    #[error("configuration error: {0}")]
    Config(String),
    #[error("field file: {0}")]
    FieldFile(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
