use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid mesh: {0}")]
    InvalidMesh(String),
    #[error("mesh format error at line {line}: {message}")]
    Format { line: usize, message: String },
    #[error("unsupported order {order} for {method}")]
    UnsupportedOrder { method: &'static str, order: usize },
    #[error("recovery {recovery} is not compatible with {method} of order {order}")]
    IncompatibleRecovery {
        recovery: &'static str,
        method: &'static str,
        order: usize,
    },
    #[error("RT index mismatch: expected {expected}, found {found}")]
    IndexMismatch { expected: usize, found: usize },
    #[error("system is not positive definite; increase the penalty gamma")]
    Indefinite,
    #[error("linear solver failed: {0}")]
    Solver(String),
    #[error("patch at vertex {vertex} has inconsistent right-hand side (defect {defect:e})")]
    InconsistentPatch { vertex: usize, defect: f64 },
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}

pub type Result<T> = std::result::Result<T, Error>;
