use thiserror::Error;

/// Errors raised by the numerical routines and the online learners.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("matrix must be square, got {rows}x{cols}")]
    NotSquare { rows: usize, cols: usize },

    #[error("symmetric eigensolver did not converge for a {dim}x{dim} matrix")]
    EigenNoConvergence { dim: usize },

    #[error("matrix is not positive semi-definite (min eigenvalue {min_eigenvalue:e})")]
    NotPsd { min_eigenvalue: f64 },

    #[error("matrix is not positive definite")]
    NotPd,

    #[error("graph is not connected")]
    NotConnected,

    #[error("invalid graph: {0}")]
    InvalidGraph(String),

    #[error("input is outside the decision set: {0}")]
    InfeasibleInput(String),

    #[error(
        "projection onto the decision set failed after {cycles} cycles \
         (violation {violation:e}, last change {last_change:e})"
    )]
    ProjectionDiverged { cycles: usize, violation: f64, last_change: f64 },

    #[error("solver stalled at iteration {iteration} (objective {objective:e}, step {step_norm:e})")]
    SolverStalled { iteration: usize, objective: f64, step_norm: f64 },

    #[error("loss matrix is outside the loss class: {0}")]
    LossOutOfClass(String),

    #[error("row {row} has zero norm")]
    ZeroRow { row: usize },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("invalid generator spec: {0}")]
    Spec(String),

    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error("round {round}: {source}")]
    Round {
        round: usize,
        #[source]
        source: Box<Error>,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
