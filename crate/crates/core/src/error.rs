use thiserror::Error;

/// Errors raised across the pipeline.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid dimension: {0}")]
    InvalidDimension(String),

    #[error("invalid problem: {0}")]
    InvalidProblem(String),

    #[error("design ({l}, {alpha}) outside bounds")]
    DesignOutOfBounds { l: f64, alpha: f64 },

    #[error("explicit scheme unstable: CFL ratio {ratio} exceeds 0.5")]
    Stability { ratio: f64 },

    #[error("singular matrix")]
    Singular,

    #[error("matrix dimension {0} is not a power of two; pad before decomposing")]
    PaddingRequired(usize),

    #[error("qubit index {index} out of range for {n_qubits} qubits")]
    QubitOutOfRange { index: usize, n_qubits: usize },

    #[error("parameter length mismatch: expected {expected}, got {got}")]
    ParamLength { expected: usize, got: usize },

    #[error("state preparation: {0}")]
    StatePrep(String),

    #[error("degenerate operator: <phi|phi> = {0:e}")]
    DegenerateOperator(f64),

    #[error("degenerate denominator: |<phi_n|psi>| = {0:e}")]
    DegenerateDenominator(f64),

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("cholesky factorization failed after jitter retries")]
    Cholesky,

    #[error("config: {0}")]
    Config(String),
}

pub type Result<T> = std::result::Result<T, Error>;
