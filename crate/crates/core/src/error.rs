use thiserror::Error;

/// Errors raised by the numerical kernels, steppers and experiment driver.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    Dimension { expected: usize, got: usize },

    #[error("non-finite value in {what}")]
    NonFinite { what: String },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("index {index} out of range for size {size}")]
    IndexOutOfRange { index: usize, size: usize },

    #[error("step {step}: {reason}")]
    StepFailed { step: u64, reason: String },

    #[error("ascent direction undefined: gradient norm {grad_norm:e} is below the zero threshold")]
    UndefinedAscent { grad_norm: f64 },

    #[error("gradient flow did not converge after {steps} steps (residual gradient norm {residual:e})")]
    NonConvergent { steps: u64, residual: f64 },

    #[error("eigengap {gap:e} below tolerance {tol:e}")]
    Eigengap { gap: f64, tol: f64 },

    #[error("Jacobi eigensolver did not converge in {sweeps} sweeps")]
    EigenNoConvergence { sweeps: usize },

    #[error("numerical rank is zero: no nonzero eigenvalue")]
    ZeroRank,

    #[error("config: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
