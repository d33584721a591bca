use thiserror::Error;

/// Errors raised by the residual evaluators and solvers.
#[derive(Debug, Clone, Error)]
pub enum QviError {
    #[error("dimension mismatch: expected {expected:?} (regimes, nodes), found {found:?}")]
    DimensionMismatch {
        expected: (usize, usize),
        found: (usize, usize),
    },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    /// The QVI form needs strictly positive switching costs; the zero-cost
    /// problem is handled by the HJB-limit path.
    #[error("switching cost between regimes {from} and {to} is zero; use the HJB-limit path")]
    ZeroCost { from: usize, to: usize },

    #[error("Newton path supports only penalty degree 1, got {0}")]
    UnsupportedPenaltyDegree(f64),

    #[error("singular slant at iteration {iteration} (residual {residual:e})")]
    SingularSlant {
        iteration: usize,
        residual: f64,
        last_iterate: Vec<f64>,
    },

    #[error("no convergence after {iterations} iterations (residual {residual:e})")]
    MaxIterExceeded {
        iterations: usize,
        residual: f64,
        last_iterate: Vec<f64>,
    },

    #[error("pseudo-time oracle exceeded {steps} steps (residual {residual:e})")]
    MaxStepsExceeded { steps: usize, residual: f64 },

    #[error("pseudo-time oracle diverged after {halvings} step halvings")]
    DivergenceDetected { halvings: usize },

    #[error("no sign-consistent active set among {patterns} patterns")]
    NoConsistentPattern { patterns: usize },

    #[error("multiple sign-consistent active sets with different solutions: {patterns:?}")]
    MultiplePatterns { patterns: Vec<u64> },

    #[error("gap bound violated at regime {regime}, node {node}: {detail}")]
    BoundViolation {
        regime: usize,
        node: usize,
        detail: String,
    },
}

pub type Result<T> = std::result::Result<T, QviError>;
