use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid grid shape: {0}")]
    InvalidShape(String),
    #[error("shape mismatch: expected {expected} values, got {got}")]
    ShapeMismatch { expected: usize, got: usize },
    #[error("degenerate metric at node {node} (min eigenvalue {min_eig:e})")]
    DegenerateMetric { node: usize, min_eig: f64 },
    #[error("degenerate induced boundary metric at boundary node {node}")]
    DegenerateBoundary { node: usize },
    #[error("unsupported: {0}")]
    Unsupported(String),
    #[error("precondition violated: {0}")]
    Precondition(String),
    #[error("step too large: updated metric leaves the positive cone at node {node}")]
    StepTooLarge { node: usize },
    #[error("static kernel detected: relative smallest singular value {sigma_rel:e} below guard {guard:e}")]
    KernelDetected { sigma_rel: f64, guard: f64 },
    #[error("solver diverged after {iterations} iterations (residual {residual:e})")]
    Diverged { iterations: usize, residual: f64 },
    #[error("triangle inequality violated in triangle {tri}")]
    TriangleInequality { tri: usize },
    #[error("sign condition violated: {0}")]
    GateViolation(String),
    #[error("singular linear system: {0}")]
    Singular(String),
    #[error("malformed input: {0}")]
    Parse(String),
}

pub type Result<T> = std::result::Result<T, Error>;
