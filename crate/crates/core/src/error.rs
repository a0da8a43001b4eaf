use thiserror::Error;

/// Errors produced by the library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid MDP: {0}")]
    InvalidMdp(String),

    #[error("invalid occupancy measure: {0}")]
    InvalidMeasure(String),

    #[error("invalid policy: {0}")]
    InvalidPolicy(String),

    #[error("shape mismatch: expected {expected}, got {actual}")]
    ShapeMismatch { expected: String, actual: String },

    #[error("linear solve residual {residual:e} exceeds 1e-8")]
    SingularSystem { residual: f64 },

    #[error("no convergence after {iters} iterations (residual {residual:e})")]
    NonConvergence { iters: usize, residual: f64 },

    #[error("dual ascent diverged at iterate {iterate}: primal gap {gap:e} > 10x initial {initial:e}")]
    Divergence {
        iterate: usize,
        gap: f64,
        initial: f64,
        history: Vec<(usize, f64)>,
    },

    #[error("domain error: {0}")]
    Domain(String),

    #[error("grid search attained the boundary of the search box; widen or refine the grid")]
    GridBoundary,

    #[error("non-finite value in {0}")]
    NonFinite(&'static str),

    #[error("invalid action: {0}")]
    InvalidAction(String),

    #[error("episode already finished; call reset first")]
    EpisodeDone,

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error("empty input: {0}")]
    Empty(&'static str),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
