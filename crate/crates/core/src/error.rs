use thiserror::Error;

/// Errors raised by the library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("metric not positive definite at q = {q:?}")]
    MetricNotPositiveDefinite { q: Vec<f64> },

    #[error("no primitive available for a form without linear growth")]
    NoPrimitive,

    #[error("diameter unavailable; supply manually")]
    DiameterUnavailable,

    #[error("action_sigma gauge-dependent on this class: winding {winding:?} is not atoroidal")]
    NotAtoroidal { winding: Vec<i64> },

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("invalid loop: {0}")]
    InvalidLoop(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("unbounded potential on the verification grid")]
    UnboundedPotential,

    #[error("descent stalled at iteration {iter}: step underflow with action {action:e}, gradient norm {grad_norm:e}")]
    DescentStalled { iter: usize, action: f64, grad_norm: f64 },

    #[error("degenerate critical point; Newton unavailable (residual {residual:e})")]
    DegenerateCriticalPoint { residual: f64 },

    #[error("Legendre solve failed at t = {t}, q = {q:?}, p = {p:?}")]
    LegendreFailed { t: f64, q: Vec<f64>, p: Vec<f64> },

    #[error("non-finite state at integration step {step}")]
    NonFiniteState { step: usize },

    #[error("eigen-decomposition failed")]
    EigenFailed,

    #[error("config error at `{path}`: {message}")]
    Config { path: String, message: String },

    #[error("parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
