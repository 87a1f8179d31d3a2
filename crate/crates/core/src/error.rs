use thiserror::Error;

/// Errors raised by the numerical engines.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("unknown kernel profile `{0}`")]
    UnknownProfile(String),

    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("kernel support radius {radius} is not below half the smallest period {half_period}")]
    KernelTooWide { radius: f64, half_period: f64 },

    #[error("point {point:?} lies outside the domain box")]
    OutsideDomain { point: Vec<f64> },

    #[error("expression error at column {column}: {message}")]
    Expression { column: usize, message: String },

    #[error("integration produced non-finite values at node {node} (t = {time})")]
    NonFinite { node: usize, time: f64 },

    #[error("power iteration did not converge after {iterations} iterations (last residual {residual:.3e}, oscillation ratio {oscillation:.3})")]
    NoConvergence {
        iterations: usize,
        residual: f64,
        oscillation: f64,
    },

    #[error("periodic eigenfunction defect {defect:.3e} at node {node} exceeds tolerance {tolerance:.1e}")]
    PeriodicityDefect {
        node: usize,
        defect: f64,
        tolerance: f64,
    },

    #[error("alpha = {alpha} must exceed max h = {max_h}")]
    AlphaBelowBand { alpha: f64, max_h: f64 },

    #[error("periodic resolvent solve failed at node {node}: {reason}")]
    PeriodicSolve { node: usize, reason: String },

    #[error("bracket failure: {0}")]
    Bracket(String),

    #[error("ordering violated at t = {time}, state index {index}: u+ - u- = {value:.3e}")]
    OrderingViolation { time: f64, index: usize, value: f64 },

    #[error("insufficient nodes near the maximiser: {0}")]
    InsufficientNodes(String),

    #[error("finite-difference stencil leaves the domain: {0}")]
    StencilOutside(String),

    #[error("fingerprint mismatch: {0:016x} vs {1:016x}")]
    FingerprintMismatch(u64, u64),

    #[error("soundness violation: {0}")]
    Soundness(String),

    #[error("state dimension {dim} exceeds the configured cap {cap}")]
    ResourceCap { dim: usize, cap: usize },
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Error {
    Error::InvalidParameter {
        name,
        reason: reason.into(),
    }
}
