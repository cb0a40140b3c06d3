//! Crate-wide error type.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error(
        "unknown model `{0}` (expected dawson, gausscos1d, gausscos2d, subgaussian, oubaseline)"
    )]
    UnknownModel(String),

    #[error("invalid parameter {name}={value}: {reason}")]
    InvalidParameter {
        name: &'static str,
        value: f64,
        reason: &'static str,
    },

    #[error(
        "truncation radius {radius} too small: relative mass {endpoint_mass:.3e} within R/10 of an endpoint (limit 1e-10); enlarge the radius"
    )]
    TruncationTooSmall { radius: f64, endpoint_mass: f64 },

    #[error("non-finite value encountered in {context}")]
    NonFinite { context: &'static str },

    #[error(
        "orthonormal basis degraded: max Gram deviation {gram_error:.3e} at size {size} (limit 1e-6); use a smaller basis or more quadrature panels"
    )]
    BasisDegradation { gram_error: f64, size: usize },

    #[error(
        "generator assembly mismatch {mismatch:.3e} between Dirichlet-form and direct routes (limit {limit:.1e}); the measure is not stationary for this drift"
    )]
    AssemblyMismatch { mismatch: f64, limit: f64 },

    #[error("perturbation kernel not mean-zero: |mu(kernel)| = {mean:.3e} (limit 1e-8)")]
    KernelNotCentered { mean: f64 },

    #[error("QR eigensolver failed to converge within {iterations} iterations")]
    EigenNoConvergence { iterations: usize },

    #[error(
        "ODE step size underflow at t={t:.6e} (h={h:.3e}); the truncated generator is too stiff"
    )]
    StepSizeUnderflow { t: f64, h: f64 },

    #[error("insufficient data: {points} points in fit window, need at least {needed}")]
    InsufficientData { points: usize, needed: usize },

    #[error("empty fit window: {detail}")]
    FitWindow { detail: String },

    #[error("particle divergence at t={time:.4}: |x| = {magnitude:.3e} exceeds blow-up guard 1e6")]
    Divergence { time: f64, magnitude: f64 },

    #[error("metric class violation: {property} fails at r={witness:.6e} ({detail})")]
    MetricViolation {
        property: &'static str,
        witness: f64,
        detail: String,
    },

    #[error("config error at line {line}: {message}")]
    ConfigParse { line: usize, message: String },

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
