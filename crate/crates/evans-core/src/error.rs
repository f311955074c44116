//! Crate-wide error type.

use thiserror::Error;

/// Errors produced by the numerical kernels.
///
/// Messages carry enough context (dimensions, condition numbers, locations)
/// to diagnose a failed run from a log line alone.
#[derive(Debug, Clone, Error)]
pub enum EvansError {
    /// Incompatible or invalid dimensions.
    #[error("dimension error: {0}")]
    Dimension(String),

    /// An iterative kernel failed to converge or produced non-finite values.
    #[error("numerical error: {0}")]
    Numerical(String),

    /// A stable/unstable spectral split could not be performed.
    #[error("split error: {0}")]
    Split(String),

    /// A frame or matrix lost rank.
    #[error("degeneracy error: {0}")]
    Degenerate(String),

    /// Two objects that must span the same subspace do not.
    #[error("subspace error: {0}")]
    Subspace(String),

    /// Evaluation exactly at a declared singular point.
    #[error("singularity error: {0}")]
    Singularity(String),

    /// An ODE solve did not reach the end of its interval.
    #[error("nonconvergence at x = {x}: {message}")]
    Nonconvergence { x: f64, message: String },

    /// Homotopy continuation stalled; reports the last stage that solved.
    #[error("homotopy error: failed beyond c = {last_good_c}: {message}")]
    Homotopy { last_good_c: f64, message: String },

    /// The Evans function is too close to zero on a contour node.
    #[error("near-zero on contour at lambda = {lambda}: |D| = {magnitude} below threshold {threshold}")]
    NearZeroOnContour {
        lambda: String,
        magnitude: f64,
        threshold: f64,
    },

    /// Contour refinement exhausted its sample budget.
    #[error("refinement budget of {budget} samples exhausted; worst segment [{t_left}, {t_right}] has relative step {rel_step}")]
    RefinementBudget {
        budget: usize,
        t_left: f64,
        t_right: f64,
        rel_step: f64,
    },

    /// API misuse (e.g. open contour where a closed one is required).
    #[error("usage error: {0}")]
    Usage(String),
}

pub type Result<V> = std::result::Result<V, EvansError>;
