//! Crate-wide error type.

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("Hurst index must lie in (0, 1], got {0}")]
    InvalidHurst(f64),

    #[error("grid needs at least {min} points, got {len}")]
    GridTooShort { len: usize, min: usize },

    #[error("grid points must be strictly increasing (violated at index {index})")]
    GridNotIncreasing { index: usize },

    #[error("grid points must be finite")]
    GridNotFinite,

    #[error("operation requires a uniform grid")]
    GridNotUniform,

    #[error("covariance matrix is not positive definite: leading minor of order {order} failed even after jitter")]
    NotPositiveDefinite { order: usize },

    #[error("trajectory is constant; roughness is undefined")]
    DegenerateTrajectory,

    #[error("design is degenerate: {0}")]
    DegenerateDesign(String),

    #[error("design matrix is rank deficient at every grid point")]
    RankDeficientEverywhere,

    #[error("need at least {need} subjects, got {have}")]
    TooFewSubjects { have: usize, need: usize },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("limit-law simulation did not localize: boundary hit fraction {fraction} at half-width {half_width} after {doublings} doublings")]
    Unconverged {
        fraction: f64,
        half_width: f64,
        doublings: u32,
    },

    #[error("no quantile tabulated for H = {hurst}, alpha = {alpha}")]
    MissingQuantile { hurst: f64, alpha: f64 },

    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
