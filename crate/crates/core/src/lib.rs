//! Numerical toolkit for scalar-on-function regression with a point impact:
//! the response loads on a functional predictor at a single unknown time,
//! trajectories are rough (fractional Brownian motion), and the impact
//! point is estimated by profile least squares over the observation grid.
//!
//! - [`fbm`]: exact simulation of fractional Brownian motion plus a
//!   roughness diagnostic,
//! - [`scenarios`]: synthetic data generators (correctly specified,
//!   functional-linear, mixed) and population criterion utilities,
//! - [`estimation`]: profile least-squares fits,
//! - [`bootstrap`]: residual and pairs resampling with percentile
//!   intervals for the impact point,
//! - [`limit_dist`]: simulation of the argmin-type limit laws and the
//!   plug-in interval built from their quantiles,
//! - [`grid`], [`rng`], [`stats`]: shared plumbing.
//!
//! All simulation is deterministic given a master seed: every trajectory,
//! bootstrap replicate and limit-law draw runs on its own derived stream,
//! so results do not depend on scheduling or thread count.

pub mod bootstrap;
pub(crate) mod csvio;
pub mod error;
pub mod estimation;
pub mod fbm;
pub mod grid;
pub mod limit_dist;
pub mod rng;
pub mod scenarios;
pub mod stats;

pub use error::{Error, Result};
pub use grid::Grid;
