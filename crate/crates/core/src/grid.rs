//! Observation grids: strictly increasing, finite time points. Uniform
//! spacing is detected once at construction and cached, since several
//! fast paths (circulant sampling, roughness estimation) require it.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Relative tolerance for uniform-spacing detection: a grid is uniform if
/// every spacing differs from the mean spacing by at most this fraction.
const UNIFORMITY_RTOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct Grid {
    points: Vec<f64>,
    uniform: bool,
    resolution: Option<f64>,
}

impl Grid {
    pub fn new(points: Vec<f64>) -> Result<Self> {
        if points.len() < 2 {
            return Err(Error::GridTooShort {
                len: points.len(),
                min: 2,
            });
        }
        if points.iter().any(|p| !p.is_finite()) {
            return Err(Error::GridNotFinite);
        }
        for i in 1..points.len() {
            if points[i] <= points[i - 1] {
                return Err(Error::GridNotIncreasing { index: i });
            }
        }
        let mean = (points[points.len() - 1] - points[0]) / (points.len() - 1) as f64;
        let uniform = points
            .windows(2)
            .all(|w| ((w[1] - w[0]) - mean).abs() <= UNIFORMITY_RTOL * mean);
        Ok(Grid {
            points,
            uniform,
            resolution: uniform.then_some(mean),
        })
    }

    /// Uniform grid of `len` points from `start` to `end` inclusive.
    pub fn uniform(start: f64, end: f64, len: usize) -> Result<Self> {
        if len < 2 {
            return Err(Error::GridTooShort { len, min: 2 });
        }
        if !(end > start) {
            return Err(Error::InvalidParameter(format!(
                "grid end {end} must exceed start {start}"
            )));
        }
        let step = (end - start) / (len - 1) as f64;
        let mut points: Vec<f64> = (0..len).map(|i| start + i as f64 * step).collect();
        // Hit the right endpoint exactly regardless of rounding in `step`.
        points[len - 1] = end;
        Self::new(points)
    }

    /// Uniform grid on [0, 1].
    pub fn unit(len: usize) -> Result<Self> {
        Self::uniform(0.0, 1.0, len)
    }

    pub fn points(&self) -> &[f64] {
        &self.points
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn is_uniform(&self) -> bool {
        self.uniform
    }

    /// Spacing between consecutive points, when uniform.
    pub fn resolution(&self) -> Option<f64> {
        self.resolution
    }

    pub fn start(&self) -> f64 {
        self.points[0]
    }

    pub fn end(&self) -> f64 {
        *self.points.last().unwrap()
    }

    /// Index of the point exactly equal to zero, if present.
    pub fn zero_index(&self) -> Option<usize> {
        self.points.iter().position(|&p| p == 0.0)
    }

    /// Index of the grid point closest to `t`; ties resolve to the
    /// smaller index.
    pub fn nearest_index(&self, t: f64) -> usize {
        let hi = self.points.partition_point(|&p| p < t);
        if hi == 0 {
            return 0;
        }
        if hi == self.points.len() {
            return hi - 1;
        }
        let lo = hi - 1;
        if (t - self.points[lo]) <= (self.points[hi] - t) {
            lo
        } else {
            hi
        }
    }
}

impl TryFrom<Vec<f64>> for Grid {
    type Error = Error;

    fn try_from(points: Vec<f64>) -> Result<Self> {
        Grid::new(points)
    }
}

impl From<Grid> for Vec<f64> {
    fn from(grid: Grid) -> Self {
        grid.points
    }
}
