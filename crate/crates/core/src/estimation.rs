//! Profile least squares for the point-impact working model.
//!
//! For every grid point the simple regression of Y on X(t) is solved in
//! closed form and the impact point estimate is the grid point with the
//! smallest residual sum of squares. Column sums of X and X² depend only
//! on the trajectories, so they are computed once and shared across
//! response vectors; the residual bootstrap leans on that through
//! [`ProfileWorkspace`].
//!
//! [`fit_extended`] augments the working model with basis functionals of
//! the whole path and profiles the same way, solving one small normal
//! system per grid point.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fbm::TrajectorySet;
use crate::grid::Grid;
use crate::scenarios::{functional_integral, Dataset, TwoSampleData, WeightFunction};

/// Fewest subjects for the base fit: intercept, slope, and at least one
/// residual degree of freedom.
pub const MIN_SUBJECTS: usize = 3;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitResult {
    pub alpha_hat: f64,
    pub beta_hat: f64,
    pub theta_hat: f64,
    pub theta_index: usize,
    /// Residual sum of squares at every grid point, in grid order.
    pub sse_profile: Vec<f64>,
    pub residuals: Vec<f64>,
    /// sqrt(SSE/n) at the chosen point.
    pub sigma_hat: f64,
}

impl FitResult {
    pub fn n(&self) -> usize {
        self.residuals.len()
    }

    /// One-line CSV summary with header.
    pub fn to_csv(&self) -> String {
        format!(
            "alpha_hat,beta_hat,theta_hat,theta_index,sigma_hat,n\n{},{},{},{},{},{}\n",
            self.alpha_hat,
            self.beta_hat,
            self.theta_hat,
            self.theta_index,
            self.sigma_hat,
            self.n()
        )
    }
}

/// Row lookup for fits: direct for plain data, index-mapped for pairs
/// resampling. Monomorphized so the hot loops see through it.
pub(crate) trait RowAccess {
    fn n(&self) -> usize;
    fn row(&self, i: usize) -> &[f64];
    fn y(&self, i: usize) -> f64;
}

pub(crate) struct Direct<'a> {
    pub ts: &'a TrajectorySet,
    pub y: &'a [f64],
}

impl RowAccess for Direct<'_> {
    fn n(&self) -> usize {
        self.y.len()
    }
    fn row(&self, i: usize) -> &[f64] {
        self.ts.row(i)
    }
    fn y(&self, i: usize) -> f64 {
        self.y[i]
    }
}

pub(crate) struct Indexed<'a> {
    pub ts: &'a TrajectorySet,
    pub y: &'a [f64],
    pub idx: &'a [usize],
}

impl RowAccess for Indexed<'_> {
    fn n(&self) -> usize {
        self.idx.len()
    }
    fn row(&self, i: usize) -> &[f64] {
        self.ts.row(self.idx[i])
    }
    fn y(&self, i: usize) -> f64 {
        self.y[self.idx[i]]
    }
}

/// Per-column trajectory sums reused across fits on the same design:
/// sx[j] = Σᵢ Xᵢ(tⱼ), sxx[j] = Σᵢ Xᵢ(tⱼ)².
#[derive(Debug, Clone)]
pub struct ProfileWorkspace {
    sx: Vec<f64>,
    sxx: Vec<f64>,
    n: usize,
}

impl ProfileWorkspace {
    pub fn new(ts: &TrajectorySet) -> Self {
        let m = ts.grid().len();
        let n = ts.n_subjects();
        let mut sx = vec![0.0; m];
        let mut sxx = vec![0.0; m];
        for i in 0..n {
            let row = ts.row(i);
            for j in 0..m {
                let v = row[j];
                sx[j] += v;
                sxx[j] += v * v;
            }
        }
        ProfileWorkspace { sx, sxx, n }
    }

    pub fn n(&self) -> usize {
        self.n
    }
}

/// Core profile scan. `sxy[j] = Σᵢ yᵢ Xᵢ(tⱼ)` is accumulated row-major
/// (subject outer, grid inner) to walk each trajectory contiguously.
fn profile_scan<A: RowAccess>(
    data: &A,
    grid: &Grid,
    sx: &[f64],
    sxx: &[f64],
) -> Result<FitResult> {
    let n = data.n();
    if n < MIN_SUBJECTS {
        return Err(Error::TooFewSubjects {
            have: n,
            need: MIN_SUBJECTS,
        });
    }
    let m = grid.len();
    let nf = n as f64;

    let mut sy = 0.0;
    let mut syy = 0.0;
    let mut sxy = vec![0.0; m];
    for i in 0..n {
        let y = data.y(i);
        sy += y;
        syy += y * y;
        let row = data.row(i);
        for j in 0..m {
            sxy[j] += y * row[j];
        }
    }
    let syy_c = syy - sy * sy / nf;

    let mut profile = vec![0.0; m];
    let mut any_usable = false;
    let mut best = (0usize, f64::INFINITY, 0.0f64);
    for j in 0..m {
        let sxx_c = sxx[j] - sx[j] * sx[j] / nf;
        let (sse, beta) = if sxx_c <= 0.0 {
            // constant column carries no signal; intercept-only fit
            (syy_c, 0.0)
        } else {
            any_usable = true;
            let sxy_c = sxy[j] - sx[j] * sy / nf;
            let beta = sxy_c / sxx_c;
            ((syy_c - beta * sxy_c).max(0.0), beta)
        };
        profile[j] = sse;
        if sse < best.1 {
            best = (j, sse, beta);
        }
    }
    if !any_usable {
        return Err(Error::DegenerateDesign(
            "every grid point has a constant trajectory column".into(),
        ));
    }

    let (theta_index, sse, beta_hat) = best;
    let alpha_hat = (sy - beta_hat * sx[theta_index]) / nf;
    let mut residuals = Vec::with_capacity(n);
    for i in 0..n {
        residuals.push(data.y(i) - alpha_hat - beta_hat * data.row(i)[theta_index]);
    }
    Ok(FitResult {
        alpha_hat,
        beta_hat,
        theta_hat: grid.points()[theta_index],
        theta_index,
        sse_profile: profile,
        residuals,
        sigma_hat: (sse / nf).sqrt(),
    })
}

/// Fit the point-impact working model by profile least squares. Ties in
/// the profile go to the smallest grid index.
pub fn fit_point_impact(data: &Dataset) -> Result<FitResult> {
    let ws = ProfileWorkspace::new(&data.trajectories);
    fit_with_workspace(&ws, &data.trajectories, &data.responses)
}

/// Same fit with precomputed column sums; the design must be the one the
/// workspace was built from. This is the bootstrap fast path: only the
/// response-dependent sums are recomputed.
pub fn fit_with_workspace(
    ws: &ProfileWorkspace,
    ts: &TrajectorySet,
    responses: &[f64],
) -> Result<FitResult> {
    if responses.len() != ts.n_subjects() || ws.n != ts.n_subjects() {
        return Err(Error::InvalidParameter(format!(
            "workspace built for {} subjects, got {} responses on {} trajectories",
            ws.n,
            responses.len(),
            ts.n_subjects()
        )));
    }
    profile_scan(&Direct { ts, y: responses }, ts.grid(), &ws.sx, &ws.sxx)
}

/// Full refit on a row resample given by `idx` (entries may repeat).
/// Column sums change with the resample, so they are rebuilt here.
pub(crate) fn fit_indexed(ts: &TrajectorySet, y: &[f64], idx: &[usize]) -> Result<FitResult> {
    let m = ts.grid().len();
    let mut sx = vec![0.0; m];
    let mut sxx = vec![0.0; m];
    for &i in idx {
        let row = ts.row(i);
        for j in 0..m {
            let v = row[j];
            sx[j] += v;
            sxx[j] += v * v;
        }
    }
    profile_scan(&Indexed { ts, y, idx }, ts.grid(), &sx, &sxx)
}

// ---------------------------------------------------------------------------
// Extended working model

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExtendedFitResult {
    pub fit: FitResult,
    /// Coefficients of the basis functionals at the chosen impact point,
    /// in the order the basis was given.
    pub basis_coefficients: Vec<f64>,
    /// Grid indices skipped because the normal equations were singular
    /// there (collinear columns).
    pub excluded: Vec<usize>,
}

/// Relative pivot floor for the normal-equation solver: pivots below
/// this fraction of the largest diagonal mark the point rank deficient.
const PIVOT_RTOL: f64 = 1e-10;

/// Profile least squares for the working model augmented with weighted
/// path integrals: Y ≈ α + β X(t) + Σ_k c_k ∫ f_k X. An empty basis is
/// exactly [`fit_point_impact`].
pub fn fit_extended(data: &Dataset, basis: &[WeightFunction]) -> Result<ExtendedFitResult> {
    let mbasis = basis.len();
    if mbasis == 0 {
        return Ok(ExtendedFitResult {
            fit: fit_point_impact(data)?,
            basis_coefficients: Vec::new(),
            excluded: Vec::new(),
        });
    }
    let ts = &data.trajectories;
    let grid = ts.grid();
    let n = ts.n_subjects();
    // p = intercept + slope + basis; demand a residual degree of freedom
    let p = 2 + mbasis;
    if n <= p {
        return Err(Error::TooFewSubjects { have: n, need: p + 1 });
    }
    let nf = n as f64;
    let y = &data.responses;

    // z[i*mbasis + k] = ∫ f_k X_i, fixed across grid points
    let mut z = vec![0.0; n * mbasis];
    for i in 0..n {
        let row = ts.row(i);
        for (k, f) in basis.iter().enumerate() {
            z[i * mbasis + k] = functional_integral(row, f, grid);
        }
    }

    // response- and basis-only sums
    let mut sy = 0.0;
    let mut syy = 0.0;
    let mut sz = vec![0.0; mbasis];
    let mut szz = vec![0.0; mbasis * mbasis];
    let mut szy = vec![0.0; mbasis];
    for i in 0..n {
        let yi = y[i];
        sy += yi;
        syy += yi * yi;
        let zi = &z[i * mbasis..(i + 1) * mbasis];
        for a in 0..mbasis {
            sz[a] += zi[a];
            szy[a] += zi[a] * yi;
            for b in a..mbasis {
                szz[a * mbasis + b] += zi[a] * zi[b];
            }
        }
    }
    for a in 0..mbasis {
        for b in 0..a {
            szz[a * mbasis + b] = szz[b * mbasis + a];
        }
    }

    let m = grid.len();
    let mut sx = vec![0.0; m];
    let mut sxx = vec![0.0; m];
    let mut sxy = vec![0.0; m];
    // szx[a*m + j] = Σ_i z_ia x_ij
    let mut szx = vec![0.0; mbasis * m];
    for i in 0..n {
        let row = ts.row(i);
        let yi = y[i];
        let zi = &z[i * mbasis..(i + 1) * mbasis];
        for j in 0..m {
            let v = row[j];
            sx[j] += v;
            sxx[j] += v * v;
            sxy[j] += yi * v;
        }
        for a in 0..mbasis {
            let za = zi[a];
            if za == 0.0 {
                continue;
            }
            let dst = &mut szx[a * m..(a + 1) * m];
            for j in 0..m {
                dst[j] += za * row[j];
            }
        }
    }

    // per-point normal equations in the (p-1)-dim centered system
    // [x z] with coefficient vector (β, c); intercept recovered after
    let dim = 1 + mbasis;
    let mut gram = vec![0.0; dim * dim];
    let mut rhs = vec![0.0; dim];
    let mut sol = vec![0.0; dim];
    let syy_c = syy - sy * sy / nf;

    let mut profile = vec![f64::INFINITY; m];
    let mut excluded = Vec::new();
    let mut best: Option<(usize, f64, Vec<f64>)> = None;
    for j in 0..m {
        gram[0] = sxx[j] - sx[j] * sx[j] / nf;
        rhs[0] = sxy[j] - sx[j] * sy / nf;
        for a in 0..mbasis {
            let cross = szx[a * m + j] - sz[a] * sx[j] / nf;
            gram[a + 1] = cross;
            gram[(a + 1) * dim] = cross;
            rhs[a + 1] = szy[a] - sz[a] * sy / nf;
            for b in 0..mbasis {
                gram[(a + 1) * dim + (b + 1)] = szz[a * mbasis + b] - sz[a] * sz[b] / nf;
            }
        }
        if !solve_spd(&mut gram.clone(), &rhs, &mut sol) {
            excluded.push(j);
            continue;
        }
        let explained: f64 = rhs.iter().zip(&sol).map(|(r, s)| r * s).sum();
        let sse = (syy_c - explained).max(0.0);
        profile[j] = sse;
        let better = match &best {
            None => true,
            Some((_, best_sse, _)) => sse < *best_sse,
        };
        if better {
            best = Some((j, sse, sol.clone()));
        }
    }

    let (theta_index, sse, coef) = best.ok_or(Error::RankDeficientEverywhere)?;
    let beta_hat = coef[0];
    let basis_coefficients = coef[1..].to_vec();
    let mut alpha_hat = sy - beta_hat * sx[theta_index];
    for a in 0..mbasis {
        alpha_hat -= basis_coefficients[a] * sz[a];
    }
    alpha_hat /= nf;

    let mut residuals = Vec::with_capacity(n);
    for i in 0..n {
        let mut fitted = alpha_hat + beta_hat * ts.row(i)[theta_index];
        for a in 0..mbasis {
            fitted += basis_coefficients[a] * z[i * mbasis + a];
        }
        residuals.push(y[i] - fitted);
    }

    Ok(ExtendedFitResult {
        fit: FitResult {
            alpha_hat,
            beta_hat,
            theta_hat: grid.points()[theta_index],
            theta_index,
            sse_profile: profile,
            residuals,
            sigma_hat: (sse / nf).sqrt(),
        },
        basis_coefficients,
        excluded,
    })
}

/// Cholesky solve of a small symmetric system; false when a pivot falls
/// under the relative floor (rank deficient), in which case `sol` is
/// unspecified. `a` is clobbered.
fn solve_spd(a: &mut [f64], b: &[f64], sol: &mut [f64]) -> bool {
    let n = b.len();
    let floor = {
        let mut maxd = 0.0f64;
        for i in 0..n {
            maxd = maxd.max(a[i * n + i].abs());
        }
        PIVOT_RTOL * maxd
    };
    // in-place LL^T on the lower triangle
    for i in 0..n {
        for j in 0..=i {
            let mut s = a[i * n + j];
            for k in 0..j {
                s -= a[i * n + k] * a[j * n + k];
            }
            if i == j {
                if s <= floor {
                    return false;
                }
                a[i * n + i] = s.sqrt();
            } else {
                a[i * n + j] = s / a[j * n + j];
            }
        }
    }
    // forward then back substitution
    for i in 0..n {
        let mut s = b[i];
        for k in 0..i {
            s -= a[i * n + k] * sol[k];
        }
        sol[i] = s / a[i * n + i];
    }
    for i in (0..n).rev() {
        let mut s = sol[i];
        for k in i + 1..n {
            s -= a[k * n + i] * sol[k];
        }
        sol[i] = s / a[i * n + i];
    }
    true
}

// ---------------------------------------------------------------------------
// Two-sample location of maximal mean difference

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TwoSampleFit {
    /// Grid point maximizing the group mean difference.
    pub theta_hat: f64,
    pub theta_index: usize,
    /// Mean difference at every grid point, in grid order.
    pub profile: Vec<f64>,
}

/// Estimate the location where group 1 exceeds group 2 the most: the
/// argmax over the grid of the difference of sample means. Ties go to
/// the smallest index.
pub fn fit_two_sample(data: &TwoSampleData) -> Result<TwoSampleFit> {
    let grid = data.group1.grid();
    if grid != data.group2.grid() {
        return Err(Error::InvalidParameter(
            "two-sample groups observed on different grids".into(),
        ));
    }
    let m = grid.len();
    let n1 = data.group1.n_subjects() as f64;
    let n2 = data.group2.n_subjects() as f64;
    let mut profile = vec![0.0; m];
    for i in 0..data.group1.n_subjects() {
        let row = data.group1.row(i);
        for j in 0..m {
            profile[j] += row[j] / n1;
        }
    }
    for i in 0..data.group2.n_subjects() {
        let row = data.group2.row(i);
        for j in 0..m {
            profile[j] -= row[j] / n2;
        }
    }
    let mut best = 0usize;
    for j in 1..m {
        if profile[j] > profile[best] {
            best = j;
        }
    }
    Ok(TwoSampleFit {
        theta_hat: grid.points()[best],
        theta_index: best,
        profile,
    })
}
