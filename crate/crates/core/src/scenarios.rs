//! Data-generating regimes for the point-impact regression study.
//!
//! A response may load on a trajectory through a single time point
//! (the working model), through a weighted integral of the whole path, or
//! both. Generators for all three regimes share one code path, so the
//! integral-free regime is bit-identical to the general one with a zero
//! weight. The two-sample regime produces paired groups of trajectories
//! around given mean functions.
//!
//! [`MisspecCriterion`] evaluates the population risk of fitting the
//! point-impact working model (slope fixed at 1) to data from the general
//! regime; its minimizer is the pseudo-true impact point the estimator
//! targets under misspecification.

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::csvio;
use crate::error::{Error, Result};
use crate::fbm::{self, FbmSpec, TrajectorySet};
use crate::grid::Grid;
use crate::rng::{derive_seed, label, substream};

/// Cap on polynomial degree: binomial expansion of the shifted-power
/// integrals stays well-conditioned up to here.
const MAX_POLY_DEGREE: usize = 15;

/// Weight function f on [0,1] for the functional response term ∫ f·X.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum WeightFunction {
    Constant(f64),
    /// 1 on [lo, hi] (inclusive), 0 elsewhere.
    Indicator { lo: f64, hi: f64 },
    /// Coefficients in ascending powers of t.
    Polynomial(Vec<f64>),
    /// Piecewise-linear interpolation of `values` on `grid`, extended by
    /// its end values outside the tabulated range.
    Tabulated { grid: Grid, values: Vec<f64> },
}

impl WeightFunction {
    pub fn constant(c: f64) -> Result<Self> {
        if !c.is_finite() {
            return Err(Error::InvalidParameter("constant weight must be finite".into()));
        }
        Ok(WeightFunction::Constant(c))
    }

    pub fn indicator(lo: f64, hi: f64) -> Result<Self> {
        if !(lo.is_finite() && hi.is_finite() && lo < hi) {
            return Err(Error::InvalidParameter(format!(
                "indicator needs finite lo < hi, got [{lo}, {hi}]"
            )));
        }
        Ok(WeightFunction::Indicator { lo, hi })
    }

    pub fn polynomial(coeffs: Vec<f64>) -> Result<Self> {
        if coeffs.is_empty() || coeffs.iter().any(|c| !c.is_finite()) {
            return Err(Error::InvalidParameter(
                "polynomial weight needs at least one finite coefficient".into(),
            ));
        }
        if coeffs.len() > MAX_POLY_DEGREE + 1 {
            return Err(Error::InvalidParameter(format!(
                "polynomial degree above {MAX_POLY_DEGREE} is not supported"
            )));
        }
        Ok(WeightFunction::Polynomial(coeffs))
    }

    pub fn tabulated(grid: Grid, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::InvalidParameter(format!(
                "tabulated weight has {} values on a {}-point grid",
                values.len(),
                grid.len()
            )));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidParameter(
                "tabulated weight contains a non-finite value".into(),
            ));
        }
        Ok(WeightFunction::Tabulated { grid, values })
    }

    pub fn eval(&self, t: f64) -> f64 {
        match self {
            WeightFunction::Constant(c) => *c,
            WeightFunction::Indicator { lo, hi } => {
                if t >= *lo && t <= *hi {
                    1.0
                } else {
                    0.0
                }
            }
            WeightFunction::Polynomial(coeffs) => {
                coeffs.iter().rev().fold(0.0, |acc, c| acc * t + c)
            }
            WeightFunction::Tabulated { grid, values } => {
                let pts = grid.points();
                if t <= pts[0] {
                    return values[0];
                }
                if t >= pts[pts.len() - 1] {
                    return values[values.len() - 1];
                }
                let j = grid.nearest_index(t);
                // nearest_index snaps; pick the interval containing t
                let i = if pts[j] <= t { j } else { j - 1 };
                let i = i.min(pts.len() - 2);
                let w = (t - pts[i]) / (pts[i + 1] - pts[i]);
                values[i] + w * (values[i + 1] - values[i])
            }
        }
    }

    /// Interior points of (0,1) where f is not smooth.
    pub fn breakpoints(&self) -> Vec<f64> {
        match self {
            WeightFunction::Constant(_) | WeightFunction::Polynomial(_) => Vec::new(),
            WeightFunction::Indicator { lo, hi } => [*lo, *hi]
                .into_iter()
                .filter(|t| *t > 0.0 && *t < 1.0)
                .collect(),
            WeightFunction::Tabulated { grid, .. } => grid
                .points()
                .iter()
                .copied()
                .filter(|t| *t > 0.0 && *t < 1.0)
                .collect(),
        }
    }

    /// Piecewise-polynomial form of f restricted to [0,1]: disjoint
    /// segments (lo, hi, coefficients in global t). Regions not covered
    /// by any segment are exactly zero.
    fn segments(&self) -> Vec<PolySegment> {
        match self {
            WeightFunction::Constant(c) => vec![PolySegment::new(0.0, 1.0, vec![*c])],
            WeightFunction::Indicator { lo, hi } => {
                let a = lo.max(0.0);
                let b = hi.min(1.0);
                if a < b {
                    vec![PolySegment::new(a, b, vec![1.0])]
                } else {
                    Vec::new()
                }
            }
            WeightFunction::Polynomial(coeffs) => {
                vec![PolySegment::new(0.0, 1.0, coeffs.clone())]
            }
            WeightFunction::Tabulated { grid, values } => {
                let pts = grid.points();
                let mut segs = Vec::new();
                if pts[0] > 0.0 {
                    segs.push(PolySegment::new(0.0, pts[0].min(1.0), vec![values[0]]));
                }
                for i in 0..pts.len() - 1 {
                    let a = pts[i].max(0.0);
                    let b = pts[i + 1].min(1.0);
                    if a >= b {
                        continue;
                    }
                    let slope = (values[i + 1] - values[i]) / (pts[i + 1] - pts[i]);
                    segs.push(PolySegment::new(
                        a,
                        b,
                        vec![values[i] - slope * pts[i], slope],
                    ));
                }
                let last = pts[pts.len() - 1];
                if last < 1.0 {
                    segs.push(PolySegment::new(
                        last.max(0.0),
                        1.0,
                        vec![values[values.len() - 1]],
                    ));
                }
                segs
            }
        }
    }

    /// ∫₀¹ f(t) dt, exact.
    pub fn integral(&self) -> f64 {
        self.segments().iter().map(PolySegment::integral).sum()
    }

    /// ∫_θ¹ f(t) dt, exact.
    pub fn tail_integral(&self, theta: f64) -> f64 {
        self.segments()
            .iter()
            .map(|s| s.clipped(theta, 1.0).map_or(0.0, |c| c.integral()))
            .sum()
    }

    /// ∫₀^θ t·f(t) dt, exact.
    fn head_first_moment(&self, theta: f64) -> f64 {
        self.segments()
            .iter()
            .map(|s| s.clipped(0.0, theta).map_or(0.0, |c| c.first_moment()))
            .sum()
    }

    /// ∫₀¹ f(t)·t^p dt for real p > -1, exact per segment.
    fn power_integral(&self, p: f64) -> f64 {
        self.segments().iter().map(|s| s.power_integral(p)).sum()
    }

    /// ∫₀¹ f(t)·|t−θ|^p dt for real p > -1, exact per segment.
    fn shifted_power_integral(&self, theta: f64, p: f64) -> f64 {
        self.segments()
            .iter()
            .map(|s| s.shifted_power_integral(theta, p))
            .sum()
    }
}

struct PolySegment {
    lo: f64,
    hi: f64,
    coeffs: Vec<f64>,
}

impl PolySegment {
    fn new(lo: f64, hi: f64, coeffs: Vec<f64>) -> Self {
        debug_assert!(lo < hi);
        PolySegment { lo, hi, coeffs }
    }

    fn clipped(&self, lo: f64, hi: f64) -> Option<PolySegment> {
        let a = self.lo.max(lo);
        let b = self.hi.min(hi);
        if a < b {
            Some(PolySegment::new(a, b, self.coeffs.clone()))
        } else {
            None
        }
    }

    fn integral(&self) -> f64 {
        self.coeffs
            .iter()
            .enumerate()
            .map(|(k, c)| {
                let e = (k + 1) as f64;
                c * (self.hi.powf(e) - self.lo.powf(e)) / e
            })
            .sum()
    }

    fn first_moment(&self) -> f64 {
        self.coeffs
            .iter()
            .enumerate()
            .map(|(k, c)| {
                let e = (k + 2) as f64;
                c * (self.hi.powf(e) - self.lo.powf(e)) / e
            })
            .sum()
    }

    fn power_integral(&self, p: f64) -> f64 {
        // lo ≥ 0 on the [0,1] domain, so t^(k+p) integrates cleanly
        self.coeffs
            .iter()
            .enumerate()
            .map(|(k, c)| {
                let e = k as f64 + p + 1.0;
                c * (self.hi.powf(e) - self.lo.powf(e)) / e
            })
            .sum()
    }

    fn shifted_power_integral(&self, theta: f64, p: f64) -> f64 {
        // ∫ t^k |t−θ|^p dt = Σ_j C(k,j) θ^(k−j) ∫ u^j |u|^p du, u = t−θ
        let mut total = 0.0;
        for (k, c) in self.coeffs.iter().enumerate() {
            if *c == 0.0 {
                continue;
            }
            let mut binom = 1.0f64;
            for j in 0..=k {
                let weight = binom * theta.powi((k - j) as i32);
                total += c * weight * signed_power_integral(self.lo - theta, self.hi - theta, j, p);
                binom = binom * (k - j) as f64 / (j + 1) as f64;
            }
        }
        total
    }
}

/// ∫_{u0}^{u1} u^j |u|^p du via the antiderivative
/// sign(u)^{j+1} |u|^{j+p+1} / (j+p+1).
fn signed_power_integral(u0: f64, u1: f64, j: usize, p: f64) -> f64 {
    let e = j as f64 + p + 1.0;
    let anti = |u: f64| -> f64 {
        if u == 0.0 {
            return 0.0;
        }
        let s: f64 = if u > 0.0 { 1.0 } else { -1.0 };
        s.powi(j as i32 + 1) * u.abs().powf(e) / e
    };
    anti(u1) - anti(u0)
}

/// Trapezoidal ∫ f(t)·X(t) dt of one trajectory on its observation grid.
pub fn functional_integral(values: &[f64], weight: &WeightFunction, grid: &Grid) -> f64 {
    assert_eq!(values.len(), grid.len());
    let pts = grid.points();
    let mut acc = 0.0;
    let mut prev = weight.eval(pts[0]) * values[0];
    for i in 1..pts.len() {
        let cur = weight.eval(pts[i]) * values[i];
        acc += 0.5 * (prev + cur) * (pts[i] - pts[i - 1]);
        prev = cur;
    }
    acc
}

// ---------------------------------------------------------------------------
// Datasets and generators

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Regime {
    CorrectSpec,
    CompleteMisspec,
    PartialMisspec,
    External,
}

/// Generating parameters of the point-impact regime.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PointImpactParams {
    pub alpha0: f64,
    pub beta0: f64,
    pub theta0: f64,
    pub sigma: f64,
}

impl PointImpactParams {
    /// Theory-valid parameters: beta0 ≠ 0, theta0 interior, sigma ≥ 0.
    pub fn new(alpha0: f64, beta0: f64, theta0: f64, sigma: f64) -> Result<Self> {
        let p = Self::new_degenerate(alpha0, beta0, theta0, sigma)?;
        if beta0 == 0.0 {
            return Err(Error::InvalidParameter(
                "slope 0 loses the impact point; use new_degenerate to force it".into(),
            ));
        }
        Ok(p)
    }

    /// Same checks except beta0 = 0 is admitted (signal-free data).
    pub fn new_degenerate(alpha0: f64, beta0: f64, theta0: f64, sigma: f64) -> Result<Self> {
        for (name, v) in [("alpha0", alpha0), ("beta0", beta0), ("theta0", theta0), ("sigma", sigma)] {
            if !v.is_finite() {
                return Err(Error::InvalidParameter(format!("{name} must be finite")));
            }
        }
        if !(theta0 > 0.0 && theta0 < 1.0) {
            return Err(Error::InvalidParameter(format!(
                "impact point must lie strictly inside (0,1), got {theta0}"
            )));
        }
        if sigma < 0.0 {
            return Err(Error::InvalidParameter("noise s.d. must be nonnegative".into()));
        }
        Ok(PointImpactParams { alpha0, beta0, theta0, sigma })
    }
}

/// Everything the generator knew; carried for diagnostics and coverage
/// scoring, never read by fitting code.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Truth {
    pub alpha: f64,
    pub beta: f64,
    /// Impact point as requested by the caller.
    pub theta_requested: Option<f64>,
    /// Impact point actually used: the grid point nearest the request.
    pub theta: Option<f64>,
    pub sigma: f64,
    pub weight: Option<WeightFunction>,
    pub hurst: Option<f64>,
    pub noise_seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dataset {
    pub trajectories: TrajectorySet,
    pub responses: Vec<f64>,
    pub regime: Regime,
    pub truth: Option<Truth>,
}

impl Dataset {
    pub fn new(trajectories: TrajectorySet, responses: Vec<f64>) -> Result<Self> {
        if responses.len() != trajectories.n_subjects() {
            return Err(Error::InvalidParameter(format!(
                "{} responses for {} trajectories",
                responses.len(),
                trajectories.n_subjects()
            )));
        }
        if responses.iter().any(|y| !y.is_finite()) {
            return Err(Error::InvalidParameter("responses must be finite".into()));
        }
        Ok(Dataset {
            trajectories,
            responses,
            regime: Regime::External,
            truth: None,
        })
    }

    pub fn n(&self) -> usize {
        self.responses.len()
    }

    pub fn grid(&self) -> &Grid {
        self.trajectories.grid()
    }

    /// CSV with header `y,<grid points>` and per subject one row of the
    /// response followed by the trajectory values.
    pub fn to_csv(&self) -> String {
        use std::fmt::Write;
        let mut out = String::new();
        out.push('y');
        for p in self.grid().points() {
            write!(out, ",{p}").unwrap();
        }
        out.push('\n');
        for (y, row) in self.responses.iter().zip(self.trajectories.rows()) {
            write!(out, "{y}").unwrap();
            for v in row {
                write!(out, ",{v}").unwrap();
            }
            out.push('\n');
        }
        out
    }

    /// Parse the [`to_csv`](Self::to_csv) layout; regime marks the data
    /// external and no truth is attached.
    pub fn from_csv_str(text: &str) -> Result<Self> {
        let mut lines = text.lines().enumerate();
        let (_, header) = lines.next().ok_or(Error::Parse {
            line: 1,
            message: "empty dataset file".into(),
        })?;
        let mut fields = header.split(',');
        let tag = fields.next().unwrap_or("");
        if tag.trim() != "y" {
            return Err(Error::Parse {
                line: 1,
                message: format!("header must start with 'y', got {tag:?}"),
            });
        }
        let points = fields
            .map(|f| csvio::parse_f64(f, 1))
            .collect::<Result<Vec<f64>>>()?;
        let grid = Grid::new(points)?;
        let m = grid.len();
        let mut responses = Vec::new();
        let mut rows = Vec::new();
        for (idx, line) in lines {
            if line.trim().is_empty() {
                continue;
            }
            let lineno = idx + 1;
            let mut fields = line.split(',');
            responses.push(csvio::parse_f64(fields.next().unwrap_or(""), lineno)?);
            let row = fields
                .map(|f| csvio::parse_f64(f, lineno))
                .collect::<Result<Vec<f64>>>()?;
            if row.len() != m {
                return Err(Error::Parse {
                    line: lineno,
                    message: format!("row has {} trajectory values, grid has {m}", row.len()),
                });
            }
            rows.push(row);
        }
        let trajectories = TrajectorySet::from_rows(grid, rows, None)?;
        Dataset::new(trajectories, responses)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }
}

/// Shared response builder: Yᵢ = α + β·Xᵢ(θ) + ∫ f·Xᵢ + σ·εᵢ with εᵢ
/// i.i.d. standard normal on per-subject noise substreams. All three
/// regimes are this with parts zeroed, which is what makes the regime
/// reductions exact.
fn respond(
    paths: TrajectorySet,
    regime: Regime,
    alpha: f64,
    beta: f64,
    theta0: Option<f64>,
    sigma: f64,
    weight: &WeightFunction,
    record_weight: bool,
    seed: u64,
) -> Result<Dataset> {
    let grid = paths.grid().clone();
    let theta_idx = match theta0 {
        Some(t) => {
            if t < grid.start() || t > grid.end() {
                return Err(Error::InvalidParameter(format!(
                    "impact point {t} lies outside the grid [{}, {}]",
                    grid.start(),
                    grid.end()
                )));
            }
            Some(grid.nearest_index(t))
        }
        None => None,
    };
    let n = paths.n_subjects();
    let mut responses = Vec::with_capacity(n);
    for i in 0..n {
        let row = paths.row(i);
        let point_term = match theta_idx {
            Some(j) => beta * row[j],
            None => 0.0,
        };
        let integral = functional_integral(row, weight, &grid);
        let eps: f64 = substream(seed, &[label::NOISE, i as u64]).sample(StandardNormal);
        responses.push(alpha + point_term + integral + sigma * eps);
    }
    let hurst = paths.provenance().map(|p| p.hurst);
    let theta_used = theta_idx.map(|j| grid.points()[j]);
    Ok(Dataset {
        trajectories: paths,
        responses,
        regime,
        truth: Some(Truth {
            alpha,
            beta,
            theta_requested: theta0,
            theta: theta_used,
            sigma,
            weight: if record_weight { Some(weight.clone()) } else { None },
            hurst,
            noise_seed: seed,
        }),
    })
}

/// Point-impact responses on the given trajectories:
/// Yᵢ = α₀ + β₀·Xᵢ(θ₀) + εᵢ. θ₀ is snapped to the nearest grid point;
/// the truth records both the request and the snap.
pub fn gen_point_impact(
    params: &PointImpactParams,
    paths: TrajectorySet,
    seed: u64,
) -> Result<Dataset> {
    respond(
        paths,
        Regime::CorrectSpec,
        params.alpha0,
        params.beta0,
        Some(params.theta0),
        params.sigma,
        &WeightFunction::Constant(0.0),
        false,
        seed,
    )
}

/// Functional-linear responses: Yᵢ = ∫ f·Xᵢ + εᵢ. No point term; the
/// point-impact working model is completely misspecified for this data.
pub fn gen_functional_linear(
    weight: &WeightFunction,
    sigma: f64,
    paths: TrajectorySet,
    seed: u64,
) -> Result<Dataset> {
    if !sigma.is_finite() || sigma < 0.0 {
        return Err(Error::InvalidParameter("noise s.d. must be nonnegative".into()));
    }
    respond(
        paths,
        Regime::CompleteMisspec,
        0.0,
        0.0,
        None,
        sigma,
        weight,
        true,
        seed,
    )
}

/// Combined regime: Yᵢ = α + β·Xᵢ(θ₀) + ∫ f·Xᵢ + εᵢ. With f ≡ 0 this is
/// [`gen_point_impact`] bit for bit.
pub fn gen_partial_misspec(
    params: &PointImpactParams,
    weight: &WeightFunction,
    paths: TrajectorySet,
    seed: u64,
) -> Result<Dataset> {
    respond(
        paths,
        Regime::PartialMisspec,
        params.alpha0,
        params.beta0,
        Some(params.theta0),
        params.sigma,
        weight,
        true,
        seed,
    )
}

// ---------------------------------------------------------------------------
// Two-sample regime

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TwoSampleParams {
    pub hurst: f64,
    pub n1: usize,
    pub n2: usize,
    /// Caller-declared maximizer of mean1 − mean2, for scoring.
    pub theta0: Option<f64>,
    /// Caller-declared smoothness exponent of the effect at its peak.
    pub smoothness: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TwoSampleData {
    pub group1: TrajectorySet,
    pub group2: TrajectorySet,
    pub mean1: Vec<f64>,
    pub mean2: Vec<f64>,
    pub theta0: Option<f64>,
    pub smoothness: Option<f64>,
    /// Group size ratio n₁/n₂.
    pub rho: f64,
    /// Equal means: the effect has no unique maximum and the estimand is
    /// undefined; fitting still runs.
    pub degenerate: bool,
}

/// Two groups of trajectories: group j rows are μⱼ(grid) plus
/// independent fBm noise with the same Hurst index.
pub fn gen_two_sample(
    params: &TwoSampleParams,
    mean1: &[f64],
    mean2: &[f64],
    grid: &Grid,
    seed: u64,
) -> Result<TwoSampleData> {
    if params.n1 < 1 || params.n2 < 1 {
        return Err(Error::TooFewSubjects {
            have: params.n1.min(params.n2),
            need: 1,
        });
    }
    let spec = FbmSpec::new(params.hurst)?;
    let mut group1 = fbm::sample(&spec, grid, params.n1, derive_seed(seed, &[label::GROUP, 1]))?;
    let mut group2 = fbm::sample(&spec, grid, params.n2, derive_seed(seed, &[label::GROUP, 2]))?;
    group1.translate_rows(mean1)?;
    group2.translate_rows(mean2)?;
    Ok(TwoSampleData {
        group1,
        group2,
        mean1: mean1.to_vec(),
        mean2: mean2.to_vec(),
        theta0: params.theta0,
        smoothness: params.smoothness,
        rho: params.n1 as f64 / params.n2 as f64,
        degenerate: mean1 == mean2,
    })
}

/// Mean function 1 − c·|t − center|^{2s} tabulated on the grid: a single
/// peak at `center` whose sharpness is set by the smoothness exponent s.
pub fn peaked_mean(grid: &Grid, center: f64, c: f64, s: f64) -> Vec<f64> {
    grid.points()
        .iter()
        .map(|t| 1.0 - c * (t - center).abs().powf(2.0 * s))
        .collect()
}

// ---------------------------------------------------------------------------
// Misspecification criterion

/// Population risk of the slope-1 point-impact working model on data
/// Y = α + X(θ₀) + ∫ f·X + ε, as a function of the candidate impact
/// point, with the θ-free constant dropped:
///
///   M(θ) = |θ−θ₀|^{2H} − ∫₀¹ f(t)·[t^{2H} + θ^{2H} − |θ−t|^{2H}] dt.
///
/// Functional-linear data is the θ₀ = 0 case: trajectories vanish at the
/// origin, so a point term there contributes nothing.
#[derive(Debug, Clone)]
pub struct MisspecCriterion {
    theta0: f64,
    hurst: f64,
    weight: WeightFunction,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CriterionMinimum {
    pub theta: f64,
    pub value: f64,
    pub at_boundary: bool,
}

impl MisspecCriterion {
    pub fn new(theta0: f64, hurst: f64, weight: WeightFunction) -> Result<Self> {
        if !hurst.is_finite() || hurst <= 0.0 || hurst >= 1.0 {
            return Err(Error::InvalidHurst(hurst));
        }
        if !(0.0..=1.0).contains(&theta0) {
            return Err(Error::InvalidParameter(format!(
                "criterion anchor must lie in [0,1], got {theta0}"
            )));
        }
        Ok(MisspecCriterion { theta0, hurst, weight })
    }

    /// Criterion for functional-linear data (no point term).
    pub fn for_functional_linear(hurst: f64, weight: WeightFunction) -> Result<Self> {
        Self::new(0.0, hurst, weight)
    }

    pub fn risk(&self, theta: f64) -> Result<f64> {
        if !(0.0..=1.0).contains(&theta) {
            return Err(Error::InvalidParameter(format!(
                "criterion argument must lie in [0,1], got {theta}"
            )));
        }
        let h2 = 2.0 * self.hurst;
        let point = (theta - self.theta0).abs().powf(h2);
        let i_pow = self.weight.power_integral(h2);
        let i_const = self.weight.integral() * theta.abs().powf(h2);
        let i_shift = self.weight.shifted_power_integral(theta, h2);
        Ok(point - (i_pow + i_const - i_shift))
    }

    /// dM/dθ for H = 1/2, where it is elementary:
    /// sign(θ−θ₀) − 2∫_θ¹ f. Undefined exactly at θ₀ (returns the
    /// right-hand value there).
    pub fn slope_h_half(&self, theta: f64) -> Result<f64> {
        self.require_h_half()?;
        if !(0.0..=1.0).contains(&theta) {
            return Err(Error::InvalidParameter(format!(
                "criterion argument must lie in [0,1], got {theta}"
            )));
        }
        let sign = if theta >= self.theta0 { 1.0 } else { -1.0 };
        Ok(sign - 2.0 * self.weight.tail_integral(theta))
    }

    /// d²M/dθ² for H = 1/2: 2·f(θ).
    pub fn curvature_h_half(&self, theta: f64) -> Result<f64> {
        self.require_h_half()?;
        Ok(2.0 * self.weight.eval(theta))
    }

    /// Residual dispersion a² = σ² + Var(∫ f·X) of the working model at
    /// θ₀, for H = 1/2 where the variance of the functional term is
    /// ∫∫ f(s)f(t)·min(s,t) ds dt. For other H supply a² externally.
    pub fn noise_inflation_h_half(&self, sigma: f64) -> Result<f64> {
        self.require_h_half()?;
        if !sigma.is_finite() || sigma < 0.0 {
            return Err(Error::InvalidParameter("noise s.d. must be nonnegative".into()));
        }
        // inner(t) = ∫ f(s) min(s,t) ds is exact; the outer integral runs
        // composite Simpson between breakpoints of f
        let inner = |t: f64| self.weight.head_first_moment(t) + t * self.weight.tail_integral(t);
        let mut knots = vec![0.0, 1.0];
        knots.extend(self.weight.breakpoints());
        knots.sort_by(f64::total_cmp);
        knots.dedup();
        let mut var = 0.0;
        for w in knots.windows(2) {
            var += simpson(|t| self.weight.eval(t) * inner(t), w[0], w[1], 512);
        }
        Ok(sigma * sigma + var)
    }

    /// Dense-mesh minimizer of M over [0,1]; ties go to the smaller θ.
    pub fn minimize(&self, mesh_points: usize) -> Result<CriterionMinimum> {
        if mesh_points < 2 {
            return Err(Error::InvalidParameter("mesh needs at least 2 points".into()));
        }
        let m = mesh_points;
        let mut best = (0usize, f64::INFINITY);
        for i in 0..m {
            let theta = i as f64 / (m - 1) as f64;
            let v = self.risk(theta)?;
            if v < best.1 {
                best = (i, v);
            }
        }
        let theta = best.0 as f64 / (m - 1) as f64;
        Ok(CriterionMinimum {
            theta,
            value: best.1,
            at_boundary: best.0 == 0 || best.0 == m - 1,
        })
    }

    fn require_h_half(&self) -> Result<()> {
        if self.hurst != 0.5 {
            return Err(Error::InvalidParameter(format!(
                "closed form only at H = 1/2, criterion has H = {}",
                self.hurst
            )));
        }
        Ok(())
    }
}

/// Composite Simpson rule with `intervals` (rounded up to even) panels.
fn simpson(f: impl Fn(f64) -> f64, a: f64, b: f64, intervals: usize) -> f64 {
    if a >= b {
        return 0.0;
    }
    let n = intervals.max(2) + intervals % 2;
    let h = (b - a) / n as f64;
    let mut acc = f(a) + f(b);
    for i in 1..n {
        let w = if i % 2 == 1 { 4.0 } else { 2.0 };
        acc += w * f(a + i as f64 * h);
    }
    acc * h / 3.0
}
