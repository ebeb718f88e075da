//! Limit distributions of the impact-point estimators.
//!
//! After rescaling, every estimator here converges to the argmin (or
//! argmax) of a drifted fractional Brownian motion over the whole line.
//! The law has no closed form, so it is simulated: a two-sided fBm is
//! drawn on a symmetric grid pinned at 0, the drift is added, and the
//! minimizing grid point is recorded. The window doubles until the
//! minimizer essentially never lands on the boundary, which certifies
//! that truncating the line did not distort the law.
//!
//! Quantiles of the simulated laws feed plug-in confidence intervals
//! ([`wald_ci`]); the scale maps translate fitted nuisance quantities
//! into the units of the tabulated standard families.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bootstrap::{CiMethod, ConfidenceInterval};
use crate::error::{Error, Result};
use crate::estimation::FitResult;
use crate::fbm::{FbmSpec, PathEngine, PathScratch};
use crate::grid::Grid;
use crate::rng::{derive_seed, label, substream};
use crate::stats::{sorted, upper_quantile};

/// Default half-width of the simulation window.
pub const DEFAULT_TRUNCATION: f64 = 8.0;
/// Default grid pitch (2^-7, exactly representable).
pub const DEFAULT_RESOLUTION: f64 = 0.0078125;
/// Window doublings attempted before giving up.
pub const MAX_DOUBLINGS: u32 = 6;
/// A window is accepted when at most this fraction of draws minimizes
/// on its boundary.
const BOUNDARY_FRAC: f64 = 0.001;

/// Drifted-fBm argmin family, one variant per asymptotic regime. The
/// recorded variable is argmin over t of coef·B_H(t) + drift(t).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum LimitRegime {
    /// argmin 2·B_H(t) + |t|^{2H}: the correctly specified (and the
    /// partially misspecified) point-impact estimator.
    CorrectSpec { hurst: f64 },
    /// argmin 2a·B_H(t) + b·t²: the completely misspecified estimator
    /// around an interior smooth minimum of the population criterion.
    CompleteMisspec { hurst: f64, a: f64, b: f64 },
    /// argmax (1+√ρ)·B_H(t) − c·|t|^{2H}, recorded as an argmin with the
    /// path coefficient negated: the two-sample peak-location estimator.
    TwoSample { hurst: f64, c: f64, rho: f64 },
}

impl LimitRegime {
    pub fn correct_spec(hurst: f64) -> Result<Self> {
        FbmSpec::new(hurst)?;
        Ok(LimitRegime::CorrectSpec { hurst })
    }

    pub fn complete_misspec(hurst: f64, a: f64, b: f64) -> Result<Self> {
        FbmSpec::new(hurst)?;
        for (name, v) in [("a", a), ("b", b)] {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::InvalidParameter(format!(
                    "{name} must be positive and finite, got {v}"
                )));
            }
        }
        Ok(LimitRegime::CompleteMisspec { hurst, a, b })
    }

    pub fn two_sample(hurst: f64, c: f64, rho: f64) -> Result<Self> {
        FbmSpec::new(hurst)?;
        for (name, v) in [("c", c), ("rho", rho)] {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::InvalidParameter(format!(
                    "{name} must be positive and finite, got {v}"
                )));
            }
        }
        Ok(LimitRegime::TwoSample { hurst, c, rho })
    }

    pub fn hurst(&self) -> f64 {
        match self {
            LimitRegime::CorrectSpec { hurst }
            | LimitRegime::CompleteMisspec { hurst, .. }
            | LimitRegime::TwoSample { hurst, .. } => *hurst,
        }
    }

    fn path_coefficient(&self) -> f64 {
        match self {
            LimitRegime::CorrectSpec { .. } => 2.0,
            LimitRegime::CompleteMisspec { a, .. } => 2.0 * a,
            LimitRegime::TwoSample { rho, .. } => -(1.0 + rho.sqrt()),
        }
    }

    fn drift(&self, t: f64) -> f64 {
        match self {
            LimitRegime::CorrectSpec { hurst } => t.abs().powf(2.0 * hurst),
            LimitRegime::CompleteMisspec { b, .. } => b * t * t,
            LimitRegime::TwoSample { hurst, c, .. } => c * t.abs().powf(2.0 * hurst),
        }
    }
}

/// Draws from a simulated limit law, plus the window that produced them.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LimitSample {
    pub draws: Vec<f64>,
    /// Accepted window half-width.
    pub truncation: f64,
    pub resolution: f64,
    pub boundary_hit_fraction: f64,
}

/// Simulate `n_draws` independent argmin draws of `regime` on the
/// symmetric window [-T, T], doubling T from `t_init` until boundary
/// hits are negligible. Draw d of attempt k has its own substream, so
/// results do not depend on thread count.
pub fn simulate_argmin(
    regime: &LimitRegime,
    n_draws: usize,
    t_init: f64,
    resolution: f64,
    seed: u64,
) -> Result<LimitSample> {
    if n_draws == 0 {
        return Err(Error::InvalidParameter("need at least one draw".into()));
    }
    if !(t_init.is_finite() && t_init > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "initial half-width must be positive, got {t_init}"
        )));
    }
    if !(resolution.is_finite() && resolution > 0.0 && resolution <= t_init) {
        return Err(Error::InvalidParameter(format!(
            "resolution must lie in (0, t_init], got {resolution}"
        )));
    }
    let spec = FbmSpec::new(regime.hurst())?;
    let coef = regime.path_coefficient();

    let mut last_frac = 1.0;
    let mut last_half = t_init;
    for k in 0..=MAX_DOUBLINGS {
        let target = t_init * f64::from(1u32 << k);
        let half_steps = (target / resolution).round().max(1.0) as i64;
        // exact multiples of the pitch; index half_steps is exactly 0
        let points: Vec<f64> = (-half_steps..=half_steps)
            .map(|i| i as f64 * resolution)
            .collect();
        let m = points.len();
        let grid = Grid::new(points)?;
        let half_width = grid.end();
        let (engine, _) = PathEngine::build(&spec, &grid, true)?;
        let drift: Vec<f64> = grid.points().iter().map(|&t| regime.drift(t)).collect();

        let indices: Vec<u32> = (0..n_draws)
            .into_par_iter()
            .map_init(
                || (PathScratch::new(), vec![0.0; m]),
                |(scratch, path), d| {
                    let mut rng = substream(seed, &[label::LIMIT_DRAW, u64::from(k), d as u64]);
                    engine.sample_into(&mut rng, scratch, path);
                    let mut best = 0usize;
                    let mut best_v = coef * path[0] + drift[0];
                    for j in 1..m {
                        let v = coef * path[j] + drift[j];
                        if v < best_v {
                            best = j;
                            best_v = v;
                        }
                    }
                    best as u32
                },
            )
            .collect();

        let boundary = indices
            .iter()
            .filter(|&&i| i == 0 || i as usize == m - 1)
            .count();
        let frac = boundary as f64 / n_draws as f64;
        if frac <= BOUNDARY_FRAC {
            let pts = grid.points();
            return Ok(LimitSample {
                draws: indices.iter().map(|&i| pts[i as usize]).collect(),
                truncation: half_width,
                resolution,
                boundary_hit_fraction: frac,
            });
        }
        last_frac = frac;
        last_half = half_width;
    }
    Err(Error::Unconverged {
        fraction: last_frac,
        half_width: last_half,
        doublings: MAX_DOUBLINGS,
    })
}

// ---------------------------------------------------------------------------
// Scale maps into the standard families

fn check_hurst(hurst: f64) -> Result<f64> {
    FbmSpec::new(hurst)?;
    Ok(hurst)
}

/// Map a unit-scale argmin draw to the correct-model limit of
/// n^{1/(2H)}(θ̂−θ₀): multiply by (σ/|β₀|)^{1/H}. Only the unit law is
/// ever simulated; all parameter dependence enters here.
pub fn scale_correct_spec(raw_argmin: f64, sigma: f64, beta0: f64, hurst: f64) -> Result<f64> {
    check_hurst(hurst)?;
    if !(sigma.is_finite() && sigma >= 0.0) {
        return Err(Error::InvalidParameter("noise s.d. must be nonnegative".into()));
    }
    if beta0 == 0.0 || !beta0.is_finite() {
        return Err(Error::DegenerateDesign("slope must be nonzero".into()));
    }
    Ok(raw_argmin * (sigma / beta0.abs()).powf(1.0 / hurst))
}

/// Partially misspecified case: same family, with the residual
/// dispersion a (noise plus the functional term) in place of σ and the
/// working slope pinned at 1; factor a^{1/H}.
pub fn scale_partial_misspec(raw_argmin: f64, a: f64, hurst: f64) -> Result<f64> {
    check_hurst(hurst)?;
    if !(a.is_finite() && a > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "residual dispersion must be positive, got {a}"
        )));
    }
    Ok(raw_argmin * a.powf(1.0 / hurst))
}

/// Completely misspecified case around a smooth interior minimum with
/// residual dispersion a and half-curvature b: matching
/// 2aB_H(λt) + bλ²t² to the unit parabolic family gives λ^{2−H} = a/b.
pub fn scale_complete_misspec(raw_argmin: f64, a: f64, b: f64, hurst: f64) -> Result<f64> {
    check_hurst(hurst)?;
    for (name, v) in [("a", a), ("b", b)] {
        if !(v.is_finite() && v > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "{name} must be positive and finite, got {v}"
            )));
        }
    }
    Ok(raw_argmin * (a / b).powf(1.0 / (2.0 - hurst)))
}

/// Two-sample peak location: matching (1+√ρ)B_H(λt) − c|λt|^{2H} to the
/// unit family 2B_H − |t|^{2H} gives λ^H = (1+√ρ)/(2c).
pub fn scale_two_sample(raw_argmin: f64, c: f64, rho: f64, hurst: f64) -> Result<f64> {
    check_hurst(hurst)?;
    for (name, v) in [("c", c), ("rho", rho)] {
        if !(v.is_finite() && v > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "{name} must be positive and finite, got {v}"
            )));
        }
    }
    Ok(raw_argmin * ((1.0 + rho.sqrt()) / (2.0 * c)).powf(1.0 / hurst))
}

// ---------------------------------------------------------------------------
// Quantile tables

/// The two standard families worth tabulating; every regime reduces to
/// one of them through a scale map.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum UnitFamily {
    /// argmin 2B_H(t) + |t|^{2H}.
    FractionalDrift,
    /// argmin B_H(t) + t²/2.
    ParabolicDrift,
}

impl UnitFamily {
    pub fn to_regime(self, hurst: f64) -> Result<LimitRegime> {
        match self {
            UnitFamily::FractionalDrift => LimitRegime::correct_spec(hurst),
            UnitFamily::ParabolicDrift => LimitRegime::complete_misspec(hurst, 0.5, 0.5),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            UnitFamily::FractionalDrift => "fractional-drift",
            UnitFamily::ParabolicDrift => "parabolic-drift",
        }
    }

    pub fn from_name(name: &str) -> Result<Self> {
        match name {
            "fractional-drift" => Ok(UnitFamily::FractionalDrift),
            "parabolic-drift" => Ok(UnitFamily::ParabolicDrift),
            other => Err(Error::InvalidParameter(format!(
                "unknown limit family {other:?}"
            ))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QuantileEntry {
    pub hurst: f64,
    pub alpha: f64,
    /// Upper-alpha quantile of the family's argmin law.
    pub z: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuantileTable {
    pub family: UnitFamily,
    pub draws: usize,
    pub seed: u64,
    pub entries: Vec<QuantileEntry>,
}

/// Simulate upper quantiles of the unit family for each Hurst index.
/// Each H gets a seed derived from `seed` and its position, so a table
/// can be extended without disturbing existing cells.
pub fn quantile_table(
    family: UnitFamily,
    hursts: &[f64],
    alphas: &[f64],
    draws: usize,
    t_init: f64,
    resolution: f64,
    seed: u64,
) -> Result<QuantileTable> {
    if hursts.is_empty() || alphas.is_empty() {
        return Err(Error::InvalidParameter(
            "need at least one Hurst index and one alpha".into(),
        ));
    }
    if draws < 2 {
        return Err(Error::InvalidParameter("need at least two draws".into()));
    }
    for &a in alphas {
        if !(a > 0.0 && a < 0.5) {
            return Err(Error::InvalidParameter(format!(
                "tail probability must lie in (0, 0.5), got {a}"
            )));
        }
    }
    let mut entries = Vec::with_capacity(hursts.len() * alphas.len());
    for (idx, &h) in hursts.iter().enumerate() {
        let regime = family.to_regime(h)?;
        let cell_seed = derive_seed(seed, &[label::TABLE_CELL, idx as u64]);
        let sample = simulate_argmin(&regime, draws, t_init, resolution, cell_seed)?;
        let asc = sorted(&sample.draws);
        for &alpha in alphas {
            entries.push(QuantileEntry {
                hurst: h,
                alpha,
                z: upper_quantile(&asc, alpha),
            });
        }
    }
    Ok(QuantileTable { family, draws, seed, entries })
}

/// Slack for matching a table key: generous against rounding in the
/// level-to-tail arithmetic, far below the spacing of distinct keys.
const KEY_ATOL: f64 = 1e-9;

fn key_eq(a: f64, b: f64) -> bool {
    (a - b).abs() <= KEY_ATOL
}

impl QuantileTable {
    /// Exact-key lookup; no interpolation.
    pub fn lookup(&self, hurst: f64, alpha: f64) -> Result<f64> {
        self.entries
            .iter()
            .find(|e| key_eq(e.hurst, hurst) && key_eq(e.alpha, alpha))
            .map(|e| e.z)
            .ok_or(Error::MissingQuantile { hurst, alpha })
    }

    /// Linear interpolation between the bracketing tabulated Hurst
    /// indices at an exactly matched alpha. Extrapolation is refused.
    pub fn interpolate_in_hurst(&self, hurst: f64, alpha: f64) -> Result<f64> {
        if let Ok(z) = self.lookup(hurst, alpha) {
            return Ok(z);
        }
        let mut at_alpha: Vec<(f64, f64)> = self
            .entries
            .iter()
            .filter(|e| key_eq(e.alpha, alpha))
            .map(|e| (e.hurst, e.z))
            .collect();
        at_alpha.sort_by(|x, y| x.0.total_cmp(&y.0));
        for pair in at_alpha.windows(2) {
            let (h0, z0) = pair[0];
            let (h1, z1) = pair[1];
            if h0 <= hurst && hurst <= h1 {
                let w = (hurst - h0) / (h1 - h0);
                return Ok(z0 + w * (z1 - z0));
            }
        }
        Err(Error::MissingQuantile { hurst, alpha })
    }

    /// CSV with one row per (H, alpha) cell; numbers are written in
    /// shortest round-trip form, so parsing restores them bit for bit.
    pub fn to_csv(&self) -> String {
        use std::fmt::Write;
        let mut out = String::from("regime,H,alpha,z,draws,seed\n");
        for e in &self.entries {
            writeln!(
                out,
                "{},{},{},{},{},{}",
                self.family.name(),
                e.hurst,
                e.alpha,
                e.z,
                self.draws,
                self.seed
            )
            .unwrap();
        }
        out
    }

    pub fn from_csv_str(text: &str) -> Result<Self> {
        let mut lines = text.lines().enumerate();
        let (_, header) = lines.next().ok_or(Error::Parse {
            line: 1,
            message: "empty quantile table".into(),
        })?;
        if header.trim() != "regime,H,alpha,z,draws,seed" {
            return Err(Error::Parse {
                line: 1,
                message: format!("unexpected header {header:?}"),
            });
        }
        let mut family: Option<UnitFamily> = None;
        let mut draws: Option<usize> = None;
        let mut seed: Option<u64> = None;
        let mut entries = Vec::new();
        for (idx, line) in lines {
            if line.trim().is_empty() {
                continue;
            }
            let lineno = idx + 1;
            let fields: Vec<&str> = line.split(',').collect();
            if fields.len() != 6 {
                return Err(Error::Parse {
                    line: lineno,
                    message: format!("expected 6 fields, got {}", fields.len()),
                });
            }
            let fam = UnitFamily::from_name(fields[0].trim())?;
            if *family.get_or_insert(fam) != fam {
                return Err(Error::Parse {
                    line: lineno,
                    message: "mixed limit families in one table".into(),
                });
            }
            let row_draws = crate::csvio::parse_usize(fields[4], lineno)?;
            if *draws.get_or_insert(row_draws) != row_draws {
                return Err(Error::Parse {
                    line: lineno,
                    message: "inconsistent draw counts in one table".into(),
                });
            }
            let row_seed = fields[5].trim().parse::<u64>().map_err(|e| Error::Parse {
                line: lineno,
                message: format!("bad seed {:?}: {e}", fields[5]),
            })?;
            if *seed.get_or_insert(row_seed) != row_seed {
                return Err(Error::Parse {
                    line: lineno,
                    message: "inconsistent seeds in one table".into(),
                });
            }
            entries.push(QuantileEntry {
                hurst: crate::csvio::parse_f64(fields[1], lineno)?,
                alpha: crate::csvio::parse_f64(fields[2], lineno)?,
                z: crate::csvio::parse_f64(fields[3], lineno)?,
            });
        }
        match (family, draws, seed) {
            (Some(family), Some(draws), Some(seed)) if !entries.is_empty() => Ok(QuantileTable {
                family,
                draws,
                seed,
                entries,
            }),
            _ => Err(Error::Parse {
                line: 1,
                message: "quantile table has no rows".into(),
            }),
        }
    }
}

/// Plug-in interval for the impact point under the correct model:
/// θ̂ ± (σ̂/(|β̂|√n))^{1/H} · z_{H,(1−level)/2}, clipped to [0, 1]. The
/// quantile comes from a [`UnitFamily::FractionalDrift`] table; a
/// missing cell errors rather than silently interpolating.
pub fn wald_ci(
    fit: &FitResult,
    hurst: f64,
    n: usize,
    level: f64,
    table: &QuantileTable,
) -> Result<ConfidenceInterval> {
    check_hurst(hurst)?;
    if !(level > 0.0 && level < 1.0) {
        return Err(Error::InvalidParameter(format!(
            "confidence level must lie in (0,1), got {level}"
        )));
    }
    if fit.beta_hat == 0.0 {
        return Err(Error::DegenerateDesign(
            "slope estimate is zero; the interval scale is undefined".into(),
        ));
    }
    if n == 0 {
        return Err(Error::InvalidParameter("sample size must be positive".into()));
    }
    let alpha = (1.0 - level) / 2.0;
    let z = table.lookup(hurst, alpha)?;
    let scale = (fit.sigma_hat / (fit.beta_hat.abs() * (n as f64).sqrt())).powf(1.0 / hurst);
    let half = scale * z;
    Ok(ConfidenceInterval {
        lo: (fit.theta_hat - half).max(0.0),
        hi: (fit.theta_hat + half).min(1.0),
        level,
        method: CiMethod::Wald,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::stats::{ks_standard_normal, ks_two_sample, median};

    #[test]
    fn degenerate_roughness_argmin_is_gaussian() {
        // at H = 1 the path is tZ, so the process is t² + 2tZ with
        // minimizer exactly -Z; the draws must look standard normal
        let regime = LimitRegime::correct_spec(1.0).unwrap();
        let sample = simulate_argmin(&regime, 2000, 8.0, DEFAULT_RESOLUTION, 71).unwrap();
        assert_eq!(sample.truncation, 8.0);
        assert_eq!(sample.boundary_hit_fraction, 0.0);
        let ks = ks_standard_normal(&sample.draws);
        assert!(ks.p_value > 0.01, "KS p = {}, D = {}", ks.p_value, ks.statistic);
        assert!(median(&sample.draws).abs() < 0.1);
    }

    #[test]
    fn argmin_law_is_symmetric() {
        let regime = LimitRegime::complete_misspec(0.5, 0.5, 0.5).unwrap();
        let sample = simulate_argmin(&regime, 4000, 4.0, DEFAULT_RESOLUTION, 13).unwrap();
        let med = median(&sample.draws);
        let mean = sample.draws.iter().sum::<f64>() / 4000.0;
        assert!(med.abs() < 0.05, "median {med}");
        assert!(mean.abs() < 0.05, "mean {mean}");
    }

    #[test]
    fn complete_misspec_scale_collapses_to_unit_family() {
        // draws from (a, b) should match unit draws scaled by
        // (a/b)^{1/(2-H)} in distribution
        let h = 0.5;
        let unit = simulate_argmin(
            &LimitRegime::complete_misspec(h, 0.5, 0.5).unwrap(),
            1500,
            4.0,
            DEFAULT_RESOLUTION,
            101,
        )
        .unwrap();
        let general = simulate_argmin(
            &LimitRegime::complete_misspec(h, 2.0, 1.0).unwrap(),
            1500,
            8.0,
            DEFAULT_RESOLUTION,
            102,
        )
        .unwrap();
        let lambda = scale_complete_misspec(1.0, 2.0, 1.0, h).unwrap();
        assert!((lambda - 2.0f64.powf(2.0 / 3.0)).abs() < 1e-12);
        let scaled: Vec<f64> = unit
            .draws
            .iter()
            .map(|d| scale_complete_misspec(*d, 2.0, 1.0, h).unwrap())
            .collect();
        let ks = ks_two_sample(&scaled, &general.draws);
        assert!(ks.p_value > 0.01, "KS p = {}, D = {}", ks.p_value, ks.statistic);
    }

    #[test]
    fn two_sample_unit_parameters_match_correct_spec_family() {
        // rho = 1, c = 1 gives coefficient -2 on a symmetric path and the
        // same drift as the correct-spec family, so the laws coincide
        let h = 0.8;
        let a = simulate_argmin(
            &LimitRegime::two_sample(h, 1.0, 1.0).unwrap(),
            1500,
            8.0,
            DEFAULT_RESOLUTION,
            201,
        )
        .unwrap();
        let b = simulate_argmin(
            &LimitRegime::correct_spec(h).unwrap(),
            1500,
            8.0,
            DEFAULT_RESOLUTION,
            202,
        )
        .unwrap();
        let ks = ks_two_sample(&a.draws, &b.draws);
        assert!(ks.p_value > 0.01, "KS p = {}, D = {}", ks.p_value, ks.statistic);
    }

    #[test]
    fn window_too_small_reports_unconverged() {
        let regime = LimitRegime::correct_spec(0.5).unwrap();
        let out = simulate_argmin(&regime, 400, 0.0625, DEFAULT_RESOLUTION, 9);
        match out {
            Err(Error::Unconverged {
                fraction,
                half_width,
                doublings,
            }) => {
                assert!(fraction > BOUNDARY_FRAC);
                assert_eq!(doublings, MAX_DOUBLINGS);
                assert!((half_width - 4.0).abs() < 1e-12, "half width {half_width}");
            }
            other => panic!("expected Unconverged, got {other:?}"),
        }
    }

    #[test]
    fn draws_are_seed_deterministic() {
        let regime = LimitRegime::complete_misspec(0.7, 0.5, 0.5).unwrap();
        let a = simulate_argmin(&regime, 300, 4.0, DEFAULT_RESOLUTION, 5).unwrap();
        let b = simulate_argmin(&regime, 300, 4.0, DEFAULT_RESOLUTION, 5).unwrap();
        assert_eq!(a, b);
        let c = simulate_argmin(&regime, 300, 4.0, DEFAULT_RESOLUTION, 6).unwrap();
        assert_ne!(a.draws, c.draws);
    }

    #[test]
    fn scale_maps_reduce_to_unit_at_unit_parameters() {
        // equal noise and slope: identity map on the draw
        assert!((scale_correct_spec(1.7, 1.0, 1.0, 0.5).unwrap() - 1.7).abs() < 1e-15);
        // sigma = 0: degenerate limit collapses every draw to 0
        assert_eq!(scale_correct_spec(3.0, 0.0, 2.0, 0.5).unwrap(), 0.0);
        // factor (0.3/1.5)^2 = 0.04
        assert!((scale_correct_spec(1.0, 0.3, 1.5, 0.5).unwrap() - 0.04).abs() < 1e-15);
        assert!((scale_partial_misspec(1.0, 1.0, 0.7).unwrap() - 1.0).abs() < 1e-15);
        assert!((scale_partial_misspec(1.0, 0.5, 0.5).unwrap() - 0.25).abs() < 1e-15);
        assert!((scale_complete_misspec(1.0, 1.0, 1.0, 0.3).unwrap() - 1.0).abs() < 1e-15);
        assert!((scale_two_sample(1.0, 1.0, 1.0, 0.5).unwrap() - 1.0).abs() < 1e-15);
        assert!(scale_correct_spec(1.0, 0.3, 0.0, 0.5).is_err());
        assert!(scale_two_sample(1.0, 0.0, 1.0, 0.5).is_err());
        assert!(scale_complete_misspec(1.0, 1.0, -1.0, 0.5).is_err());
    }

    #[test]
    fn table_lookup_and_interpolation() {
        let table = QuantileTable {
            family: UnitFamily::FractionalDrift,
            draws: 1000,
            seed: 3,
            entries: vec![
                QuantileEntry { hurst: 0.5, alpha: 0.025, z: 11.0 },
                QuantileEntry { hurst: 0.7, alpha: 0.025, z: 4.3 },
            ],
        };
        assert_eq!(table.lookup(0.5, 0.025).unwrap(), 11.0);
        assert!(matches!(
            table.lookup(0.6, 0.025),
            Err(Error::MissingQuantile { .. })
        ));
        assert!(matches!(
            table.lookup(0.5, 0.05),
            Err(Error::MissingQuantile { .. })
        ));
        let mid = table.interpolate_in_hurst(0.6, 0.025).unwrap();
        assert!((mid - 7.65).abs() < 1e-12);
        assert!(table.interpolate_in_hurst(0.9, 0.025).is_err());
    }

    #[test]
    fn simulated_quantiles_shrink_with_smoothness_and_tail() {
        let table = quantile_table(
            UnitFamily::FractionalDrift,
            &[0.5, 0.7],
            &[0.025, 0.05],
            1500,
            64.0,
            DEFAULT_RESOLUTION,
            17,
        )
        .unwrap();
        let z5 = table.lookup(0.5, 0.025).unwrap();
        let z7 = table.lookup(0.7, 0.025).unwrap();
        assert!(z5 > z7, "z(0.5) = {z5}, z(0.7) = {z7}");
        let z5_wide = table.lookup(0.5, 0.05).unwrap();
        assert!(z5 > z5_wide, "alpha 0.025 gives {z5}, alpha 0.05 gives {z5_wide}");
        // rough location sanity for the known laws
        assert!((5.0..20.0).contains(&z5), "z(0.5, 0.025) = {z5}");
        assert!((2.0..8.0).contains(&z7), "z(0.7, 0.025) = {z7}");

        let back = QuantileTable::from_csv_str(&table.to_csv()).unwrap();
        assert_eq!(back, table);
    }

    #[test]
    fn table_csv_rejects_malformed_input() {
        assert!(QuantileTable::from_csv_str("").is_err());
        assert!(QuantileTable::from_csv_str("regime,H,alpha,z,draws,seed\n").is_err());
        let mixed = "regime,H,alpha,z,draws,seed\n\
                     fractional-drift,0.5,0.025,11.0,100,1\n\
                     parabolic-drift,0.5,0.025,1.0,100,1\n";
        assert!(QuantileTable::from_csv_str(mixed).is_err());
        let bad = "regime,H,alpha,z,draws,seed\nfractional-drift,0.5,0.025\n";
        assert!(QuantileTable::from_csv_str(bad).is_err());
    }

    #[test]
    fn wald_interval_arithmetic_and_clipping() {
        let table = QuantileTable {
            family: UnitFamily::FractionalDrift,
            draws: 1000,
            seed: 0,
            entries: vec![QuantileEntry { hurst: 0.5, alpha: 0.025, z: 10.0 }],
        };
        let fit = FitResult {
            alpha_hat: 0.0,
            beta_hat: 2.0,
            theta_hat: 0.5,
            theta_index: 50,
            sse_profile: vec![],
            residuals: vec![0.0; 100],
            sigma_hat: 0.2,
        };
        // scale = (0.2 / (2 * 10))^2 = 1e-4; half-width 1e-3
        let ci = wald_ci(&fit, 0.5, 100, 0.95, &table).unwrap();
        assert!((ci.lo - 0.499).abs() < 1e-12);
        assert!((ci.hi - 0.501).abs() < 1e-12);
        assert_eq!(ci.method, CiMethod::Wald);

        let edge = FitResult { theta_hat: 0.0, ..fit.clone() };
        let ci = wald_ci(&edge, 0.5, 100, 0.95, &table).unwrap();
        assert_eq!(ci.lo, 0.0);

        let flat = FitResult { beta_hat: 0.0, ..fit.clone() };
        assert!(matches!(
            wald_ci(&flat, 0.5, 100, 0.95, &table),
            Err(Error::DegenerateDesign(_))
        ));
        assert!(matches!(
            wald_ci(&fit, 0.5, 100, 0.9, &table),
            Err(Error::MissingQuantile { .. })
        ));

        // smooth case: sigma = beta = 1, n = 100 gives half-width z/10
        let smooth_table = QuantileTable {
            family: UnitFamily::FractionalDrift,
            draws: 1000,
            seed: 0,
            entries: vec![QuantileEntry { hurst: 1.0, alpha: 0.025, z: 1.96 }],
        };
        let smooth = FitResult {
            beta_hat: 1.0,
            sigma_hat: 1.0,
            ..fit.clone()
        };
        let ci = wald_ci(&smooth, 1.0, 100, 0.95, &smooth_table).unwrap();
        assert!((ci.hi - ci.lo - 2.0 * 0.196).abs() < 1e-12, "width {}", ci.hi - ci.lo);

        // zero residual spread collapses the interval onto the estimate
        let tight = FitResult { sigma_hat: 0.0, ..fit };
        let ci = wald_ci(&tight, 0.5, 100, 0.95, &table).unwrap();
        assert_eq!((ci.lo, ci.hi), (0.5, 0.5));
    }

    #[test]
    fn regime_validation() {
        assert!(LimitRegime::correct_spec(0.0).is_err());
        assert!(LimitRegime::correct_spec(1.0).is_ok());
        assert!(LimitRegime::complete_misspec(0.5, 0.0, 1.0).is_err());
        assert!(LimitRegime::two_sample(0.5, 1.0, 0.0).is_err());
        let r = LimitRegime::correct_spec(0.5).unwrap();
        assert!(simulate_argmin(&r, 0, 1.0, 0.5, 0).is_err());
        assert!(simulate_argmin(&r, 10, -1.0, 0.5, 0).is_err());
        assert!(simulate_argmin(&r, 10, 1.0, 2.0, 0).is_err());
    }
}
