//! The coverage experiment: generate replicates, fit, build intervals,
//! score them against the target, aggregate.
//!
//! Reproducibility contract: every random quantity in replicate r is
//! drawn from a stream derived as seed -> (REPLICATE, r, purpose), so
//! results are independent of thread count, of replicate execution
//! order, and of which other methods run alongside. Dropping a method
//! from the config leaves every other row byte for byte unchanged.

use crate::config::{ExperimentConfig, Method, Scenario};
use point_impact::bootstrap::{
    pairs_bootstrap, percentile_ci, residual_bootstrap, BootstrapConfig, BootstrapKind,
    ConfidenceInterval,
};
use point_impact::error::{Error, Result};
use point_impact::estimation::{fit_point_impact, FitResult};
use point_impact::fbm::{self, FbmSpec};
use point_impact::grid::Grid;
use point_impact::limit_dist::{wald_ci, QuantileTable};
use point_impact::rng::{derive_seed, label};
use point_impact::scenarios::{
    gen_functional_linear, gen_partial_misspec, gen_point_impact, Dataset, MisspecCriterion,
    PointImpactParams,
};
use point_impact::stats::mc_standard_error;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::time::{Duration, Instant};

/// One aggregated report line: the config echo, the method, and its
/// Monte Carlo summary.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultRow {
    pub scenario: Scenario,
    pub n: usize,
    pub sigma: f64,
    pub hurst: f64,
    pub theta0: f64,
    pub alpha0: f64,
    pub beta0: f64,
    pub grid_size: usize,
    pub outer_reps: usize,
    pub boot_b: usize,
    pub level: f64,
    pub seed: u64,
    pub method: Method,
    /// Fraction of replicates whose interval contained the target.
    pub coverage: f64,
    pub avg_width: f64,
    /// sqrt(p(1-p)/reps) at p = coverage.
    pub mc_standard_error: f64,
    /// Wall time of the run that produced this row. Never serialized:
    /// reports must be byte-identical across reruns.
    #[serde(skip, default)]
    pub wall_time: Duration,
}

/// The value an interval must cover. Under the correct and partially
/// misspecified scenarios that is theta0 snapped to the grid; under
/// complete misspecification it is the population criterion minimizer.
pub fn coverage_target(cfg: &ExperimentConfig, grid: &Grid) -> Result<f64> {
    match cfg.scenario {
        Scenario::PointImpact | Scenario::PartialMisspec => {
            Ok(grid.points()[grid.nearest_index(cfg.theta0)])
        }
        Scenario::FunctionalLinear => {
            let weight = cfg.weight.clone().ok_or_else(|| {
                Error::InvalidParameter("functional-linear scenario needs a weight".into())
            })?;
            let criterion = MisspecCriterion::for_functional_linear(cfg.hurst, weight)?;
            // mesh an order finer than the data grid so the target is
            // not an artifact of the fitting resolution
            Ok(criterion.minimize(16 * cfg.grid_size + 1)?.theta)
        }
    }
}

fn replicate_dataset(
    cfg: &ExperimentConfig,
    spec: &FbmSpec,
    grid: &Grid,
    params: &PointImpactParams,
    replicate: usize,
) -> Result<Dataset> {
    let r = replicate as u64;
    let path_seed = derive_seed(cfg.seed, &[label::REPLICATE, r, label::FBM_PATH]);
    let noise_seed = derive_seed(cfg.seed, &[label::REPLICATE, r, label::NOISE]);
    let paths = fbm::sample(spec, grid, cfg.n, path_seed)?;
    match cfg.scenario {
        Scenario::PointImpact => gen_point_impact(params, paths, noise_seed),
        Scenario::PartialMisspec => {
            let weight = cfg.weight.as_ref().unwrap();
            gen_partial_misspec(params, weight, paths, noise_seed)
        }
        Scenario::FunctionalLinear => {
            let weight = cfg.weight.as_ref().unwrap();
            gen_functional_linear(weight, cfg.sigma, paths, noise_seed)
        }
    }
}

fn method_interval(
    cfg: &ExperimentConfig,
    table: Option<&QuantileTable>,
    data: &Dataset,
    fit: &FitResult,
    method: Method,
    replicate: usize,
) -> Result<ConfidenceInterval> {
    let seed = derive_seed(
        cfg.seed,
        &[label::REPLICATE, replicate as u64, label::METHOD, method.stream_id()],
    );
    match method {
        Method::WaldH => {
            let table = table.ok_or(Error::MissingQuantile {
                hurst: cfg.hurst,
                alpha: (1.0 - cfg.level) / 2.0,
            })?;
            wald_ci(fit, cfg.hurst, cfg.n, cfg.level, table)
        }
        Method::ResidualBoot => {
            let bcfg = BootstrapConfig::new(cfg.boot_b, BootstrapKind::Residual, seed, cfg.level)?;
            let dist = residual_bootstrap(data, fit, &bcfg)?;
            percentile_ci(&dist, cfg.level)
        }
        Method::PairsBoot => {
            let bcfg = BootstrapConfig::new(cfg.boot_b, BootstrapKind::Pairs, seed, cfg.level)?;
            let dist = pairs_bootstrap(data, fit, &bcfg)?;
            percentile_ci(&dist, cfg.level)
        }
    }
}

/// Run the full coverage experiment. `table` is required iff the wald
/// method is configured; its cell for (hurst, (1-level)/2) is checked
/// up front so a missing quantile fails before any compute is spent.
///
/// Replicates run in parallel; aggregation folds them back in replicate
/// order, so the output does not depend on scheduling.
pub fn run_coverage_experiment(
    cfg: &ExperimentConfig,
    table: Option<&QuantileTable>,
) -> Result<Vec<ResultRow>> {
    cfg.validate()?;
    if cfg.methods.contains(&Method::WaldH) {
        let alpha = (1.0 - cfg.level) / 2.0;
        let t = table.ok_or(Error::MissingQuantile { hurst: cfg.hurst, alpha })?;
        t.lookup(cfg.hurst, alpha)?;
    }
    let started = Instant::now();
    let spec = FbmSpec::new(cfg.hurst)?;
    let grid = Grid::uniform(0.0, 1.0, cfg.grid_size)?;
    let params = point_params(cfg)?;
    let target = coverage_target(cfg, &grid)?;

    // per replicate, one (covered, width) per configured method
    let scored: Vec<Vec<(bool, f64)>> = (0..cfg.outer_reps)
        .into_par_iter()
        .map(|r| {
            let data = replicate_dataset(cfg, &spec, &grid, &params, r)?;
            let fit = fit_point_impact(&data)?;
            cfg.methods
                .iter()
                .map(|m| {
                    let ci = method_interval(cfg, table, &data, &fit, *m, r)?;
                    Ok((ci.covers(target), ci.width()))
                })
                .collect::<Result<Vec<_>>>()
        })
        .collect::<Result<Vec<_>>>()?;

    let wall_time = started.elapsed();
    let reps = cfg.outer_reps as f64;
    let rows = cfg
        .methods
        .iter()
        .enumerate()
        .map(|(mi, m)| {
            let mut hits = 0usize;
            let mut width_sum = 0.0;
            for rep in &scored {
                hits += rep[mi].0 as usize;
                width_sum += rep[mi].1;
            }
            let coverage = hits as f64 / reps;
            ResultRow {
                scenario: cfg.scenario,
                n: cfg.n,
                sigma: cfg.sigma,
                hurst: cfg.hurst,
                theta0: cfg.theta0,
                alpha0: cfg.alpha0,
                beta0: cfg.beta0,
                grid_size: cfg.grid_size,
                outer_reps: cfg.outer_reps,
                boot_b: cfg.boot_b,
                level: cfg.level,
                seed: cfg.seed,
                method: *m,
                coverage,
                avg_width: width_sum / reps,
                mc_standard_error: mc_standard_error(coverage, cfg.outer_reps),
                wall_time,
            }
        })
        .collect();
    Ok(rows)
}

fn point_params(cfg: &ExperimentConfig) -> Result<PointImpactParams> {
    // functional-linear has no point term; a placeholder slope keeps the
    // constructor happy and is never used
    match cfg.scenario {
        Scenario::FunctionalLinear => PointImpactParams::new(0.0, 1.0, cfg.theta0, cfg.sigma),
        _ => PointImpactParams::new(cfg.alpha0, cfg.beta0, cfg.theta0, cfg.sigma),
    }
}

/// Point estimates per replicate, drawn from the exact streams the
/// coverage experiment uses. Feeds rate studies and estimate histograms.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ReplicateEstimate {
    pub replicate: usize,
    pub theta_hat: f64,
    pub beta_hat: f64,
    pub alpha_hat: f64,
    pub sigma_hat: f64,
}

pub fn replicate_estimates(cfg: &ExperimentConfig) -> Result<Vec<ReplicateEstimate>> {
    cfg.validate()?;
    let spec = FbmSpec::new(cfg.hurst)?;
    let grid = Grid::uniform(0.0, 1.0, cfg.grid_size)?;
    let params = point_params(cfg)?;
    (0..cfg.outer_reps)
        .into_par_iter()
        .map(|r| {
            let data = replicate_dataset(cfg, &spec, &grid, &params, r)?;
            let fit = fit_point_impact(&data)?;
            Ok(ReplicateEstimate {
                replicate: r,
                theta_hat: fit.theta_hat,
                beta_hat: fit.beta_hat,
                alpha_hat: fit.alpha_hat,
                sigma_hat: fit.sigma_hat,
            })
        })
        .collect()
}
