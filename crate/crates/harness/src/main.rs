//! `pointimpact`: command-line front end for the toolkit. Every command
//! is deterministic given its inputs and --seed; errors go to stderr as
//! a one-line JSON record and set a nonzero exit code.

use clap::{Args, Parser, Subcommand};
use point_impact::bootstrap::{
    pairs_bootstrap, percentile_ci, residual_bootstrap, BootstrapConfig, BootstrapKind,
};
use point_impact::error::{Error, Result};
use point_impact::estimation::{fit_point_impact, fit_two_sample};
use point_impact::fbm::{self, FbmSpec, TrajectorySet};
use point_impact::grid::Grid;
use point_impact::limit_dist::{
    self, wald_ci, QuantileTable, UnitFamily, DEFAULT_RESOLUTION, DEFAULT_TRUNCATION,
};
use point_impact::scenarios::{
    gen_two_sample, peaked_mean, Dataset, PointImpactParams, TwoSampleData, TwoSampleParams,
};
use point_impact_harness::config::parse_config_str;
use point_impact_harness::experiment::{replicate_estimates, run_coverage_experiment};
use point_impact_harness::ingest::{ingest, ResponseSource};
use point_impact_harness::report::{
    estimates_to_csv, histogram_csv, interval_to_csv, interval_to_json, report_to_csv,
    report_to_json, OutputFormat,
};
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

#[derive(Parser)]
#[command(
    name = "pointimpact",
    version,
    about = "Impact-point regression on rough functional data: simulation, \
fitting, intervals, coverage experiments"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// Master seed for anything random. coverage-experiment takes its
    /// seed from the config file instead.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    /// Output file; stdout when omitted.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Output format: csv or json.
    #[arg(long, global = true, default_value = "csv")]
    format: String,
    /// Suppress progress notes on stderr.
    #[arg(long, global = true)]
    quiet: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate fractional Brownian trajectories on a uniform grid.
    SimulateFbm {
        #[arg(long)]
        hurst: f64,
        #[arg(long)]
        subjects: usize,
        #[arg(long, default_value_t = 101)]
        grid_size: usize,
        #[arg(long, default_value_t = 0.0)]
        start: f64,
        #[arg(long, default_value_t = 1.0)]
        end: f64,
    },
    /// Fit the point-impact model to a dataset (CSV or JSON).
    Fit {
        #[arg(long)]
        data: PathBuf,
    },
    /// Interval for the impact point by resampling residuals.
    CiResidual(BootArgs),
    /// Interval for the impact point by resampling (X, Y) pairs.
    CiPairs(BootArgs),
    /// Plug-in interval from a simulated limit quantile table.
    CiWald {
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        hurst: f64,
        #[arg(long, default_value_t = 0.95)]
        level: f64,
        #[arg(long)]
        table: PathBuf,
    },
    /// Simulate limit-law quantiles over a grid of roughness indices.
    QuantileTable {
        /// fractional-drift or parabolic-drift.
        #[arg(long, default_value = "fractional-drift")]
        family: String,
        /// Comma-separated Hurst indices.
        #[arg(long, value_delimiter = ',', required = true)]
        hurst: Vec<f64>,
        /// Comma-separated upper tail probabilities.
        #[arg(long, value_delimiter = ',', default_value = "0.005,0.01,0.025,0.05")]
        alpha: Vec<f64>,
        #[arg(long, default_value_t = 100_000)]
        draws: usize,
        /// Initial truncation horizon; doubled until the argmin settles.
        #[arg(long, default_value_t = DEFAULT_TRUNCATION)]
        t_init: f64,
        #[arg(long, default_value_t = DEFAULT_RESOLUTION)]
        resolution: f64,
    },
    /// Run a coverage experiment described by a key=value config file.
    CoverageExperiment {
        #[arg(long)]
        config: PathBuf,
        /// Quantile table CSV; required when the config includes wald.
        #[arg(long)]
        table: Option<PathBuf>,
        /// Also write per-replicate point estimates here (CSV).
        #[arg(long)]
        estimates_out: Option<PathBuf>,
    },
    /// Locate the largest mean difference between two groups of curves,
    /// from files or freshly simulated.
    TwoSample {
        /// Trajectory CSV for group 1 (pairs with --group2).
        #[arg(long, requires = "group2", conflicts_with = "hurst")]
        group1: Option<PathBuf>,
        #[arg(long, requires = "group1")]
        group2: Option<PathBuf>,
        /// Simulate both groups at this roughness instead.
        #[arg(long)]
        hurst: Option<f64>,
        #[arg(long, default_value_t = 30)]
        n1: usize,
        #[arg(long, default_value_t = 30)]
        n2: usize,
        /// Peak location of the simulated group-1 mean shift.
        #[arg(long, default_value_t = 0.5)]
        theta0: f64,
        /// Peak sharpness s: the shift falls off like |t - theta0|^(2s).
        #[arg(long, default_value_t = 1.0)]
        smoothness: f64,
        /// Size of the simulated shift.
        #[arg(long, default_value_t = 0.5)]
        effect: f64,
        #[arg(long, default_value_t = 101)]
        grid_size: usize,
    },
    /// Pair external trajectories with observed or synthesized responses.
    Ingest {
        #[arg(long)]
        trajectories: PathBuf,
        /// Observed responses, one per line; omit to synthesize.
        #[arg(long)]
        responses: Option<PathBuf>,
        /// Impact point for synthesized responses.
        #[arg(long)]
        theta0: Option<f64>,
        #[arg(long, default_value_t = 0.0)]
        sigma: f64,
        #[arg(long, default_value_t = 0.0)]
        alpha0: f64,
        #[arg(long, default_value_t = 1.0)]
        beta0: f64,
    },
}

#[derive(Args)]
struct BootArgs {
    #[arg(long)]
    data: PathBuf,
    #[arg(long, default_value_t = 1000)]
    replicates: usize,
    #[arg(long, default_value_t = 0.95)]
    level: f64,
    /// Histogram of replicate impact-point estimates (CSV).
    #[arg(long)]
    hist_out: Option<PathBuf>,
    #[arg(long, default_value_t = 50)]
    bins: usize,
    /// Full replicate draws (CSV).
    #[arg(long)]
    draws_out: Option<PathBuf>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let record = serde_json::json!({
                "error": { "kind": error_kind(&e), "message": e.to_string() }
            });
            eprintln!("{record}");
            ExitCode::FAILURE
        }
    }
}

fn error_kind(e: &Error) -> &'static str {
    match e {
        Error::Parse { .. } => "parse",
        Error::Io(_) => "io",
        Error::Json(_) => "json",
        Error::MissingQuantile { .. } => "missing-quantile",
        Error::Unconverged { .. } => "unconverged",
        Error::InvalidHurst(_) | Error::InvalidParameter(_) | Error::TooFewSubjects { .. } => {
            "invalid-parameter"
        }
        Error::GridTooShort { .. }
        | Error::GridNotIncreasing { .. }
        | Error::GridNotFinite
        | Error::GridNotUniform => "invalid-grid",
        Error::NotPositiveDefinite { .. }
        | Error::DegenerateTrajectory
        | Error::DegenerateDesign(_)
        | Error::RankDeficientEverywhere => "degenerate-data",
    }
}

fn emit(out: &Option<PathBuf>, text: &str) -> Result<()> {
    match out {
        Some(path) => fs::write(path, text)?,
        None => print!("{text}"),
    }
    Ok(())
}

fn with_newline(mut s: String) -> String {
    if !s.ends_with('\n') {
        s.push('\n');
    }
    s
}

/// Datasets and tables travel as CSV or JSON; a leading brace means JSON.
fn load_dataset(path: &Path) -> Result<Dataset> {
    let text = fs::read_to_string(path)?;
    if text.trim_start().starts_with('{') {
        Dataset::from_json(&text)
    } else {
        Dataset::from_csv_str(&text)
    }
}

fn load_table(path: &Path) -> Result<QuantileTable> {
    let text = fs::read_to_string(path)?;
    if text.trim_start().starts_with('{') {
        Ok(serde_json::from_str(&text)?)
    } else {
        QuantileTable::from_csv_str(&text)
    }
}

fn run(cli: &Cli) -> Result<()> {
    let format = OutputFormat::from_name(&cli.format)?;
    match &cli.command {
        Command::SimulateFbm { hurst, subjects, grid_size, start, end } => {
            let spec = FbmSpec::new(*hurst)?;
            let grid = Grid::uniform(*start, *end, *grid_size)?;
            let paths = fbm::sample(&spec, &grid, *subjects, cli.seed)?;
            let text = match format {
                OutputFormat::Csv => paths.to_csv(),
                OutputFormat::Json => with_newline(paths.to_json()?),
            };
            emit(&cli.out, &text)
        }
        Command::Fit { data } => {
            let data = load_dataset(data)?;
            let fit = fit_point_impact(&data)?;
            let text = match format {
                OutputFormat::Csv => fit.to_csv(),
                OutputFormat::Json => with_newline(serde_json::to_string_pretty(&fit)?),
            };
            emit(&cli.out, &text)
        }
        Command::CiResidual(args) => bootstrap_command(cli, args, BootstrapKind::Residual, format),
        Command::CiPairs(args) => bootstrap_command(cli, args, BootstrapKind::Pairs, format),
        Command::CiWald { data, hurst, level, table } => {
            let data = load_dataset(data)?;
            let table = load_table(table)?;
            let fit = fit_point_impact(&data)?;
            let ci = wald_ci(&fit, *hurst, fit.n(), *level, &table)?;
            let text = match format {
                OutputFormat::Csv => interval_to_csv(&ci),
                OutputFormat::Json => with_newline(interval_to_json(&ci)?),
            };
            emit(&cli.out, &text)
        }
        Command::QuantileTable { family, hurst, alpha, draws, t_init, resolution } => {
            let family = UnitFamily::from_name(family)?;
            if !cli.quiet {
                eprintln!(
                    "simulating {} cells at {draws} draws each",
                    hurst.len() * alpha.len()
                );
            }
            let table =
                limit_dist::quantile_table(family, hurst, alpha, *draws, *t_init, *resolution, cli.seed)?;
            let text = match format {
                OutputFormat::Csv => table.to_csv(),
                OutputFormat::Json => with_newline(serde_json::to_string_pretty(&table)?),
            };
            emit(&cli.out, &text)
        }
        Command::CoverageExperiment { config, table, estimates_out } => {
            let cfg = parse_config_str(&fs::read_to_string(config)?)?;
            let table = table.as_ref().map(|p| load_table(p)).transpose()?;
            if !cli.quiet {
                eprintln!(
                    "running {} replicates of n = {} ({} methods)",
                    cfg.outer_reps,
                    cfg.n,
                    cfg.methods.len()
                );
            }
            let rows = run_coverage_experiment(&cfg, table.as_ref())?;
            if !cli.quiet {
                for r in &rows {
                    eprintln!(
                        "{}: coverage {:.3}, avg width {:.4} ({:.1}s)",
                        r.method.name(),
                        r.coverage,
                        r.avg_width,
                        r.wall_time.as_secs_f64()
                    );
                }
            }
            if let Some(path) = estimates_out {
                let est = replicate_estimates(&cfg)?;
                fs::write(path, estimates_to_csv(&est))?;
            }
            let text = match format {
                OutputFormat::Csv => report_to_csv(&rows, Some(&cfg)),
                OutputFormat::Json => with_newline(report_to_json(&rows, Some(&cfg))?),
            };
            emit(&cli.out, &text)
        }
        Command::TwoSample {
            group1,
            group2,
            hurst,
            n1,
            n2,
            theta0,
            smoothness,
            effect,
            grid_size,
        } => {
            let data = match (group1, group2, hurst) {
                (Some(g1), Some(g2), None) => {
                    let group1 = TrajectorySet::from_csv_str(&fs::read_to_string(g1)?)?;
                    let group2 = TrajectorySet::from_csv_str(&fs::read_to_string(g2)?)?;
                    let rho = group1.n_subjects() as f64 / group2.n_subjects() as f64;
                    TwoSampleData {
                        group1,
                        group2,
                        mean1: Vec::new(),
                        mean2: Vec::new(),
                        theta0: None,
                        smoothness: None,
                        rho,
                        degenerate: false,
                    }
                }
                (None, None, Some(h)) => {
                    let params = TwoSampleParams {
                        hurst: *h,
                        n1: *n1,
                        n2: *n2,
                        theta0: Some(*theta0),
                        smoothness: Some(*smoothness),
                    };
                    let grid = Grid::uniform(0.0, 1.0, *grid_size)?;
                    let mean1 = peaked_mean(&grid, *theta0, *effect, *smoothness);
                    let mean2 = vec![0.0; grid.len()];
                    gen_two_sample(&params, &mean1, &mean2, &grid, cli.seed)?
                }
                _ => {
                    return Err(Error::InvalidParameter(
                        "two-sample needs either --group1/--group2 files or --hurst to simulate"
                            .into(),
                    ))
                }
            };
            let fit = fit_two_sample(&data)?;
            let text = match format {
                OutputFormat::Csv => {
                    let mut s = String::from("theta_hat,theta_index,n1,n2\n");
                    s.push_str(&format!(
                        "{},{},{},{}\n",
                        fit.theta_hat,
                        fit.theta_index,
                        data.group1.n_subjects(),
                        data.group2.n_subjects()
                    ));
                    s
                }
                OutputFormat::Json => with_newline(serde_json::to_string_pretty(&fit)?),
            };
            emit(&cli.out, &text)
        }
        Command::Ingest { trajectories, responses, theta0, sigma, alpha0, beta0 } => {
            let traj_text = fs::read_to_string(trajectories)?;
            let data = match responses {
                Some(path) => {
                    let resp_text = fs::read_to_string(path)?;
                    ingest(&traj_text, ResponseSource::Observed(&resp_text))?
                }
                None => {
                    let theta0 = theta0.ok_or_else(|| {
                        Error::InvalidParameter(
                            "ingest needs --responses or --theta0 to synthesize them".into(),
                        )
                    })?;
                    let params = PointImpactParams::new(*alpha0, *beta0, theta0, *sigma)?;
                    ingest(&traj_text, ResponseSource::Synthesized(params, cli.seed))?
                }
            };
            let text = match format {
                OutputFormat::Csv => data.to_csv(),
                OutputFormat::Json => with_newline(data.to_json()?),
            };
            emit(&cli.out, &text)
        }
    }
}

fn bootstrap_command(
    cli: &Cli,
    args: &BootArgs,
    kind: BootstrapKind,
    format: OutputFormat,
) -> Result<()> {
    let data = load_dataset(&args.data)?;
    let fit = fit_point_impact(&data)?;
    let cfg = BootstrapConfig::new(args.replicates, kind, cli.seed, args.level)?;
    let dist = match kind {
        BootstrapKind::Residual => residual_bootstrap(&data, &fit, &cfg)?,
        BootstrapKind::Pairs => pairs_bootstrap(&data, &fit, &cfg)?,
    };
    if let Some(path) = &args.hist_out {
        fs::write(path, histogram_csv(&dist.theta_star, args.bins)?)?;
    }
    if let Some(path) = &args.draws_out {
        fs::write(path, dist.to_csv())?;
    }
    let ci = percentile_ci(&dist, args.level)?;
    let text = match format {
        OutputFormat::Csv => interval_to_csv(&ci),
        OutputFormat::Json => with_newline(interval_to_json(&ci)?),
    };
    emit(&cli.out, &text)
}
