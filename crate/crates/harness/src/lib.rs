//! Experiment harness on top of the `point-impact` toolkit: coverage
//! studies over simulated fractional trajectories, report and histogram
//! serialization, and ingestion of externally recorded curves. The
//! `pointimpact` binary exposes all of it on the command line.

pub mod config;
pub mod experiment;
pub mod ingest;
pub mod report;

pub use config::{parse_config_str, ExperimentConfig, Method, Scenario};
pub use experiment::{
    coverage_target, replicate_estimates, run_coverage_experiment, ReplicateEstimate, ResultRow,
};
pub use ingest::{ingest, ResponseSource};
pub use report::{
    estimates_to_csv, histogram_csv, report_from_csv_str, report_from_json, report_to_csv,
    report_to_json, OutputFormat,
};
