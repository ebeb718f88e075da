//! Serialization of experiment output: coverage reports, per-replicate
//! estimate dumps, interval records and histogram summaries.
//!
//! CSV reports carry the full resolved configuration as `# key = value`
//! comment lines, then one row per (config, method). The row itself
//! echoes every scalar knob so rows from many runs can be concatenated
//! and still make sense; the weight, which can contain commas, lives
//! only in the comment header and in JSON reports.

use crate::config::{ExperimentConfig, Method, Scenario};
use crate::experiment::{ReplicateEstimate, ResultRow};
use point_impact::bootstrap::{CiMethod, ConfidenceInterval};
use point_impact::error::{Error, Result};
use serde::{Deserialize, Serialize};
use std::fmt::Write as _;
use std::time::Duration;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OutputFormat {
    Csv,
    Json,
}

impl OutputFormat {
    pub fn from_name(name: &str) -> Result<Self> {
        match name.trim() {
            "csv" => Ok(OutputFormat::Csv),
            "json" => Ok(OutputFormat::Json),
            other => Err(Error::InvalidParameter(format!(
                "unknown format {other:?}; expected csv or json"
            ))),
        }
    }
}

pub const REPORT_COLUMNS: &str = "scenario,n,sigma,hurst,theta0,alpha0,beta0,grid_size,\
outer_reps,boot_b,level,seed,method,coverage,avg_width,mc_standard_error";

pub fn report_to_csv(rows: &[ResultRow], config: Option<&ExperimentConfig>) -> String {
    let mut out = String::new();
    if let Some(cfg) = config {
        for line in cfg.to_kv().lines() {
            writeln!(out, "# {line}").unwrap();
        }
    }
    out.push_str(REPORT_COLUMNS);
    out.push('\n');
    for r in rows {
        writeln!(
            out,
            "{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{}",
            r.scenario.name(),
            r.n,
            r.sigma,
            r.hurst,
            r.theta0,
            r.alpha0,
            r.beta0,
            r.grid_size,
            r.outer_reps,
            r.boot_b,
            r.level,
            r.seed,
            r.method.name(),
            r.coverage,
            r.avg_width,
            r.mc_standard_error,
        )
        .unwrap();
    }
    out
}

fn field_f64(s: &str, line: usize) -> Result<f64> {
    s.trim().parse::<f64>().map_err(|_| Error::Parse {
        line,
        message: format!("bad float {s:?}"),
    })
}

fn field_usize(s: &str, line: usize) -> Result<usize> {
    s.trim().parse::<usize>().map_err(|_| Error::Parse {
        line,
        message: format!("bad count {s:?}"),
    })
}

/// Read back [`report_to_csv`] output. Comment lines are skipped, not
/// interpreted; use a JSON report when the configuration must travel
/// with the rows losslessly.
pub fn report_from_csv_str(text: &str) -> Result<Vec<ResultRow>> {
    let mut rows = Vec::new();
    let mut saw_header = false;
    for (idx, raw) in text.lines().enumerate() {
        let lineno = idx + 1;
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        if !saw_header {
            if line != REPORT_COLUMNS {
                return Err(Error::Parse {
                    line: lineno,
                    message: "unrecognized report header".into(),
                });
            }
            saw_header = true;
            continue;
        }
        let f: Vec<&str> = line.split(',').collect();
        if f.len() != 16 {
            return Err(Error::Parse {
                line: lineno,
                message: format!("expected 16 fields, got {}", f.len()),
            });
        }
        rows.push(ResultRow {
            scenario: Scenario::from_name(f[0])?,
            n: field_usize(f[1], lineno)?,
            sigma: field_f64(f[2], lineno)?,
            hurst: field_f64(f[3], lineno)?,
            theta0: field_f64(f[4], lineno)?,
            alpha0: field_f64(f[5], lineno)?,
            beta0: field_f64(f[6], lineno)?,
            grid_size: field_usize(f[7], lineno)?,
            outer_reps: field_usize(f[8], lineno)?,
            boot_b: field_usize(f[9], lineno)?,
            level: field_f64(f[10], lineno)?,
            seed: f[11].trim().parse::<u64>().map_err(|_| Error::Parse {
                line: lineno,
                message: format!("bad seed {:?}", f[11]),
            })?,
            method: Method::from_name(f[12])?,
            coverage: field_f64(f[13], lineno)?,
            avg_width: field_f64(f[14], lineno)?,
            mc_standard_error: field_f64(f[15], lineno)?,
            wall_time: Duration::ZERO,
        });
    }
    if !saw_header {
        return Err(Error::Parse {
            line: 1,
            message: "report has no header line".into(),
        });
    }
    Ok(rows)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct ReportDoc {
    config: Option<ExperimentConfig>,
    rows: Vec<ResultRow>,
}

pub fn report_to_json(rows: &[ResultRow], config: Option<&ExperimentConfig>) -> Result<String> {
    let doc = ReportDoc {
        config: config.cloned(),
        rows: rows.to_vec(),
    };
    Ok(serde_json::to_string_pretty(&doc)?)
}

pub fn report_from_json(text: &str) -> Result<(Option<ExperimentConfig>, Vec<ResultRow>)> {
    let doc: ReportDoc = serde_json::from_str(text)?;
    Ok((doc.config, doc.rows))
}

pub fn estimates_to_csv(estimates: &[ReplicateEstimate]) -> String {
    let mut out = String::from("replicate,theta_hat,beta_hat,alpha_hat,sigma_hat\n");
    for e in estimates {
        writeln!(
            out,
            "{},{},{},{},{}",
            e.replicate, e.theta_hat, e.beta_hat, e.alpha_hat, e.sigma_hat
        )
        .unwrap();
    }
    out
}

fn ci_method_name(m: CiMethod) -> &'static str {
    match m {
        CiMethod::Wald => "wald",
        CiMethod::ResidualBoot => "residual",
        CiMethod::PairsBoot => "pairs",
    }
}

pub fn interval_to_csv(ci: &ConfidenceInterval) -> String {
    format!(
        "method,lo,hi,level,width\n{},{},{},{},{}\n",
        ci_method_name(ci.method),
        ci.lo,
        ci.hi,
        ci.level,
        ci.width()
    )
}

pub fn interval_to_json(ci: &ConfidenceInterval) -> Result<String> {
    Ok(serde_json::to_string_pretty(ci)?)
}

/// Equal-width histogram of `values` over [min, max], as CSV with
/// columns bin_left,bin_right,count. The top edge closes the last bin.
/// A degenerate sample (min == max) lands entirely in the first bin so
/// the row count still equals `bins`.
pub fn histogram_csv(values: &[f64], bins: usize) -> Result<String> {
    if bins < 1 {
        return Err(Error::InvalidParameter("histogram needs at least one bin".into()));
    }
    if values.is_empty() {
        return Err(Error::InvalidParameter("histogram needs at least one value".into()));
    }
    if values.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidParameter("histogram values must be finite".into()));
    }
    let min = values.iter().cloned().fold(f64::INFINITY, f64::min);
    let max = values.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let span = max - min;
    let mut counts = vec![0usize; bins];
    for &v in values {
        let idx = if span == 0.0 {
            0
        } else {
            (((v - min) / span) * bins as f64).floor() as usize
        };
        counts[idx.min(bins - 1)] += 1;
    }
    let mut out = String::from("bin_left,bin_right,count\n");
    // degenerate span still gets unit-width bins so edges stay distinct
    let width = if span == 0.0 { 1.0 } else { span / bins as f64 };
    for (i, c) in counts.iter().enumerate() {
        writeln!(out, "{},{},{}", min + i as f64 * width, min + (i + 1) as f64 * width, c).unwrap();
    }
    Ok(out)
}
