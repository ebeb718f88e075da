//! Experiment configuration: the flat `key = value` file format and the
//! tags it encodes. Every report embeds the resolved configuration, so
//! this module also defines the canonical echo format.

use point_impact::error::{Error, Result};
use point_impact::estimation::MIN_SUBJECTS;
use point_impact::fbm::FbmSpec;
use point_impact::scenarios::WeightFunction;
use serde::{Deserialize, Serialize};
use std::collections::HashMap;
use std::fmt::Write as _;

/// Interval constructions the experiment engine can score.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Method {
    /// Plug-in interval from simulated limit quantiles.
    #[serde(rename = "wald")]
    WaldH,
    #[serde(rename = "residual")]
    ResidualBoot,
    #[serde(rename = "pairs")]
    PairsBoot,
}

impl Method {
    pub const ALL: [Method; 3] = [Method::WaldH, Method::ResidualBoot, Method::PairsBoot];

    /// Stream id for per-(replicate, method) seed derivation. Append new
    /// methods, never renumber: ids are baked into published results.
    pub fn stream_id(self) -> u64 {
        match self {
            Method::WaldH => 1,
            Method::ResidualBoot => 2,
            Method::PairsBoot => 3,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Method::WaldH => "wald",
            Method::ResidualBoot => "residual",
            Method::PairsBoot => "pairs",
        }
    }

    pub fn from_name(name: &str) -> Result<Self> {
        match name.trim() {
            "wald" => Ok(Method::WaldH),
            "residual" => Ok(Method::ResidualBoot),
            "pairs" => Ok(Method::PairsBoot),
            other => Err(Error::InvalidParameter(format!(
                "unknown method {other:?}; expected wald, residual or pairs"
            ))),
        }
    }
}

/// How each replicate's responses are generated.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Scenario {
    /// Y = alpha0 + beta0 X(theta0) + noise; the working model is exact.
    #[serde(rename = "point-impact")]
    PointImpact,
    /// Point impact plus a functional term ∫ f·X.
    #[serde(rename = "partial-misspec")]
    PartialMisspec,
    /// Functional term only; the working model is completely wrong and
    /// its population minimizer replaces theta0 as the scored target.
    #[serde(rename = "functional-linear")]
    FunctionalLinear,
}

impl Scenario {
    pub fn name(self) -> &'static str {
        match self {
            Scenario::PointImpact => "point-impact",
            Scenario::PartialMisspec => "partial-misspec",
            Scenario::FunctionalLinear => "functional-linear",
        }
    }

    pub fn from_name(name: &str) -> Result<Self> {
        match name.trim() {
            "point-impact" => Ok(Scenario::PointImpact),
            "partial-misspec" => Ok(Scenario::PartialMisspec),
            "functional-linear" => Ok(Scenario::FunctionalLinear),
            other => Err(Error::InvalidParameter(format!("unknown scenario {other:?}"))),
        }
    }
}

/// Full description of one coverage experiment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub scenario: Scenario,
    /// Subjects per replicate.
    pub n: usize,
    pub sigma: f64,
    pub hurst: f64,
    pub theta0: f64,
    pub alpha0: f64,
    pub beta0: f64,
    pub grid_size: usize,
    /// Monte Carlo replicates to aggregate over.
    pub outer_reps: usize,
    pub methods: Vec<Method>,
    /// Bootstrap resamples per replicate.
    pub boot_b: usize,
    pub level: f64,
    /// Functional weight for the misspecified scenarios; must be absent
    /// for plain point impact.
    pub weight: Option<WeightFunction>,
    pub seed: u64,
}

impl ExperimentConfig {
    /// Point-impact experiment with the standard defaults: truth (0, 1),
    /// 101-point grid, 500 replicates, B = 1000, level 0.95, all methods.
    pub fn point_impact(n: usize, sigma: f64, hurst: f64, theta0: f64) -> Self {
        ExperimentConfig {
            scenario: Scenario::PointImpact,
            n,
            sigma,
            hurst,
            theta0,
            alpha0: 0.0,
            beta0: 1.0,
            grid_size: 101,
            outer_reps: 500,
            methods: Method::ALL.to_vec(),
            boot_b: 1000,
            level: 0.95,
            weight: None,
            seed: 0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        FbmSpec::new(self.hurst)?;
        if self.n < MIN_SUBJECTS {
            return Err(Error::TooFewSubjects { have: self.n, need: MIN_SUBJECTS });
        }
        if self.grid_size < 3 {
            return Err(Error::InvalidParameter(format!(
                "grid_size must be at least 3, got {}",
                self.grid_size
            )));
        }
        if self.outer_reps < 1 {
            return Err(Error::InvalidParameter("outer_reps must be at least 1".into()));
        }
        if !(self.level > 0.0 && self.level < 1.0) {
            return Err(Error::InvalidParameter(format!(
                "level must lie in (0,1), got {}",
                self.level
            )));
        }
        if !self.sigma.is_finite() || self.sigma < 0.0 {
            return Err(Error::InvalidParameter("sigma must be nonnegative".into()));
        }
        if self.methods.is_empty() {
            return Err(Error::InvalidParameter("at least one method is required".into()));
        }
        let needs_boot = self.methods.iter().any(|m| *m != Method::WaldH);
        if needs_boot && self.boot_b < 2 {
            return Err(Error::InvalidParameter(format!(
                "bootstrap methods need boot_b of at least 2, got {}",
                self.boot_b
            )));
        }
        match self.scenario {
            Scenario::PointImpact => {
                if self.weight.is_some() {
                    return Err(Error::InvalidParameter(
                        "point-impact scenario takes no weight; drop it or switch scenario".into(),
                    ));
                }
                if self.beta0 == 0.0 {
                    return Err(Error::InvalidParameter(
                        "point-impact scenario needs a nonzero beta0".into(),
                    ));
                }
            }
            Scenario::PartialMisspec => {
                if self.weight.is_none() {
                    return Err(Error::InvalidParameter(
                        "partial-misspec scenario needs a weight".into(),
                    ));
                }
                if self.beta0 == 0.0 {
                    return Err(Error::InvalidParameter(
                        "partial-misspec scenario needs a nonzero beta0".into(),
                    ));
                }
            }
            Scenario::FunctionalLinear => {
                if self.weight.is_none() {
                    return Err(Error::InvalidParameter(
                        "functional-linear scenario needs a weight".into(),
                    ));
                }
            }
        }
        Ok(())
    }

    /// Canonical `key = value` echo, parseable by [`parse_config_str`].
    pub fn to_kv(&self) -> String {
        let mut out = String::new();
        writeln!(out, "scenario = {}", self.scenario.name()).unwrap();
        writeln!(out, "n = {}", self.n).unwrap();
        writeln!(out, "sigma = {}", self.sigma).unwrap();
        writeln!(out, "hurst = {}", self.hurst).unwrap();
        writeln!(out, "theta0 = {}", self.theta0).unwrap();
        writeln!(out, "alpha0 = {}", self.alpha0).unwrap();
        writeln!(out, "beta0 = {}", self.beta0).unwrap();
        writeln!(out, "grid_size = {}", self.grid_size).unwrap();
        writeln!(out, "outer_reps = {}", self.outer_reps).unwrap();
        let methods: Vec<&str> = self.methods.iter().map(|m| m.name()).collect();
        writeln!(out, "methods = {}", methods.join(",")).unwrap();
        writeln!(out, "boot_b = {}", self.boot_b).unwrap();
        writeln!(out, "level = {}", self.level).unwrap();
        if let Some(w) = &self.weight {
            writeln!(out, "weight = {}", weight_spec(w)).unwrap();
        }
        writeln!(out, "seed = {}", self.seed).unwrap();
        out
    }
}

/// Compact text form of a weight: `constant:<c>`, `indicator:<lo>,<hi>`
/// or `poly:<c0>,<c1>,...`. Tabulated weights have no text form and are
/// available through the API only.
pub fn weight_spec(weight: &WeightFunction) -> String {
    match weight {
        WeightFunction::Constant(c) => format!("constant:{c}"),
        WeightFunction::Indicator { lo, hi } => format!("indicator:{lo},{hi}"),
        WeightFunction::Polynomial(coeffs) => {
            let parts: Vec<String> = coeffs.iter().map(|c| c.to_string()).collect();
            format!("poly:{}", parts.join(","))
        }
        WeightFunction::Tabulated { grid, .. } => {
            format!("tabulated:<{} points, api only>", grid.len())
        }
    }
}

pub fn parse_weight_spec(spec: &str) -> Result<WeightFunction> {
    let bad = |msg: String| Error::InvalidParameter(msg);
    let (kind, args) = spec
        .split_once(':')
        .ok_or_else(|| bad(format!("weight spec {spec:?} has no ':' separator")))?;
    let nums = || -> Result<Vec<f64>> {
        args.split(',')
            .map(|f| {
                f.trim()
                    .parse::<f64>()
                    .map_err(|_| bad(format!("bad number {f:?} in weight spec {spec:?}")))
            })
            .collect()
    };
    match kind.trim() {
        "constant" => WeightFunction::constant(
            args.trim()
                .parse::<f64>()
                .map_err(|_| bad(format!("bad constant in weight spec {spec:?}")))?,
        ),
        "indicator" => {
            let v = nums()?;
            if v.len() != 2 {
                return Err(bad(format!("indicator takes lo,hi; got {spec:?}")));
            }
            WeightFunction::indicator(v[0], v[1])
        }
        "poly" => WeightFunction::polynomial(nums()?),
        other => Err(bad(format!(
            "unknown weight kind {other:?}; expected constant, indicator or poly"
        ))),
    }
}

/// Parse the flat config format: one `key = value` per line, `#` starts
/// a comment, unknown or repeated keys are errors. Required keys are n,
/// sigma, hurst and theta0; everything else has the
/// [`ExperimentConfig::point_impact`] default.
pub fn parse_config_str(text: &str) -> Result<ExperimentConfig> {
    let mut seen: HashMap<&str, (String, usize)> = HashMap::new();
    for (idx, raw) in text.lines().enumerate() {
        let lineno = idx + 1;
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (key, value) = line.split_once('=').ok_or(Error::Parse {
            line: lineno,
            message: format!("expected key = value, got {line:?}"),
        })?;
        let key = key.trim();
        let known = [
            "scenario", "n", "sigma", "hurst", "theta0", "alpha0", "beta0", "grid_size",
            "outer_reps", "methods", "boot_b", "level", "weight", "seed",
        ];
        let key = *known.iter().find(|k| **k == key).ok_or(Error::Parse {
            line: lineno,
            message: format!("unknown key {key:?}"),
        })?;
        if seen.insert(key, (value.trim().to_string(), lineno)).is_some() {
            return Err(Error::Parse {
                line: lineno,
                message: format!("key {key:?} given twice"),
            });
        }
    }

    fn num<T: std::str::FromStr>(entry: Option<&(String, usize)>, key: &str) -> Result<Option<T>> {
        match entry {
            None => Ok(None),
            Some((v, line)) => v.parse::<T>().map(Some).map_err(|_| Error::Parse {
                line: *line,
                message: format!("bad value {v:?} for {key}"),
            }),
        }
    }
    fn required<T>(v: Option<T>, key: &str) -> Result<T> {
        v.ok_or_else(|| Error::InvalidParameter(format!("config is missing required key {key:?}")))
    }

    let mut cfg = ExperimentConfig::point_impact(
        required(num::<usize>(seen.get("n"), "n")?, "n")?,
        required(num::<f64>(seen.get("sigma"), "sigma")?, "sigma")?,
        required(num::<f64>(seen.get("hurst"), "hurst")?, "hurst")?,
        required(num::<f64>(seen.get("theta0"), "theta0")?, "theta0")?,
    );
    if let Some((v, _)) = seen.get("scenario") {
        cfg.scenario = Scenario::from_name(v)?;
    }
    if let Some(v) = num::<f64>(seen.get("alpha0"), "alpha0")? {
        cfg.alpha0 = v;
    }
    if let Some(v) = num::<f64>(seen.get("beta0"), "beta0")? {
        cfg.beta0 = v;
    }
    if let Some(v) = num::<usize>(seen.get("grid_size"), "grid_size")? {
        cfg.grid_size = v;
    }
    if let Some(v) = num::<usize>(seen.get("outer_reps"), "outer_reps")? {
        cfg.outer_reps = v;
    }
    if let Some((v, _)) = seen.get("methods") {
        cfg.methods = v
            .split(',')
            .map(Method::from_name)
            .collect::<Result<Vec<_>>>()?;
    }
    if let Some(v) = num::<usize>(seen.get("boot_b"), "boot_b")? {
        cfg.boot_b = v;
    }
    if let Some(v) = num::<f64>(seen.get("level"), "level")? {
        cfg.level = v;
    }
    if let Some((v, _)) = seen.get("weight") {
        cfg.weight = Some(parse_weight_spec(v)?);
    }
    if let Some(v) = num::<u64>(seen.get("seed"), "seed")? {
        cfg.seed = v;
    }
    cfg.validate()?;
    Ok(cfg)
}
