//! Bring externally recorded trajectories into the pipeline, either
//! paired with observed responses or with responses synthesized from a
//! chosen point-impact truth (the route for calibration studies on real
//! measurement grids).

use point_impact::error::{Error, Result};
use point_impact::fbm::TrajectorySet;
use point_impact::scenarios::{gen_point_impact, Dataset, PointImpactParams};

/// What to pair the trajectories with.
pub enum ResponseSource<'a> {
    /// Observed responses, one number per line; an optional leading `y`
    /// header line is accepted.
    Observed(&'a str),
    /// Synthesize Y = alpha0 + beta0 X(theta0) + noise on the ingested
    /// paths with the given noise seed.
    Synthesized(PointImpactParams, u64),
}

pub fn ingest(trajectory_csv: &str, responses: ResponseSource) -> Result<Dataset> {
    let paths = TrajectorySet::from_csv_str(trajectory_csv)?;
    match responses {
        ResponseSource::Observed(text) => {
            let mut ys = Vec::new();
            for (idx, raw) in text.lines().enumerate() {
                let line = raw.trim();
                if line.is_empty() || (idx == 0 && line == "y") {
                    continue;
                }
                ys.push(line.parse::<f64>().map_err(|_| Error::Parse {
                    line: idx + 1,
                    message: format!("bad response {line:?}"),
                })?);
            }
            Dataset::new(paths, ys)
        }
        ResponseSource::Synthesized(params, seed) => gen_point_impact(&params, paths, seed),
    }
}
