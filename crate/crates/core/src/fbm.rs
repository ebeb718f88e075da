//! Exact simulation of fractional Brownian motion (fBm) on a grid.
//!
//! Covariance: Cov(X(s), X(t)) = (|s|^2H + |t|^2H - |s-t|^2H) / 2 with
//! roughness index H in (0, 1]. Two samplers share one distributional
//! contract:
//!
//! - [`sample_cholesky`] factors the dense covariance and works on any
//!   grid. The point t = 0 is pinned (X(0) = 0, a zero-variance row), so
//!   the factorization runs on the remaining points.
//! - [`sample_circulant`] embeds the stationary increment sequence in a
//!   circulant matrix diagonalized by the FFT; O(m log m) per path on
//!   uniform grids aligned with the origin. It falls back to the dense
//!   factorization (recorded in provenance) when the embedding does not
//!   apply or is not nonnegative definite.
//!
//! H = 1 is the degenerate random line X(t) = t Z and is sampled as such.
//!
//! Sampling is a pure function of (spec, grid, n, seed): each trajectory
//! runs on its own derived substream, so output is identical at any
//! thread count.

use std::sync::Arc;

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use rustfft::{num_complex::Complex, Fft, FftPlanner};
use serde::{Deserialize, Serialize};

use crate::csvio;
use crate::error::{Error, Result};
use crate::grid::Grid;
use crate::rng::{label, substream};

/// Relative tolerance on negative circulant eigenvalues before the
/// embedding is declared unusable and sampling falls back to Cholesky.
const NEG_EIGEN_RTOL: f64 = 1e-8;

/// Relative tolerance (in units of the grid spacing) for deciding that a
/// uniform grid is aligned with the origin.
const ALIGNMENT_RTOL: f64 = 1e-9;

/// Diagonal jitter applied once, relative to mean diagonal mass, when the
/// covariance factorization hits a nonpositive leading minor.
const JITTER_REL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FbmSpec {
    hurst: f64,
}

impl FbmSpec {
    pub fn new(hurst: f64) -> Result<Self> {
        if !hurst.is_finite() || hurst <= 0.0 || hurst > 1.0 {
            return Err(Error::InvalidHurst(hurst));
        }
        Ok(FbmSpec { hurst })
    }

    pub fn hurst(&self) -> f64 {
        self.hurst
    }

    /// True for H = 1, where the process is the random line t Z.
    pub fn is_degenerate_line(&self) -> bool {
        self.hurst == 1.0
    }

    /// Cov(X(s), X(t)) = (|s|^2H + |t|^2H - |s-t|^2H) / 2.
    pub fn covariance(&self, s: f64, t: f64) -> f64 {
        let h2 = 2.0 * self.hurst;
        0.5 * (s.abs().powf(h2) + t.abs().powf(h2) - (s - t).abs().powf(h2))
    }
}

/// How a trajectory set was actually produced.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SampleMethod {
    Cholesky,
    Circulant,
    /// A circulant sample was requested but the embedding was unusable
    /// (misaligned grid or negative eigenvalues); dense path was used.
    CholeskyFallback,
    /// H = 1 random line.
    DegenerateLine,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub hurst: f64,
    pub seed: u64,
    pub method: SampleMethod,
}

/// n trajectories observed on a common grid, stored row-major.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "TrajectorySetRepr", into = "TrajectorySetRepr")]
pub struct TrajectorySet {
    grid: Grid,
    n_subjects: usize,
    data: Vec<f64>,
    provenance: Option<Provenance>,
}

impl TrajectorySet {
    pub fn from_rows(
        grid: Grid,
        rows: Vec<Vec<f64>>,
        provenance: Option<Provenance>,
    ) -> Result<Self> {
        if rows.is_empty() {
            return Err(Error::TooFewSubjects { have: 0, need: 1 });
        }
        let m = grid.len();
        let mut data = Vec::with_capacity(rows.len() * m);
        for (i, row) in rows.iter().enumerate() {
            if row.len() != m {
                return Err(Error::Parse {
                    line: i + 1,
                    message: format!("trajectory has {} values, grid has {m}", row.len()),
                });
            }
            if row.iter().any(|v| !v.is_finite()) {
                return Err(Error::Parse {
                    line: i + 1,
                    message: "trajectory contains a non-finite value".into(),
                });
            }
            data.extend_from_slice(row);
        }
        Ok(TrajectorySet {
            grid,
            n_subjects: rows.len(),
            data,
            provenance,
        })
    }

    fn from_flat(grid: Grid, n_subjects: usize, data: Vec<f64>, provenance: Provenance) -> Self {
        debug_assert_eq!(data.len(), n_subjects * grid.len());
        TrajectorySet {
            grid,
            n_subjects,
            data,
            provenance: Some(provenance),
        }
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn n_subjects(&self) -> usize {
        self.n_subjects
    }

    pub fn n_points(&self) -> usize {
        self.grid.len()
    }

    pub fn row(&self, i: usize) -> &[f64] {
        let m = self.grid.len();
        &self.data[i * m..(i + 1) * m]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        self.data.chunks_exact(self.grid.len())
    }

    pub fn value(&self, subject: usize, point: usize) -> f64 {
        self.data[subject * self.grid.len() + point]
    }

    pub fn column(&self, point: usize) -> Vec<f64> {
        (0..self.n_subjects).map(|i| self.value(i, point)).collect()
    }

    pub fn provenance(&self) -> Option<&Provenance> {
        self.provenance.as_ref()
    }

    /// Add `shift[j]` to every trajectory at grid point j (a mean
    /// function tabulated on the grid). Provenance still describes the
    /// underlying zero-mean sample.
    pub fn translate_rows(&mut self, shift: &[f64]) -> Result<()> {
        if shift.len() != self.grid.len() {
            return Err(Error::InvalidParameter(format!(
                "mean function has {} values, grid has {}",
                shift.len(),
                self.grid.len()
            )));
        }
        if shift.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidParameter(
                "mean function contains a non-finite value".into(),
            ));
        }
        let m = self.grid.len();
        for row in self.data.chunks_exact_mut(m) {
            for (v, s) in row.iter_mut().zip(shift) {
                *v += s;
            }
        }
        Ok(())
    }

    /// Multiply every value by `factor` (amplitude calibration).
    pub fn scale_rows(&mut self, factor: f64) {
        for v in &mut self.data {
            *v *= factor;
        }
    }

    pub fn set_provenance(&mut self, provenance: Option<Provenance>) {
        self.provenance = provenance;
    }

    /// CSV with header `t,<grid points>` and one row per trajectory,
    /// each prefixed by its subject index.
    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        out.push('t');
        for p in self.grid.points() {
            use std::fmt::Write;
            write!(out, ",{p}").unwrap();
        }
        out.push('\n');
        for (i, row) in self.rows().enumerate() {
            use std::fmt::Write;
            write!(out, "{i}").unwrap();
            for v in row {
                write!(out, ",{v}").unwrap();
            }
            out.push('\n');
        }
        out
    }

    /// Parse the [`to_csv`](Self::to_csv) format. Provenance is not part
    /// of the CSV; attach it separately if known.
    pub fn from_csv_str(text: &str) -> Result<Self> {
        let mut lines = text.lines().enumerate();
        let (_, header) = lines.next().ok_or(Error::Parse {
            line: 1,
            message: "empty trajectory file".into(),
        })?;
        let mut fields = header.split(',');
        let tag = fields.next().unwrap_or("");
        if tag.trim() != "t" {
            return Err(Error::Parse {
                line: 1,
                message: format!("header must start with 't', got {tag:?}"),
            });
        }
        let points = fields
            .map(|f| csvio::parse_f64(f, 1))
            .collect::<Result<Vec<f64>>>()?;
        let grid = Grid::new(points)?;
        let m = grid.len();
        let mut data = Vec::new();
        let mut n = 0usize;
        for (idx, line) in lines {
            if line.trim().is_empty() {
                continue;
            }
            let lineno = idx + 1;
            let mut fields = line.split(',');
            csvio::parse_usize(fields.next().unwrap_or(""), lineno)?;
            let before = data.len();
            for f in fields {
                data.push(csvio::parse_f64(f, lineno)?);
            }
            if data.len() - before != m {
                return Err(Error::Parse {
                    line: lineno,
                    message: format!(
                        "row has {} values, grid has {m}",
                        data.len() - before
                    ),
                });
            }
            n += 1;
        }
        if n == 0 {
            return Err(Error::TooFewSubjects { have: 0, need: 1 });
        }
        Ok(TrajectorySet {
            grid,
            n_subjects: n,
            data,
            provenance: None,
        })
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }
}

#[derive(Serialize, Deserialize)]
struct TrajectorySetRepr {
    grid: Grid,
    provenance: Option<Provenance>,
    trajectories: Vec<Vec<f64>>,
}

impl TryFrom<TrajectorySetRepr> for TrajectorySet {
    type Error = Error;

    fn try_from(repr: TrajectorySetRepr) -> Result<Self> {
        TrajectorySet::from_rows(repr.grid, repr.trajectories, repr.provenance)
    }
}

impl From<TrajectorySet> for TrajectorySetRepr {
    fn from(ts: TrajectorySet) -> Self {
        TrajectorySetRepr {
            trajectories: ts.rows().map(<[f64]>::to_vec).collect(),
            grid: ts.grid,
            provenance: ts.provenance,
        }
    }
}

/// Full covariance matrix of the process on `grid`, row-major.
pub fn covariance_matrix(spec: &FbmSpec, grid: &Grid) -> Vec<f64> {
    let pts = grid.points();
    let m = pts.len();
    let mut c = vec![0.0; m * m];
    for i in 0..m {
        for j in 0..=i {
            let v = spec.covariance(pts[i], pts[j]);
            c[i * m + j] = v;
            c[j * m + i] = v;
        }
    }
    c
}

/// Max absolute entrywise error |L L' - C| of the pinned Cholesky
/// factorization against the target covariance on `grid`.
pub fn cholesky_reconstruction_error(spec: &FbmSpec, grid: &Grid) -> Result<f64> {
    let pinned = PinnedCholesky::new(spec, grid)?;
    let m = grid.len();
    let target = covariance_matrix(spec, grid);
    let mut err: f64 = 0.0;
    // reconstruct including the pinned zero row/column, which is exact
    let mut full = vec![0.0; m * m];
    let map = &pinned.active; // active[i] = index into factored block
    for i in 0..m {
        for j in 0..=i {
            let v = match (map[i], map[j]) {
                (Some(a), Some(b)) => pinned.factor.reconstruct_entry(a, b),
                _ => 0.0,
            };
            full[i * m + j] = v;
            full[j * m + i] = v;
        }
    }
    for (a, b) in full.iter().zip(&target) {
        err = err.max((a - b).abs());
    }
    Ok(err)
}

// ---------------------------------------------------------------------------
// Dense Cholesky path

pub(crate) struct CholeskyFactor {
    dim: usize,
    /// Packed lower triangle, row-major: l[i*(i+1)/2 + j], j <= i.
    l: Vec<f64>,
}

impl CholeskyFactor {
    /// Factor a symmetric matrix given row-major. On a nonpositive
    /// leading minor, retries once with diagonal jitter relative to the
    /// trace, then reports the offending minor order.
    pub(crate) fn new(cov: &[f64], dim: usize) -> Result<Self> {
        debug_assert_eq!(cov.len(), dim * dim);
        match Self::try_factor(cov, dim, 0.0) {
            Ok(l) => Ok(CholeskyFactor { dim, l }),
            Err(_) => {
                let trace: f64 = (0..dim).map(|i| cov[i * dim + i]).sum();
                let jitter = JITTER_REL * trace / dim as f64;
                match Self::try_factor(cov, dim, jitter) {
                    Ok(l) => Ok(CholeskyFactor { dim, l }),
                    Err(order) => Err(Error::NotPositiveDefinite { order }),
                }
            }
        }
    }

    fn try_factor(cov: &[f64], dim: usize, jitter: f64) -> std::result::Result<Vec<f64>, usize> {
        let mut l = vec![0.0; dim * (dim + 1) / 2];
        for i in 0..dim {
            for j in 0..=i {
                let mut sum = cov[i * dim + j];
                if i == j {
                    sum += jitter;
                }
                let (ri, rj) = (i * (i + 1) / 2, j * (j + 1) / 2);
                for k in 0..j {
                    sum -= l[ri + k] * l[rj + k];
                }
                if i == j {
                    if sum <= 0.0 {
                        return Err(i + 1);
                    }
                    l[ri + j] = sum.sqrt();
                } else {
                    l[ri + j] = sum / l[rj + j];
                }
            }
        }
        Ok(l)
    }

    pub(crate) fn dim(&self) -> usize {
        self.dim
    }

    /// out = L z.
    pub(crate) fn apply(&self, z: &[f64], out: &mut [f64]) {
        debug_assert_eq!(z.len(), self.dim);
        for i in 0..self.dim {
            let ri = i * (i + 1) / 2;
            let mut acc = 0.0;
            for k in 0..=i {
                acc += self.l[ri + k] * z[k];
            }
            out[i] = acc;
        }
    }

    /// (L L')[i, j].
    fn reconstruct_entry(&self, i: usize, j: usize) -> f64 {
        let (a, b) = if i >= j { (i, j) } else { (j, i) };
        let (ra, rb) = (a * (a + 1) / 2, b * (b + 1) / 2);
        (0..=b).map(|k| self.l[ra + k] * self.l[rb + k]).sum()
    }
}

/// Cholesky factor of the covariance with the t = 0 point (if present)
/// pinned to the exact value 0 rather than factored.
pub(crate) struct PinnedCholesky {
    factor: CholeskyFactor,
    /// For each grid index, its position in the factored block, or None
    /// for the pinned zero.
    active: Vec<Option<usize>>,
    m: usize,
}

impl PinnedCholesky {
    pub(crate) fn new(spec: &FbmSpec, grid: &Grid) -> Result<Self> {
        let pts = grid.points();
        let m = pts.len();
        let zero = grid.zero_index();
        let keep: Vec<usize> = (0..m).filter(|&i| Some(i) != zero).collect();
        let dim = keep.len();
        let mut cov = vec![0.0; dim * dim];
        for (a, &i) in keep.iter().enumerate() {
            for (b, &j) in keep.iter().enumerate().take(a + 1) {
                let v = spec.covariance(pts[i], pts[j]);
                cov[a * dim + b] = v;
                cov[b * dim + a] = v;
            }
        }
        let factor = CholeskyFactor::new(&cov, dim)?;
        let mut active = vec![None; m];
        for (a, &i) in keep.iter().enumerate() {
            active[i] = Some(a);
        }
        Ok(PinnedCholesky { factor, active, m })
    }

    pub(crate) fn sample_into(&self, rng: &mut ChaCha8Rng, scratch: &mut PathScratch, out: &mut [f64]) {
        let dim = self.factor.dim();
        scratch.z.resize(dim, 0.0);
        scratch.y.resize(dim, 0.0);
        for z in scratch.z.iter_mut() {
            *z = rng.sample(StandardNormal);
        }
        self.factor.apply(&scratch.z, &mut scratch.y);
        let mut next = 0usize;
        for i in 0..self.m {
            out[i] = match self.active[i] {
                Some(_) => {
                    let v = scratch.y[next];
                    next += 1;
                    v
                }
                None => 0.0,
            };
        }
    }
}

// ---------------------------------------------------------------------------
// Circulant embedding path

/// Exact sampler for the stationary Gaussian increment sequence of fBm on
/// a uniform lattice, by circulant embedding of its covariance.
pub(crate) struct CirculantFgn {
    n_increments: usize,
    m_embed: usize,
    /// Scale per frequency: sqrt(eigenvalue / m_embed), with the extra
    /// 1/sqrt(2) for paired (complex) frequencies folded in.
    scale: Vec<f64>,
    fft: Arc<dyn Fft<f64>>,
}

impl CirculantFgn {
    /// None when the embedding has negative eigenvalues beyond tolerance.
    pub(crate) fn new(hurst: f64, n_increments: usize, spacing: f64) -> Result<Option<Self>> {
        assert!(n_increments >= 1);
        let n = n_increments;
        let m = 2 * n;
        let h2 = 2.0 * hurst;
        let var = spacing.powf(h2);
        // increment autocovariance at lag k
        let gamma = |k: usize| -> f64 {
            if k == 0 {
                var
            } else {
                let k = k as f64;
                0.5 * var * ((k + 1.0).powf(h2) - 2.0 * k.powf(h2) + (k - 1.0).powf(h2))
            }
        };
        let mut planner = FftPlanner::new();
        let fft = planner.plan_fft_forward(m);
        let mut buf: Vec<Complex<f64>> = (0..m)
            .map(|j| {
                let lag = if j <= n { j } else { m - j };
                Complex::new(gamma(lag), 0.0)
            })
            .collect();
        let mut work = vec![Complex::new(0.0, 0.0); fft.get_inplace_scratch_len()];
        fft.process_with_scratch(&mut buf, &mut work);
        let max_eig = buf.iter().map(|c| c.re).fold(f64::MIN, f64::max);
        let min_eig = buf.iter().map(|c| c.re).fold(f64::MAX, f64::min);
        if min_eig < -NEG_EIGEN_RTOL * max_eig.max(0.0) {
            return Ok(None);
        }
        let half = std::f64::consts::FRAC_1_SQRT_2;
        let scale: Vec<f64> = buf
            .iter()
            .enumerate()
            .map(|(j, c)| {
                let lambda = c.re.max(0.0);
                let s = (lambda / m as f64).sqrt();
                if j == 0 || j == n {
                    s
                } else {
                    s * half
                }
            })
            .collect();
        Ok(Some(CirculantFgn {
            n_increments: n,
            m_embed: m,
            scale,
            fft,
        }))
    }

    fn fft_scratch_len(&self) -> usize {
        self.fft.get_inplace_scratch_len()
    }

    /// Draw one increment sequence into `out[..n_increments]`.
    ///
    /// Gaussian consumption order is fixed (frequencies 0..=n), so a
    /// given substream always yields the same sequence.
    pub(crate) fn sample_into(
        &self,
        rng: &mut ChaCha8Rng,
        scratch: &mut PathScratch,
        out: &mut [f64],
    ) {
        let n = self.n_increments;
        let m = self.m_embed;
        scratch.freq.resize(m, Complex::new(0.0, 0.0));
        scratch
            .fft_work
            .resize(self.fft_scratch_len(), Complex::new(0.0, 0.0));
        let freq = &mut scratch.freq;
        let z0: f64 = rng.sample(StandardNormal);
        freq[0] = Complex::new(self.scale[0] * z0, 0.0);
        for j in 1..n {
            let a: f64 = rng.sample(StandardNormal);
            let b: f64 = rng.sample(StandardNormal);
            let v = Complex::new(self.scale[j] * a, self.scale[j] * b);
            freq[j] = v;
            freq[m - j] = v.conj();
        }
        let zn: f64 = rng.sample(StandardNormal);
        freq[n] = Complex::new(self.scale[n] * zn, 0.0);
        self.fft.process_with_scratch(freq, &mut scratch.fft_work);
        for (o, c) in out[..n].iter_mut().zip(freq.iter()) {
            *o = c.re;
        }
    }
}

/// Layout of a circulant-backed fBm sample on a uniform grid: the lattice
/// is extended to the origin when the grid starts at a positive multiple
/// of the spacing, or anchored at the in-grid zero otherwise.
#[derive(Debug, Clone, Copy)]
pub(crate) enum CirculantLayout {
    /// Zero is on the grid at this index; cumulative sums are re-anchored
    /// by subtracting the value there.
    PinInside { zero_index: usize },
    /// Grid starts at lead * spacing > 0; `lead` extra increments are
    /// simulated before the first grid point.
    LeadIn { lead: usize },
}

/// Uniform-grid lattice check: is the grid start a whole number of
/// spacings from the origin, with zero reachable?
fn circulant_layout(grid: &Grid) -> Option<(CirculantLayout, usize)> {
    let spacing = grid.resolution()?;
    let start = grid.start();
    let r = start / spacing;
    let k = r.round();
    if (r - k).abs() > ALIGNMENT_RTOL * r.abs().max(1.0) {
        return None;
    }
    let k = k as i64;
    let m = grid.len();
    if k > 0 {
        let lead = k as usize;
        Some((CirculantLayout::LeadIn { lead }, lead + m - 1))
    } else {
        let zero_index = (-k) as usize;
        if zero_index >= m {
            return None; // grid entirely left of the origin and not touching it
        }
        Some((CirculantLayout::PinInside { zero_index }, m - 1))
    }
}

// ---------------------------------------------------------------------------
// Unified path engine

/// Scratch space reused across draws; contents are overwritten per draw.
pub(crate) struct PathScratch {
    z: Vec<f64>,
    y: Vec<f64>,
    incr: Vec<f64>,
    freq: Vec<Complex<f64>>,
    fft_work: Vec<Complex<f64>>,
}

impl PathScratch {
    pub(crate) fn new() -> Self {
        PathScratch {
            z: Vec::new(),
            y: Vec::new(),
            incr: Vec::new(),
            freq: Vec::new(),
            fft_work: Vec::new(),
        }
    }
}

/// One-time setup for repeated path draws on a fixed (spec, grid).
pub(crate) enum PathEngine {
    Line {
        ts: Vec<f64>,
    },
    Circulant {
        fgn: CirculantFgn,
        layout: CirculantLayout,
        m: usize,
    },
    Cholesky {
        pinned: PinnedCholesky,
    },
}

impl PathEngine {
    /// Build an exact engine for this grid. With `prefer_circulant` the
    /// returned method records whether the embedding had to fall back.
    pub(crate) fn build(spec: &FbmSpec, grid: &Grid, prefer_circulant: bool) -> Result<(Self, SampleMethod)> {
        if spec.is_degenerate_line() {
            return Ok((
                PathEngine::Line {
                    ts: grid.points().to_vec(),
                },
                SampleMethod::DegenerateLine,
            ));
        }
        if prefer_circulant && grid.is_uniform() {
            if let Some((layout, n_incr)) = circulant_layout(grid) {
                let spacing = grid.resolution().unwrap();
                if let Some(fgn) = CirculantFgn::new(spec.hurst(), n_incr, spacing)? {
                    return Ok((
                        PathEngine::Circulant {
                            fgn,
                            layout,
                            m: grid.len(),
                        },
                        SampleMethod::Circulant,
                    ));
                }
            }
            let pinned = PinnedCholesky::new(spec, grid)?;
            return Ok((PathEngine::Cholesky { pinned }, SampleMethod::CholeskyFallback));
        }
        let pinned = PinnedCholesky::new(spec, grid)?;
        Ok((PathEngine::Cholesky { pinned }, SampleMethod::Cholesky))
    }

    pub(crate) fn sample_into(
        &self,
        rng: &mut ChaCha8Rng,
        scratch: &mut PathScratch,
        out: &mut [f64],
    ) {
        match self {
            PathEngine::Line { ts } => {
                let z: f64 = rng.sample(StandardNormal);
                for (o, t) in out.iter_mut().zip(ts) {
                    *o = t * z;
                }
            }
            PathEngine::Circulant { fgn, layout, m } => {
                let n = fgn.n_increments;
                scratch.incr.resize(n, 0.0);
                // split borrow: increments buffer vs the rest of scratch
                let mut incr = std::mem::take(&mut scratch.incr);
                fgn.sample_into(rng, scratch, &mut incr);
                match *layout {
                    CirculantLayout::PinInside { zero_index } => {
                        let mut acc = 0.0;
                        out[0] = 0.0;
                        for i in 1..*m {
                            acc += incr[i - 1];
                            out[i] = acc;
                        }
                        let anchor = out[zero_index];
                        if zero_index > 0 {
                            for v in out[..*m].iter_mut() {
                                *v -= anchor;
                            }
                            out[zero_index] = 0.0;
                        }
                    }
                    CirculantLayout::LeadIn { lead } => {
                        // partial sums from the origin; grid starts `lead`
                        // increments in
                        let mut acc = 0.0;
                        for (j, inc) in incr.iter().enumerate() {
                            acc += inc;
                            let step = j + 1;
                            if step >= lead {
                                out[step - lead] = acc;
                            }
                        }
                    }
                }
                scratch.incr = incr;
            }
            PathEngine::Cholesky { pinned } => {
                pinned.sample_into(rng, scratch, out);
            }
        }
    }

}

// ---------------------------------------------------------------------------
// Public samplers

fn sample_with_engine(
    engine: &PathEngine,
    method: SampleMethod,
    spec: &FbmSpec,
    grid: &Grid,
    n_subjects: usize,
    seed: u64,
) -> Result<TrajectorySet> {
    if n_subjects == 0 {
        return Err(Error::TooFewSubjects { have: 0, need: 1 });
    }
    let m = grid.len();
    let mut data = vec![0.0; n_subjects * m];
    data.par_chunks_mut(m).enumerate().for_each_init(
        PathScratch::new,
        |scratch, (i, row)| {
            let mut rng = substream(seed, &[label::FBM_PATH, i as u64]);
            engine.sample_into(&mut rng, scratch, row);
        },
    );
    Ok(TrajectorySet::from_flat(
        grid.clone(),
        n_subjects,
        data,
        Provenance {
            hurst: spec.hurst(),
            seed,
            method,
        },
    ))
}

/// Sample by dense Cholesky factorization; exact on any grid.
pub fn sample_cholesky(
    spec: &FbmSpec,
    grid: &Grid,
    n_subjects: usize,
    seed: u64,
) -> Result<TrajectorySet> {
    let (engine, method) = PathEngine::build(spec, grid, false)?;
    sample_with_engine(&engine, method, spec, grid, n_subjects, seed)
}

/// Sample by circulant embedding on a uniform grid; same law as
/// [`sample_cholesky`]. Falls back to the dense factorization (recorded
/// in provenance) when the embedding is unavailable.
pub fn sample_circulant(
    spec: &FbmSpec,
    grid: &Grid,
    n_subjects: usize,
    seed: u64,
) -> Result<TrajectorySet> {
    if !grid.is_uniform() {
        return Err(Error::GridNotUniform);
    }
    let (engine, method) = PathEngine::build(spec, grid, true)?;
    sample_with_engine(&engine, method, spec, grid, n_subjects, seed)
}

/// Sample with the fastest exact method for this grid.
pub fn sample(spec: &FbmSpec, grid: &Grid, n_subjects: usize, seed: u64) -> Result<TrajectorySet> {
    let (engine, method) = PathEngine::build(spec, grid, grid.is_uniform())?;
    sample_with_engine(&engine, method, spec, grid, n_subjects, seed)
}

// ---------------------------------------------------------------------------
// Roughness estimation

/// Estimate the roughness index H from observed trajectories by
/// second-order discrete variations: the log2-ratio of pooled quadratic
/// variations of second differences at lags 2 and 1 equals 2H in
/// expectation. Result is clipped into (0, 1]; an exactly linear set of
/// trajectories yields 1.0. Diagnostic only: inference never reads it.
pub fn estimate_hurst(ts: &TrajectorySet) -> Result<f64> {
    let grid = ts.grid();
    if !grid.is_uniform() {
        return Err(Error::GridNotUniform);
    }
    if grid.len() < 8 {
        return Err(Error::GridTooShort {
            len: grid.len(),
            min: 8,
        });
    }
    let mut v1 = 0.0;
    let mut c1 = 0usize;
    let mut v2 = 0.0;
    let mut c2 = 0usize;
    let mut first_diff_sq = 0.0;
    for row in ts.rows() {
        let m = row.len();
        for j in 0..m - 1 {
            let d = row[j + 1] - row[j];
            first_diff_sq += d * d;
        }
        for j in 0..m - 2 {
            let d = row[j + 2] - 2.0 * row[j + 1] + row[j];
            v1 += d * d;
            c1 += 1;
        }
        for j in 0..m - 4 {
            let d = row[j + 4] - 2.0 * row[j + 2] + row[j];
            v2 += d * d;
            c2 += 1;
        }
    }
    if first_diff_sq == 0.0 {
        return Err(Error::DegenerateTrajectory);
    }
    let v1 = v1 / c1 as f64;
    let v2 = v2 / c2 as f64;
    if v1 == 0.0 {
        // nonconstant with vanishing second differences: exactly linear
        return Ok(1.0);
    }
    let h = 0.5 * (v2 / v1).log2();
    Ok(h.clamp(1e-6, 1.0))
}
