//! Multifractal detrended fluctuation analysis.
//!
//! The profile is cut into `2 * N_s` non-overlapping segments of length `s`
//! (taken from both ends so no data is discarded), each segment is detrended
//! by a least-squares polynomial of order `m`, and the `q`-th order
//! fluctuation function
//!
//! ```text
//! F_q(s) = { 1/(2 N_s) * sum_p [F^2(p, s)]^(q/2) }^(1/q)      q != 0
//! F_0(s) = exp{ 1/(4 N_s) * sum_p ln F^2(p, s) }
//! ```
//!
//! is evaluated over a `(q, s)` grid. The slopes of `ln F_q(s)` against
//! `ln s` give the generalized Hurst exponents `h(q)`, and from them the
//! mass exponents `tau(q) = q h(q) - 1`.
//!
//! [`partition_tau`] estimates `tau(q)` directly from box probabilities of a
//! non-negative measure and is kept independent of the detrending path so
//! the two can be checked against each other.

use std::fmt;
use std::str::FromStr;

use log::warn;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::regression::{fit_line, SegmentBasis};
use crate::series::{Profile, TimeSeries};

/// Floor applied to zero-variance segments before taking powers or logs.
pub const VARIANCE_FLOOR: f64 = 1e-300;

/// Relative level below which a segment variance counts as zero.
const ZERO_VARIANCE_REL: f64 = 1e-24;

/// Default q grid: -10 to 10 in steps of 0.5.
pub fn default_q_values() -> Vec<f64> {
    q_range(-10.0, 10.0, 0.5).expect("static q range is valid")
}

/// Evenly spaced q values from `min` to `max` inclusive.
pub fn q_range(min: f64, max: f64, step: f64) -> Result<Vec<f64>> {
    if !(step > 0.0) || !(max >= min) || !min.is_finite() || !max.is_finite() {
        return Err(Error::InvalidGrid(format!(
            "bad q range {min}..{max} step {step}"
        )));
    }
    let count = ((max - min) / step + 1e-9).floor() as usize + 1;
    Ok((0..count)
        .map(|i| {
            let q = min + i as f64 * step;
            if q.abs() < step * 1e-9 {
                0.0
            } else {
                q
            }
        })
        .collect())
}

/// Up to `count` logarithmically spaced integer scales in `[min, max]`,
/// deduplicated after rounding.
pub fn log_scales(min: usize, max: usize, count: usize) -> Vec<usize> {
    if min == 0 || max < min || count == 0 {
        return Vec::new();
    }
    if count == 1 || max == min {
        return vec![min];
    }
    let (lo, hi) = ((min as f64).ln(), (max as f64).ln());
    let mut out: Vec<usize> = (0..count)
        .map(|i| {
            let t = i as f64 / (count - 1) as f64;
            ((lo + t * (hi - lo)).exp().round() as usize).clamp(min, max)
        })
        .collect();
    out.dedup();
    out
}

/// Powers of two in `[min, max]`.
pub fn dyadic_scales(min: usize, max: usize) -> Vec<usize> {
    (0..usize::BITS)
        .map(|k| 1usize << k)
        .take_while(|&s| s <= max)
        .filter(|&s| s >= min)
        .collect()
}

/// How scales are placed between their bounds.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ScaleSpacing {
    /// About [`GridSpec::DEFAULT_SCALE_COUNT`] log-spaced integers.
    #[default]
    Log,
    /// Powers of two only.
    Dyadic,
}

impl ScaleSpacing {
    pub fn scales(self, min: usize, max: usize) -> Vec<usize> {
        match self {
            ScaleSpacing::Log => log_scales(min, max, GridSpec::DEFAULT_SCALE_COUNT),
            ScaleSpacing::Dyadic => dyadic_scales(min, max),
        }
    }
}

impl fmt::Display for ScaleSpacing {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ScaleSpacing::Log => "log",
            ScaleSpacing::Dyadic => "dyadic",
        })
    }
}

impl FromStr for ScaleSpacing {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "log" => Ok(ScaleSpacing::Log),
            "dyadic" => Ok(ScaleSpacing::Dyadic),
            _ => Err(Error::Config(format!(
                "unknown scale spacing `{s}` (expected log or dyadic)"
            ))),
        }
    }
}

/// Inclusive interval of scales, written `lo:hi`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScaleRange {
    pub lo: usize,
    pub hi: usize,
}

impl ScaleRange {
    pub fn new(lo: usize, hi: usize) -> Self {
        ScaleRange { lo, hi }
    }

    pub fn contains(&self, s: usize) -> bool {
        s >= self.lo && s <= self.hi
    }
}

impl fmt::Display for ScaleRange {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", self.lo, self.hi)
    }
}

impl FromStr for ScaleRange {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::Config(format!("expected `lo:hi` scale range, got `{s}`"));
        let (lo, hi) = s.split_once(':').ok_or_else(bad)?;
        let lo: usize = lo.trim().parse().map_err(|_| bad())?;
        let hi: usize = hi.trim().parse().map_err(|_| bad())?;
        if lo == 0 || hi < lo {
            return Err(bad());
        }
        Ok(ScaleRange { lo, hi })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub q_values: Vec<f64>,
    pub scales: Vec<usize>,
    pub detrend_order: usize,
}

impl GridSpec {
    pub const DEFAULT_SCALE_COUNT: usize = 30;

    /// Default q grid with ~30 log-spaced scales in `[max(6, m + 2), N / 5]`.
    pub fn default_for(n: usize, detrend_order: usize) -> Result<GridSpec> {
        let lo = 6.max(detrend_order + 2);
        GridSpec::with_scale_bounds(default_q_values(), lo, n / 5, detrend_order)
    }

    /// Log-spaced scales between the given bounds.
    pub fn with_scale_bounds(
        q_values: Vec<f64>,
        s_min: usize,
        s_max: usize,
        detrend_order: usize,
    ) -> Result<GridSpec> {
        GridSpec::with_spacing(q_values, s_min, s_max, detrend_order, ScaleSpacing::Log)
    }

    pub fn with_spacing(
        q_values: Vec<f64>,
        s_min: usize,
        s_max: usize,
        detrend_order: usize,
        spacing: ScaleSpacing,
    ) -> Result<GridSpec> {
        let scales = spacing.scales(s_min, s_max);
        if scales.is_empty() {
            return Err(Error::InvalidGrid(format!(
                "no {spacing} scales in {s_min}..{s_max}"
            )));
        }
        Ok(GridSpec {
            q_values,
            scales,
            detrend_order,
        })
    }

    /// Checks the grid against a series of length `n`.
    pub fn validate(&self, n: usize) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidGrid(m));
        if self.detrend_order == 0 {
            return bad("detrend order must be at least 1".into());
        }
        if self.q_values.is_empty() {
            return bad("empty q grid".into());
        }
        if let Some(q) = self.q_values.iter().find(|q| !q.is_finite()) {
            return bad(format!("non-finite q value {q}"));
        }
        if self.scales.is_empty() {
            return bad("empty scale grid".into());
        }
        if self.scales.windows(2).any(|w| w[1] <= w[0]) {
            return bad("scales must be strictly increasing".into());
        }
        let min_scale = self.detrend_order + 2;
        if let Some(&s) = self.scales.iter().find(|&&s| s < min_scale) {
            return bad(format!(
                "scale {s} below m + 2 = {min_scale} for detrend order {}",
                self.detrend_order
            ));
        }
        if let Some(&s) = self.scales.iter().find(|&&s| 4 * s > n) {
            return bad(format!("scale {s} exceeds N/4 for N = {n}"));
        }
        Ok(())
    }

    /// Index of `q` on the grid, if present.
    pub fn q_index(&self, q: f64) -> Option<usize> {
        self.q_values.iter().position(|&v| (v - q).abs() < 1e-9)
    }
}

/// Half-open index ranges of the `2 * N_s` segments: `N_s` from the start
/// followed by `N_s` from the end (the last segment first).
pub fn segment_ranges(n: usize, s: usize) -> Vec<std::ops::Range<usize>> {
    let ns = n.checked_div(s).unwrap_or(0);
    let front = (0..ns).map(|p| p * s..(p + 1) * s);
    let back = (0..ns).map(|p| n - (p + 1) * s..n - p * s);
    front.chain(back).collect()
}

/// Mean squared residual of an order-`m` polynomial fit in each segment.
pub fn segment_variances(prof: &Profile, s: usize, m: usize) -> Result<Vec<f64>> {
    let n = prof.len();
    if s < m + 2 {
        return Err(Error::InvalidGrid(format!(
            "scale {s} below m + 2 = {} for detrend order {m}",
            m + 2
        )));
    }
    if s > n {
        return Err(Error::ScaleTooLarge { scale: s, len: n });
    }
    let basis = SegmentBasis::new(s, m);
    Ok(segment_ranges(n, s)
        .into_iter()
        .map(|r| basis.mean_squared_residual(&prof.cumulative[r]))
        .collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DegenerateCell {
    pub q: f64,
    pub scale: usize,
    /// Number of zero-variance segments at this scale.
    pub zero_segments: usize,
}

/// `F_q(s)` over a grid. `values[i][j]` holds `q_values[i]`, `scales[j]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FluctuationSurface {
    pub grid: GridSpec,
    pub values: Vec<Vec<f64>>,
    /// `2 * N_s` for each scale.
    pub n_segments: Vec<usize>,
    /// Cells where floored zero-variance segments entered a `q <= 0` moment.
    pub degenerate: Vec<DegenerateCell>,
}

impl FluctuationSurface {
    pub fn get(&self, qi: usize, si: usize) -> f64 {
        self.values[qi][si]
    }

    /// `F_q(s)` across scales for one q index.
    pub fn row(&self, qi: usize) -> &[f64] {
        &self.values[qi]
    }

    pub fn is_flagged(&self, qi: usize, si: usize) -> bool {
        let q = self.grid.q_values[qi];
        let s = self.grid.scales[si];
        self.degenerate.iter().any(|c| c.q == q && c.scale == s)
    }
}

/// Generalized mean of segment variances for every q; `variances` must be
/// floored already.
fn fluctuation_column(variances: &[f64], q_values: &[f64]) -> Vec<f64> {
    let logs: Vec<f64> = variances.iter().map(|v| v.ln()).collect();
    let count = logs.len() as f64;
    let column: Vec<f64> = q_values
        .iter()
        .map(|&q| {
            if q == 0.0 {
                (0.5 * logs.iter().sum::<f64>() / count).exp()
            } else {
                // Log-sum-exp keeps large |q| from overflowing.
                let half = 0.5 * q;
                let peak = logs
                    .iter()
                    .map(|l| half * l)
                    .fold(f64::NEG_INFINITY, f64::max);
                let sum: f64 = logs.iter().map(|l| (half * l - peak).exp()).sum();
                ((peak + sum.ln() - count.ln()) / q).exp()
            }
        })
        .collect();
    // Generalized means are non-decreasing in q.
    debug_assert!(q_values
        .windows(2)
        .zip(column.windows(2))
        .all(|(q, f)| q[1] <= q[0] || f[0] <= f[1] * (1.0 + 1e-9)));
    column
}

/// Evaluates `F_q(s)` for every cell of the grid.
///
/// Scales are processed in parallel; each cell is summed in a fixed order,
/// so the result does not depend on the thread count.
pub fn fluctuation_surface(prof: &Profile, grid: &GridSpec) -> Result<FluctuationSurface> {
    let n = prof.len();
    grid.validate(n)?;
    let max_abs = prof.cumulative.iter().fold(0.0f64, |a, b| a.max(b.abs()));
    let zero_level = (max_abs * max_abs * ZERO_VARIANCE_REL).max(VARIANCE_FLOOR);

    let columns: Vec<Result<(Vec<f64>, usize, usize)>> = grid
        .scales
        .par_iter()
        .map(|&s| {
            let mut var = segment_variances(prof, s, grid.detrend_order)?;
            let mut zeros = 0;
            for v in var.iter_mut() {
                if *v <= zero_level {
                    zeros += 1;
                    *v = v.max(VARIANCE_FLOOR);
                }
            }
            if zeros == var.len() {
                return Err(Error::DegenerateSurface { scale: s });
            }
            Ok((fluctuation_column(&var, &grid.q_values), var.len(), zeros))
        })
        .collect();

    let mut values = vec![Vec::with_capacity(grid.scales.len()); grid.q_values.len()];
    let mut n_segments = Vec::with_capacity(grid.scales.len());
    let mut degenerate = Vec::new();
    for (col, &s) in columns.into_iter().zip(&grid.scales) {
        let (col, segs, zeros) = col?;
        for (row, v) in values.iter_mut().zip(col) {
            row.push(v);
        }
        n_segments.push(segs);
        if zeros > 0 {
            degenerate.extend(grid.q_values.iter().filter(|&&q| q <= 0.0).map(|&q| {
                DegenerateCell {
                    q,
                    scale: s,
                    zero_segments: zeros,
                }
            }));
        }
    }
    if !degenerate.is_empty() {
        let mut scales: Vec<usize> = degenerate.iter().map(|c| c.scale).collect();
        scales.dedup();
        warn!(
            "zero-variance segments floored at {VARIANCE_FLOOR:e}; q <= 0 cells flagged at scales {scales:?}"
        );
    }
    Ok(FluctuationSurface {
        grid: grid.clone(),
        values,
        n_segments,
        degenerate,
    })
}

/// Generalized Hurst exponents with derived exponents.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HurstSpectrum {
    pub q_values: Vec<f64>,
    pub h: Vec<f64>,
    pub stderr: Vec<f64>,
    pub fit_range: ScaleRange,
    /// Scales of the surface that fell inside `fit_range`.
    pub scales_used: Vec<usize>,
    /// `q h(q) - 1`.
    pub tau: Vec<f64>,
    /// `2 - 2 h(2)`; absent when q = 2 is not on the grid.
    pub gamma: Option<f64>,
    /// `2 h(2) - 1`; absent when q = 2 is not on the grid.
    pub beta: Option<f64>,
}

impl HurstSpectrum {
    pub fn h_at(&self, q: f64) -> Option<f64> {
        self.q_values
            .iter()
            .position(|&v| (v - q).abs() < 1e-9)
            .map(|i| self.h[i])
    }

    pub fn tau_at(&self, q: f64) -> Option<f64> {
        self.q_values
            .iter()
            .position(|&v| (v - q).abs() < 1e-9)
            .map(|i| self.tau[i])
    }

    /// Whether tau is non-decreasing and concave up to `tol`.
    pub fn tau_is_concave(&self, tol: f64) -> bool {
        let increasing = self.tau.windows(2).all(|w| w[1] >= w[0] - tol);
        let concave = self
            .q_values
            .windows(3)
            .zip(self.tau.windows(3))
            .all(|(q, t)| {
                let left = (t[1] - t[0]) / (q[1] - q[0]);
                let right = (t[2] - t[1]) / (q[2] - q[1]);
                right <= left + tol
            });
        increasing && concave
    }
}

/// Builds a spectrum from per-q slopes, filling `tau`, `gamma` and `beta`.
pub fn hurst_from_slopes(
    q_values: Vec<f64>,
    h: Vec<f64>,
    stderr: Vec<f64>,
    fit_range: ScaleRange,
    scales_used: Vec<usize>,
) -> HurstSpectrum {
    let tau = q_values.iter().zip(&h).map(|(q, h)| q * h - 1.0).collect();
    let h2 = q_values
        .iter()
        .position(|&q| (q - 2.0).abs() < 1e-9)
        .map(|i| h[i]);
    HurstSpectrum {
        gamma: h2.map(|h2| 2.0 - 2.0 * h2),
        beta: h2.map(|h2| 2.0 * h2 - 1.0),
        q_values,
        h,
        stderr,
        fit_range,
        scales_used,
        tau,
    }
}

/// Least-squares slopes of `ln F_q(s)` against `ln s` over `fit_range`.
pub fn fit_hurst(surface: &FluctuationSurface, fit_range: ScaleRange) -> Result<HurstSpectrum> {
    let idx: Vec<usize> = surface
        .grid
        .scales
        .iter()
        .enumerate()
        .filter(|(_, &s)| fit_range.contains(s))
        .map(|(i, _)| i)
        .collect();
    if idx.len() < 4 {
        return Err(Error::InsufficientScales {
            found: idx.len(),
            need: 4,
        });
    }
    let ln_s: Vec<f64> = idx
        .iter()
        .map(|&i| (surface.grid.scales[i] as f64).ln())
        .collect();
    let mut h = Vec::with_capacity(surface.grid.q_values.len());
    let mut stderr = Vec::with_capacity(surface.grid.q_values.len());
    for row in &surface.values {
        let ln_f: Vec<f64> = idx.iter().map(|&i| row[i].ln()).collect();
        let fit = fit_line(&ln_s, &ln_f)
            .ok_or_else(|| Error::Degenerate("scaling regression is singular".into()))?;
        if !fit.slope.is_finite() {
            return Err(Error::Degenerate("non-finite scaling exponent".into()));
        }
        h.push(fit.slope);
        stderr.push(fit.slope_stderr);
    }
    Ok(hurst_from_slopes(
        surface.grid.q_values.clone(),
        h,
        stderr,
        fit_range,
        idx.iter().map(|&i| surface.grid.scales[i]).collect(),
    ))
}

/// Mass exponents estimated from box-probability partition sums.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PartitionTau {
    pub q_values: Vec<f64>,
    pub tau: Vec<f64>,
    pub scales: Vec<usize>,
}

/// `tau(q)` as the slope of `ln Z_q(s)` against `ln s`, where
/// `Z_q(s) = sum_p P(p, s)^q` over boxes of `s` consecutive values.
///
/// The measure is rescaled to unit total mass. A trailing partial box is
/// dropped; empty boxes are excluded from `q <= 0` sums.
pub fn partition_tau(
    measure: &TimeSeries,
    scales: &[usize],
    q_values: &[f64],
) -> Result<PartitionTau> {
    let x = measure.values();
    if let Some((index, &value)) = x.iter().enumerate().find(|(_, &v)| v < 0.0) {
        return Err(Error::InvalidParameter(format!(
            "measure must be non-negative; value {value} at index {index}"
        )));
    }
    let total: f64 = x.iter().sum();
    if !(total > 0.0) {
        return Err(Error::Degenerate("measure has zero total mass".into()));
    }
    if scales.len() < 2 {
        return Err(Error::InsufficientScales {
            found: scales.len(),
            need: 2,
        });
    }
    if let Some(&s) = scales.iter().find(|&&s| s == 0 || s > x.len()) {
        return Err(Error::ScaleTooLarge {
            scale: s,
            len: x.len(),
        });
    }
    // Cumulative mass Y(i), Y(0) = 0.
    let mut cum = Vec::with_capacity(x.len() + 1);
    cum.push(0.0);
    let mut acc = 0.0;
    for v in x {
        acc += v / total;
        cum.push(acc);
    }
    let boxes: Vec<Vec<f64>> = scales
        .iter()
        .map(|&s| {
            (1..=x.len() / s)
                .map(|p| cum[p * s] - cum[(p - 1) * s])
                .collect()
        })
        .collect();
    let ln_s: Vec<f64> = scales.iter().map(|&s| (s as f64).ln()).collect();
    let mut tau = Vec::with_capacity(q_values.len());
    for &q in q_values {
        let mut ln_z = Vec::with_capacity(scales.len());
        for (probs, &s) in boxes.iter().zip(scales) {
            let z: f64 = probs
                .iter()
                .filter(|&&p| q > 0.0 || p > 0.0)
                .map(|&p| p.powf(q))
                .sum();
            if !(z > 0.0) || !z.is_finite() {
                return Err(Error::Degenerate(format!(
                    "partition sum undefined at q = {q}, s = {s}"
                )));
            }
            ln_z.push(z.ln());
        }
        let fit = fit_line(&ln_s, &ln_z)
            .ok_or_else(|| Error::Degenerate("partition regression is singular".into()))?;
        tau.push(fit.slope);
    }
    Ok(PartitionTau {
        q_values: q_values.to_vec(),
        tau,
        scales: scales.to_vec(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::series::profile;

    fn prof(v: Vec<f64>) -> Profile {
        Profile {
            cumulative: v,
            source_mean: 0.0,
        }
    }

    #[test]
    fn q_grid_defaults() {
        let q = default_q_values();
        assert_eq!(q.len(), 41);
        assert_eq!(q[0], -10.0);
        assert_eq!(q[20], 0.0);
        assert_eq!(q[40], 10.0);
        assert_eq!(q_range(-1.0, 1.0, 0.1).unwrap().len(), 21);
        assert_eq!(q_range(-1.0, 1.0, 0.1).unwrap()[10], 0.0);
        assert!(q_range(1.0, 0.0, 0.5).is_err());
    }

    #[test]
    fn log_scale_grid() {
        let s = log_scales(6, 3276, 30);
        assert_eq!(s[0], 6);
        assert_eq!(*s.last().unwrap(), 3276);
        assert!(s.windows(2).all(|w| w[1] > w[0]));
        assert!(s.len() <= 30 && s.len() >= 25);
        let g = GridSpec::default_for(16384, 2).unwrap();
        g.validate(16384).unwrap();
        assert_eq!(g.scales[0], 6);
    }

    #[test]
    fn dyadic_scale_grid() {
        assert_eq!(dyadic_scales(6, 100), vec![8, 16, 32, 64]);
        assert_eq!(dyadic_scales(8, 8), vec![8]);
        assert!(dyadic_scales(9, 15).is_empty());
        assert!(GridSpec::with_spacing(vec![2.0], 9, 15, 2, ScaleSpacing::Dyadic).is_err());
        assert_eq!(
            "dyadic".parse::<ScaleSpacing>().unwrap(),
            ScaleSpacing::Dyadic
        );
        assert!("linear".parse::<ScaleSpacing>().is_err());
    }

    #[test]
    fn grid_validation() {
        let g = GridSpec {
            q_values: vec![2.0],
            scales: vec![3, 10],
            detrend_order: 2,
        };
        assert!(matches!(g.validate(100), Err(Error::InvalidGrid(_))));
        let g = GridSpec {
            q_values: vec![2.0],
            scales: vec![5, 26],
            detrend_order: 2,
        };
        assert!(g.validate(100).is_err());
        assert!(g.validate(104).is_ok());
        let g = GridSpec {
            q_values: vec![2.0],
            scales: vec![10, 8],
            detrend_order: 1,
        };
        assert!(g.validate(100).is_err());
    }

    #[test]
    fn scale_range_parse() {
        assert_eq!(
            "15:100".parse::<ScaleRange>().unwrap(),
            ScaleRange::new(15, 100)
        );
        assert!("100:15".parse::<ScaleRange>().is_err());
        assert!("15-100".parse::<ScaleRange>().is_err());
        assert_eq!(ScaleRange::new(5, 75).to_string(), "5:75");
    }

    #[test]
    fn segment_index_arithmetic() {
        let r = segment_ranges(10, 3);
        assert_eq!(r, vec![0..3, 3..6, 6..9, 7..10, 4..7, 1..4]);
        // First three cover i=1..9, last three i=2..10 (1-based).
        let front: Vec<usize> = r[..3].iter().flat_map(|r| r.clone()).collect();
        let back: Vec<usize> = r[3..].iter().flat_map(|r| r.clone()).collect();
        assert_eq!(front.iter().min().unwrap() + 1, 1);
        assert_eq!(front.iter().max().unwrap() + 1, 9);
        assert_eq!(back.iter().min().unwrap() + 1, 2);
        assert_eq!(back.iter().max().unwrap() + 1, 10);
        let p = prof((0..10).map(|i| (i as f64).sin()).collect());
        assert_eq!(segment_variances(&p, 3, 1).unwrap().len(), 6);
    }

    #[test]
    fn quadratic_profile_annihilated() {
        let p = prof(
            (1..=200)
                .map(|i| {
                    let x = i as f64;
                    0.3 * x * x - 2.0 * x + 7.0
                })
                .collect(),
        );
        for s in [4, 10, 37, 50] {
            let v = segment_variances(&p, s, 2).unwrap();
            assert!(v.iter().all(|&f| f < 1e-18), "s={s}: {v:?}");
        }
    }

    #[test]
    fn segment_variance_errors() {
        let p = prof(vec![0.0; 20]);
        assert!(segment_variances(&p, 3, 2).is_err());
        assert!(matches!(
            segment_variances(&p, 21, 1),
            Err(Error::ScaleTooLarge { .. })
        ));
    }

    #[test]
    fn generalized_mean_of_constant() {
        let v = vec![0.25; 12];
        let q = default_q_values();
        for f in fluctuation_column(&v, &q) {
            assert!((f - 0.5).abs() < 1e-14);
        }
    }

    #[test]
    fn q2_is_root_mean_square() {
        let v = [0.5, 2.0, 1.5, 0.1];
        let f = fluctuation_column(&v, &[2.0, -2.0, 0.0]);
        let rms = (v.iter().sum::<f64>() / 4.0).sqrt();
        assert!((f[0] - rms).abs() < 1e-14);
        let harm = (v.iter().map(|x| 1.0 / x).sum::<f64>() / 4.0).powf(-0.5);
        assert!((f[1] - harm).abs() < 1e-14);
        let geo = v.iter().product::<f64>().powf(0.125);
        assert!((f[2] - geo).abs() < 1e-14);
    }

    #[test]
    fn all_zero_scale_is_degenerate() {
        let p = profile(&TimeSeries::new(vec![1.0; 64]).unwrap()).unwrap();
        let g = GridSpec {
            q_values: vec![-1.0, 2.0],
            scales: vec![4, 8],
            detrend_order: 1,
        };
        assert!(matches!(
            fluctuation_surface(&p, &g),
            Err(Error::DegenerateSurface { scale: 4 })
        ));
    }

    #[test]
    fn zero_segments_are_floored_and_flagged() {
        // Flat first half, noisy second half.
        let mut x = vec![0.0; 64];
        for (i, v) in x.iter_mut().enumerate().skip(32) {
            *v = ((i * 7919) % 13) as f64 - 6.0;
        }
        let p = prof(x);
        let g = GridSpec {
            q_values: vec![-10.0, -2.0, 0.0, 2.0, 10.0],
            scales: vec![4, 8, 16],
            detrend_order: 1,
        };
        let s = fluctuation_surface(&p, &g).unwrap();
        assert!(s.values.iter().flatten().all(|v| v.is_finite() && *v > 0.0));
        assert!(s.is_flagged(0, 0));
        assert!(s.is_flagged(2, 1));
        assert!(!s.is_flagged(3, 0));
        assert_eq!(s.degenerate.len(), 9);
    }

    #[test]
    fn exact_power_law_surface_regression() {
        let q = default_q_values();
        let scales = log_scales(8, 2000, 20);
        let values = q
            .iter()
            .map(|_| scales.iter().map(|&s| 3.7 * (s as f64).powf(0.7)).collect())
            .collect();
        let surface = FluctuationSurface {
            grid: GridSpec {
                q_values: q.clone(),
                scales,
                detrend_order: 2,
            },
            values,
            n_segments: vec![],
            degenerate: vec![],
        };
        let hs = fit_hurst(&surface, ScaleRange::new(8, 2000)).unwrap();
        for (&q, (&h, &t)) in q.iter().zip(hs.h.iter().zip(&hs.tau)) {
            assert!((h - 0.7).abs() < 1e-9);
            assert_eq!(t, q * h - 1.0);
        }
        assert_eq!(hs.tau_at(0.0), Some(-1.0));
        let h2 = hs.h_at(2.0).unwrap();
        assert_eq!(hs.gamma, Some(2.0 - 2.0 * h2));
        assert_eq!(hs.beta, Some(2.0 * h2 - 1.0));
        assert!(matches!(
            fit_hurst(&surface, ScaleRange::new(8, 12)),
            Err(Error::InsufficientScales { .. })
        ));
    }

    #[test]
    fn partition_uniform_measure() {
        let n = 1024;
        let m = TimeSeries::new(vec![1.0 / n as f64; n]).unwrap();
        let q = [-3.0, -1.0, 0.0, 1.0, 2.0, 4.5];
        let pt = partition_tau(&m, &[2, 4, 8, 16, 32, 64], &q).unwrap();
        for (q, t) in q.iter().zip(&pt.tau) {
            assert!((t - (q - 1.0)).abs() < 1e-12, "q={q}: {t}");
        }
    }

    #[test]
    fn partition_tau_one_is_zero() {
        let x: Vec<f64> = (0..512).map(|i| 1.0 + ((i * 37) % 11) as f64).collect();
        let pt = partition_tau(&TimeSeries::new(x).unwrap(), &[4, 8, 16, 32], &[1.0]).unwrap();
        assert!(pt.tau[0].abs() < 1e-12);
    }

    #[test]
    fn partition_errors() {
        let neg = TimeSeries::new(vec![1.0, -1.0, 2.0, 3.0]).unwrap();
        assert!(partition_tau(&neg, &[1, 2], &[1.0]).is_err());
        let zero = TimeSeries::new(vec![0.0; 8]).unwrap();
        assert!(partition_tau(&zero, &[1, 2], &[1.0]).is_err());
        let ok = TimeSeries::new(vec![1.0; 8]).unwrap();
        assert!(partition_tau(&ok, &[2], &[1.0]).is_err());
        assert!(partition_tau(&ok, &[2, 16], &[1.0]).is_err());
    }
}
