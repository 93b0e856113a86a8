//! Sample autocorrelation, decay-law classification and tail exponents.

use std::ops::RangeInclusive;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::regression::fit_line;
use crate::series::{normalize_returns, TimeSeries};

/// Minimum coefficient of determination for a decay law to be accepted.
pub const DECAY_MIN_R2: f64 = 0.7;
/// Minimum number of positive autocorrelations needed to attempt a fit.
pub const DECAY_MIN_POINTS: usize = 5;
pub const DEFAULT_TAIL_FRACTION: f64 = 0.05;
pub const MIN_TAIL_POINTS: usize = 10;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AutocorrelationResult {
    /// Lags `1..=max_lag`.
    pub lags: Vec<usize>,
    pub values: Vec<f64>,
    pub n_source: usize,
}

impl AutocorrelationResult {
    pub fn at(&self, lag: usize) -> Option<f64> {
        if lag == 0 {
            return Some(1.0);
        }
        self.lags
            .iter()
            .position(|&l| l == lag)
            .map(|i| self.values[i])
    }
}

/// `C(s) = [1/(N-s) sum_i xb_i xb_{i+s}] / <xb^2>` with `xb = x - <x>`.
///
/// The lag-normalized estimator can leave `[-1, 1]` by a hair on short,
/// strongly structured inputs; values are clamped to that interval.
pub fn autocorrelation(series: &TimeSeries, max_lag: usize) -> Result<AutocorrelationResult> {
    let n = series.len();
    series.require_len(2)?;
    if max_lag == 0 || 2 * max_lag >= n {
        return Err(Error::InvalidParameter(format!(
            "max lag {max_lag} must be positive and below N/2 = {}",
            n as f64 / 2.0
        )));
    }
    let m = series.mean();
    let xb: Vec<f64> = series.values().iter().map(|v| v - m).collect();
    let var = xb.iter().map(|v| v * v).sum::<f64>() / n as f64;
    if !(var > 0.0) {
        return Err(Error::Degenerate("zero variance".into()));
    }
    let values = (1..=max_lag)
        .map(|s| {
            let cov = xb[..n - s]
                .iter()
                .zip(&xb[s..])
                .map(|(a, b)| a * b)
                .sum::<f64>()
                / (n - s) as f64;
            (cov / var).clamp(-1.0, 1.0)
        })
        .collect();
    Ok(AutocorrelationResult {
        lags: (1..=max_lag).collect(),
        values,
        n_source: n,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DecayLaw {
    PowerLaw,
    Exponential,
    Uncorrelated,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DecayClassification {
    pub law: DecayLaw,
    /// `C(s) ~ s^-gamma`; set only for power laws.
    pub gamma: Option<f64>,
    /// `C(s) ~ exp(-s / s0)`; set only for exponential decay.
    pub s0: Option<f64>,
    /// R^2 of the chosen fit in its linearized coordinates.
    pub fit_quality: f64,
}

impl DecayClassification {
    fn uncorrelated(fit_quality: f64) -> Self {
        DecayClassification {
            law: DecayLaw::Uncorrelated,
            gamma: None,
            s0: None,
            fit_quality,
        }
    }
}

/// Fits `ln C` against `ln s` and against `s` over the positive
/// autocorrelations in `fit_range`, keeping whichever acceptable fit has the
/// larger R^2.
pub fn classify_decay(
    acf: &AutocorrelationResult,
    fit_range: RangeInclusive<usize>,
) -> DecayClassification {
    let (s, ln_c): (Vec<f64>, Vec<f64>) = acf
        .lags
        .iter()
        .zip(&acf.values)
        .filter(|(l, c)| fit_range.contains(l) && **c > 0.0)
        .map(|(&l, &c)| (l as f64, c.ln()))
        .unzip();
    if s.len() < DECAY_MIN_POINTS {
        return DecayClassification::uncorrelated(0.0);
    }
    let ln_s: Vec<f64> = s.iter().map(|v| v.ln()).collect();

    let power = fit_line(&ln_s, &ln_c)
        .map(|f| (-f.slope, f.r_squared))
        .filter(|&(gamma, r2)| r2 > DECAY_MIN_R2 && gamma > 0.0 && gamma < 1.0);
    let expo = fit_line(&s, &ln_c)
        .map(|f| (-1.0 / f.slope, f.r_squared))
        .filter(|&(s0, r2)| r2 > DECAY_MIN_R2 && s0 > 0.0 && s0.is_finite());

    match (power, expo) {
        (Some((gamma, r2p)), Some((_, r2e))) if r2p >= r2e => DecayClassification {
            law: DecayLaw::PowerLaw,
            gamma: Some(gamma),
            s0: None,
            fit_quality: r2p,
        },
        (Some((gamma, r2p)), None) => DecayClassification {
            law: DecayLaw::PowerLaw,
            gamma: Some(gamma),
            s0: None,
            fit_quality: r2p,
        },
        (_, Some((s0, r2e))) => DecayClassification {
            law: DecayLaw::Exponential,
            gamma: None,
            s0: Some(s0),
            fit_quality: r2e,
        },
        (None, None) => {
            let best = [fit_line(&ln_s, &ln_c), fit_line(&s, &ln_c)]
                .iter()
                .flatten()
                .map(|f| f.r_squared)
                .fold(0.0f64, f64::max);
            DecayClassification::uncorrelated(best)
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TailEstimate {
    pub zeta: f64,
    pub tail_fraction: f64,
    pub n_tail: usize,
}

/// Tail exponent of the normalized returns `r_t`: negative slope of the
/// log empirical survival function of `|r_t|` over the largest
/// `tail_fraction` of order statistics.
pub fn tail_exponent(returns: &TimeSeries, tail_fraction: f64) -> Result<TailEstimate> {
    let normalized = normalize_returns(returns)?;
    let magnitudes: Vec<f64> = normalized.values().iter().map(|v| v.abs()).collect();
    tail_exponent_of_magnitudes(&magnitudes, tail_fraction)
}

/// Survival-function regression on raw magnitudes, without normalization.
pub fn tail_exponent_of_magnitudes(magnitudes: &[f64], tail_fraction: f64) -> Result<TailEstimate> {
    if !(tail_fraction > 0.0 && tail_fraction <= 0.5) {
        return Err(Error::InvalidParameter(format!(
            "tail fraction {tail_fraction} outside (0, 0.5]"
        )));
    }
    let n = magnitudes.len();
    let n_tail = (tail_fraction * n as f64).floor() as usize;
    if n_tail < MIN_TAIL_POINTS {
        return Err(Error::InsufficientData(format!(
            "{n_tail} tail points, need {MIN_TAIL_POINTS}"
        )));
    }
    let mut sorted = magnitudes.to_vec();
    sorted.sort_by(|a, b| b.total_cmp(a));
    let tail = &sorted[..n_tail];
    if tail.iter().any(|&v| !(v > 0.0)) {
        return Err(Error::Degenerate("zero magnitudes inside the tail".into()));
    }
    let ln_x: Vec<f64> = tail.iter().map(|v| v.ln()).collect();
    let ln_p: Vec<f64> = (1..=n_tail)
        .map(|rank| (rank as f64 / n as f64).ln())
        .collect();
    let fit = fit_line(&ln_x, &ln_p)
        .ok_or_else(|| Error::Degenerate("tail magnitudes are all equal".into()))?;
    let zeta = -fit.slope;
    if !(zeta > 0.0) {
        return Err(Error::Degenerate(format!("non-positive tail slope {zeta}")));
    }
    Ok(TailEstimate {
        zeta,
        tail_fraction,
        n_tail,
    })
}
