//! Raw series transforms: returns, normalization, profiles, extrema
//! sequences and seeded shuffles.

use chrono::NaiveDate;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Ordered real-valued observations, optionally date-stamped.
///
/// Consecutive entries are consecutive trading days; calendar gaps carry no
/// meaning.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimeSeries {
    values: Vec<f64>,
    dates: Option<Vec<NaiveDate>>,
    label: String,
}

impl TimeSeries {
    /// Builds a series, rejecting non-finite values.
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if let Some(index) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite { index });
        }
        Ok(TimeSeries {
            values,
            dates: None,
            label: String::new(),
        })
    }

    pub fn with_dates(values: Vec<f64>, dates: Vec<NaiveDate>) -> Result<Self> {
        let mut ts = TimeSeries::new(values)?;
        if dates.len() != ts.values.len() {
            return Err(Error::DateLengthMismatch {
                values: ts.values.len(),
                dates: dates.len(),
            });
        }
        if let Some(i) = dates.windows(2).position(|w| w[1] <= w[0]) {
            return Err(Error::DatesNotIncreasing { index: i + 1 });
        }
        ts.dates = Some(dates);
        Ok(ts)
    }

    pub fn labeled(mut self, label: impl Into<String>) -> Self {
        self.label = label.into();
        self
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn dates(&self) -> Option<&[NaiveDate]> {
        self.dates.as_deref()
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn mean(&self) -> f64 {
        mean(&self.values)
    }

    /// Population (1/N) standard deviation.
    pub fn std_dev(&self) -> f64 {
        let m = self.mean();
        let var =
            self.values.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / self.values.len() as f64;
        var.sqrt()
    }

    pub(crate) fn require_len(&self, min: usize) -> Result<()> {
        if self.values.len() < min {
            Err(Error::TooShort {
                len: self.values.len(),
                min,
            })
        } else {
            Ok(())
        }
    }

    fn derived(&self, values: Vec<f64>, dates: Option<Vec<NaiveDate>>) -> TimeSeries {
        TimeSeries {
            values,
            dates,
            label: self.label.clone(),
        }
    }
}

pub(crate) fn mean(values: &[f64]) -> f64 {
    values.iter().sum::<f64>() / values.len() as f64
}

/// Cumulative sum of the mean-subtracted series.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Profile {
    pub cumulative: Vec<f64>,
    pub source_mean: f64,
}

impl Profile {
    pub fn len(&self) -> usize {
        self.cumulative.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cumulative.is_empty()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ExtremaKind {
    Maxima,
    Minima,
}

impl ExtremaKind {
    pub fn as_str(self) -> &'static str {
        match self {
            ExtremaKind::Maxima => "maxima",
            ExtremaKind::Minima => "minima",
        }
    }
}

/// Per-window maxima or minima over consecutive non-overlapping windows.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExtremaSequence {
    pub values: Vec<f64>,
    pub window_length: usize,
    pub kind: ExtremaKind,
}

impl ExtremaSequence {
    pub fn to_series(&self) -> TimeSeries {
        TimeSeries {
            values: self.values.clone(),
            dates: None,
            label: format!("{} (R={})", self.kind.as_str(), self.window_length),
        }
    }
}

/// Log returns `ln P[t+1] - ln P[t]`. Dates carry the later day of each pair.
pub fn log_returns(prices: &TimeSeries) -> Result<TimeSeries> {
    prices.require_len(2)?;
    if let Some((index, &value)) = prices.values.iter().enumerate().find(|(_, &p)| p <= 0.0) {
        return Err(Error::NonPositive { index, value });
    }
    let values = prices
        .values
        .windows(2)
        .map(|w| w[1].ln() - w[0].ln())
        .collect();
    let dates = prices.dates.as_ref().map(|d| d[1..].to_vec());
    Ok(prices.derived(values, dates))
}

/// Subtracts the mean and divides by the population standard deviation.
pub fn normalize_returns(returns: &TimeSeries) -> Result<TimeSeries> {
    returns.require_len(2)?;
    let m = returns.mean();
    let sd = returns.std_dev();
    if !(sd > 0.0) {
        return Err(Error::Degenerate("zero variance".into()));
    }
    let values = returns.values.iter().map(|v| (v - m) / sd).collect();
    Ok(returns.derived(values, returns.dates.clone()))
}

pub fn profile(series: &TimeSeries) -> Result<Profile> {
    series.require_len(2)?;
    let source_mean = series.mean();
    let mut acc = 0.0;
    let cumulative = series
        .values
        .iter()
        .map(|v| {
            acc += v - source_mean;
            acc
        })
        .collect();
    Ok(Profile {
        cumulative,
        source_mean,
    })
}

/// Extremum of each complete window of `window` points; a trailing partial
/// window is dropped.
pub fn extrema_sequence(
    series: &TimeSeries,
    window: usize,
    kind: ExtremaKind,
) -> Result<ExtremaSequence> {
    if window == 0 {
        return Err(Error::InvalidParameter(
            "window length must be positive".into(),
        ));
    }
    if window > series.len() {
        return Err(Error::EmptyOutput {
            window,
            len: series.len(),
        });
    }
    let pick = |chunk: &[f64]| -> f64 {
        match kind {
            ExtremaKind::Maxima => chunk.iter().copied().fold(f64::NEG_INFINITY, f64::max),
            ExtremaKind::Minima => chunk.iter().copied().fold(f64::INFINITY, f64::min),
        }
    };
    let values = series.values.chunks_exact(window).map(pick).collect();
    Ok(ExtremaSequence {
        values,
        window_length: window,
        kind,
    })
}

/// Fisher-Yates permutation driven by ChaCha8 seeded from `seed`.
///
/// Dates are dropped: a shuffled series has no calendar.
pub fn shuffle(series: &TimeSeries, seed: u64) -> TimeSeries {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut values = series.values.clone();
    values.shuffle(&mut rng);
    series.derived(values, None)
}
