//! Singularity spectra and complexity parameters.
//!
//! `f(alpha)` is obtained from `tau(q)` by a numerical Legendre transform
//! (`alpha = dtau/dq` by finite differences, `f = q alpha - tau`). A
//! quadratic or quartic polynomial fitted to the spectrum then yields the
//! complexity parameters: the peak position `alpha0`, the width
//! `W = alpha_max - alpha_min` between the zeros of the fitted curve, the
//! skewness ratio `r = (alpha_max - alpha0) / (alpha0 - alpha_min)`, and the
//! first and third order expansion coefficients around `alpha0`.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mfdfa::HurstSpectrum;
use crate::regression::{fit_polynomial, Polynomial};

/// Slack allowed before two neighbouring alphas count as out of order.
const MONOTONE_TOL: f64 = 1e-9;
/// Root bracketing resolution, as a fraction of the data alpha range.
const ROOT_SCAN_STEPS: f64 = 256.0;
const ROOT_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SingularitySpectrum {
    pub alpha: Vec<f64>,
    pub f: Vec<f64>,
    pub source_q: Vec<f64>,
    /// Points whose alpha breaks the non-increasing order in q. They are
    /// kept for output but excluded from polynomial fits.
    pub non_monotone: Vec<bool>,
}

impl SingularitySpectrum {
    pub fn len(&self) -> usize {
        self.alpha.len()
    }

    pub fn is_empty(&self) -> bool {
        self.alpha.is_empty()
    }

    /// `(alpha, f)` pairs of the points usable for fitting.
    pub fn valid_points(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        self.alpha
            .iter()
            .zip(&self.f)
            .zip(&self.non_monotone)
            .filter(|(_, &bad)| !bad)
            .map(|((&a, &f), _)| (a, f))
    }
}

/// Derivative of `y` on the (possibly uneven) grid `x`: central differences
/// inside, one-sided at the ends.
fn finite_difference(x: &[f64], y: &[f64]) -> Vec<f64> {
    let n = x.len();
    (0..n)
        .map(|i| {
            let (lo, hi) = match i {
                0 => (0, 1),
                i if i == n - 1 => (n - 2, n - 1),
                i => (i - 1, i + 1),
            };
            (y[hi] - y[lo]) / (x[hi] - x[lo])
        })
        .collect()
}

pub fn legendre_transform(hs: &HurstSpectrum) -> Result<SingularitySpectrum> {
    let q = &hs.q_values;
    if q.len() < 3 {
        return Err(Error::TransformFailed(format!(
            "need at least 3 q values, got {}",
            q.len()
        )));
    }
    if let Some(i) = hs.tau.iter().position(|t| !t.is_finite()) {
        return Err(Error::TransformFailed(format!(
            "tau not finite at q = {}",
            q[i]
        )));
    }
    if q.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::TransformFailed("q grid must be increasing".into()));
    }
    let alpha = finite_difference(q, &hs.tau);
    let f: Vec<f64> = q
        .iter()
        .zip(&alpha)
        .zip(&hs.tau)
        .map(|((q, a), t)| q * a - t)
        .collect();
    let n = alpha.len();
    let non_monotone: Vec<bool> = (0..n)
        .map(|i| {
            let rises_from_left = i > 0 && alpha[i] > alpha[i - 1] + MONOTONE_TOL;
            let rises_to_right = i + 1 < n && alpha[i + 1] > alpha[i] + MONOTONE_TOL;
            rises_from_left || rises_to_right
        })
        .collect();
    if non_monotone.iter().all(|&b| b) {
        return Err(Error::TransformFailed(
            "alpha is not monotone anywhere on the q grid".into(),
        ));
    }
    Ok(SingularitySpectrum {
        alpha,
        f,
        source_q: q.clone(),
        non_monotone,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SpectrumFit {
    Quadratic,
    Quartic,
}

impl SpectrumFit {
    pub fn degree(self) -> usize {
        match self {
            SpectrumFit::Quadratic => 2,
            SpectrumFit::Quartic => 4,
        }
    }

    pub fn min_points(self) -> usize {
        match self {
            SpectrumFit::Quadratic => 5,
            SpectrumFit::Quartic => 7,
        }
    }
}

impl fmt::Display for SpectrumFit {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SpectrumFit::Quadratic => "quadratic",
            SpectrumFit::Quartic => "quartic",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComplexityParams {
    pub alpha0: f64,
    pub width: f64,
    pub r: f64,
    /// First-order coefficient of the expansion around `alpha0`.
    pub b: f64,
    /// Third-order coefficient; zero for quadratic fits.
    pub d: f64,
    /// `[A, B, C, D, E]` of `f = A + B t + C t^2 + D t^3 + E t^4`,
    /// `t = alpha - alpha0`.
    pub coefficients: [f64; 5],
    pub fit_kind: SpectrumFit,
    pub alpha_min: f64,
    pub alpha_max: f64,
    pub points_used: usize,
}

impl ComplexityParams {
    pub fn polynomial(&self) -> Polynomial {
        Polynomial {
            center: self.alpha0,
            coeffs: self.coefficients[..=self.fit_kind.degree()].to_vec(),
        }
    }
}

/// Location of the maximum of `p` on `[lo, hi]`.
fn argmax(p: &Polynomial, lo: f64, hi: f64) -> f64 {
    const GRID: usize = 2048;
    let step = (hi - lo) / GRID as f64;
    let (k, _) = (0..=GRID)
        .map(|k| p.eval(lo + k as f64 * step))
        .enumerate()
        .fold((0, f64::NEG_INFINITY), |best, (k, v)| {
            if v > best.1 {
                (k, v)
            } else {
                best
            }
        });
    let dp = p.derivative();
    let ddp = dp.derivative();
    let mut a = lo + k.saturating_sub(1) as f64 * step;
    let mut b = (lo + (k + 1) as f64 * step).min(hi);
    // Interior maximum: p' changes sign from + to - inside [a, b].
    if !(dp.eval(a) > 0.0 && dp.eval(b) < 0.0) {
        return lo + k as f64 * step;
    }
    let mut x = lo + k as f64 * step;
    for _ in 0..100 {
        let g = dp.eval(x);
        if g == 0.0 {
            break;
        }
        if g > 0.0 {
            a = x;
        } else {
            b = x;
        }
        let h = ddp.eval(x);
        let newton = x - g / h;
        let next = if h < 0.0 && newton > a && newton < b {
            newton
        } else {
            0.5 * (a + b)
        };
        if (next - x).abs() <= 1e-15 * (1.0 + x.abs()) {
            x = next;
            break;
        }
        x = next;
    }
    x
}

/// First zero of `p` moving away from `start` in direction `dir`, searched
/// up to `limit` away, bisected to `ROOT_TOL`.
fn nearest_root(p: &Polynomial, start: f64, dir: f64, step: f64, limit: f64) -> Option<f64> {
    let mut inner = start;
    let mut travelled = 0.0;
    while travelled < limit {
        travelled = (travelled + step).min(limit);
        let outer = start + dir * travelled;
        if p.eval(outer) <= 0.0 {
            let (mut pos, mut neg) = (inner, outer);
            while (neg - pos).abs() > ROOT_TOL {
                let mid = 0.5 * (pos + neg);
                if p.eval(mid) > 0.0 {
                    pos = mid;
                } else {
                    neg = mid;
                }
            }
            return Some(0.5 * (pos + neg));
        }
        inner = outer;
    }
    None
}

/// Fits the spectrum and extracts the complexity parameters.
///
/// `alpha0` is the maximum of the fitted polynomial over the data range;
/// `alpha_min` and `alpha_max` are the zeros of the fitted polynomial
/// closest to `alpha0` on either side, searched within twice the data range.
pub fn fit_spectrum(spec: &SingularitySpectrum, kind: SpectrumFit) -> Result<ComplexityParams> {
    let (alpha, f): (Vec<f64>, Vec<f64>) = spec.valid_points().unzip();
    if alpha.len() < kind.min_points() {
        return Err(Error::InsufficientData(format!(
            "{} valid spectrum points, {kind} fit needs {}",
            alpha.len(),
            kind.min_points()
        )));
    }
    let lo = alpha.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = alpha.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let data_width = hi - lo;
    if !(data_width > 1e-12 * (1.0 + lo.abs())) {
        return Err(Error::WidthUndefined {
            reason: "spectrum collapsed to a single point".into(),
            alpha0: lo,
            coefficients: [f.iter().sum::<f64>() / f.len() as f64, 0.0, 0.0, 0.0, 0.0],
        });
    }
    let poly = fit_polynomial(&alpha, &f, kind.degree())
        .ok_or_else(|| Error::Degenerate("spectrum polynomial fit is singular".into()))?;
    let alpha0 = argmax(&poly, lo, hi);
    let local = poly.recentered(alpha0);
    let mut coefficients = [0.0; 5];
    coefficients[..local.coeffs.len()].copy_from_slice(&local.coeffs);

    let undefined = |reason: &str| Error::WidthUndefined {
        reason: reason.into(),
        alpha0,
        coefficients,
    };
    if !(coefficients[0] > 0.0) {
        return Err(undefined("fitted spectrum is not positive at its maximum"));
    }
    let step = data_width / ROOT_SCAN_STEPS;
    let limit = 2.0 * data_width;
    let alpha_max = nearest_root(&local, alpha0, 1.0, step, limit)
        .ok_or_else(|| undefined("no zero of the fitted spectrum right of alpha0"))?;
    let alpha_min = nearest_root(&local, alpha0, -1.0, step, limit)
        .ok_or_else(|| undefined("no zero of the fitted spectrum left of alpha0"))?;
    let width = alpha_max - alpha_min;
    let r = (alpha_max - alpha0) / (alpha0 - alpha_min);
    Ok(ComplexityParams {
        alpha0,
        width,
        r,
        b: coefficients[1],
        d: coefficients[3],
        coefficients,
        fit_kind: kind,
        alpha_min,
        alpha_max,
        points_used: alpha.len(),
    })
}

/// Thresholds on the mean `|h_orig(q) - h_shuffled(q)|`.
pub const CORRELATION_DOMINATED_ABOVE: f64 = 0.1;
pub const FAT_TAIL_DOMINATED_BELOW: f64 = 0.03;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Attribution {
    CorrelationDominated,
    FatTailDominated,
    Mixed,
}

impl fmt::Display for Attribution {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Attribution::CorrelationDominated => "correlation-dominated",
            Attribution::FatTailDominated => "fat-tail-dominated",
            Attribution::Mixed => "mixed",
        })
    }
}

/// One side of a surrogate comparison.
#[derive(Debug, Clone, Copy)]
pub struct SurrogateInput<'a> {
    pub hurst: &'a HurstSpectrum,
    pub params: Option<&'a ComplexityParams>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MultifractalityAttribution {
    pub q_values: Vec<f64>,
    /// `h_orig(q) - h_shuffled(q)`.
    pub delta_h: Vec<f64>,
    pub mean_abs_delta_h: f64,
    /// Absent when either side has no complexity parameters.
    pub delta_width: Option<f64>,
    pub delta_alpha0: Option<f64>,
    pub attribution: Attribution,
}

/// Splits multifractality into correlation and distribution contributions
/// by comparing a series with its shuffled surrogate.
pub fn compare_surrogate(
    original: SurrogateInput<'_>,
    shuffled: SurrogateInput<'_>,
) -> Result<MultifractalityAttribution> {
    let (a, b) = (original.hurst, shuffled.hurst);
    if a.q_values.len() != b.q_values.len()
        || a.q_values
            .iter()
            .zip(&b.q_values)
            .any(|(x, y)| (x - y).abs() > 1e-12)
    {
        return Err(Error::IncompatibleInputs("q grids differ".into()));
    }
    if a.fit_range != b.fit_range {
        return Err(Error::IncompatibleInputs(format!(
            "fit ranges differ: {} vs {}",
            a.fit_range, b.fit_range
        )));
    }
    let delta_h: Vec<f64> = a.h.iter().zip(&b.h).map(|(x, y)| x - y).collect();
    let mean_abs_delta_h = delta_h.iter().map(|d| d.abs()).sum::<f64>() / delta_h.len() as f64;
    let attribution = if mean_abs_delta_h > CORRELATION_DOMINATED_ABOVE {
        Attribution::CorrelationDominated
    } else if mean_abs_delta_h < FAT_TAIL_DOMINATED_BELOW {
        Attribution::FatTailDominated
    } else {
        Attribution::Mixed
    };
    let (delta_width, delta_alpha0) = match (original.params, shuffled.params) {
        (Some(p), Some(s)) => (Some(p.width - s.width), Some(p.alpha0 - s.alpha0)),
        _ => (None, None),
    };
    Ok(MultifractalityAttribution {
        q_values: a.q_values.clone(),
        delta_h,
        mean_abs_delta_h,
        delta_width,
        delta_alpha0,
        attribution,
    })
}
