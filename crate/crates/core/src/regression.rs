//! Least-squares building blocks shared by the analysis modules.
//!
//! Straight-line fits carry a slope standard error and coefficient of
//! determination. Polynomial fits never form normal equations: the
//! segment detrender projects onto a discrete orthonormal polynomial basis,
//! and general polynomial fits go through a Householder QR factorization.

/// Ordinary least-squares fit of `y = intercept + slope * x`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LineFit {
    pub slope: f64,
    pub intercept: f64,
    /// Standard error of the slope; zero for a two-point fit.
    pub slope_stderr: f64,
    pub r_squared: f64,
}

/// Returns `None` for fewer than two points or when all `x` coincide.
pub fn fit_line(x: &[f64], y: &[f64]) -> Option<LineFit> {
    assert_eq!(x.len(), y.len(), "fit_line: length mismatch");
    let n = x.len();
    if n < 2 {
        return None;
    }
    let nf = n as f64;
    let mx = x.iter().sum::<f64>() / nf;
    let my = y.iter().sum::<f64>() / nf;
    let mut sxx = 0.0;
    let mut sxy = 0.0;
    let mut syy = 0.0;
    for (&xi, &yi) in x.iter().zip(y) {
        let dx = xi - mx;
        let dy = yi - my;
        sxx += dx * dx;
        sxy += dx * dy;
        syy += dy * dy;
    }
    if !(sxx > 0.0) {
        return None;
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let ssr: f64 = x
        .iter()
        .zip(y)
        .map(|(&xi, &yi)| {
            let r = yi - intercept - slope * xi;
            r * r
        })
        .sum();
    let slope_stderr = if n > 2 {
        (ssr / (nf - 2.0) / sxx).sqrt()
    } else {
        0.0
    };
    let r_squared = if syy > 0.0 { 1.0 - ssr / syy } else { 1.0 };
    Some(LineFit {
        slope,
        intercept,
        slope_stderr,
        r_squared,
    })
}

/// Orthonormal polynomial basis of degree `degree` on the grid `0..len`.
///
/// Built once per segment length and reused for every segment of that
/// length; projecting a segment onto it yields the least-squares polynomial
/// fit without ever forming normal equations.
#[derive(Debug, Clone)]
pub struct SegmentBasis {
    len: usize,
    /// Row-major, `degree + 1` rows of length `len`.
    rows: Vec<Vec<f64>>,
}

impl SegmentBasis {
    pub fn new(len: usize, degree: usize) -> Self {
        assert!(len > degree, "segment length must exceed detrend order");
        // Abscissae mapped to [-1, 1] keep the monomials well scaled.
        let half = (len as f64 - 1.0) / 2.0;
        let t: Vec<f64> = (0..len)
            .map(|i| {
                if half > 0.0 {
                    (i as f64 - half) / half
                } else {
                    0.0
                }
            })
            .collect();
        let mut rows: Vec<Vec<f64>> = Vec::with_capacity(degree + 1);
        for k in 0..=degree {
            let mut v: Vec<f64> = t.iter().map(|&ti| ti.powi(k as i32)).collect();
            // Modified Gram-Schmidt, applied twice.
            for _ in 0..2 {
                for q in &rows {
                    let proj = dot(q, &v);
                    v.iter_mut().zip(q).for_each(|(vi, qi)| *vi -= proj * qi);
                }
            }
            let norm = dot(&v, &v).sqrt();
            v.iter_mut().for_each(|vi| *vi /= norm);
            rows.push(v);
        }
        SegmentBasis { len, rows }
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    /// Mean squared residual of the least-squares polynomial fit to `y`.
    pub fn mean_squared_residual(&self, y: &[f64]) -> f64 {
        debug_assert_eq!(y.len(), self.len);
        let mut resid = y.to_vec();
        for q in &self.rows {
            let c = dot(q, &resid);
            resid.iter_mut().zip(q).for_each(|(r, qi)| *r -= c * qi);
        }
        dot(&resid, &resid) / self.len as f64
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// A polynomial `sum_k coeffs[k] * (x - center)^k`.
#[derive(Debug, Clone, PartialEq)]
pub struct Polynomial {
    pub center: f64,
    pub coeffs: Vec<f64>,
}

impl Polynomial {
    pub fn eval(&self, x: f64) -> f64 {
        let t = x - self.center;
        self.coeffs.iter().rev().fold(0.0, |acc, &c| acc * t + c)
    }

    pub fn derivative(&self) -> Polynomial {
        let coeffs = if self.coeffs.len() <= 1 {
            vec![0.0]
        } else {
            self.coeffs
                .iter()
                .enumerate()
                .skip(1)
                .map(|(k, &c)| k as f64 * c)
                .collect()
        };
        Polynomial {
            center: self.center,
            coeffs,
        }
    }

    /// Re-expands the same polynomial around a new center (Taylor shift).
    pub fn recentered(&self, center: f64) -> Polynomial {
        let shift = center - self.center;
        let mut c = self.coeffs.clone();
        let n = c.len();
        // Repeated synthetic division by (t - shift).
        for i in 0..n {
            for j in (i..n - 1).rev() {
                c[j] += shift * c[j + 1];
            }
        }
        Polynomial { center, coeffs: c }
    }
}

/// Least-squares polynomial of the given degree through `(x, y)`.
///
/// Solved by Householder QR on a Vandermonde matrix in centered and
/// scaled abscissae. Returns `None` if the design is rank deficient.
pub fn fit_polynomial(x: &[f64], y: &[f64], degree: usize) -> Option<Polynomial> {
    assert_eq!(x.len(), y.len(), "fit_polynomial: length mismatch");
    let n = x.len();
    let p = degree + 1;
    if n < p {
        return None;
    }
    let lo = x.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = x.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let center = 0.5 * (lo + hi);
    let scale = 0.5 * (hi - lo);
    if !(scale > 0.0) {
        return None;
    }
    // Column-major design matrix.
    let mut a: Vec<Vec<f64>> = (0..p)
        .map(|k| {
            x.iter()
                .map(|&xi| ((xi - center) / scale).powi(k as i32))
                .collect()
        })
        .collect();
    let mut b = y.to_vec();
    let mut diag = vec![0.0; p];
    for k in 0..p {
        let norm = a[k][k..].iter().map(|v| v * v).sum::<f64>().sqrt();
        if norm == 0.0 {
            return None;
        }
        let alpha = if a[k][k] > 0.0 { -norm } else { norm };
        let mut v: Vec<f64> = a[k][k..].to_vec();
        v[0] -= alpha;
        let vnorm2: f64 = v.iter().map(|x| x * x).sum();
        diag[k] = alpha;
        if vnorm2 > 0.0 {
            for col in a.iter_mut().skip(k + 1) {
                let d: f64 = v.iter().zip(&col[k..]).map(|(vi, ci)| vi * ci).sum();
                let f = 2.0 * d / vnorm2;
                col[k..].iter_mut().zip(&v).for_each(|(c, vi)| *c -= f * vi);
            }
            let d: f64 = v.iter().zip(&b[k..]).map(|(vi, bi)| vi * bi).sum();
            let f = 2.0 * d / vnorm2;
            b[k..].iter_mut().zip(&v).for_each(|(c, vi)| *c -= f * vi);
        }
    }
    let max_diag = diag.iter().fold(0.0f64, |m, d| m.max(d.abs()));
    if diag.iter().any(|d| d.abs() <= max_diag * 1e-13) {
        return None;
    }
    // Back substitution on R (diagonal in `diag`, upper part in `a`).
    let mut beta = vec![0.0; p];
    for i in (0..p).rev() {
        let mut s = b[i];
        for j in i + 1..p {
            s -= a[j][i] * beta[j];
        }
        beta[i] = s / diag[i];
    }
    let coeffs = beta
        .iter()
        .enumerate()
        .map(|(k, c)| c / scale.powi(k as i32))
        .collect();
    Some(Polynomial { center, coeffs })
}
