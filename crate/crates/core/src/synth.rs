//! Seeded generators of synthetic series with known scaling properties.
//!
//! All randomness comes from ChaCha8 (portable, reproducible across
//! platforms) seeded from a 64-bit seed. Independent draws use separate
//! ChaCha streams of the same key, so the output never depends on thread
//! scheduling.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rustfft::num_complex::Complex;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::series::TimeSeries;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum GeneratorKind {
    GaussianWhite,
    Ar1 {
        phi: f64,
    },
    Fgn {
        hurst: f64,
    },
    BinomialCascade {
        a: f64,
    },
    /// Symmetric power-law tails: `P(|X| > x) = x^-zeta` for `x >= 1`,
    /// with a random sign.
    Pareto {
        zeta: f64,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GeneratorSpec {
    pub kind: GeneratorKind,
    pub length: usize,
    pub seed: u64,
}

impl GeneratorSpec {
    pub fn new(kind: GeneratorKind, length: usize, seed: u64) -> Self {
        GeneratorSpec { kind, length, seed }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidSpec(m));
        if self.length == 0 {
            return bad("length must be positive".into());
        }
        match self.kind {
            GeneratorKind::GaussianWhite => {}
            GeneratorKind::Ar1 { phi } => {
                if !(phi > -1.0 && phi < 1.0) {
                    return bad(format!("AR(1) coefficient {phi} outside (-1, 1)"));
                }
            }
            GeneratorKind::Fgn { hurst } => {
                if !(hurst > 0.0 && hurst < 1.0) {
                    return bad(format!("Hurst exponent {hurst} outside (0, 1)"));
                }
                if !self.length.is_power_of_two() {
                    return bad(format!("fGn length {} is not a power of two", self.length));
                }
            }
            GeneratorKind::BinomialCascade { a } => {
                if !(a > 0.0 && a < 1.0) {
                    return bad(format!("cascade multiplier {a} outside (0, 1)"));
                }
                if !self.length.is_power_of_two() {
                    return bad(format!(
                        "cascade length {} is not a power of two",
                        self.length
                    ));
                }
            }
            GeneratorKind::Pareto { zeta } => {
                if !(zeta > 1.0) || !zeta.is_finite() {
                    return bad(format!("tail exponent {zeta} must exceed 1"));
                }
            }
        }
        Ok(())
    }
}

fn stream(seed: u64, id: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(id);
    rng
}

pub fn generate(spec: &GeneratorSpec) -> Result<TimeSeries> {
    spec.validate()?;
    let n = spec.length;
    let values = match spec.kind {
        GeneratorKind::GaussianWhite => {
            let mut rng = stream(spec.seed, 0);
            (0..n).map(|_| rng.sample(StandardNormal)).collect()
        }
        GeneratorKind::Ar1 { phi } => ar1(phi, n, spec.seed),
        GeneratorKind::Fgn { hurst } => fgn(hurst, n, spec.seed),
        GeneratorKind::BinomialCascade { a } => binomial_cascade(a, n),
        GeneratorKind::Pareto { zeta } => {
            let mut rng = stream(spec.seed, 0);
            (0..n)
                .map(|_| {
                    // 1 - u lies in (0, 1], so the inverse CDF stays finite.
                    let u: f64 = 1.0 - rng.random::<f64>();
                    let mag = u.powf(-1.0 / zeta);
                    if rng.random::<bool>() {
                        mag
                    } else {
                        -mag
                    }
                })
                .collect()
        }
    };
    Ok(TimeSeries::new(values)?.labeled(describe(&spec.kind)))
}

fn describe(kind: &GeneratorKind) -> String {
    match *kind {
        GeneratorKind::GaussianWhite => "gaussian_white".into(),
        GeneratorKind::Ar1 { phi } => format!("ar1(phi={phi})"),
        GeneratorKind::Fgn { hurst } => format!("fgn(H={hurst})"),
        GeneratorKind::BinomialCascade { a } => format!("binomial_cascade(a={a})"),
        GeneratorKind::Pareto { zeta } => format!("pareto(zeta={zeta})"),
    }
}

fn ar1(phi: f64, n: usize, seed: u64) -> Vec<f64> {
    let mut rng = stream(seed, 0);
    // Start from the stationary law N(0, 1 / (1 - phi^2)).
    let z: f64 = rng.sample(StandardNormal);
    let mut x = z / (1.0 - phi * phi).sqrt();
    let mut out = Vec::with_capacity(n);
    for _ in 0..n {
        out.push(x);
        let e: f64 = rng.sample(StandardNormal);
        x = phi * x + e;
    }
    out
}

/// Autocovariance of unit-variance fractional Gaussian noise at lag `k`.
pub fn fgn_autocovariance(hurst: f64, k: usize) -> f64 {
    let h2 = 2.0 * hurst;
    let k = k as f64;
    0.5 * ((k + 1.0).powf(h2) - 2.0 * k.powf(h2) + (k - 1.0).abs().powf(h2))
}

/// Exact fGn by circulant embedding (Davies-Harte).
fn fgn(hurst: f64, n: usize, seed: u64) -> Vec<f64> {
    let m = 2 * n;
    let mut row: Vec<Complex<f64>> = (0..m)
        .map(|j| {
            let k = if j <= n { j } else { m - j };
            Complex::new(fgn_autocovariance(hurst, k), 0.0)
        })
        .collect();
    let mut planner = FftPlanner::new();
    let fft = planner.plan_fft_forward(m);
    fft.process(&mut row);
    // Eigenvalues are non-negative for fGn; clamp round-off.
    let eig: Vec<f64> = row.iter().map(|c| c.re.max(0.0)).collect();

    let mut re_rng = stream(seed, 0);
    let mut im_rng = stream(seed, 1);
    let mut w: Vec<Complex<f64>> = eig
        .iter()
        .map(|&lam| {
            let a: f64 = StandardNormal.sample(&mut re_rng);
            let b: f64 = StandardNormal.sample(&mut im_rng);
            Complex::new(a, b) * (lam / m as f64).sqrt()
        })
        .collect();
    fft.process(&mut w);
    w.into_iter().take(n).map(|c| c.re).collect()
}

/// Deterministic dyadic multiplicative cascade summing to one.
fn binomial_cascade(a: f64, n: usize) -> Vec<f64> {
    let b = 1.0 - a;
    let mut cur = vec![1.0];
    while cur.len() < n {
        cur = cur.iter().flat_map(|&v| [v * a, v * b]).collect();
    }
    cur
}

#[cfg(test)]
mod tests {
    use super::*;

    fn gen(kind: GeneratorKind, n: usize, seed: u64) -> Vec<f64> {
        generate(&GeneratorSpec::new(kind, n, seed))
            .unwrap()
            .values()
            .to_vec()
    }

    #[test]
    fn cascade_multiset() {
        let (a, b) = (0.6, 0.4);
        let mut v = gen(GeneratorKind::BinomialCascade { a }, 8, 0);
        v.sort_by(f64::total_cmp);
        let mut expect = vec![
            a * a * a,
            a * a * b,
            a * a * b,
            a * a * b,
            a * b * b,
            a * b * b,
            a * b * b,
            b * b * b,
        ];
        expect.sort_by(f64::total_cmp);
        for (x, y) in v.iter().zip(&expect) {
            assert!((x - y).abs() < 1e-15);
        }
        assert!((v.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn cascade_sums_to_one_at_every_level() {
        for k in 0..=14 {
            let v = gen(GeneratorKind::BinomialCascade { a: 0.7 }, 1 << k, 0);
            assert!((v.iter().sum::<f64>() - 1.0).abs() < 1e-12, "level {k}");
        }
    }

    #[test]
    fn rejects_invalid_specs() {
        let bad = [
            GeneratorSpec::new(GeneratorKind::Fgn { hurst: 0.7 }, 1000, 0),
            GeneratorSpec::new(GeneratorKind::Fgn { hurst: 1.2 }, 1024, 0),
            GeneratorSpec::new(GeneratorKind::BinomialCascade { a: 0.6 }, 12, 0),
            GeneratorSpec::new(GeneratorKind::Ar1 { phi: 1.0 }, 12, 0),
            GeneratorSpec::new(GeneratorKind::Pareto { zeta: 0.9 }, 12, 0),
            GeneratorSpec::new(GeneratorKind::GaussianWhite, 0, 0),
        ];
        for spec in bad {
            assert!(
                matches!(generate(&spec), Err(Error::InvalidSpec(_))),
                "{spec:?}"
            );
        }
    }

    #[test]
    fn deterministic_per_seed() {
        let kinds = [
            GeneratorKind::GaussianWhite,
            GeneratorKind::Ar1 { phi: 0.3 },
            GeneratorKind::Fgn { hurst: 0.3 },
            GeneratorKind::Pareto { zeta: 2.5 },
        ];
        for kind in kinds {
            let a = gen(kind, 256, 11);
            let b = gen(kind, 256, 11);
            let c = gen(kind, 256, 12);
            let bits = |v: &[f64]| v.iter().map(|x| x.to_bits()).collect::<Vec<_>>();
            assert_eq!(bits(&a), bits(&b));
            assert_ne!(a, c);
        }
    }

    /// Sample lag-1 autocorrelation, computed directly.
    fn lag1(v: &[f64]) -> f64 {
        let n = v.len() as f64;
        let m = v.iter().sum::<f64>() / n;
        let var = v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / n;
        let c = v.windows(2).map(|w| (w[0] - m) * (w[1] - m)).sum::<f64>() / (n - 1.0);
        c / var
    }

    #[test]
    fn fgn_lag1_autocovariance() {
        let h = 0.7;
        let n = 1 << 14;
        let target = 0.5 * (2f64.powf(2.0 * h) - 2.0);
        assert!((fgn_autocovariance(h, 1) - target).abs() < 1e-15);
        let v = gen(GeneratorKind::Fgn { hurst: h }, n, 3);
        let c1 = lag1(&v);
        // Long memory inflates the estimator's spread well beyond 1/sqrt(N);
        // 3 standard errors with a conservative se of 2/sqrt(N).
        let se = 2.0 / (n as f64).sqrt();
        assert!(
            (c1 - target).abs() < 3.0 * se,
            "c1 = {c1}, target = {target}"
        );
    }

    #[test]
    fn fgn_half_is_white() {
        let n = 1 << 14;
        for seed in 0..5 {
            let v = gen(GeneratorKind::Fgn { hurst: 0.5 }, n, seed);
            assert!(lag1(&v).abs() < 3.0 / (n as f64).sqrt());
        }
    }

    #[test]
    fn ar1_lag1() {
        let n = 100_000;
        let v = gen(GeneratorKind::Ar1 { phi: 0.5 }, n, 5);
        // Bartlett: var(r1) = (1 - phi^2) / N
        let se = ((1.0 - 0.25) / n as f64).sqrt();
        assert!((lag1(&v) - 0.5).abs() < 3.0 * se);
    }

    #[test]
    fn gaussian_moments() {
        let v = gen(GeneratorKind::GaussianWhite, 100_000, 9);
        let n = v.len() as f64;
        let m = v.iter().sum::<f64>() / n;
        let s = (v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / n).sqrt();
        assert!(m.abs() < 4.0 / n.sqrt());
        assert!((s - 1.0).abs() < 0.02);
    }

    #[test]
    fn pareto_tail_probability() {
        let zeta = 3.0;
        let n = 100_000;
        let v = gen(GeneratorKind::Pareto { zeta }, n, 1);
        assert!(v.iter().all(|x| x.abs() >= 1.0));
        for x in [2.0f64, 4.0] {
            let p = x.powf(-zeta);
            let emp = v.iter().filter(|v| v.abs() > x).count() as f64 / n as f64;
            let se = (p * (1.0 - p) / n as f64).sqrt();
            assert!((emp - p).abs() < 4.0 * se, "x={x}: {emp} vs {p}");
        }
    }
}
