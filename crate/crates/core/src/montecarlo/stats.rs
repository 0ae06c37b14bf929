//! Distributional summaries of replication samples.

use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

use crate::error::{Error, Result};

/// One-pass accumulator of the first four central moments.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct MomentAccumulator {
    n: u64,
    mean: f64,
    m2: f64,
    m3: f64,
    m4: f64,
}

impl MomentAccumulator {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, x: f64) {
        let n1 = self.n as f64;
        self.n += 1;
        let n = self.n as f64;
        let delta = x - self.mean;
        let dn = delta / n;
        let dn2 = dn * dn;
        let t1 = delta * dn * n1;
        self.mean += dn;
        self.m4 += t1 * dn2 * (n * n - 3.0 * n + 3.0) + 6.0 * dn2 * self.m2 - 4.0 * dn * self.m3;
        self.m3 += t1 * dn * (n - 2.0) - 3.0 * dn * self.m2;
        self.m2 += t1;
    }

    pub fn count(&self) -> u64 {
        self.n
    }

    pub fn mean(&self) -> f64 {
        self.mean
    }

    /// Unbiased variance.
    pub fn variance(&self) -> f64 {
        if self.n < 2 {
            return 0.0;
        }
        self.m2 / (self.n - 1) as f64
    }

    /// `m₃/m₂^{3/2}` from the biased central moments.
    pub fn skewness(&self) -> f64 {
        if self.m2 == 0.0 {
            return 0.0;
        }
        let n = self.n as f64;
        (self.m3 / n) / (self.m2 / n).powf(1.5)
    }

    /// Excess kurtosis `m₄/m₂² - 3`.
    pub fn excess_kurtosis(&self) -> f64 {
        if self.m2 == 0.0 {
            return 0.0;
        }
        let n = self.n as f64;
        (self.m4 / n) / (self.m2 / n).powi(2) - 3.0
    }

    /// k-statistics `k₁ … k_max` (unbiased cumulant estimators).
    pub fn k_statistics(&self, max_order: usize) -> Vec<f64> {
        let n = self.n as f64;
        let (m2, m3, m4) = (self.m2 / n, self.m3 / n, self.m4 / n);
        let k = [
            self.mean,
            n / (n - 1.0) * m2,
            n * n / ((n - 1.0) * (n - 2.0)) * m3,
            n * n * ((n + 1.0) * m4 - 3.0 * (n - 1.0) * m2 * m2) / ((n - 1.0) * (n - 2.0) * (n - 3.0)),
        ];
        k[..max_order].to_vec()
    }
}

/// Standard error of the sample skewness of `n` normal draws.
pub fn skewness_se(n: usize) -> f64 {
    let n = n as f64;
    (6.0 * n * (n - 1.0) / ((n - 2.0) * (n + 1.0) * (n + 3.0))).sqrt()
}

/// Unbiased cumulant estimates `κ₁ … κ_max` (`max_order` in `2..=4`).
pub fn empirical_cumulants(samples: &[f64], max_order: usize) -> Result<Vec<f64>> {
    if !(2..=4).contains(&max_order) {
        return Err(Error::domain(format!("cumulant order must be in 2..=4, got {max_order}")));
    }
    if samples.len() < 10 {
        return Err(Error::domain(format!("need at least 10 samples, got {}", samples.len())));
    }
    let mut acc = MomentAccumulator::new();
    samples.iter().for_each(|&x| acc.push(x));
    Ok(acc.k_statistics(max_order))
}

/// Kolmogorov–Smirnov distance between the empirical CDF and `cdf`.
pub fn ks_distance<F: Fn(f64) -> f64>(samples: &[f64], cdf: F) -> Result<f64> {
    if samples.is_empty() {
        return Err(Error::domain("KS distance of an empty sample"));
    }
    let mut sorted = samples.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len() as f64;
    let mut d: f64 = 0.0;
    for (i, &x) in sorted.iter().enumerate() {
        let f = cdf(x);
        d = d.max((i + 1) as f64 / n - f).max(f - i as f64 / n);
    }
    Ok(d)
}

/// KS distance to the standard normal.
pub fn ks_statistic(samples: &[f64]) -> Result<f64> {
    let z = Normal::standard();
    ks_distance(samples, |x| z.cdf(x))
}

/// KS distance to the normal with the sample's own mean and standard
/// deviation. Descriptive only: the critical values of [`ks_statistic`] do
/// not account for the fitted parameters.
pub fn ks_statistic_fitted(samples: &[f64]) -> Result<f64> {
    let mut acc = MomentAccumulator::new();
    samples.iter().for_each(|&x| acc.push(x));
    let sd = acc.variance().sqrt();
    if !(sd > 0.0) {
        return Err(Error::Degenerate("fitted normal needs a nonconstant sample".into()));
    }
    let z = Normal::new(acc.mean(), sd).map_err(|e| Error::domain(e.to_string()))?;
    ks_distance(samples, |x| z.cdf(x))
}

/// Asymptotic 1% critical value `1.63/√n` of the one-sample KS distance.
pub fn ks_critical_1pct(n: usize) -> f64 {
    1.63 / (n as f64).sqrt()
}

/// Quantile by linear interpolation between order statistics.
fn quantile(sorted: &[f64], p: f64) -> f64 {
    let pos = p * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    sorted[lo] + (pos - lo as f64) * (sorted[hi] - sorted[lo])
}

/// Histogram with explicit edges; bin `i` is `[edges[i], edges[i+1])`, the
/// last bin closed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Histogram {
    pub edges: Vec<f64>,
    pub counts: Vec<u64>,
}

const MAX_BINS: usize = 1000;

impl Histogram {
    /// Counts of `samples` in the bins given by `edges`. Values outside the
    /// edges are not counted.
    pub fn with_edges(samples: &[f64], edges: Vec<f64>) -> Self {
        let bins = edges.len().saturating_sub(1);
        let mut counts = vec![0u64; bins];
        if bins > 0 {
            let (lo, hi) = (edges[0], edges[bins]);
            for &x in samples {
                if x < lo || x > hi {
                    continue;
                }
                let i = edges.partition_point(|&e| e <= x).saturating_sub(1).min(bins - 1);
                counts[i] += 1;
            }
        }
        Histogram { edges, counts }
    }

    /// Freedman–Diaconis bins over the sample range: width
    /// `2·IQR·n^{-1/3}`, at most 1000 bins, a single bin when the sample is
    /// constant or the IQR vanishes.
    pub fn freedman_diaconis(samples: &[f64]) -> Result<Self> {
        if samples.is_empty() {
            return Err(Error::domain("histogram of an empty sample"));
        }
        let mut sorted = samples.to_vec();
        sorted.sort_by(f64::total_cmp);
        let (min, max) = (sorted[0], sorted[sorted.len() - 1]);
        let iqr = quantile(&sorted, 0.75) - quantile(&sorted, 0.25);
        let width = 2.0 * iqr * (sorted.len() as f64).powf(-1.0 / 3.0);
        let bins = if width > 0.0 && max > min {
            (((max - min) / width).ceil() as usize).clamp(1, MAX_BINS)
        } else {
            1
        };
        let edges = if max > min {
            let w = (max - min) / bins as f64;
            let mut e: Vec<f64> = (0..bins).map(|i| min + i as f64 * w).collect();
            e.push(max);
            e
        } else {
            vec![min - 0.5, max + 0.5]
        };
        Ok(Self::with_edges(samples, edges))
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }
}
