//! Descriptive statistics used across the crate.
//!
//! Quantiles use linear interpolation between order statistics
//! (Hyndman & Fan type 7): for sorted `x[0..n]` and level `p` in `[0, 1]`,
//! `h = (n - 1) p` and the quantile is `x[floor h] + (h - floor h)(x[floor h + 1] - x[floor h])`.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng;

pub fn mean(values: &[f64]) -> Option<f64> {
    if values.is_empty() {
        None
    } else {
        Some(values.iter().sum::<f64>() / values.len() as f64)
    }
}

/// Standard deviation with divisor `N`.
pub fn population_sd(values: &[f64]) -> Option<f64> {
    let m = mean(values)?;
    let var = values.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / values.len() as f64;
    Some(var.sqrt())
}

/// Quantile at level `p` in `[0, 1]` of already sorted values.
pub fn quantile_sorted(sorted: &[f64], p: f64) -> f64 {
    debug_assert!(!sorted.is_empty());
    let p = p.clamp(0.0, 1.0);
    let h = (sorted.len() - 1) as f64 * p;
    let lo = h.floor() as usize;
    let hi = (lo + 1).min(sorted.len() - 1);
    let frac = h - lo as f64;
    if frac == 0.0 {
        sorted[lo]
    } else {
        // Rounding may step one ulp past the upper order statistic.
        (sorted[lo] + frac * (sorted[hi] - sorted[lo])).clamp(sorted[lo], sorted[hi])
    }
}

pub fn sort_values(values: &mut [f64]) {
    values.sort_unstable_by(|a, b| a.total_cmp(b));
}

/// Values at the given percentiles (0-100) using the linear-interpolation
/// estimator.
pub fn percentiles(values: &[f64], ps: &[f64]) -> Result<Vec<f64>> {
    if values.is_empty() {
        return Err(Error::Empty("percentile input"));
    }
    let mut sorted = values.to_vec();
    sort_values(&mut sorted);
    Ok(ps
        .iter()
        .map(|p| quantile_sorted(&sorted, p / 100.0))
        .collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MeanSd {
    pub mean: f64,
    pub sd: f64,
}

impl MeanSd {
    pub fn of(values: &[f64]) -> Option<MeanSd> {
        Some(MeanSd {
            mean: mean(values)?,
            sd: population_sd(values)?,
        })
    }
}

/// Location and spread of one Monte Carlo output.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DistributionSummary {
    pub count: usize,
    pub mean: f64,
    pub sd: f64,
    pub min: f64,
    pub p5: f64,
    pub p25: f64,
    pub p50: f64,
    pub p75: f64,
    pub p95: f64,
    pub max: f64,
}

impl DistributionSummary {
    pub fn of(values: &[f64]) -> Result<DistributionSummary> {
        if values.is_empty() {
            return Err(Error::Empty("distribution"));
        }
        let mut sorted = values.to_vec();
        sort_values(&mut sorted);
        let q = |p| quantile_sorted(&sorted, p);
        Ok(DistributionSummary {
            count: values.len(),
            mean: mean(values).unwrap(),
            sd: population_sd(values).unwrap(),
            min: sorted[0],
            p5: q(0.05),
            p25: q(0.25),
            p50: q(0.5),
            p75: q(0.75),
            p95: q(0.95),
            max: sorted[sorted.len() - 1],
        })
    }

    /// Analytic standard error of the mean.
    pub fn standard_error(&self) -> f64 {
        self.sd / (self.count as f64).sqrt()
    }

    /// `min <= p5 <= p25 <= p50 <= p75 <= p95 <= max`.
    pub fn is_ordered(&self) -> bool {
        let chain = [
            self.min, self.p5, self.p25, self.p50, self.p75, self.p95, self.max,
        ];
        chain.windows(2).all(|w| w[0] <= w[1])
    }
}

/// Bootstrap estimate of the standard error of the mean.
pub fn bootstrap_standard_error(values: &[f64], resamples: usize, seed: u64) -> Result<f64> {
    if values.is_empty() {
        return Err(Error::Empty("bootstrap input"));
    }
    let n = values.len();
    let means: Vec<f64> = (0..resamples)
        .map(|b| {
            let mut r = rng::stream(seed, 0xB007, b as u64);
            (0..n).map(|_| values[r.gen_range(0..n)]).sum::<f64>() / n as f64
        })
        .collect();
    Ok(population_sd(&means).unwrap_or(0.0))
}

/// Shannon entropy (nats) of a probability vector; zero cells are skipped.
pub fn entropy(probabilities: &[f64]) -> f64 {
    probabilities
        .iter()
        .filter(|&&p| p > 0.0)
        .map(|&p| -p * p.ln())
        .sum()
}

/// Fixed-width histogram with bins aligned to multiples of `bin_width`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Histogram {
    pub bin_width: f64,
    /// Index of the first bin; bin `k` covers `[k w, (k + 1) w)`.
    pub first_bin: i64,
    pub counts: Vec<u64>,
}

impl Histogram {
    pub fn build(values: &[f64], bin_width: f64) -> Result<Histogram> {
        if !(bin_width > 0.0 && bin_width.is_finite()) {
            return Err(Error::Config(format!(
                "bin width must be positive, got {bin_width}"
            )));
        }
        if values.is_empty() {
            return Ok(Histogram {
                bin_width,
                first_bin: 0,
                counts: Vec::new(),
            });
        }
        let bin = |v: f64| (v / bin_width).floor() as i64;
        let (lo, hi) = values.iter().fold((i64::MAX, i64::MIN), |(lo, hi), &v| {
            (lo.min(bin(v)), hi.max(bin(v)))
        });
        let mut counts = vec![0u64; (hi - lo + 1) as usize];
        for &v in values {
            counts[(bin(v) - lo) as usize] += 1;
        }
        Ok(Histogram {
            bin_width,
            first_bin: lo,
            counts,
        })
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }

    pub fn bin_start(&self, k: usize) -> f64 {
        (self.first_bin + k as i64) as f64 * self.bin_width
    }

    /// All bins as `(start, end, count)`.
    pub fn bins(&self) -> impl Iterator<Item = (f64, f64, u64)> + '_ {
        self.counts
            .iter()
            .enumerate()
            .map(|(k, &c)| (self.bin_start(k), self.bin_start(k + 1), c))
    }

    /// Fraction of the mass at or above `threshold`.
    pub fn upper_tail(&self, threshold: f64) -> f64 {
        let total = self.total();
        if total == 0 {
            return 0.0;
        }
        let above: u64 = self
            .bins()
            .filter(|(start, _, _)| *start >= threshold)
            .map(|(_, _, c)| c)
            .sum();
        above as f64 / total as f64
    }
}
