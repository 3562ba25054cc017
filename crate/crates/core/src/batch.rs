//! Non-private batch estimators and testing-by-learning.

use std::collections::HashMap;
use std::fmt;
use std::str::FromStr;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::distributions::DiscreteDistribution;
use crate::numeric::ceil_tol;
use crate::{Error, Result};

fn value_counts(samples: &[usize]) -> Vec<u64> {
    let mut counts: HashMap<usize, u64> = HashMap::new();
    for &x in samples {
        *counts.entry(x).or_insert(0) += 1;
    }
    counts.into_values().collect()
}

/// `(Σ_v c_v² − n) / (n(n−1))` from value counts.
pub fn u_statistic_of_counts(counts: &[u64], n: u64) -> Result<f64> {
    if n < 2 {
        return Err(Error::invalid(format!("U-statistic needs n >= 2, got {n}")));
    }
    let sum_sq: u128 = counts.iter().map(|&c| u128::from(c) * u128::from(c)).sum();
    let n = u128::from(n);
    Ok((sum_sq - n) as f64 / (n * (n - 1)) as f64)
}

/// All-pairs collision frequency `2/(n(n−1)) Σ_{i<j} 1{xᵢ = xⱼ}`, in O(n).
pub fn u_statistic(samples: &[usize]) -> Result<f64> {
    u_statistic_of_counts(&value_counts(samples), samples.len() as u64)
}

/// Collision probability of the empirical distribution, `Σ_v (c_v/n)²`.
pub fn plug_in(samples: &[usize]) -> Result<f64> {
    if samples.is_empty() {
        return Err(Error::invalid("plug-in estimate needs at least one sample"));
    }
    let n = samples.len() as f64;
    let sum_sq: u128 = value_counts(samples)
        .iter()
        .map(|&c| u128::from(c) * u128::from(c))
        .sum();
    Ok(sum_sq as f64 / (n * n))
}

fn validate(epsilon: f64, delta: f64) -> Result<()> {
    if !(epsilon > 0.0 && epsilon <= 1.0) {
        return Err(Error::invalid(format!(
            "epsilon must lie in (0, 1], got {epsilon}"
        )));
    }
    if !(delta > 0.0 && delta <= 1.0) {
        return Err(Error::invalid(format!(
            "delta must lie in (0, 1], got {delta}"
        )));
    }
    Ok(())
}

/// `⌈(8/ε²) · max(200 · F_{3/2}², ln(2/δ))⌉`.
pub fn plug_in_sample_size(epsilon: f64, delta: f64, f32_bound: f64) -> Result<u64> {
    validate(epsilon, delta)?;
    if !(f32_bound >= 0.0) {
        return Err(Error::invalid(format!(
            "F_3/2 bound must be >= 0, got {f32_bound}"
        )));
    }
    let inner = (200.0 * f32_bound * f32_bound).max((2.0 / delta).ln());
    Ok(ceil_tol(8.0 / (epsilon * epsilon) * inner) as u64)
}

/// `⌈max(32 (F₃ − F₂²) ln(4/δ) / ε², (128 + 1/6) ln(4/δ) / ε)⌉`.
pub fn u_statistic_sample_size(epsilon: f64, delta: f64, variance_bound: f64) -> Result<u64> {
    validate(epsilon, delta)?;
    if !(variance_bound >= 0.0) {
        return Err(Error::invalid(format!(
            "variance bound must be >= 0, got {variance_bound}"
        )));
    }
    let log_term = (4.0 / delta).ln();
    let variance_part = 32.0 * variance_bound * log_term / (epsilon * epsilon);
    let range_part = (128.0 + 1.0 / 6.0) * log_term / epsilon;
    Ok(ceil_tol(variance_part.max(range_part)) as u64)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Estimator {
    #[serde(rename = "plugin")]
    PlugIn,
    #[serde(rename = "ustat")]
    UStatistic,
}

impl Estimator {
    pub fn estimate(self, samples: &[usize]) -> Result<f64> {
        match self {
            Estimator::PlugIn => plug_in(samples),
            Estimator::UStatistic => u_statistic(samples),
        }
    }
}

impl fmt::Display for Estimator {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Estimator::PlugIn => "plugin",
            Estimator::UStatistic => "ustat",
        })
    }
}

impl FromStr for Estimator {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "plugin" | "plug_in" => Ok(Estimator::PlugIn),
            "ustat" | "u_statistic" => Ok(Estimator::UStatistic),
            other => Err(Error::parse(other, "estimator must be `plugin` or `ustat`")),
        }
    }
}

/// Sample-size recipe for a batch tester. Moment bounds default to 1, which
/// holds for every distribution.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BatchSampleSizeSpec {
    pub estimator: Estimator,
    pub epsilon: f64,
    pub delta: f64,
    /// Upper bound on `F_{3/2}(p)`; plug-in only.
    pub f32_bound: Option<f64>,
    /// Upper bound on `F₃(p) − F₂(p)²`; U-statistic only.
    pub variance_bound: Option<f64>,
}

impl BatchSampleSizeSpec {
    pub fn new(estimator: Estimator, epsilon: f64, delta: f64) -> Self {
        Self {
            estimator,
            epsilon,
            delta,
            f32_bound: None,
            variance_bound: None,
        }
    }

    pub fn sample_size(&self) -> Result<u64> {
        match self.estimator {
            Estimator::PlugIn => {
                plug_in_sample_size(self.epsilon, self.delta, self.f32_bound.unwrap_or(1.0))
            }
            Estimator::UStatistic => u_statistic_sample_size(
                self.epsilon,
                self.delta,
                self.variance_bound.unwrap_or(1.0),
            ),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BatchOutcome {
    pub reject: bool,
    pub estimate: f64,
    pub n: u64,
}

/// Testing by learning: draw the prescribed number of samples, estimate
/// `C(p)` to additive error `ε/2`, and reject iff `|Ĉ − c₀| > ε/2`.
pub fn batch_test<R: Rng + ?Sized>(
    d: &DiscreteDistribution,
    c0: f64,
    spec: &BatchSampleSizeSpec,
    rng: &mut R,
) -> Result<BatchOutcome> {
    let n = spec.sample_size()?.max(2);
    let samples = d.sample_n(n as usize, rng);
    let estimate = spec.estimator.estimate(&samples)?;
    Ok(BatchOutcome {
        reject: (estimate - c0).abs() > spec.epsilon / 2.0,
        estimate,
        n,
    })
}
