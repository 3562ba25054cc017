//! Discrete distributions over the support `{1, …, k}`: construction,
//! sampling, and the exact functionals and divergences used by the
//! estimators and their tests.

use std::fmt;
use std::str::FromStr;

use rand::Rng;
use rand_distr::{Distribution, Exp1, WeightedAliasIndex};

use crate::numeric::compensated_sum;
use crate::{Error, Result};

const SUM_TOLERANCE: f64 = 1e-12;

/// A probability vector over support elements `1..=k`.
///
/// Immutable after construction. Sampling goes through a precomputed alias
/// table, so each draw is O(1).
#[derive(Clone)]
pub struct DiscreteDistribution {
    probs: Vec<f64>,
    alias: WeightedAliasIndex<f64>,
}

impl fmt::Debug for DiscreteDistribution {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("DiscreteDistribution")
            .field("k", &self.probs.len())
            .field("probs", &self.probs)
            .finish()
    }
}

impl PartialEq for DiscreteDistribution {
    fn eq(&self, other: &Self) -> bool {
        self.probs == other.probs
    }
}

impl DiscreteDistribution {
    /// Builds a distribution from non-negative weights, normalizing them.
    pub fn from_weights(weights: Vec<f64>) -> Result<Self> {
        if weights.is_empty() {
            return Err(Error::invalid("support size k must be at least 1"));
        }
        if let Some(w) = weights.iter().find(|w| !w.is_finite() || **w < 0.0) {
            return Err(Error::invalid(format!(
                "weight {w} is negative or not finite"
            )));
        }
        let total = compensated_sum(weights.iter().copied());
        if total <= 0.0 {
            return Err(Error::invalid("weights sum to zero"));
        }
        let probs: Vec<f64> = weights.into_iter().map(|w| w / total).collect();
        Self::from_probs(probs)
    }

    /// Builds a distribution from an already normalized probability vector.
    pub fn from_probs(probs: Vec<f64>) -> Result<Self> {
        if probs.is_empty() {
            return Err(Error::invalid("support size k must be at least 1"));
        }
        if let Some(p) = probs.iter().find(|p| !p.is_finite() || **p < 0.0) {
            return Err(Error::invalid(format!(
                "probability {p} is negative or not finite"
            )));
        }
        let total = compensated_sum(probs.iter().copied());
        if (total - 1.0).abs() > SUM_TOLERANCE {
            return Err(Error::invalid(format!(
                "probabilities sum to {total}, not 1"
            )));
        }
        let alias = WeightedAliasIndex::new(probs.clone())
            .map_err(|e| Error::invalid(format!("cannot build sampler: {e}")))?;
        Ok(Self { probs, alias })
    }

    pub fn uniform(k: usize) -> Result<Self> {
        if k == 0 {
            return Err(Error::invalid("uniform: k must be at least 1"));
        }
        Self::from_probs(vec![1.0 / k as f64; k])
    }

    /// `pᵢ ∝ 1/i`.
    pub fn power_law(k: usize) -> Result<Self> {
        if k == 0 {
            return Err(Error::invalid("power_law: k must be at least 1"));
        }
        Self::from_weights((1..=k).map(|i| 1.0 / i as f64).collect())
    }

    /// `pᵢ ∝ exp(−i)`. Weights are computed as `exp(−(i−1))` so the head
    /// never underflows; the tail beyond i ≈ 745 underflows to exactly 0.
    pub fn exponential(k: usize) -> Result<Self> {
        if k == 0 {
            return Err(Error::invalid("exponential: k must be at least 1"));
        }
        Self::from_weights((0..k).map(|i| (-(i as f64)).exp()).collect())
    }

    /// Point mass on element 1 of a support of size `k`.
    pub fn point_mass(k: usize) -> Result<Self> {
        if k == 0 {
            return Err(Error::invalid("point_mass: k must be at least 1"));
        }
        let mut probs = vec![0.0; k];
        probs[0] = 1.0;
        Self::from_probs(probs)
    }

    /// Normalized vector of `k` independent Exponential(1) draws, i.e. a
    /// uniformly random point of the simplex.
    pub fn random_simplex<R: Rng + ?Sized>(k: usize, rng: &mut R) -> Result<Self> {
        if k == 0 {
            return Err(Error::invalid("random_simplex: k must be at least 1"));
        }
        let weights: Vec<f64> = (0..k).map(|_| Exp1.sample(rng)).collect();
        Self::from_weights(weights)
    }

    pub fn k(&self) -> usize {
        self.probs.len()
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    /// Probability of element `i` (1-based).
    pub fn prob(&self, i: usize) -> f64 {
        self.probs[i - 1]
    }

    /// Draws one support element id in `1..=k`.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> usize {
        self.alias.sample(rng) + 1
    }

    pub fn sample_n<R: Rng + ?Sized>(&self, n: usize, rng: &mut R) -> Vec<usize> {
        (0..n).map(|_| self.sample(rng)).collect()
    }

    /// Exact `Σ pᵢ²`.
    pub fn collision_probability(&self) -> f64 {
        compensated_sum(self.probs.iter().map(|p| p * p))
    }

    /// `Σ pᵢ^order`.
    pub fn frequency_moment(&self, order: f64) -> Result<f64> {
        if !(order > 0.0) || !order.is_finite() {
            return Err(Error::invalid(format!(
                "moment order must be positive, got {order}"
            )));
        }
        if order == 2.0 {
            return Ok(self.collision_probability());
        }
        Ok(compensated_sum(
            self.probs
                .iter()
                .filter(|p| **p > 0.0)
                .map(|p| p.powf(order)),
        ))
    }

    /// Half the L1 distance.
    pub fn tv_distance(&self, other: &Self) -> Result<f64> {
        self.check_same_support(other)?;
        let l1 = compensated_sum(
            self.probs
                .iter()
                .zip(&other.probs)
                .map(|(p, q)| (p - q).abs()),
        );
        Ok(0.5 * l1)
    }

    /// `KL(self ‖ other)` in nats, with `0 · ln 0 = 0`.
    pub fn kl_divergence(&self, other: &Self) -> Result<f64> {
        self.check_same_support(other)?;
        let mut terms = Vec::with_capacity(self.k());
        for (i, (&p, &q)) in self.probs.iter().zip(&other.probs).enumerate() {
            if p == 0.0 {
                continue;
            }
            if q == 0.0 {
                return Err(Error::DivergenceUndefined(format!(
                    "element {} has mass {p} but zero mass in the reference distribution",
                    i + 1
                )));
            }
            terms.push(p * (p / q).ln());
        }
        Ok(compensated_sum(terms).max(0.0))
    }

    fn check_same_support(&self, other: &Self) -> Result<()> {
        if self.k() != other.k() {
            return Err(Error::invalid(format!(
                "support sizes differ: {} vs {}",
                self.k(),
                other.k()
            )));
        }
        Ok(())
    }
}

/// The two-point pair used as a lower-bound witness:
/// `p0 = (1/(2(K−1)), …, 1/(2(K−1)), 1/2)` and
/// `p1 = ((1−τ)/(2(K−1)), …, (1−τ)/(2(K−1)), (1+τ)/2)`.
#[derive(Clone, Debug)]
pub struct TwoPointPair {
    pub p0: DiscreteDistribution,
    pub p1: DiscreteDistribution,
    pub tau: f64,
    pub support: usize,
}

impl TwoPointPair {
    pub fn new(support: usize, tau: f64) -> Result<Self> {
        if support < 2 {
            return Err(Error::invalid(format!(
                "two-point pair needs K >= 2, got {support}"
            )));
        }
        if !(tau > 0.0 && tau < 1.0) {
            return Err(Error::invalid(format!("tau must lie in (0, 1), got {tau}")));
        }
        Ok(Self {
            p0: two_point_member(support, 0.0)?,
            p1: two_point_member(support, tau)?,
            tau,
            support,
        })
    }

    pub fn side(&self, side: u8) -> &DiscreteDistribution {
        if side == 0 {
            &self.p0
        } else {
            &self.p1
        }
    }
}

fn two_point_member(support: usize, tau: f64) -> Result<DiscreteDistribution> {
    let body = (1.0 - tau) / (2.0 * (support - 1) as f64);
    let mut probs = vec![body; support - 1];
    probs.push((1.0 + tau) / 2.0);
    DiscreteDistribution::from_probs(probs)
}

/// Parsed form of a distribution spec string such as `uniform:k=1000` or
/// `twopoint:k=5,tau=0.3,side=1`.
#[derive(Clone, Debug, PartialEq)]
pub enum DistSpec {
    Uniform { k: usize },
    PowerLaw { k: usize },
    Exponential { k: usize },
    TwoPoint { k: usize, tau: f64, side: u8 },
}

impl DistSpec {
    pub fn build(&self) -> Result<DiscreteDistribution> {
        match *self {
            DistSpec::Uniform { k } => DiscreteDistribution::uniform(k),
            DistSpec::PowerLaw { k } => DiscreteDistribution::power_law(k),
            DistSpec::Exponential { k } => DiscreteDistribution::exponential(k),
            DistSpec::TwoPoint { k, tau, side } => {
                Ok(TwoPointPair::new(k, tau)?.side(side).clone())
            }
        }
    }

    pub fn k(&self) -> usize {
        match *self {
            DistSpec::Uniform { k }
            | DistSpec::PowerLaw { k }
            | DistSpec::Exponential { k }
            | DistSpec::TwoPoint { k, .. } => k,
        }
    }
}

impl fmt::Display for DistSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            DistSpec::Uniform { k } => write!(f, "uniform:k={k}"),
            DistSpec::PowerLaw { k } => write!(f, "powerlaw:k={k}"),
            DistSpec::Exponential { k } => write!(f, "exponential:k={k}"),
            DistSpec::TwoPoint { k, tau, side } => {
                write!(f, "twopoint:k={k},tau={tau},side={side}")
            }
        }
    }
}

impl FromStr for DistSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let (family, rest) = s
            .split_once(':')
            .ok_or_else(|| Error::parse(s, "expected `<family>:<key>=<value>,…`"))?;

        let mut k = None;
        let mut tau = None;
        let mut side = None;
        for pair in rest.split(',') {
            let (key, value) = pair
                .split_once('=')
                .ok_or_else(|| Error::parse(pair, "expected `key=value`"))?;
            match key.trim() {
                "k" => {
                    k = Some(
                        value
                            .trim()
                            .parse::<usize>()
                            .map_err(|_| Error::parse(value, "k must be a non-negative integer"))?,
                    )
                }
                "tau" => {
                    tau = Some(
                        value
                            .trim()
                            .parse::<f64>()
                            .map_err(|_| Error::parse(value, "tau must be a real number"))?,
                    )
                }
                "side" => {
                    side = Some(match value.trim() {
                        "0" => 0u8,
                        "1" => 1u8,
                        _ => return Err(Error::parse(value, "side must be 0 or 1")),
                    })
                }
                _ => return Err(Error::parse(key, "unknown key")),
            }
        }

        let k = k.ok_or_else(|| Error::parse(s, "missing `k=`"))?;
        if k == 0 {
            return Err(Error::parse("k=0", "k must be at least 1"));
        }
        let no_extra = |spec: DistSpec| {
            if tau.is_some() || side.is_some() {
                Err(Error::parse(s, format!("`{family}` takes only `k`")))
            } else {
                Ok(spec)
            }
        };
        match family.trim() {
            "uniform" => no_extra(DistSpec::Uniform { k }),
            "powerlaw" => no_extra(DistSpec::PowerLaw { k }),
            "exponential" => no_extra(DistSpec::Exponential { k }),
            "twopoint" => Ok(DistSpec::TwoPoint {
                k,
                tau: tau.ok_or_else(|| Error::parse(s, "missing `tau=`"))?,
                side: side.ok_or_else(|| Error::parse(s, "missing `side=`"))?,
            }),
            other => Err(Error::parse(other, "unknown distribution family")),
        }
    }
}
