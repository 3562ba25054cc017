//! Anytime sequential test of `H₀: C(p) = c₀`.
//!
//! Samples arrive one at a time. For sample `i` the tester adds
//! `T_i = #{j < i : x_j = x_i} − κ (i−1) c₀` to a running sum and rejects as
//! soon as
//!
//! ```text
//! | 2/(i(i−1)) · Σ_{j≤i} T_j |  >  3.2 · √((ln ln i + 0.72 ln(20.8/δ)) / i)
//! ```
//!
//! The left side equals `U_i − κ c₀`, where `U_i` is the all-pairs collision
//! frequency of the first `i` samples. With the default centering `κ = 1`
//! it is an unbiased estimate of `C(p) − c₀`. [`Centering::Literal`] uses
//! `κ = 2`, which drifts to `−c₀` under the null and is kept only so that
//! form can be reproduced and compared.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::distributions::DiscreteDistribution;
use crate::{Error, Result};

/// Multiplier `κ` on the `(i−1) c₀` centering term of `T_i`.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Centering {
    /// `κ = 1`; the statistic is `U_i − c₀`.
    #[default]
    Unbiased,
    /// `κ = 2`; the statistic is `U_i − 2c₀`.
    Literal,
}

impl Centering {
    fn factor(self) -> f64 {
        match self {
            Centering::Unbiased => 1.0,
            Centering::Literal => 2.0,
        }
    }
}

/// `3.2 · √((max(ln ln i, 0) + 0.72 ln(20.8/δ)) / i)`.
pub fn threshold(i: u64, delta: f64) -> Result<f64> {
    scaled_threshold(i, delta, 1.0)
}

/// `scale` times [`threshold`]; the hashed tester uses `scale = √(2r)`.
pub fn scaled_threshold(i: u64, delta: f64, scale: f64) -> Result<f64> {
    if i < 2 {
        return Err(Error::invalid(format!(
            "threshold is defined for i >= 2, got {i}"
        )));
    }
    if !(delta > 0.0 && delta < 1.0) {
        return Err(Error::invalid(format!(
            "delta must lie in (0, 1), got {delta}"
        )));
    }
    Ok(threshold_unchecked(i, delta, scale))
}

fn threshold_unchecked(i: u64, delta: f64, scale: f64) -> f64 {
    let i = i as f64;
    let loglog = i.ln().ln().max(0.0);
    scale * 3.2 * ((loglog + 0.72 * (20.8 / delta).ln()) / i).sqrt()
}

/// Outcome of a finished or truncated run.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Verdict {
    pub rejected: bool,
    /// Samples consumed at rejection; `None` when not rejected.
    pub n_at_decision: Option<u64>,
    /// Total samples consumed.
    pub samples_used: u64,
    /// The run stopped because the sample budget ran out, not because the
    /// null was accepted. The tester never accepts.
    pub budget_exhausted: bool,
}

impl Verdict {
    fn rejected_at(n: u64) -> Self {
        Self {
            rejected: true,
            n_at_decision: Some(n),
            samples_used: n,
            budget_exhausted: false,
        }
    }

    fn exhausted(n: u64) -> Self {
        Self {
            rejected: false,
            n_at_decision: None,
            samples_used: n,
            budget_exhausted: true,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Step {
    Continue,
    Reject { n: u64 },
}

/// Incremental tester state. Counts are stored densely by element id, so an
/// update is O(1) amortized.
#[derive(Clone, Debug)]
pub struct SeqTestState {
    c0: f64,
    delta: f64,
    centering: Centering,
    scale: f64,
    i: u64,
    counts: Vec<u64>,
    collisions: u64,
    rejected_at: Option<u64>,
}

impl SeqTestState {
    pub fn new(c0: f64, delta: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&c0) {
            return Err(Error::invalid(format!("c0 must lie in [0, 1], got {c0}")));
        }
        if !(delta > 0.0 && delta < 1.0) {
            return Err(Error::invalid(format!(
                "delta must lie in (0, 1), got {delta}"
            )));
        }
        Ok(Self {
            c0,
            delta,
            centering: Centering::default(),
            scale: 1.0,
            i: 0,
            counts: Vec::new(),
            collisions: 0,
            rejected_at: None,
        })
    }

    pub fn with_centering(mut self, centering: Centering) -> Self {
        self.centering = centering;
        self
    }

    /// Multiplies the rejection threshold by `scale`.
    pub fn with_threshold_scale(mut self, scale: f64) -> Self {
        self.scale = scale;
        self
    }

    pub fn c0(&self) -> f64 {
        self.c0
    }

    pub fn samples_seen(&self) -> u64 {
        self.i
    }

    /// Number of colliding pairs among the samples so far.
    pub fn collisions(&self) -> u64 {
        self.collisions
    }

    pub fn count(&self, x: usize) -> u64 {
        self.counts.get(x).copied().unwrap_or(0)
    }

    pub fn is_rejected(&self) -> bool {
        self.rejected_at.is_some()
    }

    /// `Σ_{j≤i} T_j`, evaluated in closed form as
    /// `collisions − κ c₀ · i(i−1)/2`.
    pub fn t_cumsum(&self) -> f64 {
        let pairs = (self.i * self.i.saturating_sub(1) / 2) as f64;
        self.collisions as f64 - self.centering.factor() * self.c0 * pairs
    }

    /// `2/(i(i−1)) · Σ T_j`, or `None` before two samples.
    pub fn statistic(&self) -> Option<f64> {
        if self.i < 2 {
            return None;
        }
        let pairs = (self.i * (self.i - 1) / 2) as f64;
        Some(self.collisions as f64 / pairs - self.centering.factor() * self.c0)
    }

    pub fn current_threshold(&self) -> Option<f64> {
        (self.i >= 2).then(|| threshold_unchecked(self.i, self.delta, self.scale))
    }

    /// Feeds one sample. Errors if the null was already rejected.
    pub fn update(&mut self, x: usize) -> Result<Step> {
        if let Some(n) = self.rejected_at {
            return Err(Error::IllegalState(format!(
                "update after rejection at sample {n}"
            )));
        }
        if x >= self.counts.len() {
            self.counts.resize(x + 1, 0);
        }
        self.i += 1;
        self.collisions += self.counts[x];
        self.counts[x] += 1;

        if let (Some(stat), Some(thr)) = (self.statistic(), self.current_threshold()) {
            if stat.abs() > thr {
                self.rejected_at = Some(self.i);
                return Ok(Step::Reject { n: self.i });
            }
        }
        Ok(Step::Continue)
    }

    /// Feeds samples until rejection or until `budget` samples in total have
    /// been seen.
    pub fn run<I: IntoIterator<Item = usize>>(
        &mut self,
        samples: I,
        budget: u64,
    ) -> Result<Verdict> {
        for x in samples {
            if self.i >= budget {
                break;
            }
            if let Step::Reject { n } = self.update(x)? {
                return Ok(Verdict::rejected_at(n));
            }
        }
        Ok(Verdict::exhausted(self.i))
    }
}

/// Runs the tester on fresh samples from `d`.
pub fn run_test<R: Rng + ?Sized>(
    d: &DiscreteDistribution,
    c0: f64,
    delta: f64,
    budget: u64,
    rng: &mut R,
) -> Result<Verdict> {
    run_test_with(d, SeqTestState::new(c0, delta)?, budget, rng)
}

/// Like [`run_test`] with a caller-configured state.
pub fn run_test_with<R: Rng + ?Sized>(
    d: &DiscreteDistribution,
    mut state: SeqTestState,
    budget: u64,
    rng: &mut R,
) -> Result<Verdict> {
    if budget < 2 {
        return Err(Error::invalid(format!(
            "budget must be at least 2, got {budget}"
        )));
    }
    state.run(std::iter::repeat_with(|| d.sample(rng)), budget)
}
