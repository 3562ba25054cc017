//! Private sequential testers.
//!
//! PSQ feeds salted one-bit hashes `v = h(⟨s, x⟩)` into the sequential
//! tester. Collisions are counted among the hash values, whose collision
//! probability is `1/2 + C(p)/(2r)`, so the null value becomes
//! `c = c₀/(2r) + 1/2` and the threshold is inflated by `√(2r)`.
//!
//! The doubling tester reruns the private estimator with sample sizes
//! `n₀, 2n₀, 4n₀, …` and per-round failure budgets `δ_t = 6δ/(π² t²)`,
//! rejecting once an estimate lands more than two half-widths from `c₀`.

use rand::{Rng, RngCore};

use crate::batch::u_statistic_of_counts;
use crate::distributions::DiscreteDistribution;
use crate::ldp_channel::{HashChannel, PrivacyParams, Report};
use crate::private_estimator::{guaranteed_relative_error, run_mechanism, MechanismPlan};
use crate::sequential_tester::{scaled_threshold, SeqTestState, Step, Verdict};
use crate::{Error, Result};

/// `c₀/(2r) + 1/2`.
pub fn biased_null(c0: f64, salts: u64) -> f64 {
    c0 / (2.0 * salts as f64) + 0.5
}

/// `√(2r)` times the non-private threshold.
pub fn psq_threshold(i: u64, delta: f64, salts: u64) -> Result<f64> {
    if salts == 0 {
        return Err(Error::invalid("salt count must be at least 1"));
    }
    scaled_threshold(i, delta, (2.0 * salts as f64).sqrt())
}

/// `2r (Û(V) − 1/2)`: the hashed-report collision frequency mapped back to
/// the scale of `C(p)`. Unbiased over the random choice of hash key.
pub fn debiased_hash_f2(reports: &[Report], salts: u64) -> Result<f64> {
    let mut counts = [0u64; 2];
    for r in reports {
        counts[r.bit()] += 1;
    }
    let u = u_statistic_of_counts(&counts, reports.len() as u64)?;
    Ok(2.0 * salts as f64 * (u - 0.5))
}

/// Sequential tester state over hashed reports.
#[derive(Clone, Debug)]
pub struct PsqState {
    inner: SeqTestState,
    channel: HashChannel,
    c_biased: f64,
}

impl PsqState {
    pub fn new(c0: f64, delta: f64, channel: HashChannel) -> Result<Self> {
        if !(0.0..=1.0).contains(&c0) {
            return Err(Error::invalid(format!("c0 must lie in [0, 1], got {c0}")));
        }
        let salts = channel.salts();
        let c_biased = biased_null(c0, salts);
        let inner =
            SeqTestState::new(c_biased, delta)?.with_threshold_scale((2.0 * salts as f64).sqrt());
        Ok(Self {
            inner,
            channel,
            c_biased,
        })
    }

    pub fn c_biased(&self) -> f64 {
        self.c_biased
    }

    pub fn salts(&self) -> u64 {
        self.channel.salts()
    }

    pub fn inner(&self) -> &SeqTestState {
        &self.inner
    }

    /// User side: salt, hash, report.
    pub fn privatize<R: Rng + ?Sized>(&self, x: usize, rng: &mut R) -> Report {
        self.channel.privatize_ungrouped(x, rng)
    }

    /// Server side: fold one report into the statistic.
    pub fn update_report(&mut self, v: Report) -> Result<Step> {
        self.inner.update(v.bit())
    }

    pub fn update<R: Rng + ?Sized>(&mut self, x: usize, rng: &mut R) -> Result<Step> {
        let v = self.privatize(x, rng);
        self.update_report(v)
    }
}

/// Runs PSQ with a fresh hash key drawn from `rng`.
pub fn run_psq<R: Rng + ?Sized>(
    d: &DiscreteDistribution,
    c0: f64,
    delta: f64,
    params: PrivacyParams,
    budget: u64,
    rng: &mut R,
) -> Result<Verdict> {
    if budget < 2 {
        return Err(Error::invalid(format!(
            "budget must be at least 2, got {budget}"
        )));
    }
    let channel = HashChannel::with_random_key(params, rng)?;
    let mut state = PsqState::new(c0, delta, channel)?;
    for _ in 0..budget {
        let x = d.sample(rng);
        if let Step::Reject { n } = state.update(x, rng)? {
            return Ok(Verdict {
                rejected: true,
                n_at_decision: Some(n),
                samples_used: n,
                budget_exhausted: false,
            });
        }
    }
    Ok(Verdict {
        rejected: false,
        n_at_decision: None,
        samples_used: budget,
        budget_exhausted: true,
    })
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DoublingConfig {
    /// Users in round 1; round `t` uses `n₀ · 2^{t−1}`.
    pub n0: u64,
    pub max_rounds: u32,
    /// Caller's lower bound on `C(p)`, used to turn the relative guarantee
    /// into an absolute half-width.
    pub c_lower: f64,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DoublingRound {
    pub round: u32,
    pub n_t: u64,
    pub delta_t: f64,
    pub c_hat: f64,
    /// Guaranteed relative error at `n_t`.
    pub eps_t: f64,
    /// Absolute half-width `eps_t · max(c_lower, clamp(c_hat, 0, 1))`.
    pub half_width: f64,
    pub users_consumed: u64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct DoublingOutcome {
    pub verdict: Verdict,
    pub history: Vec<DoublingRound>,
}

/// `δ_t = 6δ / (π² t²)`; sums to `δ` over `t ≥ 1`.
pub fn round_delta(delta: f64, round: u32) -> f64 {
    let t = f64::from(round);
    6.0 * delta / (std::f64::consts::PI * std::f64::consts::PI * t * t)
}

pub fn round_size(n0: u64, round: u32) -> u64 {
    n0.saturating_mul(1u64 << (round - 1).min(63))
}

/// Runs the doubling tester. Each round draws a fresh hash key and runs the
/// private estimator at its own failure budget.
pub fn run_doubling<R: RngCore + ?Sized>(
    d: &DiscreteDistribution,
    c0: f64,
    delta: f64,
    params: PrivacyParams,
    config: DoublingConfig,
    rng: &mut R,
) -> Result<DoublingOutcome> {
    if !(delta > 0.0 && delta < 1.0) {
        return Err(Error::invalid(format!(
            "delta must lie in (0, 1), got {delta}"
        )));
    }
    if !(config.c_lower > 0.0 && config.c_lower <= 1.0) {
        return Err(Error::invalid(format!(
            "c_lower must lie in (0, 1], got {}",
            config.c_lower
        )));
    }
    if config.max_rounds == 0 {
        return Err(Error::invalid("max_rounds must be at least 1"));
    }
    let salts = params.required_salts()?;
    let mut history = Vec::new();
    let mut consumed = 0u64;

    for round in 1..=config.max_rounds {
        let n_t = round_size(config.n0, round);
        let delta_t = round_delta(delta, round);
        let eps_t = guaranteed_relative_error(n_t, config.c_lower, delta_t, salts);
        let plan = MechanismPlan::new(n_t, eps_t.min(1.0), delta_t, params)?;
        let channel = HashChannel::with_random_key(params, rng)?;
        let est = run_mechanism(&plan, &channel, d, rng)?;
        consumed += est.users_consumed;

        let half_width = eps_t * config.c_lower.max(est.clamped());
        history.push(DoublingRound {
            round,
            n_t,
            delta_t,
            c_hat: est.c_hat,
            eps_t,
            half_width,
            users_consumed: est.users_consumed,
        });
        if (est.c_hat - c0).abs() > 2.0 * half_width {
            return Ok(DoublingOutcome {
                verdict: Verdict {
                    rejected: true,
                    n_at_decision: Some(consumed),
                    samples_used: consumed,
                    budget_exhausted: false,
                },
                history,
            });
        }
    }
    Ok(DoublingOutcome {
        verdict: Verdict {
            rejected: false,
            n_at_decision: None,
            samples_used: consumed,
            budget_exhausted: true,
        },
        history,
    })
}
