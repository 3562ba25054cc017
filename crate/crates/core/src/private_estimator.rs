//! Private estimation of the collision probability with salted one-bit
//! hashing and a median of group means, plus the k-RAPPOR indirect baseline.
//!
//! The server splits users into `g` groups with Poisson(`m`) sizes. Each
//! group's reports are summed into `V_j`, and
//! `C_j = r (V_j² − m) / m²` is an unbiased estimate of `C(p)`. Groups are
//! averaged within `a` supergroups and the output is the median of those
//! averages.

use rand::{Rng, RngCore};
use rand_distr::{Binomial, Distribution, Poisson};
use rayon::prelude::*;

use crate::distributions::DiscreteDistribution;
use crate::ldp_channel::{HashChannel, PrivacyParams};
use crate::numeric::{ceil_tol, lower_median};
use crate::rng::child_rng;
use crate::{Error, Result};

/// Constant in the sufficient sample size `1280 · r · ln(1/δ) / (ε² · C)`.
pub const SAMPLE_SIZE_CONSTANT: f64 = 1280.0;

#[derive(Clone, Debug, PartialEq)]
pub struct MechanismPlan {
    pub n: u64,
    pub eps_rel: f64,
    pub delta: f64,
    /// Group count `⌈160 ln(1/δ) / ε²⌉`.
    pub groups: u64,
    /// Expected group size `n / g`.
    pub group_size: f64,
    /// Supergroup count `⌈8 ln(1/δ)⌉`.
    pub supergroups: u64,
    /// Nominal groups per supergroup, `⌈g / a⌉`.
    pub groups_per_supergroup: u64,
    pub params: PrivacyParams,
}

impl MechanismPlan {
    pub fn new(n: u64, eps_rel: f64, delta: f64, params: PrivacyParams) -> Result<Self> {
        validate_eps_delta(eps_rel, delta)?;
        let log_inv_delta = (1.0 / delta).ln();
        let groups = ceil_tol(160.0 * log_inv_delta / (eps_rel * eps_rel)) as u64;
        let supergroups = (ceil_tol(8.0 * log_inv_delta) as u64).max(1);
        let groups = groups.max(supergroups);
        if n < groups {
            return Err(Error::InfeasiblePlan { n, min_n: groups });
        }
        Ok(Self {
            n,
            eps_rel,
            delta,
            groups,
            group_size: n as f64 / groups as f64,
            supergroups,
            groups_per_supergroup: groups.div_ceil(supergroups),
            params,
        })
    }

    /// Supergroup index of group `j` (0-based). Groups are split into `a`
    /// contiguous blocks whose sizes differ by at most one, so every
    /// supergroup is non-empty and none exceeds `⌈g/a⌉` groups.
    pub fn supergroup_of(&self, group: u64) -> usize {
        let base = self.groups / self.supergroups;
        let extra = self.groups % self.supergroups;
        let big_span = extra * (base + 1);
        if group < big_span {
            (group / (base + 1)) as usize
        } else {
            (extra + (group - big_span) / base) as usize
        }
    }
}

fn validate_eps_delta(eps_rel: f64, delta: f64) -> Result<()> {
    if !(eps_rel > 0.0 && eps_rel <= 1.0) {
        return Err(Error::invalid(format!(
            "eps_rel must lie in (0, 1], got {eps_rel}"
        )));
    }
    if !(delta > 0.0 && delta < 1.0) {
        return Err(Error::invalid(format!(
            "delta must lie in (0, 1), got {delta}"
        )));
    }
    Ok(())
}

/// Sufficient number of users for relative error `eps_rel` with probability
/// `1 − δ`, given `C(p) ≥ c_lower`.
pub fn recommended_n(c_lower: f64, eps_rel: f64, delta: f64, params: PrivacyParams) -> Result<u64> {
    if !(c_lower > 0.0 && c_lower <= 1.0) {
        return Err(Error::invalid(format!(
            "c_lower must lie in (0, 1], got {c_lower}"
        )));
    }
    validate_eps_delta(eps_rel, delta)?;
    let r = params.required_salts()? as f64;
    let n = SAMPLE_SIZE_CONSTANT * r * (1.0 / delta).ln() / (eps_rel * eps_rel * c_lower);
    Ok(ceil_tol(n) as u64)
}

/// Relative error guaranteed by `n` users: the inverse of [`recommended_n`]
/// in `eps_rel`. May exceed 1, in which case no guarantee applies.
pub fn guaranteed_relative_error(n: u64, c_lower: f64, delta: f64, salts: u64) -> f64 {
    (SAMPLE_SIZE_CONSTANT * salts as f64 * (1.0 / delta).ln() / (n as f64 * c_lower)).sqrt()
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GroupState {
    pub group_id: u64,
    /// Realized Poisson group size `N_j`.
    pub n_actual: u64,
    /// `V_j`, the sum of the group's ±1 reports.
    pub v_sum: i64,
}

impl GroupState {
    /// `C_j = r (V_j² − m) / m²`, with `m` the expected group size.
    pub fn statistic(&self, group_size: f64, salts: u64) -> f64 {
        group_statistic(self.v_sum, group_size, salts)
    }
}

pub fn group_statistic(v_sum: i64, group_size: f64, salts: u64) -> f64 {
    let v = v_sum as f64;
    salts as f64 * (v * v - group_size) / (group_size * group_size)
}

/// Simulates one group: draws `N_j ~ Poisson(m)`, then for each user a sample
/// from `d` and a salt, and sums the hashed reports.
pub fn simulate_group<R: Rng + ?Sized>(
    channel: &HashChannel,
    d: &DiscreteDistribution,
    group_id: u64,
    group_size: f64,
    rng: &mut R,
) -> GroupState {
    let n_actual = if group_size > 0.0 {
        Poisson::new(group_size)
            .expect("positive Poisson mean")
            .sample(rng) as u64
    } else {
        0
    };
    let v_sum = (0..n_actual)
        .map(|_| {
            let x = d.sample(rng);
            i64::from(channel.privatize(group_id, x, rng).value())
        })
        .sum();
    GroupState {
        group_id,
        n_actual,
        v_sum,
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct EstimateResult {
    /// Lower median of the supergroup means; not clamped.
    pub c_hat: f64,
    pub per_supergroup_means: Vec<f64>,
    pub users_consumed: u64,
}

impl EstimateResult {
    pub fn clamped(&self) -> f64 {
        self.c_hat.clamp(0.0, 1.0)
    }
}

/// Median of supergroup means of the group statistics.
pub fn aggregate(plan: &MechanismPlan, salts: u64, groups: &[GroupState]) -> EstimateResult {
    let a = plan.supergroups as usize;
    let mut sums = vec![0.0f64; a];
    let mut members = vec![0u64; a];
    for g in groups {
        let l = plan.supergroup_of(g.group_id);
        sums[l] += g.statistic(plan.group_size, salts);
        members[l] += 1;
    }
    let means: Vec<f64> = sums
        .iter()
        .zip(&members)
        .map(|(s, &c)| s / c as f64)
        .collect();
    EstimateResult {
        c_hat: lower_median(&means),
        per_supergroup_means: means,
        users_consumed: groups.iter().map(|g| g.n_actual).sum(),
    }
}

/// Runs the whole mechanism once. Each group draws from its own stream
/// derived from one `u64` taken from `rng`, so the result does not depend on
/// the order in which groups execute.
pub fn run_mechanism<R: RngCore + ?Sized>(
    plan: &MechanismPlan,
    channel: &HashChannel,
    d: &DiscreteDistribution,
    rng: &mut R,
) -> Result<EstimateResult> {
    if plan.params != channel.params() {
        return Err(Error::invalid(
            "plan and channel use different privacy parameters",
        ));
    }
    let trial_seed = rng.next_u64();
    let groups: Vec<GroupState> = (0..plan.groups)
        .into_par_iter()
        .map(|j| {
            let mut group_rng = child_rng(trial_seed, j);
            simulate_group(channel, d, j, plan.group_size, &mut group_rng)
        })
        .collect();
    Ok(aggregate(plan, channel.salts(), &groups))
}

/// Flip probability and debiasing constants `(f, a, b)` of k-RAPPOR at
/// budget `α`: `f = 1/(e^{α/2}+1)`, `a = (e^{α/2}+1)/(e^{α/2}−1)`,
/// `b = 1/(e^{α/2}−1)`.
pub fn krappor_constants(alpha: f64) -> Result<(f64, f64, f64)> {
    if !(alpha > 0.0) {
        return Err(Error::invalid(format!(
            "alpha must be positive, got {alpha}"
        )));
    }
    let e = (alpha / 2.0).exp();
    if e.is_infinite() {
        return Ok((0.0, 1.0, 0.0));
    }
    Ok((1.0 / (e + 1.0), (e + 1.0) / (e - 1.0), 1.0 / (e - 1.0)))
}

/// Indirect baseline: privately estimate the distribution with k-RAPPOR
/// (one-hot vectors, each bit flipped independently with probability `f`),
/// debias, and return `Σ p̃ₓ²` without clipping.
///
/// Per coordinate the number of reported ones is
/// `Binomial(nₓ, 1−f) + Binomial(n−nₓ, f)`, which is exactly the aggregate of
/// per-user bit flips; it is drawn directly instead of materializing `n·k`
/// bits.
pub fn krappor_indirect_estimate<R: Rng + ?Sized>(
    d: &DiscreteDistribution,
    n: u64,
    alpha: f64,
    rng: &mut R,
) -> Result<f64> {
    if n == 0 {
        return Err(Error::invalid("k-RAPPOR needs at least one user"));
    }
    let (flip, a, b) = krappor_constants(alpha)?;
    let mut counts = vec![0u64; d.k()];
    for _ in 0..n {
        counts[d.sample(rng) - 1] += 1;
    }
    let mut total = 0.0;
    for &holders in &counts {
        let kept = Binomial::new(holders, 1.0 - flip)
            .map_err(|e| Error::invalid(e.to_string()))?
            .sample(rng);
        let false_ones = Binomial::new(n - holders, flip)
            .map_err(|e| Error::invalid(e.to_string()))?
            .sample(rng);
        let p_hat = (kept + false_ones) as f64 / n as f64;
        let p_tilde = a * p_hat - b;
        total += p_tilde * p_tilde;
    }
    Ok(total)
}
