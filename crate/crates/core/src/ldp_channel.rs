//! The salted one-bit hashing channel.
//!
//! A user holding sample `x` draws a private salt `s` uniformly from
//! `{1, …, r}` and reports the sign bit of a keyed hash of `⟨j, s, x⟩`, where
//! `j` is the user's group. The key plays the role of the public random hash
//! function; the salt count `r` trades privacy against accuracy.
//!
//! Hash inputs are encoded as a big-endian `u64` field count followed by each
//! field as a big-endian `u64`, so `⟨1, 23⟩`, `⟨12, 3⟩` and `⟨0, 1, 23⟩` are
//! all distinct byte strings. The keyed function is SipHash-2-4 with a
//! 128-bit key; the report is `+1` when the low output bit is set.

use std::hash::Hasher;

use rand::Rng;
use rayon::prelude::*;
use siphasher::sip::SipHasher24;

use crate::numeric::ceil_tol;
use crate::rng::draw_key;
use crate::{Error, Result};

/// `(α, β)` local differential privacy budget. `α` is on the natural-log
/// scale.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PrivacyParams {
    alpha: f64,
    beta: f64,
}

impl PrivacyParams {
    pub fn new(alpha: f64, beta: f64) -> Result<Self> {
        if !(alpha >= 0.0) || alpha.is_nan() {
            return Err(Error::invalid(format!("alpha must be >= 0, got {alpha}")));
        }
        if !(beta > 0.0 && beta <= 1.0) {
            return Err(Error::invalid(format!(
                "beta must lie in (0, 1], got {beta}"
            )));
        }
        Ok(Self { alpha, beta })
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    pub fn required_salts(&self) -> Result<u64> {
        required_salts(self.alpha, self.beta)
    }
}

/// `r = ⌈6 · ((e^α + 1)/(e^α − 1))² · ln(4/β)⌉`.
///
/// `(e^α + 1)/(e^α − 1)` is evaluated as `coth(α/2)`, which stays finite for
/// large `α`.
pub fn required_salts(alpha: f64, beta: f64) -> Result<u64> {
    if alpha.is_nan() || alpha < 0.0 {
        return Err(Error::invalid(format!("alpha must be >= 0, got {alpha}")));
    }
    if alpha == 0.0 {
        return Err(Error::InfeasiblePrivacy(
            "alpha = 0 needs infinitely many salts".into(),
        ));
    }
    if !(beta > 0.0) || beta >= 4.0 {
        return Err(Error::invalid(format!(
            "beta must lie in (0, 4), got {beta}"
        )));
    }
    let coth = 1.0 / (alpha / 2.0).tanh();
    let r = ceil_tol(6.0 * coth * coth * (4.0 / beta).ln());
    if !r.is_finite() || r > u64::MAX as f64 {
        return Err(Error::InfeasiblePrivacy(format!(
            "salt count overflows for alpha = {alpha}"
        )));
    }
    Ok((r as u64).max(1))
}

/// One user's report, `±1`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Report(i8);

impl Report {
    pub const PLUS: Report = Report(1);
    pub const MINUS: Report = Report(-1);

    pub fn value(self) -> i8 {
        self.0
    }

    pub fn is_plus(self) -> bool {
        self.0 > 0
    }

    /// `+1 → 1`, `−1 → 0`; used as a dense element id.
    pub fn bit(self) -> usize {
        usize::from(self.is_plus())
    }
}

/// Keyed hash plus salt count for a fixed privacy budget.
#[derive(Clone, Debug)]
pub struct HashChannel {
    key: [u8; 16],
    salts: u64,
    params: PrivacyParams,
}

impl HashChannel {
    /// Channel with the salt count derived from `params`.
    pub fn new(params: PrivacyParams, key: [u8; 16]) -> Result<Self> {
        Ok(Self {
            key,
            salts: params.required_salts()?,
            params,
        })
    }

    /// Channel with a fresh random key.
    pub fn with_random_key<R: Rng + ?Sized>(params: PrivacyParams, rng: &mut R) -> Result<Self> {
        Self::new(params, draw_key(rng))
    }

    /// Channel with an explicit salt count, bypassing the formula. The
    /// privacy guarantee of `params` does not hold unless `salts` is at least
    /// `params.required_salts()`.
    pub fn with_salt_count(params: PrivacyParams, salts: u64, key: [u8; 16]) -> Result<Self> {
        if salts == 0 {
            return Err(Error::invalid("salt count must be at least 1"));
        }
        Ok(Self { key, salts, params })
    }

    pub fn salts(&self) -> u64 {
        self.salts
    }

    pub fn params(&self) -> PrivacyParams {
        self.params
    }

    pub fn key(&self) -> &[u8; 16] {
        &self.key
    }

    /// Deterministic report for `⟨group, salt, x⟩`.
    pub fn hash_grouped(&self, group: u64, salt: u64, x: u64) -> Report {
        self.hash_fields(&[group, salt, x])
    }

    /// Deterministic report for `⟨salt, x⟩`, the encoding used by the
    /// sequential tester where there are no groups.
    pub fn hash_ungrouped(&self, salt: u64, x: u64) -> Report {
        self.hash_fields(&[salt, x])
    }

    fn hash_fields(&self, fields: &[u64]) -> Report {
        let mut hasher = SipHasher24::new_with_key(&self.key);
        hasher.write(&(fields.len() as u64).to_be_bytes());
        for f in fields {
            hasher.write(&f.to_be_bytes());
        }
        if hasher.finish() & 1 == 1 {
            Report::PLUS
        } else {
            Report::MINUS
        }
    }

    /// Uniform salt in `1..=r`.
    pub fn draw_salt<R: Rng + ?Sized>(&self, rng: &mut R) -> u64 {
        rng.gen_range(1..=self.salts)
    }

    /// The user-side step of the grouped mechanism: draw a private salt and
    /// report the hash of `⟨group, salt, x⟩`.
    pub fn privatize<R: Rng + ?Sized>(&self, group: u64, x: usize, rng: &mut R) -> Report {
        let salt = self.draw_salt(rng);
        self.hash_grouped(group, salt, x as u64)
    }

    /// The user-side step of the hashed sequential tester.
    pub fn privatize_ungrouped<R: Rng + ?Sized>(&self, x: usize, rng: &mut R) -> Report {
        let salt = self.draw_salt(rng);
        self.hash_ungrouped(salt, x as u64)
    }

    /// Fraction of salts `s ∈ {1..r}` with `h(⟨group, s, x⟩) = +1`.
    pub fn plus_fraction(&self, group: u64, x: usize) -> f64 {
        let plus = (1..=self.salts)
            .filter(|&s| self.hash_grouped(group, s, x as u64).is_plus())
            .count();
        plus as f64 / self.salts as f64
    }
}

/// Empirical privacy audit.
///
/// Draws `trials` independent hash keys. For each key it computes the report
/// distributions `p̄_v` for `x` and `p̄′_v` for `x′` (averaging over all `r`
/// salts) and counts a violation when `p̄_v / p̄′_v > e^α` or
/// `p̄′_v / p̄_v > e^α` for some `v ∈ {−1, +1}`. A zero denominator is a
/// violation. Returns the violation fraction.
pub fn audit_privacy<R: Rng + ?Sized>(
    params: PrivacyParams,
    trials: usize,
    x: usize,
    x_prime: usize,
    rng: &mut R,
) -> Result<f64> {
    if trials == 0 {
        return Err(Error::invalid("audit needs at least one trial"));
    }
    if x == x_prime {
        return Err(Error::invalid("audit needs two distinct elements"));
    }
    let salts = params.required_salts()?;
    let bound = params.alpha().exp();
    let keys: Vec<[u8; 16]> = (0..trials).map(|_| draw_key(rng)).collect();

    let violations = keys
        .into_par_iter()
        .filter(|key| {
            let channel = HashChannel {
                key: *key,
                salts,
                params,
            };
            let p_plus = channel.plus_fraction(0, x);
            let q_plus = channel.plus_fraction(0, x_prime);
            [(p_plus, q_plus), (1.0 - p_plus, 1.0 - q_plus)]
                .into_iter()
                .any(|(p, q)| ratio_exceeds(p, q, bound) || ratio_exceeds(q, p, bound))
        })
        .count();
    Ok(violations as f64 / trials as f64)
}

fn ratio_exceeds(num: f64, den: f64, bound: f64) -> bool {
    den == 0.0 || num / den > bound
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::rng_from_seed;

    #[test]
    fn salts_reference_values() {
        // coth(ln3 / 2) = 2 ⇒ 6·4·ln 100 = 110.524…
        assert_eq!(required_salts(3f64.ln(), 0.04).unwrap(), 111);
        // 6·((e+1)/(e−1))²·ln(4·10⁵) = 362.42…
        assert_eq!(required_salts(1.0, 1e-5).unwrap(), 363);
        assert_eq!(required_salts(2.0, 0.01).unwrap(), 62);
    }

    #[test]
    fn salts_large_alpha_limit() {
        let beta = 0.04;
        let limit = (6.0 * (4.0f64 / beta).ln()).ceil() as u64;
        assert_eq!(required_salts(50.0, beta).unwrap(), limit);
        assert_eq!(required_salts(f64::INFINITY, beta).unwrap(), limit);
    }

    #[test]
    fn salts_errors() {
        assert!(matches!(
            required_salts(0.0, 0.1),
            Err(Error::InfeasiblePrivacy(_))
        ));
        assert!(matches!(
            required_salts(1.0, 4.0),
            Err(Error::InvalidParameter(_))
        ));
        assert!(required_salts(1.0, 0.0).is_err());
        assert!(required_salts(-1.0, 0.1).is_err());
        assert!(PrivacyParams::new(1.0, 1.5).is_err());
        assert!(PrivacyParams::new(-0.1, 0.5).is_err());
    }

    #[test]
    fn salts_monotone() {
        let mut prev = u64::MAX;
        for i in 1..200 {
            let r = required_salts(i as f64 * 0.05, 0.01).unwrap();
            assert!(r <= prev);
            prev = r;
        }
        let mut prev = u64::MAX;
        for i in 1..=100 {
            let r = required_salts(0.7, i as f64 / 100.0).unwrap();
            assert!(r <= prev);
            prev = r;
        }
    }

    #[test]
    fn encoding_distinguishes_field_boundaries() {
        let params = PrivacyParams::new(1.0, 0.1).unwrap();
        let ch = HashChannel::new(params, [7u8; 16]).unwrap();
        // Over many keys ⟨1,23⟩ and ⟨12,3⟩ must disagree about half the time.
        let mut differ = 0;
        for seed in 0..2000u64 {
            let mut key = [0u8; 16];
            key[..8].copy_from_slice(&seed.to_le_bytes());
            let c = HashChannel { key, ..ch.clone() };
            if c.hash_ungrouped(1, 23) != c.hash_ungrouped(12, 3) {
                differ += 1;
            }
        }
        assert!((800..1200).contains(&differ), "{differ}");
    }

    #[test]
    fn privatize_is_deterministic_given_salt() {
        let params = PrivacyParams::new(1.0, 0.1).unwrap();
        let ch = HashChannel::with_random_key(params, &mut rng_from_seed(1)).unwrap();
        assert_eq!(ch.hash_grouped(3, 5, 9), ch.hash_grouped(3, 5, 9));
        let a = ch.privatize(2, 4, &mut rng_from_seed(99));
        let b = ch.privatize(2, 4, &mut rng_from_seed(99));
        assert_eq!(a, b);
    }

    #[test]
    fn single_salt_channel_ignores_rng() {
        let params = PrivacyParams::new(1.0, 0.1).unwrap();
        let ch = HashChannel::with_salt_count(params, 1, [3u8; 16]).unwrap();
        let want = ch.hash_grouped(0, 1, 17);
        for seed in 0..50 {
            assert_eq!(ch.privatize(0, 17, &mut rng_from_seed(seed)), want);
        }
        assert!(HashChannel::with_salt_count(params, 0, [0; 16]).is_err());
    }

    #[test]
    fn audit_rejects_bad_arguments() {
        let params = PrivacyParams::new(1.0, 0.1).unwrap();
        let mut rng = rng_from_seed(0);
        assert!(audit_privacy(params, 0, 1, 2, &mut rng).is_err());
        assert!(audit_privacy(params, 10, 1, 1, &mut rng).is_err());
    }

    #[test]
    fn audit_with_huge_alpha_sees_no_violations() {
        let params = PrivacyParams::new(20.0, 0.04).unwrap();
        let frac = audit_privacy(params, 1000, 1, 2, &mut rng_from_seed(5)).unwrap();
        assert_eq!(frac, 0.0);
    }

    #[test]
    fn report_bits() {
        assert_eq!(Report::PLUS.bit(), 1);
        assert_eq!(Report::MINUS.bit(), 0);
        assert_eq!(Report::MINUS.value(), -1);
    }
}
