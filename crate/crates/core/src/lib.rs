//! Estimation and sequential testing of the collision probability
//! `C(p) = Σ pᵢ²` of a discrete distribution, with locally differentially
//! private variants built on salted one-bit hashing.
//!
//! Module map:
//!
//! - [`distributions`]: distribution constructors, sampling, exact functionals.
//! - [`ldp_channel`]: salt count, keyed ±1 hashing, empirical privacy audit.
//! - [`private_estimator`]: the grouped median-of-means private estimator and
//!   the k-RAPPOR indirect baseline.
//! - [`sequential_tester`]: anytime test of `H₀: C(p) = c₀`.
//! - [`private_sequential`]: the hashed sequential tester (PSQ) and the
//!   doubling tester.
//! - [`batch`]: plug-in and U-statistic estimators and batch testers.
//! - [`harness`]: Monte-Carlo experiment orchestration and CSV output.

// `!(x > 0.0)` style checks are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod batch;
pub mod distributions;
mod error;
pub mod harness;
pub mod ldp_channel;
mod numeric;
pub mod private_estimator;
pub mod private_sequential;
pub mod rng;
pub mod sequential_tester;

pub use distributions::{DiscreteDistribution, DistSpec, TwoPointPair};
pub use error::{Error, Result};
pub use ldp_channel::{HashChannel, PrivacyParams, Report};
pub use private_estimator::{EstimateResult, MechanismPlan};
pub use sequential_tester::{Centering, SeqTestState, Verdict};
