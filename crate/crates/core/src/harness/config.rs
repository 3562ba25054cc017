use std::fmt;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::batch::{batch_test, BatchSampleSizeSpec, Estimator};
use crate::distributions::{DiscreteDistribution, DistSpec};
use crate::harness::record::RunRecord;
use crate::ldp_channel::{HashChannel, PrivacyParams};
use crate::private_estimator::{
    krappor_indirect_estimate, recommended_n, run_mechanism, MechanismPlan,
};
use crate::private_sequential::{run_doubling, run_psq, DoublingConfig};
use crate::rng::{rng_from_seed, split};
use crate::sequential_tester::{run_test_with, Centering, SeqTestState, Verdict};
use crate::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Algorithm {
    /// Private grouped estimator.
    Mechanism,
    /// k-RAPPOR indirect estimator.
    Krappor,
    /// Non-private sequential tester.
    Seqtest,
    /// Hashed private sequential tester.
    Psq,
    /// Doubling private tester.
    Doubling,
    /// Batch tester with formula-prescribed sample size.
    Batch,
    /// Plug-in estimate at a fixed `n`.
    Plugin,
    /// U-statistic estimate at a fixed `n`.
    Ustat,
}

impl fmt::Display for Algorithm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Algorithm::Mechanism => "mechanism",
            Algorithm::Krappor => "krappor",
            Algorithm::Seqtest => "seqtest",
            Algorithm::Psq => "psq",
            Algorithm::Doubling => "doubling",
            Algorithm::Batch => "batch",
            Algorithm::Plugin => "plugin",
            Algorithm::Ustat => "ustat",
        })
    }
}

/// One experiment: an algorithm, a distribution, parameters, and a trial
/// count. Parameters an algorithm does not use are ignored.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub algorithm: Algorithm,
    pub distribution: String,
    pub c0: Option<f64>,
    /// Relative error for `mechanism`, tolerance for `batch`.
    pub eps: Option<f64>,
    pub delta: Option<f64>,
    pub alpha: Option<f64>,
    pub beta: Option<f64>,
    /// Users or samples per trial for fixed-size algorithms.
    pub n: Option<u64>,
    /// Lower bound on `C(p)`; sizes `mechanism` when `n` is absent and
    /// scales the doubling tester's half-width.
    pub c_lower: Option<f64>,
    pub budget: Option<u64>,
    pub n0: Option<u64>,
    pub max_rounds: Option<u32>,
    pub estimator: Option<Estimator>,
    /// Upper bound on `F_{3/2}(p)` for plug-in batch sizing.
    pub f32_bound: Option<f64>,
    /// Upper bound on `F₃(p) − F₂(p)²` for U-statistic batch sizing.
    pub variance_bound: Option<f64>,
    /// Sequential tester centering; `unbiased` unless set.
    pub centering: Option<Centering>,
    #[serde(default)]
    pub clamp: bool,
    #[serde(default = "default_trials")]
    pub trials: u64,
    #[serde(default)]
    pub base_seed: u64,
}

fn default_trials() -> u64 {
    1
}

impl ExperimentConfig {
    pub fn new(algorithm: Algorithm, distribution: impl Into<String>) -> Self {
        Self {
            algorithm,
            distribution: distribution.into(),
            c0: None,
            eps: None,
            delta: None,
            alpha: None,
            beta: None,
            n: None,
            c_lower: None,
            budget: None,
            n0: None,
            max_rounds: None,
            estimator: None,
            f32_bound: None,
            variance_bound: None,
            centering: None,
            clamp: false,
            trials: 1,
            base_seed: 0,
        }
    }

    /// Validates parameters and builds the distribution.
    pub fn prepare(&self) -> Result<PreparedExperiment> {
        if self.trials == 0 {
            return Err(Error::invalid("trials must be at least 1"));
        }
        let spec: DistSpec = self.distribution.parse()?;
        let dist = spec.build()?;
        let truth = dist.collision_probability();
        let need = |v: Option<f64>, name: &str| {
            v.ok_or_else(|| Error::invalid(format!("{} requires `{name}`", self.algorithm)))
        };
        let need_u = |v: Option<u64>, name: &str| {
            v.ok_or_else(|| Error::invalid(format!("{} requires `{name}`", self.algorithm)))
        };
        let privacy = || -> Result<PrivacyParams> {
            PrivacyParams::new(need(self.alpha, "alpha")?, need(self.beta, "beta")?)
        };

        let job = match self.algorithm {
            Algorithm::Mechanism => {
                let params = privacy()?;
                let eps = need(self.eps, "eps")?;
                let delta = need(self.delta, "delta")?;
                let n = match (self.n, self.c_lower) {
                    (Some(n), _) => n,
                    (None, Some(c)) => recommended_n(c, eps, delta, params)?,
                    (None, None) => {
                        return Err(Error::invalid("mechanism requires `n` or `c_lower`"))
                    }
                };
                Job::Mechanism {
                    plan: MechanismPlan::new(n, eps, delta, params)?,
                    clamp: self.clamp,
                }
            }
            Algorithm::Krappor => {
                let alpha = need(self.alpha, "alpha")?;
                crate::private_estimator::krappor_constants(alpha)?;
                Job::Krappor {
                    n: need_u(self.n, "n")?,
                    alpha,
                }
            }
            Algorithm::Seqtest => {
                let c0 = need(self.c0, "c0")?;
                let delta = need(self.delta, "delta")?;
                SeqTestState::new(c0, delta)?;
                Job::Seqtest {
                    c0,
                    delta,
                    budget: need_u(self.budget, "budget")?,
                    centering: self.centering.unwrap_or_default(),
                }
            }
            Algorithm::Psq => {
                let c0 = need(self.c0, "c0")?;
                let delta = need(self.delta, "delta")?;
                SeqTestState::new(c0, delta)?;
                Job::Psq {
                    c0,
                    delta,
                    params: privacy()?,
                    budget: need_u(self.budget, "budget")?,
                }
            }
            Algorithm::Doubling => {
                let c0 = need(self.c0, "c0")?;
                Job::Doubling {
                    c0,
                    delta: need(self.delta, "delta")?,
                    params: privacy()?,
                    config: DoublingConfig {
                        n0: self.n0.unwrap_or(1 << 13),
                        max_rounds: self.max_rounds.unwrap_or(10),
                        c_lower: self.c_lower.unwrap_or(c0.max(1e-3)),
                    },
                }
            }
            Algorithm::Batch => {
                let c0 = need(self.c0, "c0")?;
                let mut spec = BatchSampleSizeSpec::new(
                    self.estimator.unwrap_or(Estimator::UStatistic),
                    need(self.eps, "eps")?,
                    need(self.delta, "delta")?,
                );
                spec.f32_bound = self.f32_bound;
                spec.variance_bound = self.variance_bound;
                spec.sample_size()?;
                Job::Batch { c0, spec }
            }
            Algorithm::Plugin | Algorithm::Ustat => {
                let n = need_u(self.n, "n")?;
                if n < 2 {
                    return Err(Error::invalid("fixed-size estimators need n >= 2"));
                }
                Job::Fixed {
                    estimator: if self.algorithm == Algorithm::Plugin {
                        Estimator::PlugIn
                    } else {
                        Estimator::UStatistic
                    },
                    n,
                }
            }
        };
        if let Some(budget) = self.budget {
            if matches!(job, Job::Seqtest { .. } | Job::Psq { .. }) && budget < 2 {
                return Err(Error::invalid("budget must be at least 2"));
            }
        }

        Ok(PreparedExperiment {
            config: self.clone(),
            spec,
            dist,
            truth,
            job,
        })
    }
}

#[derive(Clone, Debug)]
enum Job {
    Mechanism {
        plan: MechanismPlan,
        clamp: bool,
    },
    Krappor {
        n: u64,
        alpha: f64,
    },
    Seqtest {
        c0: f64,
        delta: f64,
        budget: u64,
        centering: Centering,
    },
    Psq {
        c0: f64,
        delta: f64,
        params: PrivacyParams,
        budget: u64,
    },
    Doubling {
        c0: f64,
        delta: f64,
        params: PrivacyParams,
        config: DoublingConfig,
    },
    Batch {
        c0: f64,
        spec: BatchSampleSizeSpec,
    },
    Fixed {
        estimator: Estimator,
        n: u64,
    },
}

/// A validated config ready to run trials.
#[derive(Clone, Debug)]
pub struct PreparedExperiment {
    pub config: ExperimentConfig,
    pub spec: DistSpec,
    pub dist: DiscreteDistribution,
    /// Exact `C(p)`.
    pub truth: f64,
    job: Job,
}

enum Outcome {
    Estimate { value: f64, n: u64 },
    Test { verdict: Verdict },
    Batch { reject: bool, estimate: f64, n: u64 },
}

impl PreparedExperiment {
    pub fn trial_seed(&self, trial: u64) -> u64 {
        split(self.config.base_seed, trial)
    }

    /// Runs trial `trial` with seed `split(base_seed, trial)`.
    pub fn run_trial(&self, trial: u64) -> Result<RunRecord> {
        let seed = self.trial_seed(trial);
        let mut rng = rng_from_seed(seed);
        let started = Instant::now();
        let d = &self.dist;

        let outcome = match &self.job {
            Job::Mechanism { plan, clamp } => {
                let channel = HashChannel::with_random_key(plan.params, &mut rng)?;
                let est = run_mechanism(plan, &channel, d, &mut rng)?;
                Outcome::Estimate {
                    value: if *clamp { est.clamped() } else { est.c_hat },
                    n: est.users_consumed,
                }
            }
            Job::Krappor { n, alpha } => Outcome::Estimate {
                value: krappor_indirect_estimate(d, *n, *alpha, &mut rng)?,
                n: *n,
            },
            Job::Seqtest {
                c0,
                delta,
                budget,
                centering,
            } => {
                let state = SeqTestState::new(*c0, *delta)?.with_centering(*centering);
                Outcome::Test {
                    verdict: run_test_with(d, state, *budget, &mut rng)?,
                }
            }
            Job::Psq {
                c0,
                delta,
                params,
                budget,
            } => Outcome::Test {
                verdict: run_psq(d, *c0, *delta, *params, *budget, &mut rng)?,
            },
            Job::Doubling {
                c0,
                delta,
                params,
                config,
            } => Outcome::Test {
                verdict: run_doubling(d, *c0, *delta, *params, *config, &mut rng)?.verdict,
            },
            Job::Batch { c0, spec } => {
                let out = batch_test(d, *c0, spec, &mut rng)?;
                Outcome::Batch {
                    reject: out.reject,
                    estimate: out.estimate,
                    n: out.n,
                }
            }
            Job::Fixed { estimator, n } => {
                let samples = d.sample_n(*n as usize, &mut rng);
                Outcome::Estimate {
                    value: estimator.estimate(&samples)?,
                    n: *n,
                }
            }
        };
        let wall_time_ms = started.elapsed().as_secs_f64() * 1e3;

        let cfg = &self.config;
        let private = matches!(
            self.job,
            Job::Mechanism { .. } | Job::Psq { .. } | Job::Doubling { .. }
        );
        let mut record = RunRecord {
            algorithm: self.algorithm_label(),
            distribution: self.spec.to_string(),
            k: self.spec.k(),
            alpha: if private || matches!(self.job, Job::Krappor { .. }) {
                cfg.alpha
            } else {
                None
            },
            beta: if private { cfg.beta } else { None },
            eps: None,
            delta: match self.job {
                Job::Krappor { .. } | Job::Fixed { .. } => None,
                _ => cfg.delta,
            },
            trial,
            seed,
            n_samples: 0,
            estimate: None,
            abs_error: None,
            verdict: None,
            wall_time_ms,
        };
        match outcome {
            Outcome::Estimate { value, n } => {
                record.eps = if matches!(self.job, Job::Mechanism { .. }) {
                    cfg.eps
                } else {
                    None
                };
                record.n_samples = n;
                record.estimate = Some(value);
                record.abs_error = Some((value - self.truth).abs());
            }
            Outcome::Test { verdict } => {
                record.eps = cfg.c0.map(|c0| (self.truth - c0).abs());
                record.n_samples = verdict.samples_used;
                record.verdict = Some(if verdict.rejected { "reject" } else { "budget" }.into());
            }
            Outcome::Batch {
                reject,
                estimate,
                n,
            } => {
                record.eps = cfg.eps;
                record.n_samples = n;
                record.estimate = Some(estimate);
                record.abs_error = Some((estimate - self.truth).abs());
                record.verdict = Some(if reject { "reject" } else { "accept" }.into());
            }
        }
        Ok(record)
    }

    fn algorithm_label(&self) -> String {
        match &self.job {
            Job::Batch { spec, .. } => format!("batch-{}", spec.estimator),
            _ => self.config.algorithm.to_string(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn missing_parameters_are_named() {
        let cfg = ExperimentConfig::new(Algorithm::Seqtest, "uniform:k=10");
        let err = cfg.prepare().unwrap_err().to_string();
        assert!(err.contains("c0"), "{err}");
    }

    #[test]
    fn bad_distribution_names_token() {
        let mut cfg = ExperimentConfig::new(Algorithm::Ustat, "zipf:k=10");
        cfg.n = Some(10);
        let err = cfg.prepare().unwrap_err().to_string();
        assert!(err.contains("zipf"), "{err}");
    }

    #[test]
    fn zero_trials_rejected() {
        let mut cfg = ExperimentConfig::new(Algorithm::Ustat, "uniform:k=10");
        cfg.n = Some(10);
        cfg.trials = 0;
        assert!(cfg.prepare().is_err());
    }

    #[test]
    fn toml_round_trip() {
        let text = r#"
            algorithm = "seqtest"
            distribution = "uniform:k=10"
            c0 = 0.2
            delta = 0.1
            budget = 100000
            trials = 3
            base_seed = 7
        "#;
        let cfg: ExperimentConfig = toml::from_str(text).unwrap();
        assert_eq!(cfg.algorithm, Algorithm::Seqtest);
        assert_eq!(cfg.trials, 3);
        cfg.prepare().unwrap();
        assert!(toml::from_str::<ExperimentConfig>(
            "algorithm = \"seqtest\"\ndistribution = \"uniform:k=2\"\nbogus = 1"
        )
        .is_err());
    }

    #[test]
    fn records_fill_applicable_columns() {
        let mut cfg = ExperimentConfig::new(Algorithm::Seqtest, "uniform:k=10");
        cfg.c0 = Some(0.3);
        cfg.delta = Some(0.1);
        cfg.budget = Some(100_000);
        let rec = cfg.prepare().unwrap().run_trial(0).unwrap();
        assert_eq!(rec.verdict.as_deref(), Some("reject"));
        assert!((rec.eps.unwrap() - 0.2).abs() < 1e-12);
        assert!(rec.estimate.is_none() && rec.alpha.is_none());

        let mut cfg = ExperimentConfig::new(Algorithm::Batch, "uniform:k=10");
        cfg.c0 = Some(0.1);
        cfg.eps = Some(0.5);
        cfg.delta = Some(0.1);
        cfg.estimator = Some(Estimator::PlugIn);
        let rec = cfg.prepare().unwrap().run_trial(0).unwrap();
        assert_eq!(rec.algorithm, "batch-plugin");
        assert_eq!(rec.verdict.as_deref(), Some("accept"));
    }
}
