//! Pre-registered sweeps for the five experiment figures.
//!
//! `desk` runs in minutes on a laptop with a release build. `smoke` keeps
//! the same shape with one or two trials and tiny budgets; it exists so the
//! plumbing can be exercised in tests.

use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use crate::distributions::DistSpec;
use crate::harness::{sweep_to_path, write_summaries, Algorithm, ExperimentConfig, Summary};
use crate::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Recipe {
    /// Private estimators: error vs n.
    Fig1,
    /// Non-private vs doubling tester across shrinking gaps.
    Fig2,
    /// Sequential tester across support sizes.
    Fig3,
    /// Plug-in vs U-statistic RMSE.
    Fig4,
    /// Private vs non-private sequential testers on small supports.
    Fig5,
}

impl Recipe {
    pub const ALL: [Recipe; 5] = [
        Recipe::Fig1,
        Recipe::Fig2,
        Recipe::Fig3,
        Recipe::Fig4,
        Recipe::Fig5,
    ];
}

impl fmt::Display for Recipe {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let i = Recipe::ALL.iter().position(|r| r == self).unwrap() + 1;
        write!(f, "fig{i}")
    }
}

impl FromStr for Recipe {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Recipe::ALL
            .into_iter()
            .find(|r| r.to_string() == s)
            .ok_or_else(|| Error::parse(s, "recipe must be one of fig1..fig5"))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Scale {
    Desk,
    Smoke,
}

impl FromStr for Scale {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "desk" => Ok(Scale::Desk),
            "smoke" => Ok(Scale::Smoke),
            other => Err(Error::parse(other, "scale must be `desk` or `smoke`")),
        }
    }
}

impl fmt::Display for Scale {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Scale::Desk => "desk",
            Scale::Smoke => "smoke",
        })
    }
}

fn pick<T>(scale: Scale, desk: T, smoke: T) -> T {
    match scale {
        Scale::Desk => desk,
        Scale::Smoke => smoke,
    }
}

fn round6(x: f64) -> f64 {
    (x * 1e6).round() / 1e6
}

fn truth(dist: &str) -> Result<f64> {
    Ok(dist.parse::<DistSpec>()?.build()?.collision_probability())
}

/// Support sizes `⌊10^(lo + (hi−lo)·i/(count−1))⌉`.
pub fn log_spaced(lo: f64, hi: f64, count: usize) -> Vec<usize> {
    (0..count)
        .map(|i| {
            let t = if count == 1 {
                0.0
            } else {
                i as f64 / (count - 1) as f64
            };
            10f64.powf(lo + (hi - lo) * t).round() as usize
        })
        .collect()
}

/// Fixed null used by the support-size sweep.
pub const FIG3_C0: f64 = 0.002;

pub fn configs(recipe: Recipe, scale: Scale) -> Result<Vec<ExperimentConfig>> {
    let mut out = Vec::new();
    let mut push = |cfg: ExperimentConfig| out.push(cfg);

    match recipe {
        Recipe::Fig1 => {
            let ns: &[u64] = pick(scale, &[10_000, 100_000, 1_000_000], &[2_000, 5_000]);
            for dist in ["uniform:k=1000", "powerlaw:k=1000"] {
                for &n in ns {
                    let mut m = ExperimentConfig::new(Algorithm::Mechanism, dist);
                    m.alpha = Some(0.25);
                    m.beta = Some(1e-5);
                    m.eps = Some(1.0);
                    m.delta = Some(0.1);
                    m.n = Some(n);
                    m.trials = pick(scale, 20, 2);
                    push(m);

                    let mut k = ExperimentConfig::new(Algorithm::Krappor, dist);
                    k.alpha = Some(0.25);
                    k.n = Some(n);
                    k.trials = pick(scale, 20, 2);
                    push(k);
                }
            }
        }
        Recipe::Fig2 => {
            let gaps: &[f64] = pick(scale, &[0.2, 0.1, 0.05], &[0.2]);
            for dist in ["powerlaw:k=10", "exponential:k=10"] {
                let c = truth(dist)?;
                for &gap in gaps {
                    let c0 = round6(c + gap);
                    let mut s = ExperimentConfig::new(Algorithm::Seqtest, dist);
                    s.c0 = Some(c0);
                    s.delta = Some(0.1);
                    s.budget = Some(pick(scale, 10_000_000, 100_000));
                    s.trials = pick(scale, 10, 1);
                    push(s);

                    let mut d = ExperimentConfig::new(Algorithm::Doubling, dist);
                    d.c0 = Some(c0);
                    d.delta = Some(0.1);
                    d.alpha = Some(5.0);
                    d.beta = Some(0.1);
                    d.c_lower = Some(round6(c));
                    d.n0 = Some(pick(scale, 8192, 1024));
                    d.max_rounds = Some(pick(scale, 12, 3));
                    d.trials = pick(scale, 5, 1);
                    push(d);
                }
            }
        }
        Recipe::Fig3 => {
            let ks = pick(scale, log_spaced(1.0, 4.0, 20), log_spaced(1.0, 2.0, 3));
            for family in ["uniform", "powerlaw"] {
                for &k in &ks {
                    let mut s =
                        ExperimentConfig::new(Algorithm::Seqtest, format!("{family}:k={k}"));
                    s.c0 = Some(FIG3_C0);
                    s.delta = Some(0.1);
                    s.budget = Some(pick(scale, 1_000_000, 20_000));
                    s.trials = pick(scale, 10, 1);
                    push(s);
                }
            }
        }
        Recipe::Fig4 => {
            let ns: &[u64] = pick(scale, &[100, 1_000, 10_000], &[100]);
            for dist in ["uniform:k=1000", "powerlaw:k=1000"] {
                for &n in ns {
                    for algorithm in [Algorithm::Plugin, Algorithm::Ustat] {
                        let mut e = ExperimentConfig::new(algorithm, dist);
                        e.n = Some(n);
                        e.trials = pick(scale, 500, 5);
                        push(e);
                    }
                }
            }
        }
        Recipe::Fig5 => {
            let gap = 0.4;
            for dist in ["uniform:k=2", "exponential:k=2"] {
                let c0 = round6(truth(dist)? - gap);
                let budget = pick(scale, 20_000_000, 50_000);
                let trials = pick(scale, 5, 1);
                for algorithm in [Algorithm::Seqtest, Algorithm::Psq, Algorithm::Doubling] {
                    let mut t = ExperimentConfig::new(algorithm, dist);
                    t.c0 = Some(c0);
                    t.delta = Some(0.1);
                    t.trials = trials;
                    if algorithm != Algorithm::Seqtest {
                        t.alpha = Some(10.0);
                        t.beta = Some(0.5);
                    }
                    if algorithm == Algorithm::Doubling {
                        t.c_lower = Some(round6(truth(dist)?));
                        t.n0 = Some(pick(scale, 8192, 1024));
                        t.max_rounds = Some(pick(scale, 12, 3));
                    } else {
                        t.budget = Some(budget);
                    }
                    push(t);
                }
            }
        }
    }

    for (i, cfg) in out.iter_mut().enumerate() {
        // Plug-in and U-statistic configs come in adjacent pairs; sharing the
        // seed makes both estimators see identical samples.
        cfg.base_seed = if recipe == Recipe::Fig4 {
            i as u64 / 2
        } else {
            i as u64
        };
    }
    Ok(out)
}

/// Median sample use of a private or doubling tester relative to the
/// non-private tester on the same (distribution, c₀).
#[derive(Clone, Debug, PartialEq)]
pub struct MedianRatio {
    pub algorithm: String,
    pub distribution: String,
    pub c0: f64,
    pub median_n: f64,
    pub baseline_median_n: f64,
    pub ratio: f64,
    /// When either side often hit its budget the ratio is only a bound.
    pub reject_rate: Option<f64>,
    pub baseline_reject_rate: Option<f64>,
}

pub fn median_ratios(summaries: &[Summary]) -> Vec<MedianRatio> {
    let baseline = |dist: &str, c0: f64| {
        summaries
            .iter()
            .find(|s| s.algorithm == "seqtest" && s.distribution == dist && s.c0 == Some(c0))
    };
    summaries
        .iter()
        .filter(|s| s.algorithm != "seqtest")
        .filter_map(|s| {
            let c0 = s.c0?;
            let base = baseline(&s.distribution, c0)?;
            Some(MedianRatio {
                algorithm: s.algorithm.clone(),
                distribution: s.distribution.clone(),
                c0,
                median_n: s.n_samples.q50,
                baseline_median_n: base.n_samples.q50,
                ratio: s.n_samples.q50 / base.n_samples.q50,
                reject_rate: s.reject_rate,
                baseline_reject_rate: base.reject_rate,
            })
        })
        .collect()
}

/// Root-mean-square error per estimator config.
#[derive(Clone, Debug, PartialEq)]
pub struct RmseRow {
    pub algorithm: String,
    pub distribution: String,
    pub n: u64,
    pub rmse: f64,
}

#[derive(Clone, Debug)]
pub struct RecipeReport {
    pub records_path: PathBuf,
    pub summary_path: PathBuf,
    pub summaries: Vec<Summary>,
    pub ratios: Vec<MedianRatio>,
    pub rmse: Vec<RmseRow>,
}

/// Runs a recipe and writes `records.csv`, `summary.csv`, plus
/// `ratios.csv` (testers compared against the non-private tester) and
/// `rmse.csv` (estimators) when they have rows.
pub fn run_recipe(recipe: Recipe, scale: Scale, out_dir: &Path) -> Result<RecipeReport> {
    fs::create_dir_all(out_dir).map_err(|source| Error::Io {
        path: out_dir.to_path_buf(),
        source,
    })?;
    let configs = configs(recipe, scale)?;
    let records_path = out_dir.join("records.csv");
    let summary_path = out_dir.join("summary.csv");
    let sweep = sweep_to_path(&configs, &records_path)?;
    let summaries: Vec<Summary> = sweep.summaries().cloned().collect();
    write_summaries(&summary_path, &summaries)?;

    let ratios = median_ratios(&summaries);
    let opt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
    if !ratios.is_empty() {
        let rows = ratios.iter().map(|r| {
            vec![
                r.algorithm.clone(),
                r.distribution.clone(),
                r.c0.to_string(),
                r.median_n.to_string(),
                r.baseline_median_n.to_string(),
                r.ratio.to_string(),
                opt(r.reject_rate),
                opt(r.baseline_reject_rate),
            ]
        });
        write_table(
            &out_dir.join("ratios.csv"),
            "algorithm,distribution,c0,median_n,seqtest_median_n,ratio,reject_rate,seqtest_reject_rate",
            rows,
        )?;
    }

    let rmse: Vec<RmseRow> = sweep
        .outputs
        .iter()
        .filter(|o| o.records.iter().all(|r| r.verdict.is_none()))
        .filter_map(|o| {
            let first = o.records.first()?;
            let errs: Vec<f64> = o.records.iter().filter_map(|r| r.abs_error).collect();
            let mse = errs.iter().map(|e| e * e).sum::<f64>() / errs.len() as f64;
            Some(RmseRow {
                algorithm: first.algorithm.clone(),
                distribution: first.distribution.clone(),
                n: first.n_samples,
                rmse: mse.sqrt(),
            })
        })
        .collect();
    if !rmse.is_empty() {
        let rows = rmse.iter().map(|r| {
            vec![
                r.algorithm.clone(),
                r.distribution.clone(),
                r.n.to_string(),
                r.rmse.to_string(),
            ]
        });
        write_table(
            &out_dir.join("rmse.csv"),
            "algorithm,distribution,n,rmse",
            rows,
        )?;
    }

    Ok(RecipeReport {
        records_path,
        summary_path,
        summaries,
        ratios,
        rmse,
    })
}

fn write_table<I: IntoIterator<Item = Vec<String>>>(
    path: &Path,
    header: &str,
    rows: I,
) -> Result<()> {
    let csv_err = |source| Error::Csv {
        path: path.to_path_buf(),
        source,
    };
    let mut w = csv::WriterBuilder::new()
        .has_headers(false)
        .from_path(path)
        .map_err(csv_err)?;
    w.write_record(header.split(',')).map_err(csv_err)?;
    for row in rows {
        w.write_record(row).map_err(csv_err)?;
    }
    w.flush().map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn recipe_names_round_trip() {
        for r in Recipe::ALL {
            assert_eq!(r.to_string().parse::<Recipe>().unwrap(), r);
        }
        assert!("fig6".parse::<Recipe>().is_err());
        assert!("huge".parse::<Scale>().is_err());
    }

    #[test]
    fn log_spacing_endpoints() {
        let ks = log_spaced(1.0, 4.0, 20);
        assert_eq!(ks.len(), 20);
        assert_eq!(ks[0], 10);
        assert_eq!(ks[19], 10_000);
        assert!(ks.windows(2).all(|w| w[0] < w[1]));
    }

    #[test]
    fn every_desk_config_validates() {
        for r in Recipe::ALL {
            let cfgs = configs(r, Scale::Desk).unwrap();
            assert!(!cfgs.is_empty());
            for c in &cfgs {
                c.prepare().unwrap_or_else(|e| panic!("{r}: {e}"));
            }
        }
    }

    #[test]
    fn fig4_pairs_share_seeds() {
        let cfgs = configs(Recipe::Fig4, Scale::Desk).unwrap();
        for pair in cfgs.chunks(2) {
            assert_eq!(pair[0].algorithm, Algorithm::Plugin);
            assert_eq!(pair[1].algorithm, Algorithm::Ustat);
            assert_eq!(pair[0].base_seed, pair[1].base_seed);
            assert_eq!(pair[0].n, pair[1].n);
        }
    }

    #[test]
    fn smoke_fig5_writes_ratios() {
        let dir = tempfile::tempdir().unwrap();
        let report = run_recipe(Recipe::Fig5, Scale::Smoke, dir.path()).unwrap();
        assert_eq!(report.ratios.len(), 4);
        assert!(dir.path().join("ratios.csv").exists());
        assert!(!dir.path().join("rmse.csv").exists());
    }
}
