//! Monte-Carlo experiment orchestration.
//!
//! An [`ExperimentConfig`] runs `trials` independent trials; trial `t` seeds
//! its stream with `split(base_seed, t)` (see [`crate::rng`]). Trials run in
//! parallel and are reassembled in trial order, so every column except
//! `wall_time_ms` is reproducible from the config alone.

mod config;
pub mod recipes;
pub mod record;
pub mod summary;

use std::io::Write;
use std::path::Path;

use rayon::prelude::*;

pub use config::{Algorithm, ExperimentConfig, PreparedExperiment};
pub use record::{to_csv_string, RecordWriter, RunRecord, CSV_HEADER};
pub use summary::{Stats, Summary};

use crate::{Error, Result};

#[derive(Clone, Debug)]
pub struct ExperimentOutput {
    pub records: Vec<RunRecord>,
    pub summary: Summary,
}

pub fn run_experiment(config: &ExperimentConfig) -> Result<ExperimentOutput> {
    let prepared = config.prepare()?;
    let records = (0..config.trials)
        .into_par_iter()
        .map(|t| prepared.run_trial(t))
        .collect::<Result<Vec<_>>>()?;
    let summary = summarize(config, &records);
    Ok(ExperimentOutput { records, summary })
}

pub fn summarize(config: &ExperimentConfig, records: &[RunRecord]) -> Summary {
    let n: Vec<f64> = records.iter().map(|r| r.n_samples as f64).collect();
    let errors: Vec<f64> = records.iter().filter_map(|r| r.abs_error).collect();
    let estimates: Vec<f64> = records.iter().filter_map(|r| r.estimate).collect();
    let verdicts: Vec<&str> = records
        .iter()
        .filter_map(|r| r.verdict.as_deref())
        .collect();
    Summary {
        algorithm: records
            .first()
            .map(|r| r.algorithm.clone())
            .unwrap_or_else(|| config.algorithm.to_string()),
        distribution: config.distribution.clone(),
        c0: config.c0,
        trials: records.len(),
        reject_rate: (!verdicts.is_empty()).then(|| {
            verdicts.iter().filter(|v| **v == "reject").count() as f64 / verdicts.len() as f64
        }),
        n_samples: Stats::from_values(&n).unwrap_or(Stats {
            count: 0,
            mean: f64::NAN,
            stderr: f64::NAN,
            q10: f64::NAN,
            q50: f64::NAN,
            q90: f64::NAN,
        }),
        abs_error: Stats::from_values(&errors),
        estimate: Stats::from_values(&estimates),
    }
}

#[derive(Clone, Debug)]
pub struct SweepOutput {
    pub outputs: Vec<ExperimentOutput>,
}

impl SweepOutput {
    pub fn records(&self) -> impl Iterator<Item = &RunRecord> {
        self.outputs.iter().flat_map(|o| o.records.iter())
    }

    pub fn summaries(&self) -> impl Iterator<Item = &Summary> {
        self.outputs.iter().map(|o| &o.summary)
    }
}

/// Runs every config (configs and trials in parallel) and writes the merged
/// rows to `sink` ordered by (config index, trial index). If a config fails,
/// the rows of all configs before it are written and flushed, then the error
/// is returned.
pub fn sweep<W: Write>(
    configs: &[ExperimentConfig],
    sink: &mut RecordWriter<W>,
) -> Result<SweepOutput> {
    let results: Vec<Result<ExperimentOutput>> = configs.par_iter().map(run_experiment).collect();
    let mut outputs = Vec::with_capacity(results.len());
    for result in results {
        match result {
            Ok(out) => {
                sink.write_all(&out.records)?;
                outputs.push(out);
            }
            Err(e) => {
                sink.flush()?;
                return Err(e);
            }
        }
    }
    sink.flush()?;
    Ok(SweepOutput { outputs })
}

/// Sweep into a CSV file at `path`.
pub fn sweep_to_path(configs: &[ExperimentConfig], path: &Path) -> Result<SweepOutput> {
    let mut writer = RecordWriter::create(path)?;
    sweep(configs, &mut writer)
}

/// Writes one summary row per config.
pub fn write_summaries<'a, I: IntoIterator<Item = &'a Summary>>(
    path: &Path,
    summaries: I,
) -> Result<()> {
    let file = std::fs::File::create(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let mut w = csv::WriterBuilder::new()
        .has_headers(false)
        .from_writer(file);
    let csv_err = |source| Error::Csv {
        path: path.to_path_buf(),
        source,
    };
    w.write_record(Summary::CSV_HEADER.split(','))
        .map_err(csv_err)?;
    for s in summaries {
        w.write_record(s.csv_row()).map_err(csv_err)?;
    }
    w.flush().map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })
}

/// Parses a TOML sweep file: a list of `[[experiment]]` tables.
pub fn parse_sweep_toml(text: &str) -> Result<Vec<ExperimentConfig>> {
    #[derive(serde::Deserialize)]
    #[serde(deny_unknown_fields)]
    struct SweepFile {
        #[serde(default)]
        experiment: Vec<ExperimentConfig>,
    }
    let parsed: SweepFile = toml::from_str(text).map_err(|e| {
        let token = e
            .span()
            .and_then(|s| text.get(s))
            .unwrap_or("<toml>")
            .to_string();
        Error::parse(token, e.message().to_string())
    })?;
    Ok(parsed.experiment)
}
