//! Per-trial output rows and their CSV encoding.

use std::io::Write;
use std::path::Path;

use serde::Serialize;

use crate::{Error, Result};

/// Exact CSV header; the column order of [`RunRecord`].
pub const CSV_HEADER: &str =
    "algorithm,distribution,k,alpha,beta,eps,delta,trial,seed,n_samples,estimate,abs_error,verdict,wall_time_ms";

/// One trial. Inapplicable fields are `None` and serialize as empty strings.
///
/// `eps` holds the tolerance for estimators and batch testers, and the true
/// gap `|C(p) − c₀|` for the sequential testers.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RunRecord {
    pub algorithm: String,
    pub distribution: String,
    pub k: usize,
    pub alpha: Option<f64>,
    pub beta: Option<f64>,
    pub eps: Option<f64>,
    pub delta: Option<f64>,
    pub trial: u64,
    pub seed: u64,
    pub n_samples: u64,
    pub estimate: Option<f64>,
    pub abs_error: Option<f64>,
    pub verdict: Option<String>,
    pub wall_time_ms: f64,
}

/// Streaming CSV writer that always emits the header, even with no rows.
pub struct RecordWriter<W: Write> {
    inner: csv::Writer<W>,
    label: String,
}

impl RecordWriter<std::fs::File> {
    pub fn create(path: &Path) -> Result<Self> {
        let file = std::fs::File::create(path).map_err(|source| Error::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Self::new(file, path.display().to_string())
    }
}

impl<W: Write> RecordWriter<W> {
    pub fn new(sink: W, label: impl Into<String>) -> Result<Self> {
        let label = label.into();
        let mut inner = csv::WriterBuilder::new()
            .has_headers(false)
            .from_writer(sink);
        inner
            .write_record(CSV_HEADER.split(','))
            .map_err(|source| csv_err(&label, source))?;
        Ok(Self { inner, label })
    }

    pub fn write(&mut self, record: &RunRecord) -> Result<()> {
        self.inner
            .serialize(record)
            .map_err(|source| csv_err(&self.label, source))
    }

    pub fn write_all<'a, I: IntoIterator<Item = &'a RunRecord>>(
        &mut self,
        records: I,
    ) -> Result<()> {
        for r in records {
            self.write(r)?;
        }
        Ok(())
    }

    pub fn flush(&mut self) -> Result<()> {
        self.inner.flush().map_err(|source| Error::Io {
            path: self.label.clone().into(),
            source,
        })
    }

    pub fn into_inner(self) -> Result<W> {
        let label = self.label;
        self.inner.into_inner().map_err(|e| Error::Io {
            path: label.into(),
            source: e.into_error(),
        })
    }
}

fn csv_err(label: &str, source: csv::Error) -> Error {
    Error::Csv {
        path: label.into(),
        source,
    }
}

/// Renders records to an in-memory CSV string.
pub fn to_csv_string(records: &[RunRecord]) -> Result<String> {
    let mut w = RecordWriter::new(Vec::new(), "<memory>")?;
    w.write_all(records)?;
    let bytes = w.into_inner()?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> RunRecord {
        RunRecord {
            algorithm: "seqtest".into(),
            distribution: "uniform:k=10".into(),
            k: 10,
            alpha: None,
            beta: None,
            eps: Some(0.1),
            delta: Some(0.1),
            trial: 0,
            seed: 42,
            n_samples: 1234,
            estimate: None,
            abs_error: None,
            verdict: Some("reject".into()),
            wall_time_ms: 1.5,
        }
    }

    #[test]
    fn header_only_when_empty() {
        assert_eq!(to_csv_string(&[]).unwrap(), format!("{CSV_HEADER}\n"));
    }

    #[test]
    fn empty_fields_for_none() {
        let s = to_csv_string(&[sample()]).unwrap();
        let row = s.lines().nth(1).unwrap();
        assert_eq!(
            row,
            "seqtest,uniform:k=10,10,,,0.1,0.1,0,42,1234,,,reject,1.5"
        );
    }

    #[test]
    fn distribution_with_commas_is_quoted() {
        let mut r = sample();
        r.distribution = "twopoint:k=5,tau=0.3,side=1".into();
        let s = to_csv_string(&[r]).unwrap();
        assert!(s.contains("\"twopoint:k=5,tau=0.3,side=1\""));
    }
}
