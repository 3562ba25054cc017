//! Aggregate statistics over a config's trials.

use serde::Serialize;

/// Mean, standard error of the mean, and 10/50/90 % quantiles (linear
/// interpolation between order statistics).
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Stats {
    pub count: usize,
    pub mean: f64,
    pub stderr: f64,
    pub q10: f64,
    pub q50: f64,
    pub q90: f64,
}

impl Stats {
    pub fn from_values(values: &[f64]) -> Option<Self> {
        if values.is_empty() {
            return None;
        }
        let n = values.len() as f64;
        let mean = values.iter().sum::<f64>() / n;
        let stderr = if values.len() > 1 {
            let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
            (var / n).sqrt()
        } else {
            0.0
        };
        let mut sorted = values.to_vec();
        sorted.sort_by(f64::total_cmp);
        Some(Self {
            count: values.len(),
            mean,
            stderr,
            q10: quantile(&sorted, 0.1),
            q50: quantile(&sorted, 0.5),
            q90: quantile(&sorted, 0.9),
        })
    }
}

/// Quantile of already sorted data.
pub fn quantile(sorted: &[f64], q: f64) -> f64 {
    let pos = q * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    let frac = pos - lo as f64;
    sorted[lo] + (sorted[hi] - sorted[lo]) * frac
}

#[derive(Clone, Debug, PartialEq)]
pub struct Summary {
    pub algorithm: String,
    pub distribution: String,
    pub c0: Option<f64>,
    pub trials: usize,
    /// Fraction of trials whose verdict is `reject`, when verdicts exist.
    pub reject_rate: Option<f64>,
    pub n_samples: Stats,
    pub abs_error: Option<Stats>,
    pub estimate: Option<Stats>,
}

impl Summary {
    pub const CSV_HEADER: &'static str = "algorithm,distribution,c0,trials,reject_rate,\
n_mean,n_stderr,n_q10,n_q50,n_q90,err_mean,err_stderr,err_q10,err_q50,err_q90,est_mean,est_stderr";

    pub fn csv_row(&self) -> Vec<String> {
        let opt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
        let mut row = vec![
            self.algorithm.clone(),
            self.distribution.clone(),
            opt(self.c0),
            self.trials.to_string(),
            opt(self.reject_rate),
        ];
        let n = &self.n_samples;
        row.extend([n.mean, n.stderr, n.q10, n.q50, n.q90].map(|v| v.to_string()));
        let e = self.abs_error;
        row.extend(
            [
                e.map(|s| s.mean),
                e.map(|s| s.stderr),
                e.map(|s| s.q10),
                e.map(|s| s.q50),
                e.map(|s| s.q90),
            ]
            .map(opt),
        );
        row.push(opt(self.estimate.map(|s| s.mean)));
        row.push(opt(self.estimate.map(|s| s.stderr)));
        row
    }
}
