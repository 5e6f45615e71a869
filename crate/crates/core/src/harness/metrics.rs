//! Error metrics of a single trace and their aggregation over realizations.

use crate::dynamics::{mean_distance_to_average, SimulationTrace, Values};
use crate::error::{Error, Result};
use crate::vecops::dist_sq;

/// Per-time metrics of one run.
#[derive(Debug, Clone, PartialEq)]
pub struct ErrorSeries {
    pub times: Vec<usize>,
    /// ē(t) = (1/|L|)Σ‖x_i(t) − x*‖.
    pub mean_err: Vec<f64>,
    /// (1/|L|)Σ‖x_i(t) − x*‖².
    pub mean_sq: Vec<f64>,
    /// (1/|L|)Σ‖x_i(t) − x̄(t)‖.
    pub dist_to_average: Vec<f64>,
}

impl ErrorSeries {
    /// ē(t)/ē(0), taking the first recorded time as the origin. Exactly 1 at
    /// the origin; a run that starts at the optimum reports 0 where it stays there.
    pub fn ratio(&self) -> Vec<f64> {
        let e0 = self.mean_err.first().copied().unwrap_or(0.0);
        self.mean_err
            .iter()
            .enumerate()
            .map(|(k, &e)| match (k, e0 > 0.0) {
                (0, _) => 1.0,
                (_, true) => e / e0,
                (_, false) if e == 0.0 => 0.0,
                _ => f64::INFINITY,
            })
            .collect()
    }
}

/// Distances of one state to `x_star`: (ē, mean square).
pub fn state_error(x: &Values, x_star: &[f64]) -> Result<(f64, f64)> {
    if x.dim() != x_star.len() {
        return Err(Error::Dimension {
            expected: x.dim(),
            got: x_star.len(),
        });
    }
    let n = x.n_agents() as f64;
    let (mut e, mut s) = (0.0, 0.0);
    for row in x.rows() {
        let d2 = dist_sq(row, x_star);
        e += d2.sqrt();
        s += d2;
    }
    Ok((e / n, s / n))
}

/// Metrics at every recorded time of `trace`.
pub fn error_metric(trace: &SimulationTrace, x_star: &[f64]) -> Result<ErrorSeries> {
    let mut out = ErrorSeries {
        times: trace.times.clone(),
        mean_err: Vec::with_capacity(trace.times.len()),
        mean_sq: Vec::with_capacity(trace.times.len()),
        dist_to_average: Vec::with_capacity(trace.times.len()),
    };
    for x in &trace.states {
        let (e, s) = state_error(x, x_star)?;
        out.mean_err.push(e);
        out.mean_sq.push(s);
        out.dist_to_average.push(mean_distance_to_average(x));
    }
    Ok(out)
}

/// Sample mean and standard error of the mean (0 for a single sample).
pub fn mean_and_stderr(samples: impl IntoIterator<Item = f64>) -> (f64, f64) {
    let v: Vec<f64> = samples.into_iter().collect();
    let n = v.len() as f64;
    if v.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let mean = v.iter().sum::<f64>() / n;
    if v.len() == 1 {
        return (mean, 0.0);
    }
    let var = v.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

/// Statistics over realizations at each sample time.
#[derive(Debug, Clone, PartialEq)]
pub struct ErrorStatistics {
    pub algorithm: String,
    pub realizations: usize,
    pub times: Vec<usize>,
    pub mean_err: Vec<f64>,
    pub stderr_err: Vec<f64>,
    pub mean_ratio: Vec<f64>,
    pub stderr_ratio: Vec<f64>,
    pub mean_sq: Vec<f64>,
    pub stderr_sq: Vec<f64>,
    pub mean_dist_avg: Vec<f64>,
    pub stderr_dist_avg: Vec<f64>,
}

impl ErrorStatistics {
    /// Aggregates runs that share a time grid. Reduction order follows the slice.
    pub fn aggregate(algorithm: &str, runs: &[ErrorSeries]) -> Result<Self> {
        let first = runs
            .first()
            .ok_or_else(|| Error::OutOfRange("no runs to aggregate".into()))?;
        if runs.iter().any(|r| r.times != first.times) {
            return Err(Error::OutOfRange("runs recorded different times".into()));
        }
        let ratios: Vec<Vec<f64>> = runs.iter().map(ErrorSeries::ratio).collect();
        let n = first.times.len();
        let mut s = ErrorStatistics {
            algorithm: algorithm.to_string(),
            realizations: runs.len(),
            times: first.times.clone(),
            mean_err: Vec::with_capacity(n),
            stderr_err: Vec::with_capacity(n),
            mean_ratio: Vec::with_capacity(n),
            stderr_ratio: Vec::with_capacity(n),
            mean_sq: Vec::with_capacity(n),
            stderr_sq: Vec::with_capacity(n),
            mean_dist_avg: Vec::with_capacity(n),
            stderr_dist_avg: Vec::with_capacity(n),
        };
        for k in 0..n {
            let (m, e) = mean_and_stderr(runs.iter().map(|r| r.mean_err[k]));
            s.mean_err.push(m);
            s.stderr_err.push(e);
            let (m, e) = mean_and_stderr(ratios.iter().map(|r| r[k]));
            s.mean_ratio.push(m);
            s.stderr_ratio.push(e);
            let (m, e) = mean_and_stderr(runs.iter().map(|r| r.mean_sq[k]));
            s.mean_sq.push(m);
            s.stderr_sq.push(e);
            let (m, e) = mean_and_stderr(runs.iter().map(|r| r.dist_to_average[k]));
            s.mean_dist_avg.push(m);
            s.stderr_dist_avg.push(e);
        }
        Ok(s)
    }

    pub fn index_of(&self, t: usize) -> Option<usize> {
        self.times.binary_search(&t).ok()
    }

    /// Mean ē(t)/ē(0) at the last sample time.
    pub fn final_ratio(&self) -> f64 {
        self.mean_ratio.last().copied().unwrap_or(f64::NAN)
    }
}
