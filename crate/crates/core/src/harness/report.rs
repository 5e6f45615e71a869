//! Empirical curves against analytical bounds, with standard-error slack.

use crate::bounds::BoundCurve;

use super::metrics::ErrorStatistics;

/// Slack used for expectation bounds checked on finite samples.
pub const DEFAULT_SLACK_SIGMAS: f64 = 3.0;

#[derive(Debug, Clone, PartialEq)]
pub struct Violation {
    pub t: usize,
    pub empirical: f64,
    pub stderr: f64,
    pub bound: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CurveCheck {
    pub algorithm: String,
    pub curve: String,
    /// Grid points where the bound is defined.
    pub checked: usize,
    pub violations: Vec<Violation>,
}

impl CurveCheck {
    pub fn passed(&self) -> bool {
        self.violations.is_empty()
    }
}

/// Flags times where `mean > bound + slack·stderr`. Times missing from the
/// curve or undefined there are skipped.
pub fn compare_series(
    algorithm: &str,
    times: &[usize],
    mean: &[f64],
    stderr: &[f64],
    curve: &BoundCurve,
    slack_sigmas: f64,
) -> CurveCheck {
    let mut check = CurveCheck {
        algorithm: algorithm.to_string(),
        curve: curve.name.clone(),
        checked: 0,
        violations: Vec::new(),
    };
    for (k, &t) in times.iter().enumerate() {
        let Ok(j) = curve.grid.binary_search(&t) else {
            continue;
        };
        let Some(bound) = curve.values[j] else {
            continue;
        };
        check.checked += 1;
        if mean[k] > bound + slack_sigmas * stderr[k] {
            check.violations.push(Violation {
                t,
                empirical: mean[k],
                stderr: stderr[k],
                bound,
            });
        }
    }
    check
}

/// Mean squared error against every curve.
pub fn compare_to_bounds(
    stats: &ErrorStatistics,
    curves: &[BoundCurve],
    slack_sigmas: f64,
) -> Vec<CurveCheck> {
    curves
        .iter()
        .map(|c| {
            compare_series(
                &stats.algorithm,
                &stats.times,
                &stats.mean_sq,
                &stats.stderr_sq,
                c,
                slack_sigmas,
            )
        })
        .collect()
}

/// Mean distance to the legitimate average against the δ_M envelope.
pub fn compare_distance_to_average(
    stats: &ErrorStatistics,
    delta_m: &BoundCurve,
    slack_sigmas: f64,
) -> CurveCheck {
    compare_series(
        &stats.algorithm,
        &stats.times,
        &stats.mean_dist_avg,
        &stats.stderr_dist_avg,
        delta_m,
        slack_sigmas,
    )
}

pub fn summarize(checks: &[CurveCheck]) -> String {
    let mut out = String::new();
    for c in checks {
        out.push_str(&format!(
            "{:<10} {:<12} checked {:>4}  violations {}",
            c.algorithm,
            c.curve,
            c.checked,
            c.violations.len()
        ));
        if let Some(v) = c.violations.first() {
            out.push_str(&format!(
                "  (first t={} empirical={:.6e} bound={:.6e})",
                v.t, v.empirical, v.bound
            ));
        }
        out.push('\n');
    }
    out
}
