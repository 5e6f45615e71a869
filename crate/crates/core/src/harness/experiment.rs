//! Monte Carlo runner: seeded realizations per algorithm, aggregated metrics
//! and bound overlays on the same grid.

use crate::bounds::{bound_curve, BoundCurve, BoundKind, BoundParams};
use crate::dynamics::{
    derive_seed, run_simulation, Algorithm, Record, RunOptions, SimulationTrace, TfObservation,
};
use crate::error::Result;
use crate::par::map_indices;

use super::config::ExperimentConfig;
use super::metrics::{error_metric, ErrorSeries, ErrorStatistics};

/// Worst observed ‖φ_i(t)‖/(γ(t − T0)G) over every active round of every realization.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ResidualSummary {
    pub rounds_checked: usize,
    pub max_ratio: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TfSummary {
    pub reached: usize,
    pub not_reached: usize,
    pub mean_reached: f64,
    pub max_reached: usize,
}

#[derive(Debug, Clone)]
pub struct AlgorithmResult {
    pub algorithm: Algorithm,
    pub stats: ErrorStatistics,
    /// Resilient runs only.
    pub residuals: Option<ResidualSummary>,
    pub tf: Option<TfSummary>,
}

#[derive(Debug, Clone)]
pub struct ExperimentResult {
    pub config_hash: String,
    pub seed: u64,
    pub params: BoundParams,
    /// One curve per [`BoundKind::GAP_BOUNDS`] entry, on the sample grid.
    pub curves: Vec<BoundCurve>,
    pub delta_m: BoundCurve,
    pub algorithms: Vec<AlgorithmResult>,
}

impl ExperimentResult {
    pub fn get(&self, algorithm: &str) -> Option<&AlgorithmResult> {
        self.algorithms
            .iter()
            .find(|a| a.algorithm.name() == algorithm)
    }
}

/// Merges residual summaries from several experiments.
pub fn summarize_residuals(parts: &[ResidualSummary]) -> Option<ResidualSummary> {
    parts.iter().copied().reduce(|a, b| ResidualSummary {
        rounds_checked: a.rounds_checked + b.rounds_checked,
        max_ratio: a.max_ratio.max(b.max_ratio),
    })
}

struct RunSummary {
    series: ErrorSeries,
    residuals: Option<ResidualSummary>,
    t_f: TfObservation,
}

/// Bound constants derived from the run: η is the norm radius of the box.
pub fn derived_params(config: &ExperimentConfig) -> Result<BoundParams> {
    let run = &config.run;
    BoundParams::from_setup(
        &run.problem,
        &run.topology,
        &run.trust,
        run.schedule.t0(),
        None,
    )
}

/// Runs every configured algorithm for `realizations` seeds derived from
/// `config.seed`. Realization `r` uses the same seed for every algorithm.
pub fn run_experiment(config: &ExperimentConfig) -> Result<ExperimentResult> {
    config.validate()?;
    let params = derived_params(config)?;
    let x_star = config.reference.point(&config.run.problem)?;
    let g = config.run.problem.regularity_constants().g;
    let grid = &config.sample_times;
    let options = RunOptions {
        record: Record::Times(grid.clone()),
        record_weights: false,
        check_residuals: true,
    };

    let mut algorithms = Vec::with_capacity(config.algorithms.len());
    for &algorithm in &config.algorithms {
        let runs = map_indices(config.realizations, config.execution, |r| {
            let seed = derive_seed(config.seed, r as u64);
            let trace = run_simulation(&config.run, algorithm, seed, &options)?;
            Ok(RunSummary {
                series: error_metric(&trace, &x_star)?,
                residuals: residual_summary(&trace, config, g),
                t_f: trace.t_f,
            })
        })?;
        let series: Vec<ErrorSeries> = runs.iter().map(|r| r.series.clone()).collect();
        let stats = ErrorStatistics::aggregate(algorithm.name(), &series)?;
        let parts: Vec<ResidualSummary> = runs.iter().filter_map(|r| r.residuals).collect();
        let residuals = summarize_residuals(&parts);
        let tf =
            (algorithm == Algorithm::Resilient).then(|| tf_summary(runs.iter().map(|r| r.t_f)));
        algorithms.push(AlgorithmResult {
            algorithm,
            stats,
            residuals,
            tf,
        });
    }

    let curves = BoundKind::GAP_BOUNDS
        .iter()
        .map(|&k| bound_curve(k, grid, &params))
        .collect::<Result<_>>()?;
    let delta_m = bound_curve(BoundKind::DeltaM, grid, &params)?;
    Ok(ExperimentResult {
        config_hash: config.run.fingerprint(),
        seed: config.seed,
        params,
        curves,
        delta_m,
        algorithms,
    })
}

fn residual_summary(
    trace: &SimulationTrace,
    config: &ExperimentConfig,
    g: f64,
) -> Option<ResidualSummary> {
    if trace.algorithm != Algorithm::Resilient {
        return None;
    }
    let schedule = &config.run.schedule;
    let mut s = ResidualSummary {
        rounds_checked: 0,
        max_ratio: 0.0,
    };
    for (t, &r) in trace.max_residuals.iter().enumerate() {
        let gamma = schedule.at_round(t);
        if schedule.is_active(t) && gamma > 0.0 {
            s.rounds_checked += 1;
            s.max_ratio = s.max_ratio.max(r / (gamma * g));
        }
    }
    Some(s)
}

fn tf_summary(obs: impl Iterator<Item = TfObservation>) -> TfSummary {
    let mut s = TfSummary {
        reached: 0,
        not_reached: 0,
        mean_reached: 0.0,
        max_reached: 0,
    };
    let mut total = 0.0;
    for o in obs {
        match o {
            TfObservation::Reached(k) => {
                s.reached += 1;
                total += k as f64;
                s.max_reached = s.max_reached.max(k);
            }
            _ => s.not_reached += 1,
        }
    }
    if s.reached > 0 {
        s.mean_reached = total / s.reached as f64;
    }
    s
}
