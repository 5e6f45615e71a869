//! Monte Carlo experiments over the simulator: configuration, metrics,
//! bound comparison, CSV output and the invariant suite behind `check`.

pub mod check;
pub mod config;
pub mod experiment;
pub mod export;
pub mod metrics;
pub mod report;

pub use config::{default_sample_grid, parse_algorithm, ExperimentConfig, Reference};
pub use experiment::{
    derived_params, run_experiment, summarize_residuals, AlgorithmResult, ExperimentResult,
    ResidualSummary, TfSummary,
};
pub use export::{
    experiment_rows, gnuplot_script, read_bounds_csv, read_experiment_csv, render_experiment_csv,
    write_bounds_csv, write_distance_csv, write_experiment_csv, write_outputs, BoundRow,
    ExperimentRow,
};
pub use metrics::{error_metric, ErrorSeries, ErrorStatistics};
pub use report::{
    compare_distance_to_average, compare_to_bounds, CurveCheck, Violation, DEFAULT_SLACK_SIGMAS,
};
