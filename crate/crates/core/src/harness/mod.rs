//! Monte-Carlo experiments, error metrics and result files.

mod experiment;
mod metrics;
mod output;

pub use experiment::{
    run_monte_carlo, run_sweep, run_trial, Algorithm, AlgorithmSummary, ExperimentConfig, MonteCarloRun,
    OutlierSettings, ResultSummary, SweepPoint, TrialRun,
};
pub use metrics::{
    empirical_cdf, mean_step_error, mean_variance, node_errors, quantile, step_error, trajectory_error, ErrorMetric,
};
pub use output::*;
