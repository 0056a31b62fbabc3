//! Range-only localization of moving robot teams.
//!
//! Each time step solves a convex relaxation of the maximum-likelihood range
//! problem, regularized toward a motion prediction built from past estimates.
//! The inner solver is an accelerated gradient method whose iterations only
//! exchange values between ranging neighbors, so it runs as a distributed
//! protocol.
//!
//! ```
//! use locdyn::{run_trajectory, trajectory_error, ErrorMetric, ScenarioKind, SolverConfig};
//!
//! let scenario = ScenarioKind::Lawnmower.generate_default()?;
//! let est = run_trajectory(&scenario, 1.0, None, &SolverConfig::default(), 7)?;
//! let err = trajectory_error(&est.estimates, &scenario.truth, ErrorMetric::Stacked)?;
//! assert!(err < 2.0);
//! # Ok::<(), locdyn::Error>(())
//! ```

// `!(x > 0.0)` is used on purpose so NaN fails validation.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod baselines;
pub mod convex;
pub mod distributed;
pub mod error;
pub mod geometry;
pub mod harness;
pub mod measurement;
pub mod network;
pub mod rng;
pub mod solver;
pub mod trajectory;
pub mod velocity;

pub use baselines::{kalman_step, run_kalman, run_static, static_solve, KalmanConfig, KalmanState, StaticConfig};
pub use convex::{
    compute_constants, fhat_grad, fhat_value, g_grad, g_value, project_ball, ConvexConstants, LipschitzBound,
};
pub use distributed::{distributed_round_trace, RoundTrace};
pub use error::{Error, Result};
pub use geometry::{BoundingBox, Positions};
pub use harness::{
    empirical_cdf, run_monte_carlo, trajectory_error, Algorithm, ErrorMetric, ExperimentConfig, ResultSummary,
};
pub use measurement::{inject_outliers, sample_ranges, sample_trial, MeasurementSet, OutlierModel};
pub use network::{check_localizability, incidence_and_laplacian, GraphConfig, NetworkGraph};
pub use solver::{run_locdyn, run_trajectory, solve_step, EstimateHistory, InitPolicy, SolverConfig};
pub use trajectory::{
    gen_lap, gen_lawnmower, gen_spiral, LapParams, LawnmowerParams, Scenario, ScenarioKind, SpiralParams,
};
pub use velocity::{smooth_fir, taylor6, PositionHistory, VelocityMethod};
