//! Comparison estimators: one-shot static localization and a
//! constant-velocity Kalman filter.

mod kalman;
mod static_solver;

pub use kalman::{kalman_step, run_kalman, KalmanConfig, KalmanState};
pub use static_solver::{run_static, static_solve, static_solve_from, StaticConfig, StaticResult};
