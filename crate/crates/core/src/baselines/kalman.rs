//! Constant-velocity Kalman filter on linearized ranges.
//!
//! Each node runs its own filter over `(position, velocity)`. Anchor ranges
//! are linearized about the predicted position. Inter-node ranges use the
//! neighbor's predicted position as if it were known, inflating the range
//! variance by the neighbor's position variance along the line of sight.
//! This is a stand-in for the comparison filter, not a reproduction of it.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::Positions;
use crate::measurement::MeasurementSet;
use crate::network::NetworkGraph;
use crate::trajectory::Scenario;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct KalmanConfig {
    /// Range noise standard deviation (the true one is supplied).
    pub sigma: f64,
    /// White-acceleration spectral density, m²/s³.
    pub process_noise: f64,
    pub init_position_var: f64,
    pub init_velocity_var: f64,
}

impl Default for KalmanConfig {
    fn default() -> Self {
        KalmanConfig {
            sigma: 1.0,
            process_noise: 0.01,
            init_position_var: 1.0,
            init_velocity_var: 0.25,
        }
    }
}

/// Per-node filter state `[position; velocity]` and its covariance.
#[derive(Debug, Clone, PartialEq)]
pub struct KalmanState {
    pub mean: DVector<f64>,
    pub cov: DMatrix<f64>,
}

impl KalmanState {
    pub fn new(position: &[f64], config: &KalmanConfig) -> Self {
        let p = position.len();
        let mut mean = DVector::zeros(2 * p);
        mean.rows_mut(0, p).copy_from_slice(position);
        let mut cov = DMatrix::zeros(2 * p, 2 * p);
        for d in 0..p {
            cov[(d, d)] = config.init_position_var;
            cov[(p + d, p + d)] = config.init_velocity_var;
        }
        KalmanState { mean, cov }
    }

    pub fn dim(&self) -> usize {
        self.mean.len() / 2
    }

    pub fn position(&self) -> Vec<f64> {
        self.mean.rows(0, self.dim()).iter().copied().collect()
    }

    pub fn velocity(&self) -> Vec<f64> {
        let p = self.dim();
        self.mean.rows(p, p).iter().copied().collect()
    }

    pub fn min_eigenvalue(&self) -> f64 {
        self.cov
            .clone()
            .symmetric_eigen()
            .eigenvalues
            .iter()
            .cloned()
            .fold(f64::INFINITY, f64::min)
    }

    fn predict(&mut self, dt: f64, q: f64) {
        let p = self.dim();
        let mut f = DMatrix::identity(2 * p, 2 * p);
        let mut qm = DMatrix::zeros(2 * p, 2 * p);
        for d in 0..p {
            f[(d, p + d)] = dt;
            qm[(d, d)] = q * dt.powi(3) / 3.0;
            qm[(d, p + d)] = q * dt.powi(2) / 2.0;
            qm[(p + d, d)] = q * dt.powi(2) / 2.0;
            qm[(p + d, p + d)] = q * dt;
        }
        self.mean = &f * &self.mean;
        self.cov = &f * &self.cov * f.transpose() + qm;
        symmetrize(&mut self.cov);
    }
}

fn symmetrize(m: &mut DMatrix<f64>) {
    let t = m.transpose();
    *m = (&*m + t) * 0.5;
}

/// Builds the linearized range row for a measurement to a known point `other`.
fn range_row(pos: &[f64], other: &[f64]) -> Option<(Vec<f64>, f64)> {
    let diff: Vec<f64> = pos.iter().zip(other).map(|(a, b)| a - b).collect();
    let r = crate::geometry::norm(&diff);
    if r < 1e-9 {
        return None;
    }
    Some((diff.iter().map(|d| d / r).collect(), r))
}

/// One predict/update cycle for every node. Pass `dt = 0` to skip prediction.
pub fn kalman_step(
    states: &mut [KalmanState],
    meas: &MeasurementSet,
    graph: &NetworkGraph,
    dt: f64,
    config: &KalmanConfig,
) -> Result<Positions> {
    meas.check_against(graph)?;
    if states.len() != graph.n_nodes() {
        return Err(Error::LengthMismatch(format!(
            "{} filter states for {} nodes",
            states.len(),
            graph.n_nodes()
        )));
    }
    let p = graph.dim();
    if dt > 0.0 {
        states.iter_mut().for_each(|s| s.predict(dt, config.process_noise));
    }
    let predicted: Vec<KalmanState> = states.to_vec();
    let var = config.sigma * config.sigma;

    for (i, state) in states.iter_mut().enumerate() {
        let pos = predicted[i].position();
        let mut rows: Vec<(Vec<f64>, f64, f64, f64)> = Vec::new(); // (u, predicted, measured, variance)
        for (q, &k) in graph.visible_anchors(i).iter().enumerate() {
            if let Some((u, r)) = range_row(&pos, graph.anchor(k)) {
                rows.push((u, r, meas.anchor_ranges[i][q], var));
            }
        }
        for nb in graph.neighbors(i) {
            let other = predicted[nb.node].position();
            if let Some((u, r)) = range_row(&pos, &other) {
                let pj = predicted[nb.node].cov.view((0, 0), (p, p));
                let uv = DVector::from_column_slice(&u);
                let extra = (uv.transpose() * pj * &uv)[(0, 0)];
                rows.push((u, r, meas.edge_ranges[nb.edge], var + extra));
            }
        }
        if rows.is_empty() {
            continue;
        }
        let m = rows.len();
        let mut h = DMatrix::zeros(m, 2 * p);
        let mut innov = DVector::zeros(m);
        let mut r = DMatrix::zeros(m, m);
        for (row, (u, pred, z, v)) in rows.iter().enumerate() {
            for d in 0..p {
                h[(row, d)] = u[d];
            }
            innov[row] = z - pred;
            r[(row, row)] = *v;
        }
        let pht = &state.cov * h.transpose();
        let s = &h * &pht + &r;
        let s_inv = s.cholesky().ok_or(Error::CovarianceNotPsd(f64::NAN))?.inverse();
        let gain = &pht * s_inv;
        state.mean += &gain * innov;
        let ikh = DMatrix::identity(2 * p, 2 * p) - &gain * &h;
        state.cov = &ikh * &state.cov * ikh.transpose() + &gain * r * gain.transpose();
        symmetrize(&mut state.cov);
        let min_eig = state.min_eigenvalue();
        if min_eig < -1e-9 {
            return Err(Error::CovarianceNotPsd(min_eig));
        }
    }

    let mut out = Positions::zeros(graph.n_nodes(), p);
    for (i, s) in states.iter().enumerate() {
        out.node_mut(i).copy_from_slice(&s.position());
    }
    Ok(out)
}

/// Filters a whole trajectory, initialized at the scenario's starting
/// position with zero velocity.
pub fn run_kalman(
    scenario: &Scenario,
    measurements: &[MeasurementSet],
    config: &KalmanConfig,
) -> Result<Vec<Positions>> {
    let mut states: Vec<KalmanState> = scenario
        .start()
        .nodes()
        .map(|pt| KalmanState::new(pt, config))
        .collect();
    measurements
        .iter()
        .enumerate()
        .map(|(idx, m)| {
            let graph = scenario.graph_at(idx + 1)?;
            let dt = if idx == 0 { 0.0 } else { scenario.dt };
            kalman_step(&mut states, m, &graph, dt, config)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::distance;

    fn anchors() -> Vec<Vec<f64>> {
        vec![
            vec![-30.0, -30.0],
            vec![30.0, -30.0],
            vec![30.0, 30.0],
            vec![-30.0, 30.0],
        ]
    }

    #[test]
    fn zero_velocity_prediction_keeps_position() {
        let cfg = KalmanConfig::default();
        let mut s = KalmanState::new(&[3.0, -2.0], &cfg);
        s.predict(1.0, cfg.process_noise);
        assert_eq!(s.position(), vec![3.0, -2.0]);
    }

    #[test]
    fn stationary_target_covariance_shrinks() {
        let g = NetworkGraph::complete(1, 2, anchors()).unwrap();
        let truth = Positions::from_flat(vec![2.0, 1.0], 2).unwrap();
        let meas = MeasurementSet::noiseless(&g, &truth, 1);
        let cfg = KalmanConfig {
            process_noise: 0.0,
            ..Default::default()
        };
        let mut states = vec![KalmanState::new(&[2.0, 1.0], &cfg)];
        let mut prev = f64::INFINITY;
        for k in 0..200 {
            kalman_step(&mut states, &meas, &g, if k == 0 { 0.0 } else { 1.0 }, &cfg).unwrap();
            let tr = states[0].cov.trace();
            assert!(tr <= prev + 1e-12, "step {k}: {tr} > {prev}");
            prev = tr;
        }
    }

    #[test]
    fn tracks_constant_velocity_target() {
        let g = NetworkGraph::complete(1, 2, anchors()).unwrap();
        let cfg = KalmanConfig {
            sigma: 0.05,
            ..Default::default()
        };
        // start with a 2 m position error and unknown velocity
        let mut states = vec![KalmanState::new(&[-12.0, 0.0], &cfg)];
        let mut errors = Vec::new();
        for k in 0..40 {
            let t = k as f64;
            let truth = Positions::from_flat(vec![-10.0 + 0.5 * t, 0.2 * t], 2).unwrap();
            let meas = MeasurementSet::noiseless(&g, &truth, k + 1);
            let est = kalman_step(&mut states, &meas, &g, if k == 0 { 0.0 } else { 1.0 }, &cfg).unwrap();
            errors.push(distance(est.as_slice(), truth.as_slice()));
        }
        assert!(errors[19] < errors[0]);
        assert!(errors[39] < 0.05, "{:?}", &errors[30..]);
        let v = states[0].velocity();
        assert!((v[0] - 0.5).abs() < 0.02 && (v[1] - 0.2).abs() < 0.02, "{v:?}");
    }
}
