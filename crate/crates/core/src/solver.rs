//! Time-recursive LocDyn estimator.
//!
//! At each measurement step `k` the estimator
//!
//! 1. estimates each node's displacement `v̂(k-1) ΔT` from its own past
//!    estimates ([`crate::velocity`]);
//! 2. predicts `x̃ = x̂(k-1) + v̂ ΔT`;
//! 3. minimizes `g_λ(x) = f̂(x) + λ‖x - x̃‖²` with the constant-momentum
//!    accelerated gradient method
//!
//! ```text
//! w     = x(κ-1) + β (x(κ-1) - x(κ-2))
//! x(κ)  = w - ∇g_λ(w) / L
//! ```
//!
//! The gradient is evaluated node by node ([`node_gradient`]), each node using
//! only its own data and the extrapolated points `w_j` broadcast by its
//! neighbors, so one iteration costs one broadcast per node.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::convex::{
    compute_constants_with, g_value, project_ball_into, project_origin_ball_into, ConvexConstants, LipschitzBound,
};
use crate::error::{Error, Result};
use crate::geometry::{norm, BoundingBox, Positions};
use crate::measurement::{sample_trial, MeasurementSet, OutlierModel};
use crate::network::NetworkGraph;
use crate::rng::{self, purpose};
use crate::trajectory::Scenario;
use crate::velocity::{estimate_velocity, Fallback, PositionHistory, VelocityMethod};

/// Starting point of the inner iterations at each step.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum InitPolicy {
    /// `x(0) = x(-1) = x̂(k-1)`.
    #[default]
    WarmStart,
    /// Uniform in the anchors' bounding box, drawn fresh every step.
    RandomBox,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SolverConfig {
    pub lambda: f64,
    pub lipschitz: LipschitzBound,
    pub max_iters: usize,
    /// Stop once `‖∇g_λ(w)‖ / √(n p)` drops to this value (meters).
    pub grad_tolerance: f64,
    pub init: InitPolicy,
    pub velocity: VelocityMethod,
    pub fallback: Fallback,
    /// Record `g_λ(x(κ))` for every iteration (costs one extra evaluation).
    pub record_objective: bool,
    /// Keep every iterate `x(κ)`.
    pub record_iterates: bool,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            lambda: 0.5,
            lipschitz: LipschitzBound::Spectral,
            max_iters: 500,
            grad_tolerance: 1e-6,
            init: InitPolicy::WarmStart,
            velocity: VelocityMethod::SmoothFir,
            fallback: Fallback::Zero,
            record_objective: false,
            record_iterates: false,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.lambda > 0.0) || !self.lambda.is_finite() {
            return Err(Error::NonpositiveLambda(self.lambda));
        }
        if self.max_iters == 0 {
            return Err(Error::InvalidParams("max_iters must be at least 1".into()));
        }
        if !(self.grad_tolerance >= 0.0) {
            return Err(Error::InvalidParams("grad_tolerance must be nonnegative".into()));
        }
        Ok(())
    }

    pub fn constants(&self, graph: &NetworkGraph) -> Result<ConvexConstants> {
        self.validate()?;
        compute_constants_with(graph, self.lambda, self.lipschitz)
    }
}

/// Outcome of the inner iterations at one time step.
#[derive(Debug, Clone, PartialEq)]
pub struct SolverStepResult {
    pub estimate: Positions,
    pub iterations: usize,
    /// RMS gradient `‖∇g_λ(w)‖ / √(n p)` at the last extrapolated point.
    pub grad_norm: f64,
    /// `g_λ(x(0)), g_λ(x(1)), ...` when recording is enabled.
    pub objective: Vec<f64>,
    /// `x(1), x(2), ...` when recording is enabled.
    pub iterates: Vec<Positions>,
    /// Neighbor deliveries: `2 |E|` per iteration.
    pub messages: usize,
}

/// `x̃ = x̂(k-1) + v̂ ΔT`.
pub fn predict(x_prev: &Positions, displacement: &Positions) -> Result<Positions> {
    if x_prev.dim() != displacement.dim() || x_prev.len() != displacement.len() {
        return Err(Error::DimensionMismatch {
            expected: x_prev.len(),
            got: displacement.len(),
        });
    }
    let mut out = x_prev.clone();
    for (o, v) in out.as_mut_slice().iter_mut().zip(displacement.as_slice()) {
        *o += v;
    }
    Ok(out)
}

/// Source of neighbors' broadcast values for [`node_gradient`].
pub trait NeighborValues {
    fn value(&self, reader: usize, neighbor: usize) -> Result<&[f64]>;
}

/// Centralized view: every node's value is directly addressable.
impl NeighborValues for Positions {
    fn value(&self, _reader: usize, neighbor: usize) -> Result<&[f64]> {
        Ok(self.node(neighbor))
    }
}

/// `i`-th block of `∇g_λ(w)`:
///
/// ```text
/// Σ_{j∈N_i} [(w_i - w_j) - P_B_ij(w_i - w_j)] + Σ_{k∈A_i} [w_i - P_Ba_ik(w_i)] + 2λ (w_i - x̃_i)
/// ```
///
/// The first sum equals `δ_i w_i - Σ_j w_j - Σ_j P_B_ij(w_i - w_j)`.
#[allow(clippy::too_many_arguments)]
pub fn node_gradient(
    graph: &NetworkGraph,
    i: usize,
    w_i: &[f64],
    neighbors: &impl NeighborValues,
    meas: &MeasurementSet,
    lambda: f64,
    x_pred_i: &[f64],
    out: &mut [f64],
) -> Result<()> {
    let dim = graph.dim();
    let mut diff = [0.0f64; 3];
    let mut proj = [0.0f64; 3];
    let (diff, proj) = (&mut diff[..dim], &mut proj[..dim]);
    out.iter_mut().for_each(|v| *v = 0.0);
    for nb in graph.neighbors(i) {
        let w_j = neighbors.value(i, nb.node)?;
        for d in 0..dim {
            diff[d] = w_i[d] - w_j[d];
        }
        project_origin_ball_into(diff, meas.edge_ranges[nb.edge], proj);
        for d in 0..dim {
            out[d] += diff[d] - proj[d];
        }
    }
    for (q, &k) in graph.visible_anchors(i).iter().enumerate() {
        project_ball_into(w_i, graph.anchor(k), meas.anchor_ranges[i][q], proj);
        for d in 0..dim {
            out[d] += w_i[d] - proj[d];
        }
    }
    for d in 0..dim {
        out[d] += 2.0 * lambda * (w_i[d] - x_pred_i[d]);
    }
    Ok(())
}

/// All node blocks of `∇g_λ(w)` stacked, computed from the centralized view.
pub fn stacked_gradient(
    graph: &NetworkGraph,
    w: &Positions,
    meas: &MeasurementSet,
    lambda: f64,
    x_pred: &Positions,
    out: &mut Positions,
) -> Result<()> {
    for i in 0..graph.n_nodes() {
        node_gradient(graph, i, w.node(i), w, meas, lambda, x_pred.node(i), out.node_mut(i))?;
    }
    Ok(())
}

/// Gradient evaluator used by [`accelerated_descent`]: fills the gradient at
/// `w` and returns the number of neighbor deliveries it took.
pub(crate) trait GradientOracle {
    fn gradient(&mut self, w: &Positions, out: &mut Positions) -> Result<usize>;
}

pub(crate) struct Momentum {
    /// Constant β; `None` selects the convex schedule `(t_{κ-1} - 1) / t_κ`.
    pub beta: Option<f64>,
    pub step: f64,
}

pub(crate) struct DescentOutcome {
    pub x: Positions,
    pub iterations: usize,
    pub grad_norm: f64,
    pub messages: usize,
    pub iterates: Vec<Positions>,
    pub objective: Vec<f64>,
}

/// Shared accelerated loop. `objective` is evaluated on `x(0)` and each iterate
/// when given.
type ObjectiveFn<'a> = &'a mut dyn FnMut(&Positions) -> Result<f64>;

pub(crate) fn accelerated_descent(
    x0: &Positions,
    momentum: Momentum,
    max_iters: usize,
    tolerance: f64,
    record_iterates: bool,
    oracle: &mut impl GradientOracle,
    mut objective: Option<ObjectiveFn<'_>>,
) -> Result<DescentOutcome> {
    let scale = (x0.len().max(1) as f64).sqrt();
    let mut x_prev = x0.clone();
    let mut x = x0.clone();
    let mut w = x0.clone();
    let mut grad = Positions::zeros(x0.n_nodes(), x0.dim());
    let mut out = DescentOutcome {
        x: x0.clone(),
        iterations: 0,
        grad_norm: f64::INFINITY,
        messages: 0,
        iterates: Vec::new(),
        objective: Vec::new(),
    };
    if let Some(f) = objective.as_mut() {
        out.objective.push(f(x0)?);
    }
    let mut t = 1.0f64;
    for kappa in 1..=max_iters {
        let beta = match momentum.beta {
            Some(b) => b,
            None => {
                let t_next = 0.5 * (1.0 + (1.0 + 4.0 * t * t).sqrt());
                let b = (t - 1.0) / t_next;
                t = t_next;
                b
            }
        };
        for ((wv, a), b) in w.as_mut_slice().iter_mut().zip(x.as_slice()).zip(x_prev.as_slice()) {
            *wv = a + beta * (a - b);
        }
        out.messages += oracle.gradient(&w, &mut grad)?;
        out.grad_norm = norm(grad.as_slice()) / scale;
        std::mem::swap(&mut x_prev, &mut x);
        for ((xv, wv), g) in x.as_mut_slice().iter_mut().zip(w.as_slice()).zip(grad.as_slice()) {
            *xv = wv - momentum.step * g;
        }
        if !x.is_finite() {
            return Err(Error::NumericalDivergence(kappa));
        }
        out.iterations = kappa;
        if record_iterates {
            out.iterates.push(x.clone());
        }
        if let Some(f) = objective.as_mut() {
            out.objective.push(f(&x)?);
        }
        if out.grad_norm <= tolerance {
            break;
        }
    }
    out.x = x;
    Ok(out)
}

struct Centralized<'a> {
    graph: &'a NetworkGraph,
    meas: &'a MeasurementSet,
    lambda: f64,
    x_pred: &'a Positions,
}

impl GradientOracle for Centralized<'_> {
    fn gradient(&mut self, w: &Positions, out: &mut Positions) -> Result<usize> {
        stacked_gradient(self.graph, w, self.meas, self.lambda, self.x_pred, out)?;
        Ok(2 * self.graph.edges().len())
    }
}

pub(crate) fn check_step_inputs(
    graph: &NetworkGraph,
    meas: &MeasurementSet,
    x_pred: &Positions,
    x0: &Positions,
) -> Result<()> {
    meas.check_against(graph)?;
    x_pred.check_shape(graph.n_nodes(), graph.dim())?;
    x0.check_shape(graph.n_nodes(), graph.dim())?;
    if !x0.is_finite() || !x_pred.is_finite() {
        return Err(Error::InvalidParams("non-finite starting point or prediction".into()));
    }
    Ok(())
}

/// Minimizes `g_λ` for one step starting from `x0` (`x(-1) = x(0) = x0`).
pub fn solve_step(
    meas: &MeasurementSet,
    x_pred: &Positions,
    x0: &Positions,
    config: &SolverConfig,
    graph: &NetworkGraph,
) -> Result<SolverStepResult> {
    let constants = config.constants(graph)?;
    solve_step_with(meas, x_pred, x0, config, &constants, graph)
}

/// [`solve_step`] with precomputed constants.
pub fn solve_step_with(
    meas: &MeasurementSet,
    x_pred: &Positions,
    x0: &Positions,
    config: &SolverConfig,
    constants: &ConvexConstants,
    graph: &NetworkGraph,
) -> Result<SolverStepResult> {
    check_step_inputs(graph, meas, x_pred, x0)?;
    let mut oracle = Centralized {
        graph,
        meas,
        lambda: constants.lambda,
        x_pred,
    };
    let mut obj = |x: &Positions| g_value(x, x_pred, constants.lambda, meas, graph);
    let outcome = accelerated_descent(
        x0,
        Momentum {
            beta: Some(constants.beta),
            step: 1.0 / constants.l,
        },
        config.max_iters,
        config.grad_tolerance,
        config.record_iterates,
        &mut oracle,
        if config.record_objective { Some(&mut obj) } else { None },
    )?;
    Ok(SolverStepResult {
        estimate: outcome.x,
        iterations: outcome.iterations,
        grad_norm: outcome.grad_norm,
        objective: outcome.objective,
        iterates: outcome.iterates,
        messages: outcome.messages,
    })
}

/// Uniform sample in the box spanned by the anchors (or a unit box around the
/// origin when there are none).
pub fn random_in_anchor_box(graph: &NetworkGraph, rng: &mut impl Rng) -> Positions {
    let bb = BoundingBox::around(graph.anchors().iter().map(Vec::as_slice)).unwrap_or_else(|| BoundingBox {
        min: vec![-0.5; graph.dim()],
        max: vec![0.5; graph.dim()],
    });
    let mut x = Positions::zeros(graph.n_nodes(), graph.dim());
    for i in 0..graph.n_nodes() {
        for (d, v) in x.node_mut(i).iter_mut().enumerate() {
            *v = bb.min[d] + rng.random::<f64>() * bb.extent(d);
        }
    }
    x
}

/// Per-step solver diagnostics kept in an [`EstimateHistory`].
#[derive(Debug, Clone, PartialEq)]
pub struct StepDiagnostics {
    pub iterations: usize,
    pub grad_norm: f64,
    pub messages: usize,
}

/// Estimates of one trajectory run; `estimates[k - 1]` is `x̂(k)`.
#[derive(Debug, Clone, PartialEq)]
pub struct EstimateHistory {
    pub estimates: Vec<Positions>,
    /// Displacements `v̂ ΔT` used to predict each step.
    pub displacements: Vec<Positions>,
    pub diagnostics: Vec<StepDiagnostics>,
}

impl EstimateHistory {
    pub fn steps(&self) -> usize {
        self.estimates.len()
    }
}

/// Runs LocDyn over precomputed measurements (one set per step).
///
/// The estimator starts from the scenario's initial position: `x̂(0)` is the
/// first truth sample. Step 1 draws its inner starting point uniformly in the
/// anchor box; later steps follow `config.init`.
pub fn run_locdyn(
    scenario: &Scenario,
    measurements: &[MeasurementSet],
    config: &SolverConfig,
    seed: u64,
) -> Result<EstimateHistory> {
    run_locdyn_with_velocity(scenario, measurements, config, seed, None)
}

/// As [`run_locdyn`]; `external_velocity(k)` supplies measured velocities for
/// [`VelocityMethod::External`].
pub fn run_locdyn_with_velocity(
    scenario: &Scenario,
    measurements: &[MeasurementSet],
    config: &SolverConfig,
    seed: u64,
    external_velocity: Option<&dyn Fn(usize) -> Positions>,
) -> Result<EstimateHistory> {
    config.validate()?;
    if measurements.len() != scenario.steps() {
        return Err(Error::LengthMismatch(format!(
            "{} measurement sets for {} steps",
            measurements.len(),
            scenario.steps()
        )));
    }
    let static_constants = if scenario.anchor_tracks.is_none() {
        Some(config.constants(&scenario.graph)?)
    } else {
        None
    };
    let mut history = PositionHistory::new(PositionHistory::DEFAULT_CAPACITY);
    let mut out = EstimateHistory {
        estimates: Vec::with_capacity(scenario.steps()),
        displacements: Vec::with_capacity(scenario.steps()),
        diagnostics: Vec::with_capacity(scenario.steps()),
    };
    let mut x_prev = scenario.start().clone();
    for k in 1..=scenario.steps() {
        let graph = scenario.graph_at(k)?;
        let constants = match static_constants {
            Some(c) => c,
            None => config.constants(&graph)?,
        };
        let ext = external_velocity.map(|f| f(k - 1));
        let disp = if k == 1 {
            Positions::zeros(x_prev.n_nodes(), x_prev.dim())
        } else {
            estimate_velocity(&history, k, config.velocity, config.fallback, ext.as_ref(), scenario.dt)
        };
        let x_pred = predict(&x_prev, &disp)?;
        let x0 = if k == 1 || config.init == InitPolicy::RandomBox {
            random_in_anchor_box(&graph, &mut rng::stream(seed, purpose::INIT, k as u64))
        } else {
            x_prev.clone()
        };
        let res = solve_step_with(&measurements[k - 1], &x_pred, &x0, config, &constants, &graph)?;
        history.push(k, res.estimate.clone())?;
        out.diagnostics.push(StepDiagnostics {
            iterations: res.iterations,
            grad_norm: res.grad_norm,
            messages: res.messages,
        });
        out.displacements.push(disp);
        x_prev = res.estimate.clone();
        out.estimates.push(res.estimate);
    }
    Ok(out)
}

/// Samples measurements for one trial and runs LocDyn on them.
pub fn run_trajectory(
    scenario: &Scenario,
    sigma: f64,
    outliers: Option<&OutlierModel>,
    config: &SolverConfig,
    seed: u64,
) -> Result<EstimateHistory> {
    let meas = sample_trial(scenario, sigma, outliers, seed)?;
    run_locdyn(scenario, &meas, config, seed)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::convex::g_grad;
    use crate::trajectory::{gen_lawnmower, LawnmowerParams};

    fn trilateration_graph() -> NetworkGraph {
        let anchors = vec![vec![0.0, 0.0], vec![20.0, 0.0], vec![0.0, 20.0]];
        NetworkGraph::complete(1, 2, anchors).unwrap()
    }

    #[test]
    fn predict_examples() {
        let x = Positions::from_flat(vec![0.0, 0.0], 2).unwrap();
        let v = Positions::from_flat(vec![1.0, 2.0], 2).unwrap();
        assert_eq!(predict(&x, &v).unwrap().as_slice(), &[1.0, 2.0]);
        assert_eq!(predict(&x, &Positions::zeros(1, 2)).unwrap(), x);
        assert!(predict(&x, &Positions::zeros(2, 2)).is_err());
    }

    #[test]
    fn fixed_point_converges_immediately() {
        let g = trilateration_graph();
        let truth = Positions::from_flat(vec![6.0, 7.0], 2).unwrap();
        let meas = MeasurementSet::noiseless(&g, &truth, 1);
        let res = solve_step(&meas, &truth, &truth, &SolverConfig::default(), &g).unwrap();
        assert!(res.iterations <= 1);
        assert_eq!(res.grad_norm, 0.0);
        assert_eq!(res.estimate, truth);
    }

    #[test]
    fn noiseless_trilateration() {
        let g = trilateration_graph();
        let truth = Positions::from_flat(vec![6.0, 7.0], 2).unwrap();
        let meas = MeasurementSet::noiseless(&g, &truth, 1);
        let pred = Positions::from_flat(vec![9.0, 3.0], 2).unwrap();
        let cfg = SolverConfig {
            lambda: 1e-6,
            grad_tolerance: 1e-12,
            max_iters: 500,
            ..SolverConfig::default()
        };
        let res = solve_step(&meas, &pred, &pred, &cfg, &g).unwrap();
        assert!(res.iterations <= 500);
        let err = crate::geometry::distance(res.estimate.as_slice(), truth.as_slice());
        assert!(err < 1e-4, "error {err}");
    }

    #[test]
    fn node_gradient_without_anchors() {
        let g = NetworkGraph::build(2, 2, &[(0, 1)], vec![vec![0.0, 0.0]; 3], vec![vec![0, 1, 2], vec![]]).unwrap();
        let w = Positions::from_flat(vec![0.0, 0.0, 3.0, 0.0], 2).unwrap();
        let meas = MeasurementSet::with_ranges(&g, 1, vec![1.0], vec![vec![0.0; 3], vec![]]);
        let mut out = [0.0; 2];
        node_gradient(&g, 1, w.node(1), &w, &meas, 0.5, w.node(1), &mut out).unwrap();
        // only the edge term: (3 - 0) - 1
        assert_eq!(out, [2.0, 0.0]);
    }

    #[test]
    fn stacked_matches_centralized_gradient() {
        let sc = gen_lawnmower(&LawnmowerParams {
            vehicles: 3,
            ..Default::default()
        })
        .unwrap();
        let meas = sample_trial(&sc, 1.0, None, 5).unwrap();
        let x = sc.truth[10].clone();
        let mut pred = sc.truth[12].clone();
        pred.as_mut_slice()[0] += 1.5;
        let mut stacked = Positions::zeros(3, 2);
        stacked_gradient(&sc.graph, &x, &meas[10], 0.3, &pred, &mut stacked).unwrap();
        let central = g_grad(&x, &pred, 0.3, &meas[10], &sc.graph).unwrap();
        for (a, b) in stacked.as_slice().iter().zip(central.as_slice()) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn rejects_bad_config() {
        let g = trilateration_graph();
        let x = Positions::zeros(1, 2);
        let meas = MeasurementSet::noiseless(&g, &x, 1);
        let cfg = SolverConfig {
            max_iters: 0,
            ..SolverConfig::default()
        };
        assert!(solve_step(&meas, &x, &x, &cfg, &g).is_err());
        let cfg = SolverConfig {
            lambda: 0.0,
            ..SolverConfig::default()
        };
        assert!(matches!(
            solve_step(&meas, &x, &x, &cfg, &g),
            Err(Error::NonpositiveLambda(_))
        ));
    }

    #[test]
    fn too_large_step_diverges() {
        // a deliberately wrong Lipschitz constant must surface as divergence
        let g = trilateration_graph();
        let truth = Positions::from_flat(vec![6.0, 7.0], 2).unwrap();
        let meas = MeasurementSet::noiseless(&g, &truth, 1);
        let mut c = SolverConfig::default().constants(&g).unwrap();
        c.l = 1e-3;
        let far = Positions::from_flat(vec![1e6, -1e6], 2).unwrap();
        let cfg = SolverConfig {
            max_iters: 5000,
            ..SolverConfig::default()
        };
        assert!(matches!(
            solve_step_with(&meas, &far, &far, &cfg, &c, &g),
            Err(Error::NumericalDivergence(_))
        ));
    }
}
