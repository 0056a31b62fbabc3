use serde::{Deserialize, Serialize};

use crate::convex::{fhat_grad, fhat_lipschitz, fhat_value, LipschitzBound};
use crate::error::Result;
use crate::geometry::Positions;
use crate::measurement::MeasurementSet;
use crate::network::NetworkGraph;
use crate::solver::{accelerated_descent, check_step_inputs, DescentOutcome, GradientOracle, Momentum};
use crate::trajectory::Scenario;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct StaticConfig {
    pub lipschitz: LipschitzBound,
    pub max_iters: usize,
    pub grad_tolerance: f64,
    pub record_objective: bool,
}

impl Default for StaticConfig {
    fn default() -> Self {
        StaticConfig {
            lipschitz: LipschitzBound::Spectral,
            max_iters: 500,
            grad_tolerance: 1e-6,
            record_objective: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StaticResult {
    pub estimate: Positions,
    pub iterations: usize,
    pub grad_norm: f64,
    /// `f̂(x(0)), f̂(x(1)), ...` when recording is enabled.
    pub objective: Vec<f64>,
}

struct Surrogate<'a> {
    graph: &'a NetworkGraph,
    meas: &'a MeasurementSet,
}

impl GradientOracle for Surrogate<'_> {
    fn gradient(&mut self, w: &Positions, out: &mut Positions) -> Result<usize> {
        *out = fhat_grad(w, self.meas, self.graph)?;
        Ok(2 * self.graph.edges().len())
    }
}

fn anchor_centroid(graph: &NetworkGraph) -> Positions {
    let mut c = vec![0.0; graph.dim()];
    for a in graph.anchors() {
        for (ci, ai) in c.iter_mut().zip(a) {
            *ci += ai;
        }
    }
    let m = graph.n_anchors().max(1) as f64;
    c.iter_mut().for_each(|v| *v /= m);
    let mut x = Positions::zeros(graph.n_nodes(), graph.dim());
    for i in 0..graph.n_nodes() {
        x.node_mut(i).copy_from_slice(&c);
    }
    x
}

/// Minimizes `f̂` alone from the anchors' centroid.
///
/// `f̂` is convex but not strongly convex, so the momentum follows the
/// convex-case schedule with step `1 / L_f̂`.
pub fn static_solve(meas: &MeasurementSet, graph: &NetworkGraph, config: &StaticConfig) -> Result<StaticResult> {
    static_solve_from(meas, graph, config, &anchor_centroid(graph))
}

/// [`static_solve`] from an explicit starting point.
pub fn static_solve_from(
    meas: &MeasurementSet,
    graph: &NetworkGraph,
    config: &StaticConfig,
    x0: &Positions,
) -> Result<StaticResult> {
    check_step_inputs(graph, meas, x0, x0)?;
    let l_fhat = fhat_lipschitz(graph, config.lipschitz);
    if l_fhat <= 0.0 {
        // no measurements at all: nothing to move towards
        return Ok(StaticResult {
            estimate: x0.clone(),
            iterations: 0,
            grad_norm: 0.0,
            objective: Vec::new(),
        });
    }
    let mut oracle = Surrogate { graph, meas };
    let mut obj = |x: &Positions| fhat_value(x, meas, graph);
    let DescentOutcome {
        x,
        iterations,
        grad_norm,
        objective,
        ..
    } = accelerated_descent(
        x0,
        Momentum {
            beta: None,
            step: 1.0 / l_fhat,
        },
        config.max_iters.max(1),
        config.grad_tolerance,
        false,
        &mut oracle,
        if config.record_objective { Some(&mut obj) } else { None },
    )?;
    Ok(StaticResult {
        estimate: x,
        iterations,
        grad_norm,
        objective,
    })
}

/// Independent static fix at every step.
pub fn run_static(
    scenario: &Scenario,
    measurements: &[MeasurementSet],
    config: &StaticConfig,
) -> Result<Vec<Positions>> {
    measurements
        .iter()
        .enumerate()
        .map(|(idx, m)| {
            let graph = scenario.graph_at(idx + 1)?;
            static_solve(m, &graph, config).map(|r| r.estimate)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::distance;

    #[test]
    fn noiseless_instance_reaches_zero() {
        let anchors = vec![vec![0.0, 0.0], vec![30.0, 0.0], vec![30.0, 30.0], vec![0.0, 30.0]];
        let g = NetworkGraph::complete(3, 2, anchors).unwrap();
        let truth = Positions::from_flat(vec![5.0, 5.0, 12.0, 20.0, 25.0, 8.0], 2).unwrap();
        let meas = MeasurementSet::noiseless(&g, &truth, 1);
        let res = static_solve(&meas, &g, &StaticConfig::default()).unwrap();
        assert!(fhat_value(&res.estimate, &meas, &g).unwrap() <= 1e-10);
    }

    #[test]
    fn trilateration_single_node() {
        let anchors = vec![vec![0.0, 0.0], vec![20.0, 0.0], vec![0.0, 20.0]];
        let g = NetworkGraph::complete(1, 2, anchors).unwrap();
        let truth = Positions::from_flat(vec![6.0, 7.0], 2).unwrap();
        let meas = MeasurementSet::noiseless(&g, &truth, 1);
        let cfg = StaticConfig {
            max_iters: 20_000,
            grad_tolerance: 1e-12,
            ..Default::default()
        };
        let res = static_solve(&meas, &g, &cfg).unwrap();
        assert!(distance(res.estimate.as_slice(), truth.as_slice()) < 1e-4);
    }
}
