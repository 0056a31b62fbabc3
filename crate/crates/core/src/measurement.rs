//! Noisy range generation and outlier contamination.
//!
//! Ranges follow `|true distance + N(0, sigma^2)|`, with one draw per
//! undirected edge so both endpoints share the same value.

use std::fmt::Write as _;

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::geometry::{distance, Positions};
use crate::network::NetworkGraph;
use crate::rng::{self, purpose};
use crate::trajectory::Scenario;

/// Range measurements available at one time step.
///
/// `edge_ranges[e]` belongs to `graph.edges()[e]`; `anchor_ranges[i][q]` is
/// node `i`'s range to anchor `graph.visible_anchors(i)[q]`.
#[derive(Debug, Clone, PartialEq)]
pub struct MeasurementSet {
    pub step: usize,
    pub edge_ranges: Vec<f64>,
    pub anchor_ranges: Vec<Vec<f64>>,
    pub edge_outliers: Vec<bool>,
    pub anchor_outliers: Vec<Vec<bool>>,
}

impl MeasurementSet {
    /// Exact ranges from known positions.
    pub fn noiseless(graph: &NetworkGraph, positions: &Positions, step: usize) -> Self {
        let edge_ranges = graph
            .edges()
            .iter()
            .map(|&(i, j)| distance(positions.node(i), positions.node(j)))
            .collect();
        let anchor_ranges = (0..graph.n_nodes())
            .map(|i| {
                graph
                    .visible_anchors(i)
                    .iter()
                    .map(|&k| distance(positions.node(i), graph.anchor(k)))
                    .collect()
            })
            .collect();
        Self::with_ranges(graph, step, edge_ranges, anchor_ranges)
    }

    pub fn with_ranges(graph: &NetworkGraph, step: usize, edge_ranges: Vec<f64>, anchor_ranges: Vec<Vec<f64>>) -> Self {
        let anchor_outliers = (0..graph.n_nodes())
            .map(|i| vec![false; graph.visible_anchors(i).len()])
            .collect();
        MeasurementSet {
            step,
            edge_outliers: vec![false; edge_ranges.len()],
            edge_ranges,
            anchor_ranges,
            anchor_outliers,
        }
    }

    /// Checks the set is defined exactly on the graph's pairs.
    pub fn check_against(&self, graph: &NetworkGraph) -> Result<()> {
        if self.edge_ranges.len() != graph.edges().len() {
            return Err(Error::LengthMismatch(format!(
                "{} edge ranges for {} edges",
                self.edge_ranges.len(),
                graph.edges().len()
            )));
        }
        if self.anchor_ranges.len() != graph.n_nodes() {
            return Err(Error::LengthMismatch(format!(
                "anchor ranges for {} nodes, expected {}",
                self.anchor_ranges.len(),
                graph.n_nodes()
            )));
        }
        for (i, r) in self.anchor_ranges.iter().enumerate() {
            if r.len() != graph.visible_anchors(i).len() {
                return Err(Error::LengthMismatch(format!(
                    "node {i} has {} anchor ranges, sees {} anchors",
                    r.len(),
                    graph.visible_anchors(i).len()
                )));
            }
        }
        Ok(())
    }

    /// Range of node `i` to anchor `k`, if measured.
    pub fn anchor_range(&self, graph: &NetworkGraph, i: usize, k: usize) -> Option<f64> {
        graph
            .visible_anchors(i)
            .iter()
            .position(|&a| a == k)
            .map(|q| self.anchor_ranges[i][q])
    }

    pub fn outlier_count(&self) -> usize {
        self.edge_outliers.iter().filter(|f| **f).count()
            + self.anchor_outliers.iter().flatten().filter(|f| **f).count()
    }

    /// Appends CSV rows `step,kind,i,j_or_anchor,range,outlier_flag`.
    pub fn write_csv_rows(&self, graph: &NetworkGraph, out: &mut String) {
        for (e, &(i, j)) in graph.edges().iter().enumerate() {
            let _ = writeln!(
                out,
                "{},edge,{i},{j},{},{}",
                self.step, self.edge_ranges[e], self.edge_outliers[e] as u8
            );
        }
        for i in 0..graph.n_nodes() {
            for (q, &k) in graph.visible_anchors(i).iter().enumerate() {
                let _ = writeln!(
                    out,
                    "{},anchor,{i},{k},{},{}",
                    self.step, self.anchor_ranges[i][q], self.anchor_outliers[i][q] as u8
                );
            }
        }
    }
}

pub const MEASUREMENT_CSV_HEADER: &str = "step,kind,i,j_or_anchor,range,outlier_flag\n";

fn noisy(true_dist: f64, sigma: f64, rng: &mut impl Rng) -> f64 {
    let z: f64 = StandardNormal.sample(rng);
    (true_dist + sigma * z).abs()
}

/// Samples the noisy ranges of step `k` (1-based) of `scenario`.
///
/// Draw order is fixed: edges in graph order, then each node's visible
/// anchors in visibility order.
pub fn sample_ranges(scenario: &Scenario, k: usize, sigma: f64, rng: &mut impl Rng) -> Result<MeasurementSet> {
    if !(sigma >= 0.0) || !sigma.is_finite() {
        return Err(Error::InvalidParams(format!("sigma must be nonnegative, got {sigma}")));
    }
    let truth = scenario.truth_at(k)?;
    let graph = scenario.graph_at(k)?;
    let exact = MeasurementSet::noiseless(&graph, truth, k);
    let edge_ranges = exact.edge_ranges.iter().map(|&d| noisy(d, sigma, rng)).collect();
    let anchor_ranges = exact
        .anchor_ranges
        .iter()
        .map(|row| row.iter().map(|&r| noisy(r, sigma, rng)).collect())
        .collect();
    Ok(MeasurementSet::with_ranges(&graph, k, edge_ranges, anchor_ranges))
}

/// Which range an outlier model contaminates.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase", tag = "kind", content = "index")]
pub enum OutlierTarget {
    /// Range from each vehicle to this anchor.
    Anchor(usize),
    /// Inter-vehicle range on this edge.
    Edge(usize),
}

/// Multiplicative outlier contamination.
#[derive(Debug, Clone, PartialEq)]
pub struct OutlierModel {
    pub prob: f64,
    pub target: OutlierTarget,
    pub multiplier: f64,
    /// Vehicles subject to contamination; `None` means every vehicle that
    /// measures the target.
    pub vehicles: Option<Vec<usize>>,
}

impl OutlierModel {
    /// Range to `anchor` doubled with probability `prob`.
    pub fn doubling(prob: f64, anchor: usize) -> Self {
        OutlierModel {
            prob,
            target: OutlierTarget::Anchor(anchor),
            multiplier: 2.0,
            vehicles: None,
        }
    }

    pub fn apply(&self, meas: &MeasurementSet, graph: &NetworkGraph, rng: &mut impl Rng) -> Result<MeasurementSet> {
        if !(0.0..=1.0).contains(&self.prob) {
            return Err(Error::BadProbability(self.prob));
        }
        if !(self.multiplier >= 0.0) || !self.multiplier.is_finite() {
            return Err(Error::InvalidParams(format!(
                "outlier multiplier must be nonnegative, got {}",
                self.multiplier
            )));
        }
        meas.check_against(graph)?;
        let mut out = meas.clone();
        let allowed = |i: usize| self.vehicles.as_ref().map_or(true, |v| v.contains(&i));
        match self.target {
            OutlierTarget::Anchor(k) => {
                if k >= graph.n_anchors() {
                    return Err(Error::AnchorOutOfRange {
                        index: k,
                        m: graph.n_anchors(),
                    });
                }
                for i in 0..graph.n_nodes() {
                    let Some(q) = graph.visible_anchors(i).iter().position(|&a| a == k) else {
                        continue;
                    };
                    if !allowed(i) {
                        continue;
                    }
                    if rng.random::<f64>() < self.prob {
                        out.anchor_ranges[i][q] *= self.multiplier;
                        out.anchor_outliers[i][q] = true;
                    }
                }
            }
            OutlierTarget::Edge(e) => {
                if e >= graph.edges().len() {
                    return Err(Error::InvalidParams(format!("edge {e} out of range")));
                }
                let (i, j) = graph.edges()[e];
                if (allowed(i) || allowed(j)) && rng.random::<f64>() < self.prob {
                    out.edge_ranges[e] *= self.multiplier;
                    out.edge_outliers[e] = true;
                }
            }
        }
        Ok(out)
    }
}

/// Doubles each vehicle's range to `target_anchor` with probability `prob`.
pub fn inject_outliers(
    meas: &MeasurementSet,
    graph: &NetworkGraph,
    prob: f64,
    target_anchor: usize,
    rng: &mut impl Rng,
) -> Result<MeasurementSet> {
    OutlierModel::doubling(prob, target_anchor).apply(meas, graph, rng)
}

/// Measurements for every step of one trial.
///
/// Step `k` draws its noise from its own stream derived from `(seed, k)`, so
/// steps can be generated in any order (or in parallel) with identical output.
pub fn sample_trial(
    scenario: &Scenario,
    sigma: f64,
    outliers: Option<&OutlierModel>,
    seed: u64,
) -> Result<Vec<MeasurementSet>> {
    (1..=scenario.steps())
        .map(|k| {
            let mut r = rng::stream(seed, purpose::RANGES, k as u64);
            let meas = sample_ranges(scenario, k, sigma, &mut r)?;
            match outliers {
                Some(model) if model.prob > 0.0 => {
                    let mut o = rng::stream(seed, purpose::OUTLIERS, k as u64);
                    model.apply(&meas, &*scenario.graph_at(k)?, &mut o)
                }
                _ => Ok(meas),
            }
        })
        .collect()
}

pub fn measurements_csv(scenario: &Scenario, sets: &[MeasurementSet]) -> String {
    let mut out = String::from(MEASUREMENT_CSV_HEADER);
    for m in sets {
        m.write_csv_rows(&scenario.graph, &mut out);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::trajectory::{gen_lawnmower, LawnmowerParams};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn two_node_scenario(gap: f64) -> Scenario {
        let anchors = vec![vec![-50.0, -50.0], vec![50.0, -50.0], vec![0.0, 50.0]];
        let g = NetworkGraph::complete(2, 2, anchors).unwrap();
        let pos = Positions::from_flat(vec![0.0, 0.0, gap, 0.0], 2).unwrap();
        Scenario::new("pair", g, vec![pos], 1.0).unwrap()
    }

    #[test]
    fn zero_sigma_is_exact() {
        let sc = two_node_scenario(20.0);
        let mut r = ChaCha8Rng::seed_from_u64(1);
        let m = sample_ranges(&sc, 1, 0.0, &mut r).unwrap();
        assert_eq!(m.edge_ranges, vec![20.0]);
        assert_eq!(m.anchor_ranges[0][2], 50.0);
    }

    #[test]
    fn noise_moments() {
        let sc = two_node_scenario(20.0);
        let mut r = ChaCha8Rng::seed_from_u64(2024);
        let n = 100_000;
        let samples: Vec<f64> = (0..n)
            .map(|_| sample_ranges(&sc, 1, 1.0, &mut r).unwrap().edge_ranges[0])
            .collect();
        let mean = samples.iter().sum::<f64>() / n as f64;
        let var = samples.iter().map(|s| (s - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
        assert!((mean - 20.0).abs() < 0.02, "mean {mean}");
        assert!((var.sqrt() - 1.0).abs() < 0.02, "std {}", var.sqrt());
    }

    #[test]
    fn short_ranges_stay_nonnegative() {
        let sc = two_node_scenario(0.1);
        let mut r = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..10_000 {
            assert!(sample_ranges(&sc, 1, 1.0, &mut r).unwrap().edge_ranges[0] >= 0.0);
        }
    }

    #[test]
    fn step_out_of_range() {
        let sc = two_node_scenario(1.0);
        let mut r = ChaCha8Rng::seed_from_u64(3);
        assert!(matches!(
            sample_ranges(&sc, 2, 1.0, &mut r),
            Err(Error::StepOutOfRange { k: 2, steps: 1 })
        ));
        assert!(sample_ranges(&sc, 0, 1.0, &mut r).is_err());
    }

    #[test]
    fn outlier_probability_extremes() {
        let sc = two_node_scenario(5.0);
        let mut r = ChaCha8Rng::seed_from_u64(4);
        let m = sample_ranges(&sc, 1, 1.0, &mut r).unwrap();
        let same = inject_outliers(&m, &sc.graph, 0.0, 1, &mut r).unwrap();
        assert_eq!(same, m);
        let all = inject_outliers(&m, &sc.graph, 1.0, 1, &mut r).unwrap();
        for i in 0..2 {
            assert_eq!(all.anchor_ranges[i][1], 2.0 * m.anchor_ranges[i][1]);
            assert!(all.anchor_outliers[i][1]);
            assert_eq!(all.anchor_ranges[i][0], m.anchor_ranges[i][0]);
        }
        assert!(matches!(
            inject_outliers(&m, &sc.graph, 1.5, 1, &mut r),
            Err(Error::BadProbability(_))
        ));
    }

    #[test]
    fn outlier_rate_binomial_band() {
        let sc = gen_lawnmower(&LawnmowerParams::default()).unwrap();
        let target = sc.outlier_anchor.unwrap();
        let meas = sample_ranges(&sc, 1, 1.0, &mut ChaCha8Rng::seed_from_u64(0)).unwrap();
        let mut r = ChaCha8Rng::seed_from_u64(99);
        let hits: usize = (0..10_000)
            .map(|_| {
                inject_outliers(&meas, &sc.graph, 0.01, target, &mut r)
                    .unwrap()
                    .outlier_count()
            })
            .sum();
        assert!((60..=140).contains(&hits), "{hits}");
    }

    #[test]
    fn edge_outlier_hook() {
        let sc = two_node_scenario(5.0);
        let m = MeasurementSet::noiseless(&sc.graph, sc.start(), 1);
        let model = OutlierModel {
            prob: 1.0,
            target: OutlierTarget::Edge(0),
            multiplier: 3.0,
            vehicles: None,
        };
        let out = model.apply(&m, &sc.graph, &mut ChaCha8Rng::seed_from_u64(0)).unwrap();
        assert_eq!(out.edge_ranges[0], 15.0);
        assert!(out.edge_outliers[0]);
    }

    #[test]
    fn trial_streams_are_reproducible() {
        let sc = gen_lawnmower(&LawnmowerParams::default()).unwrap();
        let model = OutlierModel::doubling(0.01, 0);
        let a = sample_trial(&sc, 1.0, Some(&model), 11).unwrap();
        let b = sample_trial(&sc, 1.0, Some(&model), 11).unwrap();
        let c = sample_trial(&sc, 1.0, Some(&model), 12).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, c);
    }
}
