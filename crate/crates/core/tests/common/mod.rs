#![allow(dead_code)]

use locdyn::{MeasurementSet, NetworkGraph, Positions};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

/// Randomly generated localization instance.
pub struct Instance {
    pub graph: NetworkGraph,
    pub truth: Positions,
    pub meas: MeasurementSet,
    pub lambda: f64,
    pub x_pred: Positions,
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn random_point(rng: &mut impl Rng, dim: usize, half_width: f64) -> Vec<f64> {
    (0..dim).map(|_| rng.random_range(-half_width..half_width)).collect()
}

pub fn random_positions(rng: &mut impl Rng, n: usize, dim: usize, half_width: f64) -> Positions {
    let pts: Vec<Vec<f64>> = (0..n).map(|_| random_point(rng, dim, half_width)).collect();
    Positions::from_points(&pts, dim).unwrap()
}

/// Connected graph: a random spanning tree plus extra random edges.
pub fn random_graph(rng: &mut impl Rng, n: usize, dim: usize, anchors: usize) -> NetworkGraph {
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(rng);
    let mut edges = Vec::new();
    for idx in 1..n {
        let parent = order[rng.random_range(0..idx)];
        edges.push((parent, order[idx]));
    }
    for _ in 0..n {
        let i = rng.random_range(0..n);
        let j = rng.random_range(0..n);
        if i != j {
            edges.push((i, j));
        }
    }
    let anchor_pos: Vec<Vec<f64>> = (0..anchors).map(|_| random_point(rng, dim, 40.0)).collect();
    let visibility: Vec<Vec<usize>> = (0..n)
        .map(|_| (0..anchors).filter(|_| rng.random_bool(0.6)).collect())
        .collect();
    NetworkGraph::build(n, dim, &edges, anchor_pos, visibility).unwrap()
}

/// Noisy ranges `|d + σ z|` for the given truth.
pub fn noisy_measurements(rng: &mut impl Rng, graph: &NetworkGraph, truth: &Positions, sigma: f64) -> MeasurementSet {
    let exact = MeasurementSet::noiseless(graph, truth, 1);
    let mut noise = |d: f64| {
        let z: f64 = StandardNormal.sample(rng);
        (d + sigma * z).abs()
    };
    let edges = exact.edge_ranges.iter().map(|&d| noise(d)).collect();
    let anchors = exact
        .anchor_ranges
        .iter()
        .map(|row| row.iter().map(|&d| noise(d)).collect())
        .collect();
    MeasurementSet::with_ranges(graph, 1, edges, anchors)
}

pub fn random_instance(seed: u64) -> Instance {
    let mut r = rng(seed);
    let n = r.random_range(2..9);
    let dim = if r.random_bool(0.5) { 2 } else { 3 };
    let anchors = r.random_range(dim + 1..dim + 5);
    let graph = random_graph(&mut r, n, dim, anchors);
    let truth = random_positions(&mut r, n, dim, 30.0);
    let sigma = r.random_range(0.1..3.0);
    let meas = noisy_measurements(&mut r, &graph, &truth, sigma);
    let lambda = r.random_range(0.05..2.0);
    let mut x_pred = truth.clone();
    for v in x_pred.as_mut_slice() {
        *v += r.random_range(-2.0..2.0);
    }
    Instance {
        graph,
        truth,
        meas,
        lambda,
        x_pred,
    }
}

pub fn sub(a: &Positions, b: &Positions) -> Vec<f64> {
    a.as_slice().iter().zip(b.as_slice()).map(|(x, y)| x - y).collect()
}

pub fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}
