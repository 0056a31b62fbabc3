//! Disk-based convex relaxation of the range-only maximum-likelihood cost.
//!
//! Each squared range residual `(‖y‖ - d)^2` is replaced by the squared
//! distance from `y` to the ball `{‖y‖ <= d}`. The resulting surrogate
//!
//! ```text
//! f̂(x) = Σ_{i~j} ½ dist²_B(d_ij)(x_i - x_j) + Σ_i Σ_{k∈A_i} ½ dist²_B(a_k, r_ik)(x_i)
//! ```
//!
//! is convex, differentiable, and lower-bounds the original cost term by term.
//! Adding the motion prior gives the strongly convex objective
//!
//! ```text
//! g_λ(x) = f̂(x) + λ ‖x - x̃‖²,   ∇g_λ(x) = ∇f̂(x) + 2λ (x - x̃).
//! ```
//!
//! `∇f̂` is `L`-Lipschitz with `L_f̂ <= λ_max(Laplacian) + max_i |A_i|`: the
//! gradient of `½ dist²_B` is `y - P_B(y)`, which is 1-Lipschitz, the edge part
//! is composed with the incidence operator (squared norm `λ_max` of the
//! Laplacian) and the anchor part is block diagonal over nodes.

use crate::error::{Error, Result};
use crate::geometry::{norm, Positions};
use crate::measurement::MeasurementSet;
use crate::network::NetworkGraph;

/// Euclidean projection of `y` onto the ball of `radius` around `center`.
pub fn project_ball(y: &[f64], center: &[f64], radius: f64) -> Vec<f64> {
    let mut out = y.to_vec();
    project_ball_into(y, center, radius, &mut out);
    out
}

/// Projection written into `out` (same length as `y`).
#[inline]
pub fn project_ball_into(y: &[f64], center: &[f64], radius: f64, out: &mut [f64]) {
    let mut sq = 0.0;
    for (a, c) in y.iter().zip(center) {
        sq += (a - c) * (a - c);
    }
    let dist = sq.sqrt();
    if dist <= radius {
        out.copy_from_slice(y);
    } else {
        let scale = radius / dist;
        for ((o, a), c) in out.iter_mut().zip(y).zip(center) {
            *o = c + scale * (a - c);
        }
    }
}

/// Projection onto a ball centered at the origin.
#[inline]
pub(crate) fn project_origin_ball_into(y: &[f64], radius: f64, out: &mut [f64]) {
    let dist = norm(y);
    if dist <= radius {
        out.copy_from_slice(y);
    } else {
        let scale = radius / dist;
        for (o, a) in out.iter_mut().zip(y) {
            *o = scale * a;
        }
    }
}

/// `dist(y, B(center, radius))^2`.
#[inline]
pub fn ball_sq_distance(y: &[f64], center: &[f64], radius: f64) -> f64 {
    let mut sq = 0.0;
    for (a, c) in y.iter().zip(center) {
        sq += (a - c) * (a - c);
    }
    let excess = sq.sqrt() - radius;
    if excess > 0.0 {
        excess * excess
    } else {
        0.0
    }
}

fn check_inputs(x: &Positions, meas: &MeasurementSet, graph: &NetworkGraph) -> Result<()> {
    x.check_shape(graph.n_nodes(), graph.dim())?;
    meas.check_against(graph)
}

fn edge_difference(x: &Positions, i: usize, j: usize, buf: &mut [f64]) {
    for ((b, a), c) in buf.iter_mut().zip(x.node(i)).zip(x.node(j)) {
        *b = a - c;
    }
}

/// Value of the convex surrogate `f̂` at `x`.
pub fn fhat_value(x: &Positions, meas: &MeasurementSet, graph: &NetworkGraph) -> Result<f64> {
    check_inputs(x, meas, graph)?;
    let origin = vec![0.0; graph.dim()];
    let mut diff = vec![0.0; graph.dim()];
    let mut total = 0.0;
    for (e, &(i, j)) in graph.edges().iter().enumerate() {
        edge_difference(x, i, j, &mut diff);
        total += 0.5 * ball_sq_distance(&diff, &origin, meas.edge_ranges[e]);
    }
    for i in 0..graph.n_nodes() {
        for (q, &k) in graph.visible_anchors(i).iter().enumerate() {
            total += 0.5 * ball_sq_distance(x.node(i), graph.anchor(k), meas.anchor_ranges[i][q]);
        }
    }
    Ok(total)
}

/// Nonconvex maximum-likelihood cost `f`, kept for diagnostics.
pub fn ml_cost(x: &Positions, meas: &MeasurementSet, graph: &NetworkGraph) -> Result<f64> {
    check_inputs(x, meas, graph)?;
    let mut total = 0.0;
    for (e, &(i, j)) in graph.edges().iter().enumerate() {
        let d = crate::geometry::distance(x.node(i), x.node(j));
        total += 0.5 * (d - meas.edge_ranges[e]).powi(2);
    }
    for i in 0..graph.n_nodes() {
        for (q, &k) in graph.visible_anchors(i).iter().enumerate() {
            let d = crate::geometry::distance(x.node(i), graph.anchor(k));
            total += 0.5 * (d - meas.anchor_ranges[i][q]).powi(2);
        }
    }
    Ok(total)
}

/// Gradient of `f̂` in incidence form: `Aᵀ(Ax - P_B(Ax))` plus the anchor
/// terms `Σ_k (x_i - P_Ba_ik(x_i))`, accumulated edge by edge.
pub fn fhat_grad(x: &Positions, meas: &MeasurementSet, graph: &NetworkGraph) -> Result<Positions> {
    check_inputs(x, meas, graph)?;
    let dim = graph.dim();
    let mut grad = Positions::zeros(graph.n_nodes(), dim);
    let mut diff = vec![0.0; dim];
    let mut proj = vec![0.0; dim];
    for (e, &(i, j)) in graph.edges().iter().enumerate() {
        edge_difference(x, i, j, &mut diff);
        project_origin_ball_into(&diff, meas.edge_ranges[e], &mut proj);
        // incidence row: +1 at i, -1 at j
        for d in 0..dim {
            let r = diff[d] - proj[d];
            grad.node_mut(i)[d] += r;
            grad.node_mut(j)[d] -= r;
        }
    }
    for i in 0..graph.n_nodes() {
        for (q, &k) in graph.visible_anchors(i).iter().enumerate() {
            project_ball_into(x.node(i), graph.anchor(k), meas.anchor_ranges[i][q], &mut proj);
            for ((g, xi), pr) in grad.node_mut(i).iter_mut().zip(x.node(i)).zip(&proj) {
                *g += xi - pr;
            }
        }
    }
    Ok(grad)
}

fn check_lambda(lambda: f64) -> Result<()> {
    if !(lambda > 0.0) || !lambda.is_finite() {
        return Err(Error::NonpositiveLambda(lambda));
    }
    Ok(())
}

/// `g_λ(x) = f̂(x) + λ ‖x - x_pred‖²`.
pub fn g_value(
    x: &Positions,
    x_pred: &Positions,
    lambda: f64,
    meas: &MeasurementSet,
    graph: &NetworkGraph,
) -> Result<f64> {
    check_lambda(lambda)?;
    x_pred.check_shape(graph.n_nodes(), graph.dim())?;
    let fhat = fhat_value(x, meas, graph)?;
    let penalty: f64 = x
        .as_slice()
        .iter()
        .zip(x_pred.as_slice())
        .map(|(a, b)| (a - b) * (a - b))
        .sum();
    Ok(fhat + lambda * penalty)
}

/// `∇g_λ(x) = ∇f̂(x) + 2λ (x - x_pred)`.
pub fn g_grad(
    x: &Positions,
    x_pred: &Positions,
    lambda: f64,
    meas: &MeasurementSet,
    graph: &NetworkGraph,
) -> Result<Positions> {
    check_lambda(lambda)?;
    x_pred.check_shape(graph.n_nodes(), graph.dim())?;
    let mut grad = fhat_grad(x, meas, graph)?;
    for ((g, a), b) in grad.as_mut_slice().iter_mut().zip(x.as_slice()).zip(x_pred.as_slice()) {
        *g += 2.0 * lambda * (a - b);
    }
    Ok(grad)
}

/// How the Lipschitz constant of `∇f̂` is bounded.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum LipschitzBound {
    /// `λ_max(Laplacian) + max_i |A_i|`.
    #[default]
    Spectral,
    /// `2 δ_max + max_i |A_i|`; needs only local degree information.
    Degree,
}

/// Lipschitz constant of `∇f̂` for `graph`.
pub fn fhat_lipschitz(graph: &NetworkGraph, bound: LipschitzBound) -> f64 {
    let edge_part = match bound {
        LipschitzBound::Spectral => graph.laplacian_spectral_radius(),
        LipschitzBound::Degree => 2.0 * graph.max_degree() as f64,
    };
    edge_part + graph.max_visible_anchors() as f64
}

/// Smoothness/strong-convexity constants of `g_λ` and the momentum weight.
///
/// `λ = σ²/ς²` is the ratio of the range-noise variance to the variance of
/// the motion prior; neither variance is needed separately.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConvexConstants {
    pub lambda: f64,
    pub l_fhat: f64,
    /// `L = L_f̂ + 2λ`
    pub l: f64,
    /// `m = 2λ`
    pub m: f64,
    /// `β = (1 - √(m/L)) / (1 + √(m/L))`
    pub beta: f64,
}

impl ConvexConstants {
    pub fn from_parts(lambda: f64, l_fhat: f64) -> Result<Self> {
        check_lambda(lambda)?;
        if !(l_fhat >= 0.0) || !l_fhat.is_finite() {
            return Err(Error::InvalidParams(format!("invalid Lipschitz constant {l_fhat}")));
        }
        let l = l_fhat + 2.0 * lambda;
        let m = 2.0 * lambda;
        let q = (m / l).sqrt();
        Ok(ConvexConstants {
            lambda,
            l_fhat,
            l,
            m,
            beta: (1.0 - q) / (1.0 + q),
        })
    }

    /// `4 / (2 + κ √(m/L))²`, the accelerated-rate factor after `κ` iterations.
    pub fn rate_factor(&self, iteration: usize) -> f64 {
        let q = (self.m / self.l).sqrt();
        4.0 / (2.0 + iteration as f64 * q).powi(2)
    }
}

pub fn compute_constants(graph: &NetworkGraph, lambda: f64) -> Result<ConvexConstants> {
    compute_constants_with(graph, lambda, LipschitzBound::Spectral)
}

pub fn compute_constants_with(graph: &NetworkGraph, lambda: f64, bound: LipschitzBound) -> Result<ConvexConstants> {
    check_lambda(lambda)?;
    ConvexConstants::from_parts(lambda, fhat_lipschitz(graph, bound))
}
