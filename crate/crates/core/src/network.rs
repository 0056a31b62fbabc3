//! Measurement/communication graph, anchors and the incidence/Laplacian
//! structure that the gradient computations are built on.

use std::collections::{HashSet, VecDeque};
use std::path::Path;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Neighbor entry of a node: the neighbor id and the index of the shared edge.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Neighbor {
    pub node: usize,
    pub edge: usize,
}

/// Undirected connected graph over mobile nodes `0..n`, plus anchors.
///
/// Edges are stored normalized as `(i, j)` with `i < j`, in first-occurrence
/// order. Range measurements elsewhere in the crate are indexed by position in
/// this edge list.
#[derive(Debug, Clone, PartialEq)]
pub struct NetworkGraph {
    n: usize,
    dim: usize,
    edges: Vec<(usize, usize)>,
    anchors: Vec<Vec<f64>>,
    visibility: Vec<Vec<usize>>,
    neighbors: Vec<Vec<Neighbor>>,
}

impl NetworkGraph {
    /// Validates and builds a graph. Duplicate edges (in either orientation)
    /// are dropped; self-loops are rejected.
    pub fn build(
        n: usize,
        dim: usize,
        edges: &[(usize, usize)],
        anchors: Vec<Vec<f64>>,
        visibility: Vec<Vec<usize>>,
    ) -> Result<Self> {
        if dim != 2 && dim != 3 {
            return Err(Error::BadDimension(dim));
        }
        if n == 0 {
            return Err(Error::EmptyGraph);
        }
        for a in &anchors {
            if a.len() != dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    got: a.len(),
                });
            }
            if a.iter().any(|v| !v.is_finite()) {
                return Err(Error::InvalidParams("anchor coordinates must be finite".into()));
            }
        }
        if visibility.len() != n {
            return Err(Error::LengthMismatch(format!(
                "visibility lists for {} nodes, expected {n}",
                visibility.len()
            )));
        }
        let m = anchors.len();
        let mut vis_clean = Vec::with_capacity(n);
        for list in visibility {
            let mut seen = HashSet::new();
            let mut clean = Vec::with_capacity(list.len());
            for k in list {
                if k >= m {
                    return Err(Error::AnchorOutOfRange { index: k, m });
                }
                if seen.insert(k) {
                    clean.push(k);
                }
            }
            vis_clean.push(clean);
        }

        let mut seen = HashSet::new();
        let mut norm_edges = Vec::with_capacity(edges.len());
        for &(a, b) in edges {
            for idx in [a, b] {
                if idx >= n {
                    return Err(Error::NodeOutOfRange { index: idx, n });
                }
            }
            if a == b {
                return Err(Error::SelfLoop(a, b));
            }
            let e = (a.min(b), a.max(b));
            if seen.insert(e) {
                norm_edges.push(e);
            }
        }

        let mut neighbors = vec![Vec::new(); n];
        for (idx, &(i, j)) in norm_edges.iter().enumerate() {
            neighbors[i].push(Neighbor { node: j, edge: idx });
            neighbors[j].push(Neighbor { node: i, edge: idx });
        }

        // BFS connectivity from node 0
        let mut visited = vec![false; n];
        let mut queue = VecDeque::from([0usize]);
        visited[0] = true;
        while let Some(u) = queue.pop_front() {
            for nb in &neighbors[u] {
                if !visited[nb.node] {
                    visited[nb.node] = true;
                    queue.push_back(nb.node);
                }
            }
        }
        if let Some(unreached) = visited.iter().position(|v| !v) {
            return Err(Error::DisconnectedGraph(unreached));
        }

        Ok(NetworkGraph {
            n,
            dim,
            edges: norm_edges,
            anchors,
            visibility: vis_clean,
            neighbors,
        })
    }

    /// Complete graph over `n` nodes with every anchor visible to every node.
    pub fn complete(n: usize, dim: usize, anchors: Vec<Vec<f64>>) -> Result<Self> {
        let mut edges = Vec::new();
        for i in 0..n {
            for j in i + 1..n {
                edges.push((i, j));
            }
        }
        let all: Vec<usize> = (0..anchors.len()).collect();
        NetworkGraph::build(n, dim, &edges, anchors, vec![all; n])
    }

    pub fn n_nodes(&self) -> usize {
        self.n
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn n_anchors(&self) -> usize {
        self.anchors.len()
    }

    pub fn edges(&self) -> &[(usize, usize)] {
        &self.edges
    }

    pub fn anchors(&self) -> &[Vec<f64>] {
        &self.anchors
    }

    pub fn anchor(&self, k: usize) -> &[f64] {
        &self.anchors[k]
    }

    /// Anchor indices that node `i` ranges to.
    pub fn visible_anchors(&self, i: usize) -> &[usize] {
        &self.visibility[i]
    }

    pub fn neighbors(&self, i: usize) -> &[Neighbor] {
        &self.neighbors[i]
    }

    pub fn degree(&self, i: usize) -> usize {
        self.neighbors[i].len()
    }

    pub fn max_degree(&self) -> usize {
        (0..self.n).map(|i| self.degree(i)).max().unwrap_or(0)
    }

    pub fn max_visible_anchors(&self) -> usize {
        self.visibility.iter().map(Vec::len).max().unwrap_or(0)
    }

    /// Total number of node-anchor range pairs.
    pub fn n_anchor_links(&self) -> usize {
        self.visibility.iter().map(Vec::len).sum()
    }

    pub fn is_neighbor(&self, i: usize, j: usize) -> bool {
        self.neighbors[i].iter().any(|nb| nb.node == j)
    }

    /// Same topology with anchors moved, e.g. for surface-vessel anchors that
    /// report a fresh position each step.
    pub fn with_anchor_positions(&self, anchors: Vec<Vec<f64>>) -> Result<Self> {
        if anchors.len() != self.anchors.len() {
            return Err(Error::LengthMismatch(format!(
                "{} anchor positions, expected {}",
                anchors.len(),
                self.anchors.len()
            )));
        }
        if let Some(a) = anchors.iter().find(|a| a.len() != self.dim) {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                got: a.len(),
            });
        }
        Ok(NetworkGraph {
            anchors,
            ..self.clone()
        })
    }

    /// Largest eigenvalue of the graph Laplacian.
    pub fn laplacian_spectral_radius(&self) -> f64 {
        if self.edges.is_empty() {
            return 0.0;
        }
        let lap = self.incidence().laplacian_matrix();
        lap.symmetric_eigen().eigenvalues.iter().cloned().fold(0.0, f64::max)
    }

    pub fn incidence(&self) -> IncidenceStructure {
        incidence_and_laplacian(self)
    }

    pub fn to_config(&self) -> GraphConfig {
        GraphConfig {
            nodes: self.n,
            dim: self.dim,
            edges: self.edges.iter().map(|&(i, j)| [i, j]).collect(),
            anchors: self.anchors.clone(),
            visibility: Some(self.visibility.clone()),
        }
    }
}

/// Arc-node incidence matrix `C` (one row per edge) and Laplacian `L = CᵀC`.
///
/// Orientation: for edge `(i, j)` with `i < j`, `C[e][i] = +1`, `C[e][j] = -1`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct IncidenceStructure {
    pub n: usize,
    pub incidence: Vec<Vec<i64>>,
    pub laplacian: Vec<Vec<i64>>,
}

impl IncidenceStructure {
    pub fn laplacian_matrix(&self) -> DMatrix<f64> {
        DMatrix::from_fn(self.n, self.n, |r, c| self.laplacian[r][c] as f64)
    }

    pub fn incidence_matrix(&self) -> DMatrix<f64> {
        DMatrix::from_fn(self.incidence.len(), self.n, |r, c| self.incidence[r][c] as f64)
    }
}

pub fn incidence_and_laplacian(graph: &NetworkGraph) -> IncidenceStructure {
    let n = graph.n;
    let incidence: Vec<Vec<i64>> = graph
        .edges
        .iter()
        .map(|&(i, j)| {
            let mut row = vec![0i64; n];
            row[i] = 1;
            row[j] = -1;
            row
        })
        .collect();
    let mut laplacian = vec![vec![0i64; n]; n];
    for row in &incidence {
        for a in 0..n {
            if row[a] == 0 {
                continue;
            }
            for b in 0..n {
                laplacian[a][b] += row[a] * row[b];
            }
        }
    }
    IncidenceStructure {
        n,
        incidence,
        laplacian,
    }
}

/// Outcome of the anchor-count localizability check.
#[derive(Debug, Clone, PartialEq)]
pub struct LocalizabilityReport {
    pub passed: bool,
    pub anchors: usize,
    pub required: usize,
    pub explanation: String,
    pub warnings: Vec<String>,
}

/// Range-only localization in `R^p` needs at least `p + 1` anchors. Nodes with
/// no anchor in view only produce warnings: their neighbors may still pin them.
pub fn check_localizability(graph: &NetworkGraph) -> LocalizabilityReport {
    let required = graph.dim + 1;
    let anchors = graph.n_anchors();
    let passed = anchors >= required;
    let explanation = if passed {
        format!(
            "{anchors} anchors satisfy the minimum of {required} for p = {}",
            graph.dim
        )
    } else {
        format!(
            "{anchors} anchors is below the minimum of {required} for p = {}; positions are ambiguous",
            graph.dim
        )
    };
    let warnings = (0..graph.n)
        .filter(|&i| graph.visibility[i].is_empty())
        .map(|i| format!("node {i} ranges to no anchor; relies on neighbors"))
        .collect();
    LocalizabilityReport {
        passed,
        anchors,
        required,
        explanation,
        warnings,
    }
}

/// On-disk graph description (TOML).
///
/// ```toml
/// nodes = 3
/// dim = 2
/// edges = [[0, 1], [1, 2]]
/// anchors = [[0.0, 0.0], [10.0, 0.0], [0.0, 10.0]]
/// # optional: per-node anchor indices; defaults to every anchor for every node
/// visibility = [[0, 1, 2], [0, 1], []]
/// ```
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GraphConfig {
    pub nodes: usize,
    pub dim: usize,
    #[serde(default)]
    pub edges: Vec<[usize; 2]>,
    pub anchors: Vec<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub visibility: Option<Vec<Vec<usize>>>,
}

impl GraphConfig {
    pub fn build(&self) -> Result<NetworkGraph> {
        let edges: Vec<(usize, usize)> = self.edges.iter().map(|e| (e[0], e[1])).collect();
        let visibility = match &self.visibility {
            Some(v) => v.clone(),
            None => vec![(0..self.anchors.len()).collect(); self.nodes],
        };
        NetworkGraph::build(self.nodes, self.dim, &edges, self.anchors.clone(), visibility)
    }

    pub fn from_toml_str(s: &str) -> Result<Self> {
        toml::from_str(s).map_err(|e| Error::Parse(e.to_string()))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_toml_str(&std::fs::read_to_string(path)?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn three_anchors() -> Vec<Vec<f64>> {
        vec![vec![0.0, 0.0], vec![10.0, 0.0], vec![0.0, 10.0]]
    }

    #[test]
    fn smallest_connected_graph() {
        let g = NetworkGraph::build(2, 2, &[(0, 1)], three_anchors(), vec![vec![0, 1, 2]; 2]).unwrap();
        assert_eq!(g.degree(0), 1);
        assert_eq!(g.degree(1), 1);
    }

    #[test]
    fn isolated_node_is_disconnected() {
        let err = NetworkGraph::build(3, 2, &[(0, 1)], three_anchors(), vec![vec![]; 3]).unwrap_err();
        assert_eq!(err, Error::DisconnectedGraph(2));
    }

    #[test]
    fn rejects_self_loop_and_bad_dim() {
        assert_eq!(
            NetworkGraph::build(2, 2, &[(1, 1)], vec![], vec![vec![]; 2]).unwrap_err(),
            Error::SelfLoop(1, 1)
        );
        assert_eq!(
            NetworkGraph::build(2, 4, &[(0, 1)], vec![], vec![vec![]; 2]).unwrap_err(),
            Error::BadDimension(4)
        );
        assert!(matches!(
            NetworkGraph::build(2, 2, &[(0, 5)], vec![], vec![vec![]; 2]),
            Err(Error::NodeOutOfRange { index: 5, n: 2 })
        ));
        assert!(matches!(
            NetworkGraph::build(1, 2, &[], three_anchors(), vec![vec![3]]),
            Err(Error::AnchorOutOfRange { index: 3, m: 3 })
        ));
    }

    #[test]
    fn duplicate_edges_collapse() {
        let g = NetworkGraph::build(3, 2, &[(0, 1), (1, 0), (2, 1), (1, 2)], vec![], vec![vec![]; 3]).unwrap();
        assert_eq!(g.edges(), &[(0, 1), (1, 2)]);
    }

    #[test]
    fn triangle_laplacian() {
        let g = NetworkGraph::build(3, 2, &[(0, 1), (1, 2), (0, 2)], three_anchors(), vec![vec![]; 3]).unwrap();
        for i in 0..3 {
            assert_eq!(g.degree(i), 2);
        }
        let inc = g.incidence();
        assert_eq!(inc.laplacian, vec![vec![2, -1, -1], vec![-1, 2, -1], vec![-1, -1, 2]]);
        assert!((g.laplacian_spectral_radius() - 3.0).abs() < 1e-12);
    }

    #[test]
    fn single_edge_incidence() {
        let g = NetworkGraph::build(2, 2, &[(1, 0)], vec![], vec![vec![]; 2]).unwrap();
        let inc = g.incidence();
        assert_eq!(inc.incidence, vec![vec![1, -1]]);
        assert_eq!(inc.laplacian, vec![vec![1, -1], vec![-1, 1]]);
    }

    #[test]
    fn localizability_counts() {
        let planar = NetworkGraph::build(1, 2, &[], three_anchors(), vec![vec![0, 1, 2]]).unwrap();
        assert!(check_localizability(&planar).passed);

        let vol_anchors = vec![vec![0.0; 3], vec![1.0, 0.0, 0.0], vec![0.0, 1.0, 0.0]];
        let vol = NetworkGraph::build(1, 3, &[], vol_anchors, vec![vec![0, 1, 2]]).unwrap();
        let report = check_localizability(&vol);
        assert!(!report.passed);
        assert_eq!(report.required, 4);
    }

    #[test]
    fn anchor_free_node_warns_but_passes() {
        let anchors: Vec<Vec<f64>> = (0..12).map(|k| vec![k as f64, (k * k) as f64]).collect();
        let vis = vec![(0..12).collect(), vec![]];
        let g = NetworkGraph::build(2, 2, &[(0, 1)], anchors, vis).unwrap();
        let report = check_localizability(&g);
        assert!(report.passed);
        assert_eq!(report.warnings.len(), 1);
    }

    #[test]
    fn config_roundtrip_defaults_visibility() {
        let cfg = GraphConfig::from_toml_str(
            "nodes = 2\ndim = 2\nedges = [[0, 1]]\nanchors = [[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]]\n",
        )
        .unwrap();
        let g = cfg.build().unwrap();
        assert_eq!(g.visible_anchors(1), &[0, 1, 2]);
        let again = GraphConfig::from_toml_str(&toml::to_string(&g.to_config()).unwrap())
            .unwrap()
            .build()
            .unwrap();
        assert_eq!(again, g);
    }

    #[test]
    fn anchor_override_keeps_topology() {
        let g = NetworkGraph::complete(2, 2, three_anchors()).unwrap();
        let moved = g
            .with_anchor_positions(vec![vec![1.0, 1.0], vec![11.0, 1.0], vec![1.0, 11.0]])
            .unwrap();
        assert_eq!(moved.edges(), g.edges());
        assert_eq!(moved.anchor(0), &[1.0, 1.0]);
        assert!(g.with_anchor_positions(vec![vec![0.0, 0.0]]).is_err());
    }
}
