use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::cloud::{find_duplicate, PointCloud};
use super::mesh::TriangleMesh;
use super::squared_distance;
use crate::error::{Result, RvgpError};

/// Edge weighting scheme.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Weighting {
    #[default]
    Unit,
    /// `exp(-|xi - xj|^2 / bandwidth^2)`
    Gaussian { bandwidth: f64 },
}

impl Weighting {
    fn weight(&self, sq_dist: f64) -> f64 {
        match *self {
            Weighting::Unit => 1.0,
            Weighting::Gaussian { bandwidth } => (-sq_dist / (bandwidth * bandwidth)).exp(),
        }
    }

    fn validate(&self) -> Result<()> {
        match *self {
            Weighting::Gaussian { bandwidth } if !(bandwidth > 0.0 && bandwidth.is_finite()) => Err(
                RvgpError::InvalidInput(format!("gaussian bandwidth must be > 0, got {bandwidth}")),
            ),
            _ => Ok(()),
        }
    }
}

/// What to do when the constructed graph has more than one component.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum ConnectivityPolicy {
    #[default]
    Error,
    Warn,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GraphOptions {
    pub k_neighbors: usize,
    #[serde(default)]
    pub weighting: Weighting,
    #[serde(default)]
    pub on_disconnected: ConnectivityPolicy,
}

impl Default for GraphOptions {
    fn default() -> Self {
        Self {
            k_neighbors: 5,
            weighting: Weighting::Unit,
            on_disconnected: ConnectivityPolicy::Error,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Edge {
    pub i: usize,
    pub j: usize,
    pub weight: f64,
}

/// Weighted undirected graph. Edges are stored once with `i < j`, sorted.
#[derive(Debug, Clone, PartialEq)]
pub struct ProximityGraph {
    n: usize,
    edges: Vec<Edge>,
    adjacency: Vec<Vec<(usize, f64)>>,
    degrees: Vec<f64>,
}

impl ProximityGraph {
    /// Builds a graph from an undirected edge list. Duplicate edges keep the
    /// last weight given; self-loops are rejected.
    pub fn from_edges(n: usize, edges: impl IntoIterator<Item = (usize, usize, f64)>) -> Result<Self> {
        let mut map = BTreeMap::new();
        for (a, b, w) in edges {
            if a >= n || b >= n {
                return Err(RvgpError::IndexOutOfRange {
                    what: "nodes",
                    index: a.max(b),
                    len: n,
                });
            }
            if a == b {
                return Err(RvgpError::InvalidInput(format!("self-loop at node {a}")));
            }
            if !(w >= 0.0 && w.is_finite()) {
                return Err(RvgpError::InvalidInput(format!(
                    "edge ({a}, {b}) has invalid weight {w}"
                )));
            }
            map.insert((a.min(b), a.max(b)), w);
        }
        let edges: Vec<Edge> = map
            .into_iter()
            .map(|((i, j), weight)| Edge { i, j, weight })
            .collect();
        let mut adjacency = vec![Vec::new(); n];
        let mut degrees = vec![0.0; n];
        for e in &edges {
            adjacency[e.i].push((e.j, e.weight));
            adjacency[e.j].push((e.i, e.weight));
        }
        for (node, adj) in adjacency.iter_mut().enumerate() {
            adj.sort_by_key(|&(j, _)| j);
            degrees[node] = adj.iter().map(|&(_, w)| w).sum();
        }
        if let Some(node) = degrees.iter().position(|&d| d <= 0.0) {
            return Err(RvgpError::IsolatedNode { node });
        }
        Ok(Self {
            n,
            edges,
            adjacency,
            degrees,
        })
    }

    /// Graph whose edges are the edges of the mesh triangles.
    pub fn from_mesh(mesh: &TriangleMesh, weighting: Weighting) -> Result<Self> {
        weighting.validate()?;
        let points = &mesh.points;
        let mut list = Vec::with_capacity(mesh.faces.len() * 3);
        for f in &mesh.faces {
            for (a, b) in [(f[0], f[1]), (f[1], f[2]), (f[2], f[0])] {
                let w = weighting.weight(squared_distance(points.point(a), points.point(b)));
                list.push((a, b, w));
            }
        }
        Self::from_edges(points.len(), list)
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    pub fn neighbors(&self, i: usize) -> &[(usize, f64)] {
        &self.adjacency[i]
    }

    pub fn degree(&self, i: usize) -> f64 {
        self.degrees[i]
    }

    pub fn degrees(&self) -> &[f64] {
        &self.degrees
    }

    pub fn weight(&self, i: usize, j: usize) -> Option<f64> {
        self.adjacency[i]
            .binary_search_by_key(&j, |&(k, _)| k)
            .ok()
            .map(|pos| self.adjacency[i][pos].1)
    }

    /// Component label per node (labels in order of first appearance).
    pub fn components(&self) -> Vec<usize> {
        let mut label = vec![usize::MAX; self.n];
        let mut next = 0;
        for start in 0..self.n {
            if label[start] != usize::MAX {
                continue;
            }
            let mut stack = vec![start];
            label[start] = next;
            while let Some(u) = stack.pop() {
                for &(v, _) in &self.adjacency[u] {
                    if label[v] == usize::MAX {
                        label[v] = next;
                        stack.push(v);
                    }
                }
            }
            next += 1;
        }
        label
    }

    pub fn component_count(&self) -> usize {
        self.components().into_iter().max().map_or(0, |m| m + 1)
    }

    pub fn is_connected(&self) -> bool {
        self.component_count() <= 1
    }

    /// Mean Euclidean edge length with respect to `points`.
    pub fn mean_edge_length(&self, points: &PointCloud) -> f64 {
        if self.edges.is_empty() {
            return 0.0;
        }
        let total: f64 = self
            .edges
            .iter()
            .map(|e| squared_distance(points.point(e.i), points.point(e.j)).sqrt())
            .sum();
        total / self.edges.len() as f64
    }

    pub(crate) fn check_connectivity(self, policy: ConnectivityPolicy) -> Result<Self> {
        let components = self.component_count();
        if components > 1 {
            match policy {
                ConnectivityPolicy::Error => return Err(RvgpError::Disconnected { components }),
                ConnectivityPolicy::Warn => {
                    log::warn!("proximity graph has {components} connected components")
                }
            }
        }
        Ok(self)
    }
}

/// Symmetrized k-nearest-neighbor graph: `i ~ j` when either selects the other.
pub fn build_knn_graph(points: &PointCloud, options: &GraphOptions) -> Result<ProximityGraph> {
    let n = points.len();
    let k = options.k_neighbors;
    if k == 0 || k >= n {
        return Err(RvgpError::InvalidInput(format!(
            "k_neighbors must satisfy 1 <= k < n = {n}, got {k}"
        )));
    }
    options.weighting.validate()?;
    let rows: Vec<Vec<f64>> = (0..n).map(|i| points.point(i).to_vec()).collect();
    if let Some((first, second)) = find_duplicate(&rows) {
        return Err(RvgpError::DuplicatePoints { first, second });
    }
    let neighbor_lists: Vec<Vec<(usize, f64)>> = (0..n)
        .into_par_iter()
        .map(|i| nearest(&rows, i, k))
        .collect();
    let weighting = options.weighting;
    let edges = neighbor_lists
        .iter()
        .enumerate()
        .flat_map(|(i, list)| list.iter().map(move |&(j, d2)| (i, j, weighting.weight(d2))));
    ProximityGraph::from_edges(n, edges)?.check_connectivity(options.on_disconnected)
}

/// `k` nearest other rows to `i`, ties broken by index.
fn nearest(rows: &[Vec<f64>], i: usize, k: usize) -> Vec<(usize, f64)> {
    let mut d: Vec<(usize, f64)> = rows
        .iter()
        .enumerate()
        .filter(|&(j, _)| j != i)
        .map(|(j, r)| (j, squared_distance(&rows[i], r)))
        .collect();
    let cmp = |a: &(usize, f64), b: &(usize, f64)| a.1.total_cmp(&b.1).then(a.0.cmp(&b.0));
    if k < d.len() {
        d.select_nth_unstable_by(k - 1, cmp);
        d.truncate(k);
    }
    d.sort_by(cmp);
    d
}
