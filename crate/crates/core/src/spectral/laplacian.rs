use nalgebra::{DMatrix, DVector};

use super::sparse::{CsrMatrix, SymmetricOperator};
use crate::error::{Result, RvgpError};
use crate::geometry::{GaugeFrameSet, ProximityGraph, TransportMapSet};

/// `L = D - W` on a proximity graph.
#[derive(Debug, Clone, PartialEq)]
pub struct GraphLaplacian {
    matrix: CsrMatrix,
}

impl GraphLaplacian {
    pub fn matrix(&self) -> &CsrMatrix {
        &self.matrix
    }

    pub fn len(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.matrix.nrows() == 0
    }
}

pub fn assemble_graph_laplacian(graph: &ProximityGraph) -> GraphLaplacian {
    let n = graph.len();
    let mut triplets = Vec::with_capacity(n + 2 * graph.edges().len());
    for i in 0..n {
        triplets.push((i, i, graph.degree(i)));
    }
    for e in graph.edges() {
        triplets.push((e.i, e.j, -e.weight));
        triplets.push((e.j, e.i, -e.weight));
    }
    GraphLaplacian {
        matrix: CsrMatrix::from_triplets(n, n, &triplets),
    }
}

/// Block operator on the discrete tangent bundle, size `nm x nm`.
///
/// Diagonal blocks are `D_ii I_m`; the block at `(i, j)` for an edge is
/// `-w_ij O_ij`, so parallel fields lie in the null space and
/// `v^T L_c v` equals the vector Dirichlet energy.
#[derive(Debug, Clone, PartialEq)]
pub struct ConnectionLaplacian {
    matrix: CsrMatrix,
    nodes: usize,
    fiber: usize,
}

impl ConnectionLaplacian {
    pub fn matrix(&self) -> &CsrMatrix {
        &self.matrix
    }

    pub fn nodes(&self) -> usize {
        self.nodes
    }

    pub fn manifold_dim(&self) -> usize {
        self.fiber
    }
}

pub fn assemble_connection_laplacian(
    graph: &ProximityGraph,
    frames: &GaugeFrameSet,
    transports: &TransportMapSet,
) -> Result<ConnectionLaplacian> {
    let n = graph.len();
    let m = frames.manifold_dim();
    if frames.len() != n {
        return Err(RvgpError::DimensionMismatch(format!(
            "graph has {n} nodes, frame set has {}",
            frames.len()
        )));
    }
    if transports.manifold_dim() != m {
        return Err(RvgpError::DimensionMismatch(format!(
            "transports are {0}x{0}, frames have m = {m}",
            transports.manifold_dim()
        )));
    }
    let mut triplets = Vec::with_capacity(n * m + 2 * graph.edges().len() * m * m);
    for i in 0..n {
        for a in 0..m {
            triplets.push((i * m + a, i * m + a, graph.degree(i)));
        }
    }
    for e in graph.edges() {
        let o = transports
            .get(e.i, e.j)
            .ok_or(RvgpError::MissingTransport { i: e.i, j: e.j })?;
        for a in 0..m {
            for b in 0..m {
                let v = -e.weight * o[(a, b)];
                triplets.push((e.i * m + a, e.j * m + b, v));
                triplets.push((e.j * m + b, e.i * m + a, v));
            }
        }
    }
    Ok(ConnectionLaplacian {
        matrix: CsrMatrix::from_triplets(n * m, n * m, &triplets),
        nodes: n,
        fiber: m,
    })
}

/// `sum over edges of w_ij |v_i - O_ij v_j|^2`, each undirected edge once.
/// `field` holds one row of tangent coordinates per node.
pub fn dirichlet_energy(
    graph: &ProximityGraph,
    transports: &TransportMapSet,
    field: &DMatrix<f64>,
) -> Result<f64> {
    let m = transports.manifold_dim();
    if field.nrows() != graph.len() || field.ncols() != m {
        return Err(RvgpError::DimensionMismatch(format!(
            "field is {}x{}, expected {}x{m}",
            field.nrows(),
            field.ncols(),
            graph.len()
        )));
    }
    let mut total = 0.0;
    for e in graph.edges() {
        let o = transports
            .get(e.i, e.j)
            .ok_or(RvgpError::MissingTransport { i: e.i, j: e.j })?;
        let vi = field.row(e.i).transpose();
        let vj = field.row(e.j).transpose();
        total += e.weight * (vi - o * vj).norm_squared();
    }
    Ok(total)
}

impl SymmetricOperator for GraphLaplacian {
    fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    fn apply(&self, x: &DVector<f64>) -> DVector<f64> {
        self.matrix.mul_vec(x)
    }

    fn frobenius_norm(&self) -> f64 {
        self.matrix.frobenius()
    }

    fn to_dense(&self) -> DMatrix<f64> {
        self.matrix.dense()
    }
}

impl SymmetricOperator for ConnectionLaplacian {
    fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    fn apply(&self, x: &DVector<f64>) -> DVector<f64> {
        self.matrix.mul_vec(x)
    }

    fn frobenius_norm(&self) -> f64 {
        self.matrix.frobenius()
    }

    fn to_dense(&self) -> DMatrix<f64> {
        self.matrix.dense()
    }

    fn fiber_dim(&self) -> usize {
        self.fiber
    }
}
