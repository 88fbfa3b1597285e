use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::cloud::PointCloud;
use super::graph::ProximityGraph;
use super::squared_distance;
use crate::error::{Result, RvgpError};

const ORTHONORMAL_TOL: f64 = 1e-10;
const RANK_TOL: f64 = 1e-10;

/// Number of graph neighbors used to fit each tangent frame.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum FrameNeighbors {
    /// `round(2 * degree)`, clamped to `[m, n - 1]`.
    #[default]
    Auto,
    Fixed(usize),
}

/// One orthonormal `d x m` frame (gauge) per node.
#[derive(Debug, Clone, PartialEq)]
pub struct GaugeFrameSet {
    frames: Vec<DMatrix<f64>>,
    ambient_dim: usize,
    manifold_dim: usize,
}

impl GaugeFrameSet {
    pub fn new(frames: Vec<DMatrix<f64>>) -> Result<Self> {
        let first = frames
            .first()
            .ok_or_else(|| RvgpError::InvalidInput("empty frame set".into()))?;
        let (d, m) = first.shape();
        if m == 0 || m > d {
            return Err(RvgpError::InvalidInput(format!(
                "frame shape {d}x{m} violates 1 <= m <= d"
            )));
        }
        for (i, f) in frames.iter().enumerate() {
            if f.shape() != (d, m) {
                return Err(RvgpError::DimensionMismatch(format!(
                    "frame {i} is {}x{}, expected {d}x{m}",
                    f.nrows(),
                    f.ncols()
                )));
            }
            let err = (f.transpose() * f - DMatrix::<f64>::identity(m, m)).norm();
            if !(err <= ORTHONORMAL_TOL) {
                return Err(RvgpError::InvalidInput(format!(
                    "frame {i} is not orthonormal (error {err:e})"
                )));
            }
        }
        Ok(Self {
            frames,
            ambient_dim: d,
            manifold_dim: m,
        })
    }

    pub fn len(&self) -> usize {
        self.frames.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frames.is_empty()
    }

    pub fn ambient_dim(&self) -> usize {
        self.ambient_dim
    }

    pub fn manifold_dim(&self) -> usize {
        self.manifold_dim
    }

    pub fn frame(&self, i: usize) -> &DMatrix<f64> {
        &self.frames[i]
    }

    pub fn frames(&self) -> &[DMatrix<f64>] {
        &self.frames
    }

    pub(crate) fn check_index(&self, i: usize) -> Result<()> {
        if i >= self.frames.len() {
            return Err(RvgpError::IndexOutOfRange {
                what: "frames",
                index: i,
                len: self.frames.len(),
            });
        }
        Ok(())
    }

    /// Maps tangent coordinates at node `i` back to the ambient space.
    pub fn lift(&self, i: usize, coords: &DVector<f64>) -> Result<DVector<f64>> {
        self.check_index(i)?;
        if coords.len() != self.manifold_dim {
            return Err(RvgpError::DimensionMismatch(format!(
                "tangent vector has length {}, expected {}",
                coords.len(),
                self.manifold_dim
            )));
        }
        Ok(&self.frames[i] * coords)
    }

    /// Component of `v` orthogonal to the tangent space at `i`.
    pub fn normal_component(&self, i: usize, v: &DVector<f64>) -> Result<DVector<f64>> {
        let proj = project_to_tangent(self, i, v)?;
        Ok(v - &self.frames[i] * proj)
    }
}

/// Least-squares tangent coordinates `T_i^T v` of an ambient vector.
pub fn project_to_tangent(frames: &GaugeFrameSet, i: usize, v: &DVector<f64>) -> Result<DVector<f64>> {
    frames.check_index(i)?;
    if v.len() != frames.ambient_dim {
        return Err(RvgpError::DimensionMismatch(format!(
            "ambient vector has length {}, expected {}",
            v.len(),
            frames.ambient_dim
        )));
    }
    Ok(frames.frames[i].tr_mul(v))
}

/// Fits one frame per node from the left singular vectors of the stacked
/// edge vectors to the `N` graph-closest nodes (breadth-first by hop count,
/// Euclidean distance within a hop level).
pub fn estimate_tangent_frames(
    graph: &ProximityGraph,
    points: &PointCloud,
    m: usize,
    neighbors: FrameNeighbors,
) -> Result<GaugeFrameSet> {
    let n = points.len();
    let d = points.dim();
    if graph.len() != n {
        return Err(RvgpError::DimensionMismatch(format!(
            "graph has {} nodes, point cloud has {n}",
            graph.len()
        )));
    }
    if m == 0 || m > d {
        return Err(RvgpError::InvalidInput(format!(
            "manifold dimension must satisfy 1 <= m <= d = {d}, got {m}"
        )));
    }
    let frames = (0..n)
        .into_par_iter()
        .map(|i| {
            let count = match neighbors {
                FrameNeighbors::Auto => ((2.0 * graph.degree(i)).round() as usize).clamp(m, n - 1),
                FrameNeighbors::Fixed(c) => c,
            };
            let nbrs = graph_closest(graph, points, i, count);
            if nbrs.len() < m {
                return Err(RvgpError::DegenerateFrame {
                    node: i,
                    rank: nbrs.len(),
                    required: m,
                });
            }
            let origin = points.point(i);
            let edges = DMatrix::from_fn(d, nbrs.len(), |r, c| points.point(nbrs[c])[r] - origin[r]);
            let (basis, singular) = leading_left_singular(edges, m);
            let rank = singular
                .iter()
                .filter(|&&s| s > RANK_TOL * singular[0])
                .count();
            if singular[0] == 0.0 || rank < m {
                return Err(RvgpError::DegenerateFrame {
                    node: i,
                    rank,
                    required: m,
                });
            }
            Ok(basis)
        })
        .collect::<Result<Vec<_>>>()?;
    GaugeFrameSet::new(frames)
}

/// Up to `count` nodes closest to `i` on the graph, excluding `i`.
fn graph_closest(graph: &ProximityGraph, points: &PointCloud, i: usize, count: usize) -> Vec<usize> {
    let n = graph.len();
    let mut seen = vec![false; n];
    seen[i] = true;
    let mut out = Vec::with_capacity(count);
    let mut frontier = vec![i];
    while out.len() < count && !frontier.is_empty() {
        let mut level = Vec::new();
        for &u in &frontier {
            for &(v, _) in graph.neighbors(u) {
                if !seen[v] {
                    seen[v] = true;
                    level.push(v);
                }
            }
        }
        level.sort_by(|&a, &b| {
            squared_distance(points.point(i), points.point(a))
                .total_cmp(&squared_distance(points.point(i), points.point(b)))
                .then(a.cmp(&b))
        });
        let take = (count - out.len()).min(level.len());
        out.extend_from_slice(&level[..take]);
        frontier = level;
    }
    out
}

/// Left singular vectors for the `m` largest singular values, plus all
/// singular values in descending order.
fn leading_left_singular(a: DMatrix<f64>, m: usize) -> (DMatrix<f64>, Vec<f64>) {
    let svd = a.svd(true, false);
    let u = svd.u.expect("left singular vectors requested");
    let mut order: Vec<usize> = (0..svd.singular_values.len()).collect();
    order.sort_by(|&x, &y| {
        svd.singular_values[y]
            .total_cmp(&svd.singular_values[x])
            .then(x.cmp(&y))
    });
    let basis = DMatrix::from_fn(u.nrows(), m, |r, c| u[(r, order[c])]);
    let values = order.iter().map(|&k| svd.singular_values[k]).collect();
    (basis, values)
}

/// Per-node singular-value gap heuristic: the smallest `r` whose next
/// singular value falls below `threshold * s_r`, reported as the median over
/// nodes. Provided for exploration only; callers pass `m` explicitly.
pub fn estimate_intrinsic_dimension(
    graph: &ProximityGraph,
    points: &PointCloud,
    neighbors: FrameNeighbors,
    threshold: f64,
) -> usize {
    let n = points.len();
    let d = points.dim();
    let mut estimates: Vec<usize> = (0..n)
        .map(|i| {
            let count = match neighbors {
                FrameNeighbors::Auto => ((2.0 * graph.degree(i)).round() as usize).clamp(1, n - 1),
                FrameNeighbors::Fixed(c) => c,
            };
            let nbrs = graph_closest(graph, points, i, count);
            let origin = points.point(i);
            let edges = DMatrix::from_fn(d, nbrs.len(), |r, c| points.point(nbrs[c])[r] - origin[r]);
            let (_, s) = leading_left_singular(edges, 1);
            (0..s.len().saturating_sub(1))
                .find(|&r| s[r + 1] < threshold * s[r])
                .map_or(s.len(), |r| r + 1)
        })
        .collect();
    estimates.sort_unstable();
    estimates[estimates.len() / 2]
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::graph::{build_knn_graph, GraphOptions};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn flat_patch_projector() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let rows: Vec<Vec<f64>> = (0..30)
            .map(|_| vec![rng.random::<f64>(), rng.random::<f64>(), 0.0])
            .collect();
        let pc = PointCloud::from_rows(&rows).unwrap();
        let g = build_knn_graph(&pc, &GraphOptions { k_neighbors: 6, ..Default::default() }).unwrap();
        let frames = estimate_tangent_frames(&g, &pc, 2, FrameNeighbors::Auto).unwrap();
        let target = DMatrix::from_diagonal(&DVector::from_vec(vec![1.0, 1.0, 0.0]));
        for f in frames.frames() {
            assert!((f * f.transpose() - &target).norm() < 1e-8);
        }
    }

    #[test]
    fn collinear_neighbors_are_degenerate() {
        let rows: Vec<Vec<f64>> = (0..6).map(|i| vec![i as f64, 2.0 * i as f64]).collect();
        let pc = PointCloud::from_rows(&rows).unwrap();
        let g = build_knn_graph(&pc, &GraphOptions { k_neighbors: 2, ..Default::default() }).unwrap();
        let err = estimate_tangent_frames(&g, &pc, 2, FrameNeighbors::Auto).unwrap_err();
        assert!(matches!(err, RvgpError::DegenerateFrame { node: 0, rank: 1, required: 2 }));
        assert!(estimate_tangent_frames(&g, &pc, 1, FrameNeighbors::Auto).is_ok());
        assert!(estimate_tangent_frames(&g, &pc, 3, FrameNeighbors::Auto).is_err());
    }

    #[test]
    fn graph_closest_is_breadth_first() {
        let rows: Vec<Vec<f64>> = (0..6).map(|i| vec![i as f64, (i * i) as f64 * 0.01]).collect();
        let pc = PointCloud::from_rows(&rows).unwrap();
        let g = ProximityGraph::from_edges(6, (0..5).map(|i| (i, i + 1, 1.0))).unwrap();
        assert_eq!(graph_closest(&g, &pc, 2, 3), vec![1, 3, 0]);
        assert_eq!(graph_closest(&g, &pc, 0, 10), vec![1, 2, 3, 4, 5]);
    }

    #[test]
    fn projection_properties() {
        let t = DMatrix::from_row_slice(3, 2, &[1.0, 0.0, 0.0, 1.0, 0.0, 0.0]);
        let frames = GaugeFrameSet::new(vec![t.clone()]).unwrap();
        let inplane = DVector::from_vec(vec![0.3, -2.0, 0.0]);
        let c = project_to_tangent(&frames, 0, &inplane).unwrap();
        assert!((frames.lift(0, &c).unwrap() - &inplane).norm() <= 1e-10);
        let normal = DVector::from_vec(vec![0.0, 0.0, 5.0]);
        assert_eq!(project_to_tangent(&frames, 0, &normal).unwrap().norm(), 0.0);
        assert!(project_to_tangent(&frames, 1, &normal).is_err());
    }

    #[test]
    fn random_projection_matches_least_squares() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let a = DMatrix::from_fn(5, 3, |_, _| rng.random::<f64>() - 0.5);
        let q = a.qr().q();
        let frames = GaugeFrameSet::new(vec![q.clone()]).unwrap();
        for _ in 0..10 {
            let v = DVector::from_fn(5, |_, _| rng.random::<f64>() - 0.5);
            let coords = project_to_tangent(&frames, 0, &v).unwrap();
            // normal equations on a non-orthonormal basis of the same span
            let basis = &q * DMatrix::from_row_slice(3, 3, &[2.0, 1.0, 0.0, 0.0, 1.0, 3.0, 1.0, 0.0, 1.0]);
            let gram = basis.transpose() * &basis;
            let sol = gram.lu().solve(&(basis.transpose() * &v)).unwrap();
            assert!((&q * coords - basis * sol).norm() < 1e-10);
        }
    }

    #[test]
    fn gap_estimator_finds_plane() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let rows: Vec<Vec<f64>> = (0..40)
            .map(|_| vec![rng.random::<f64>(), rng.random::<f64>(), 1e-4 * rng.random::<f64>()])
            .collect();
        let pc = PointCloud::from_rows(&rows).unwrap();
        let g = build_knn_graph(&pc, &GraphOptions { k_neighbors: 6, ..Default::default() }).unwrap();
        assert_eq!(estimate_intrinsic_dimension(&g, &pc, FrameNeighbors::Auto, 0.5), 2);
    }
}
