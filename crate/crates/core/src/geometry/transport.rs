use nalgebra::DMatrix;
use rayon::prelude::*;

use super::frames::GaugeFrameSet;
use super::graph::ProximityGraph;
use crate::error::{Result, RvgpError};

const ALIGNMENT_TOL: f64 = 1e-10;

/// Orthogonal map `O_ji = argmin_{O in O(m)} |T_i - T_j O|_F`, i.e. the
/// polar factor `U V^T` of `T_j^T T_i = U S V^T`. Reflections are allowed.
///
/// `O_ji` takes tangent coordinates at `i` to coordinates at `j`.
pub fn compute_transport(frames: &GaugeFrameSet, j: usize, i: usize) -> Result<DMatrix<f64>> {
    frames.check_index(i)?;
    frames.check_index(j)?;
    if i == j {
        return Err(RvgpError::InvalidInput(format!(
            "transport needs two distinct nodes, got {i} twice"
        )));
    }
    let cross = frames.frame(j).tr_mul(frames.frame(i));
    let svd = cross.svd(true, true);
    let smallest = svd.singular_values.iter().copied().fold(f64::INFINITY, f64::min);
    if !(smallest > ALIGNMENT_TOL) {
        return Err(RvgpError::DegenerateTransport { from: j, to: i });
    }
    let u = svd.u.expect("requested");
    let v_t = svd.v_t.expect("requested");
    Ok(u * v_t)
}

/// Transport maps on every edge. Stored once per undirected edge `(i, j)`,
/// `i < j`, as `O_ij` (coordinates at `j` to coordinates at `i`); the reverse
/// direction is the exact transpose.
#[derive(Debug, Clone, PartialEq)]
pub struct TransportMapSet {
    keys: Vec<(usize, usize)>,
    maps: Vec<DMatrix<f64>>,
    manifold_dim: usize,
}

impl TransportMapSet {
    pub fn compute(graph: &ProximityGraph, frames: &GaugeFrameSet) -> Result<Self> {
        if graph.len() != frames.len() {
            return Err(RvgpError::DimensionMismatch(format!(
                "graph has {} nodes, frame set has {}",
                graph.len(),
                frames.len()
            )));
        }
        let keys: Vec<(usize, usize)> = graph.edges().iter().map(|e| (e.i, e.j)).collect();
        let maps = keys
            .par_iter()
            .map(|&(i, j)| compute_transport(frames, i, j))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            keys,
            maps,
            manifold_dim: frames.manifold_dim(),
        })
    }

    /// Builds a set from explicit per-edge maps `O_ij` keyed by `(i, j)`, `i < j`.
    pub fn from_maps(manifold_dim: usize, entries: Vec<((usize, usize), DMatrix<f64>)>) -> Result<Self> {
        let mut entries = entries;
        entries.sort_by_key(|(k, _)| *k);
        let mut keys = Vec::with_capacity(entries.len());
        let mut maps = Vec::with_capacity(entries.len());
        for ((i, j), o) in entries {
            if i >= j {
                return Err(RvgpError::InvalidInput(format!(
                    "transport key ({i}, {j}) must satisfy i < j"
                )));
            }
            if o.shape() != (manifold_dim, manifold_dim) {
                return Err(RvgpError::DimensionMismatch(format!(
                    "transport on ({i}, {j}) is {}x{}",
                    o.nrows(),
                    o.ncols()
                )));
            }
            keys.push((i, j));
            maps.push(o);
        }
        Ok(Self {
            keys,
            maps,
            manifold_dim,
        })
    }

    /// Identity transports on every edge of `graph`.
    pub fn identity(graph: &ProximityGraph, manifold_dim: usize) -> Self {
        let keys: Vec<(usize, usize)> = graph.edges().iter().map(|e| (e.i, e.j)).collect();
        let maps = vec![DMatrix::identity(manifold_dim, manifold_dim); keys.len()];
        Self {
            keys,
            maps,
            manifold_dim,
        }
    }

    pub fn manifold_dim(&self) -> usize {
        self.manifold_dim
    }

    pub fn len(&self) -> usize {
        self.keys.len()
    }

    pub fn is_empty(&self) -> bool {
        self.keys.is_empty()
    }

    /// `O_ij`: maps tangent coordinates at `j` into coordinates at `i`.
    pub fn get(&self, i: usize, j: usize) -> Option<DMatrix<f64>> {
        let key = (i.min(j), i.max(j));
        let pos = self.keys.binary_search(&key).ok()?;
        let o = &self.maps[pos];
        Some(if i < j { o.clone() } else { o.transpose() })
    }

    pub fn iter(&self) -> impl Iterator<Item = ((usize, usize), &DMatrix<f64>)> {
        self.keys.iter().copied().zip(self.maps.iter())
    }
}
