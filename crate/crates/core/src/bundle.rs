//! Everything derived from a point cloud and its graph that the GP and the
//! field generators need, assembled once.

use crate::error::Result;
use crate::geometry::{estimate_tangent_frames, FrameNeighbors, GaugeFrameSet, PointCloud, ProximityGraph, TransportMapSet};
use crate::gp::FeatureSet;
use crate::spectral::{
    assemble_connection_laplacian, assemble_graph_laplacian, eigendecompose, ConnectionLaplacian, EigenOptions,
    GraphLaplacian, Spectrum,
};

#[derive(Debug, Clone)]
pub struct TangentBundle {
    pub points: PointCloud,
    pub graph: ProximityGraph,
    pub frames: GaugeFrameSet,
    pub transports: TransportMapSet,
    pub connection: ConnectionLaplacian,
    pub laplacian: GraphLaplacian,
}

impl TangentBundle {
    /// Estimates frames of dimension `m`, transports and both Laplacians.
    pub fn build(points: PointCloud, graph: ProximityGraph, m: usize, neighbors: FrameNeighbors) -> Result<Self> {
        let frames = estimate_tangent_frames(&graph, &points, m, neighbors)?;
        Self::with_frames(points, graph, frames)
    }

    pub fn with_frames(points: PointCloud, graph: ProximityGraph, frames: GaugeFrameSet) -> Result<Self> {
        let transports = TransportMapSet::compute(&graph, &frames)?;
        let connection = assemble_connection_laplacian(&graph, &frames, &transports)?;
        let laplacian = assemble_graph_laplacian(&graph);
        Ok(Self {
            points,
            graph,
            frames,
            transports,
            connection,
            laplacian,
        })
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn manifold_dim(&self) -> usize {
        self.frames.manifold_dim()
    }

    pub fn connection_spectrum(&self, k: usize, options: &EigenOptions) -> Result<Spectrum> {
        eigendecompose(&self.connection, k, options)
    }

    pub fn scalar_spectrum(&self, k: usize, options: &EigenOptions) -> Result<Spectrum> {
        eigendecompose(&self.laplacian, k, options)
    }

    /// Tangent-bundle features from the `k` lowest connection eigenpairs.
    pub fn features(&self, k: usize, options: &EigenOptions) -> Result<FeatureSet> {
        FeatureSet::from_connection(&self.connection_spectrum(k, options)?, &self.frames)
    }
}
