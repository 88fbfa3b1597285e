//! Discrete approximation of the latent manifold: proximity graphs,
//! furthest-point subsampling, tangent frames and parallel transport.

mod cloud;
mod frames;
mod graph;
pub mod mesh;
mod sampling;
mod transport;

pub use cloud::PointCloud;
pub use frames::{
    estimate_intrinsic_dimension, estimate_tangent_frames, project_to_tangent, FrameNeighbors,
    GaugeFrameSet,
};
pub use graph::{build_knn_graph, ConnectivityPolicy, Edge, GraphOptions, ProximityGraph, Weighting};
pub use mesh::TriangleMesh;
pub use sampling::{furthest_point_sample, FpsSample};
pub use transport::{compute_transport, TransportMapSet};

pub(crate) fn squared_distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}
