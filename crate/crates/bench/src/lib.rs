//! Fixtures shared by the benchmarks.

use rvgp::bundle::TangentBundle;
use rvgp::geometry::{mesh, FrameNeighbors, ProximityGraph, Weighting};

/// Torus with `a * b` vertices, mesh edges and 2D frames.
pub fn torus_bundle(a: usize, b: usize) -> TangentBundle {
    let mesh = mesh::torus(1.0, 0.4, a, b).expect("valid torus");
    let graph = ProximityGraph::from_mesh(&mesh, Weighting::Unit).expect("mesh graph");
    TangentBundle::build(mesh.points, graph, 2, FrameNeighbors::Auto).expect("torus bundle")
}
