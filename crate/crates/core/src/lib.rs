//! Vector-field Gaussian processes on latent Riemannian manifolds.
//!
//! The pipeline approximates an unknown manifold by a proximity graph,
//! estimates tangent frames and parallel transports between neighboring
//! frames, assembles the connection Laplacian and uses its low-frequency
//! eigenvectors as a positional encoding for a matrix-valued Matérn kernel.
//!
//! ```no_run
//! use rvgp::prelude::*;
//!
//! let mesh = rvgp::geometry::mesh::torus(1.0, 0.4, 20, 20).unwrap();
//! let graph = ProximityGraph::from_mesh(&mesh, Weighting::Unit).unwrap();
//! let frames = estimate_tangent_frames(&graph, &mesh.points, 2, FrameNeighbors::Auto).unwrap();
//! let transports = TransportMapSet::compute(&graph, &frames).unwrap();
//! let lc = assemble_connection_laplacian(&graph, &frames, &transports).unwrap();
//! let spectrum = eigendecompose(&lc, 50, &EigenOptions::default()).unwrap();
//! let features = FeatureSet::from_connection(&spectrum, &frames).unwrap();
//! ```

#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop, clippy::type_complexity)]

pub mod bundle;
pub mod error;
pub mod fields;
pub mod geometry;
pub mod gp;
pub mod io;
pub mod spectral;

pub use error::{Result, RvgpError};

pub mod prelude {
    pub use crate::bundle::TangentBundle;
    pub use crate::error::{Result, RvgpError};
    pub use crate::fields::{
        alignment_score, angular_error, baseline_scalar_rbf_predict, boundary_max_angular_jump,
        connection_heat, fit_baseline_hyperparameters, generate_experiment_field, heat_flow,
        mask_around, out_of_tangent, random_split, scalar_heat, vector_heat, Anchors,
        ExperimentField, FieldSpec, HeatOptions, MetricReport, TangentDeviation, TangentField,
        VectorHeat,
    };
    pub use crate::geometry::{
        build_knn_graph, compute_transport, estimate_tangent_frames, furthest_point_sample,
        project_to_tangent, ConnectivityPolicy, FrameNeighbors, GaugeFrameSet, GraphOptions,
        PointCloud, ProximityGraph, TransportMapSet, TriangleMesh, Weighting,
    };
    pub use crate::gp::{
        extend_encoding, fit_channelwise_hyperparameters, fit_hyperparameters,
        inducing_point_predict, FeatureSet, MaternHyperparams, Prediction, RvgpModel,
        SearchConfig, Smoothness, SpectralFilter,
    };
    pub use crate::io::ExperimentConfig;
    pub use crate::spectral::{
        assemble_connection_laplacian, assemble_graph_laplacian, dirichlet_energy,
        eigendecompose, positional_encoding, ConnectionLaplacian, EigenOptions, GraphLaplacian,
        Spectrum,
    };
}
