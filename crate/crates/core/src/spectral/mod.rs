//! Graph and connection Laplacians, their low-end spectra, and the
//! positional encodings built from connection-Laplacian eigenvectors.

mod eigen;
mod encoding;
mod laplacian;
mod sparse;

pub use eigen::{dense_eigendecompose, eigendecompose, EigenOptions, SolverKind, Spectrum};
pub use encoding::{positional_encoding, positional_encodings};
pub use laplacian::{
    assemble_connection_laplacian, assemble_graph_laplacian, dirichlet_energy,
    ConnectionLaplacian, GraphLaplacian,
};
pub use sparse::{CsrMatrix, SymmetricOperator};
