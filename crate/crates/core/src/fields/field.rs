use nalgebra::{DMatrix, DVector};

use crate::error::{Result, RvgpError};
use crate::geometry::GaugeFrameSet;

/// Per-node tangent coordinates together with their ambient form `T_i c_i`.
#[derive(Debug, Clone, PartialEq)]
pub struct TangentField {
    coords: DMatrix<f64>,
    ambient: DMatrix<f64>,
}

impl TangentField {
    /// `coords` holds one row of `m` tangent coordinates per node.
    pub fn from_coords(frames: &GaugeFrameSet, coords: DMatrix<f64>) -> Result<Self> {
        if coords.shape() != (frames.len(), frames.manifold_dim()) {
            return Err(RvgpError::DimensionMismatch(format!(
                "field is {}x{}, frames expect {}x{}",
                coords.nrows(),
                coords.ncols(),
                frames.len(),
                frames.manifold_dim()
            )));
        }
        let mut ambient = DMatrix::zeros(frames.len(), frames.ambient_dim());
        for i in 0..frames.len() {
            let lifted = frames.frame(i) * coords.row(i).transpose();
            ambient.row_mut(i).copy_from(&lifted.transpose());
        }
        Ok(Self { coords, ambient })
    }

    /// Orthogonal projection of ambient vectors (one row per node) onto the tangent spaces.
    pub fn project(frames: &GaugeFrameSet, ambient: &DMatrix<f64>) -> Result<Self> {
        if ambient.shape() != (frames.len(), frames.ambient_dim()) {
            return Err(RvgpError::DimensionMismatch(format!(
                "vectors are {}x{}, frames expect {}x{}",
                ambient.nrows(),
                ambient.ncols(),
                frames.len(),
                frames.ambient_dim()
            )));
        }
        let mut coords = DMatrix::zeros(frames.len(), frames.manifold_dim());
        for i in 0..frames.len() {
            let c = frames.frame(i).transpose() * ambient.row(i).transpose();
            coords.row_mut(i).copy_from(&c.transpose());
        }
        Self::from_coords(frames, coords)
    }

    pub fn len(&self) -> usize {
        self.coords.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.coords.nrows() == 0
    }

    pub fn coords(&self) -> &DMatrix<f64> {
        &self.coords
    }

    pub fn ambient(&self) -> &DMatrix<f64> {
        &self.ambient
    }

    /// Node-major flattening of the tangent coordinates.
    pub fn flat_coords(&self) -> DVector<f64> {
        let m = self.coords.ncols();
        DVector::from_fn(self.coords.len(), |k, _| self.coords[(k / m, k % m)])
    }

    pub fn norms(&self) -> DVector<f64> {
        DVector::from_fn(self.len(), |i, _| self.coords.row(i).norm())
    }
}
