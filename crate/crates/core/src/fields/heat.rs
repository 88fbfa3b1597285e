use nalgebra::{DMatrix, DVector, SymmetricEigen};
use serde::{Deserialize, Serialize};

use super::field::TangentField;
use crate::error::{Result, RvgpError};
use crate::geometry::GaugeFrameSet;
use crate::spectral::{ConnectionLaplacian, GraphLaplacian, SymmetricOperator};

/// Nodes whose diffused direction vector, relative to the largest one, falls
/// below this are flagged as singularity candidates.
pub const SINGULAR_THRESHOLD: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct HeatOptions {
    /// Exact eigen-expansion up to this operator dimension, implicit Euler above it.
    pub dense_threshold: usize,
    /// Implicit Euler substeps.
    pub substeps: usize,
    /// Relative residual for the conjugate-gradient solves.
    pub cg_tolerance: f64,
}

impl Default for HeatOptions {
    fn default() -> Self {
        Self {
            dense_threshold: 2000,
            substeps: 100,
            cg_tolerance: 1e-12,
        }
    }
}

/// `exp(-A tau) x0`.
pub fn heat_flow<A: SymmetricOperator + ?Sized>(op: &A, x0: &DVector<f64>, tau: f64, options: &HeatOptions) -> Result<DVector<f64>> {
    flow(op, x0, tau, options, false)
}

pub fn scalar_heat(laplacian: &GraphLaplacian, u0: &DVector<f64>, tau: f64, options: &HeatOptions) -> Result<DVector<f64>> {
    heat_flow(laplacian, u0, tau, options)
}

/// `exp(-L_c tau)` applied to a field given as one row of tangent coordinates per node.
pub fn connection_heat(
    laplacian: &ConnectionLaplacian,
    coords: &DMatrix<f64>,
    tau: f64,
    options: &HeatOptions,
) -> Result<DMatrix<f64>> {
    let m = laplacian.manifold_dim();
    if coords.shape() != (laplacian.nodes(), m) {
        return Err(RvgpError::DimensionMismatch(format!(
            "field is {}x{}, operator expects {}x{m}",
            coords.nrows(),
            coords.ncols(),
            laplacian.nodes()
        )));
    }
    let flat = DVector::from_fn(coords.len(), |k, _| coords[(k / m, k % m)]);
    let out = heat_flow(laplacian, &flat, tau, options)?;
    Ok(DMatrix::from_fn(coords.nrows(), m, |i, a| out[i * m + a]))
}

fn flow<A: SymmetricOperator + ?Sized>(
    op: &A,
    x0: &DVector<f64>,
    tau: f64,
    options: &HeatOptions,
    rescale: bool,
) -> Result<DVector<f64>> {
    if !(tau >= 0.0 && tau.is_finite()) {
        return Err(RvgpError::InvalidInput(format!("diffusion time must be >= 0, got {tau}")));
    }
    if x0.len() != op.dim() {
        return Err(RvgpError::DimensionMismatch(format!(
            "initial state has {} entries, operator dimension is {}",
            x0.len(),
            op.dim()
        )));
    }
    if tau == 0.0 {
        return Ok(x0.clone());
    }
    if op.dim() <= options.dense_threshold {
        let eig = SymmetricEigen::new(op.to_dense());
        // Shifting by the smallest eigenvalue only rescales the result; for
        // directions it keeps long flows away from underflow.
        let shift = if rescale { eig.eigenvalues.min() } else { 0.0 };
        let coeffs = eig.eigenvectors.transpose() * x0;
        let decayed = DVector::from_fn(coeffs.len(), |l, _| coeffs[l] * (-(eig.eigenvalues[l] - shift) * tau).exp());
        return Ok(&eig.eigenvectors * decayed);
    }
    let steps = options.substeps.max(1);
    let h = tau / steps as f64;
    let mut x = x0.clone();
    for _ in 0..steps {
        let next = conjugate_gradient(|v| v + op.apply(v) * h, &x, &x, options.cg_tolerance, 10 * op.dim())?;
        x = next;
        if rescale {
            let norm = x.norm();
            if norm > 0.0 {
                x /= norm;
            }
        }
    }
    Ok(x)
}

fn conjugate_gradient(
    apply: impl Fn(&DVector<f64>) -> DVector<f64>,
    b: &DVector<f64>,
    start: &DVector<f64>,
    tolerance: f64,
    max_iter: usize,
) -> Result<DVector<f64>> {
    let target = tolerance * b.norm();
    let mut x = start.clone();
    let mut r = b - apply(&x);
    let mut p = r.clone();
    let mut rr = r.norm_squared();
    for _ in 0..max_iter {
        if rr.sqrt() <= target {
            return Ok(x);
        }
        let ap = apply(&p);
        let alpha = rr / p.dot(&ap);
        x.axpy(alpha, &p, 1.0);
        r.axpy(-alpha, &ap, 1.0);
        let next = r.norm_squared();
        p = &r + &p * (next / rr);
        rr = next;
    }
    if rr.sqrt() <= target {
        Ok(x)
    } else {
        Err(RvgpError::NoConvergence {
            matvecs: max_iter,
            residual: rr.sqrt(),
        })
    }
}

/// Result of the vector heat method.
#[derive(Debug, Clone, PartialEq)]
pub struct VectorHeat {
    /// Diffused directions scaled by diffused magnitudes; zero at singular nodes.
    pub field: TangentField,
    /// Scalar-diffused magnitudes `u(tau)`.
    pub magnitudes: DVector<f64>,
    /// Per-node norm of the diffused vector field, relative to its maximum.
    pub direction_norms: DVector<f64>,
    /// Nodes where the direction is undefined.
    pub singular: Vec<usize>,
}

impl VectorHeat {
    /// Flagged node with the weakest direction, or the weakest node overall
    /// when nothing was flagged.
    pub fn singularity_center(&self) -> usize {
        let pool: Vec<usize> = if self.singular.is_empty() {
            (0..self.direction_norms.len()).collect()
        } else {
            self.singular.clone()
        };
        pool.into_iter()
            .min_by(|&a, &b| self.direction_norms[a].total_cmp(&self.direction_norms[b]).then(a.cmp(&b)))
            .unwrap_or(0)
    }
}

/// Directions from `exp(-L_c tau)`, magnitudes from `exp(-L tau)` applied
/// to the initial per-node norms.
pub fn vector_heat(
    connection: &ConnectionLaplacian,
    laplacian: &GraphLaplacian,
    frames: &GaugeFrameSet,
    initial: &TangentField,
    tau: f64,
    options: &HeatOptions,
) -> Result<VectorHeat> {
    let n = frames.len();
    let m = frames.manifold_dim();
    if connection.nodes() != n || laplacian.len() != n || initial.len() != n || connection.manifold_dim() != m {
        return Err(RvgpError::DimensionMismatch("operators, frames and field disagree in size".into()));
    }
    let diffused = flow(connection, &initial.flat_coords(), tau, options, true)?;
    let magnitudes = scalar_heat(laplacian, &initial.norms(), tau, options)?;
    let norms = DVector::from_fn(n, |i, _| diffused.rows(i * m, m).norm());
    let max = norms.max();
    let direction_norms = if max > 0.0 { &norms / max } else { norms.clone() };
    let mut singular = Vec::new();
    let mut coords = DMatrix::zeros(n, m);
    for i in 0..n {
        if !(direction_norms[i] >= SINGULAR_THRESHOLD) {
            singular.push(i);
            continue;
        }
        let dir = diffused.rows(i * m, m) / norms[i];
        coords.row_mut(i).copy_from(&(dir * magnitudes[i]).transpose());
    }
    if !singular.is_empty() {
        log::info!("{} singularity candidate(s) after vector diffusion", singular.len());
    }
    Ok(VectorHeat {
        field: TangentField::from_coords(frames, coords)?,
        magnitudes,
        direction_norms,
        singular,
    })
}
