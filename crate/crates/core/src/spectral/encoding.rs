use nalgebra::DMatrix;

use super::eigen::Spectrum;
use crate::error::{Result, RvgpError};
use crate::geometry::GaugeFrameSet;

/// `P_i = T_i (U_c)_i`: the `m` eigenvector rows of node `i`, scaled by
/// `sqrt(nm)` and mapped into the ambient space by the node's frame.
///
/// The result is `d x k`.
pub fn positional_encoding(spectrum: &Spectrum, frames: &GaugeFrameSet, i: usize) -> Result<DMatrix<f64>> {
    let m = frames.manifold_dim();
    if spectrum.fiber_dim != m || spectrum.dim() != frames.len() * m {
        return Err(RvgpError::DimensionMismatch(format!(
            "spectrum of dimension {} (fiber {}) does not match {} frames with m = {m}",
            spectrum.dim(),
            spectrum.fiber_dim,
            frames.len()
        )));
    }
    frames.check_index(i)?;
    let scale = (spectrum.dim() as f64).sqrt();
    let rows = spectrum.eigenvectors.rows(i * m, m) * scale;
    Ok(frames.frame(i) * rows)
}

/// Encodings for every node.
pub fn positional_encodings(spectrum: &Spectrum, frames: &GaugeFrameSet) -> Result<Vec<DMatrix<f64>>> {
    (0..frames.len())
        .map(|i| positional_encoding(spectrum, frames, i))
        .collect()
}
