use nalgebra::DMatrix;

use super::kernel::FeatureSet;
use crate::error::{Result, RvgpError};
use crate::geometry::{squared_distance, PointCloud};

/// Encoding for a point that is not a graph node: estimate a frame at `x`
/// from its `neighbors` nearest nodes, transport each neighbor's encoding
/// into that frame and average. This is an extension of the node-only
/// construction, not part of it.
///
/// Returns the estimated `d x m` frame and the `d x k` encoding.
pub fn extend_encoding(
    points: &PointCloud,
    features: &FeatureSet,
    x: &[f64],
    neighbors: usize,
) -> Result<(DMatrix<f64>, DMatrix<f64>)> {
    let frames = features
        .frames()
        .ok_or_else(|| RvgpError::InvalidInput("extension needs tangent-bundle features".into()))?;
    let (n, d, m) = (points.len(), points.dim(), frames.manifold_dim());
    if x.len() != d {
        return Err(RvgpError::DimensionMismatch(format!("point has {} coordinates, expected {d}", x.len())));
    }
    if let Some(c) = x.iter().position(|v| !v.is_finite()) {
        return Err(RvgpError::NonFinite { row: 0, col: c });
    }
    if features.len() != n {
        return Err(RvgpError::DimensionMismatch(format!(
            "{n} points but {} encoded nodes",
            features.len()
        )));
    }
    if neighbors < m || neighbors > n {
        return Err(RvgpError::InvalidInput(format!("neighbor count must be in {m}..={n}, got {neighbors}")));
    }
    let mut order: Vec<(f64, usize)> = (0..n).map(|i| (squared_distance(points.point(i), x), i)).collect();
    order.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    let near: Vec<usize> = order[..neighbors].iter().map(|&(_, i)| i).collect();

    let diffs = DMatrix::from_fn(d, neighbors, |r, c| points.point(near[c])[r] - x[r]);
    let svd = diffs.svd(true, false);
    let u = svd.u.expect("requested");
    let mut idx: Vec<usize> = (0..svd.singular_values.len()).collect();
    idx.sort_by(|&a, &b| svd.singular_values[b].total_cmp(&svd.singular_values[a]));
    if idx.len() < m || svd.singular_values[idx[m - 1]] <= 1e-10 * svd.singular_values[idx[0]].max(f64::MIN_POSITIVE) {
        return Err(RvgpError::DegenerateFrame {
            node: n,
            rank: idx.iter().filter(|&&c| svd.singular_values[c] > 1e-10).count(),
            required: m,
        });
    }
    let frame = DMatrix::from_fn(d, m, |r, c| u[(r, idx[c])]);

    let mut local = DMatrix::zeros(m, features.k());
    for &j in &near {
        let tj = frames.frame(j);
        let svd = (frame.transpose() * tj).svd(true, true);
        let o = svd.u.expect("requested") * svd.v_t.expect("requested");
        local += o * tj.transpose() * features.encoding(j);
    }
    local /= neighbors as f64;
    let encoding = &frame * local;
    Ok((frame, encoding))
}
