use super::cloud::PointCloud;
use super::squared_distance;
use crate::error::{Result, RvgpError};

#[derive(Debug, Clone, PartialEq)]
pub struct FpsSample {
    /// Selected indices in selection order; always starts with 0.
    pub indices: Vec<usize>,
    /// Mean nearest-selected-neighbor distance over the selection, divided by
    /// the diameter of the full cloud. Zero when fewer than two points are selected.
    pub spacing: f64,
}

/// Greedy max-min (furthest point) selection starting from index 0.
/// Ties go to the lowest index.
pub fn furthest_point_sample(points: &PointCloud, count: usize) -> Result<FpsSample> {
    let n = points.len();
    if count == 0 || count > n {
        return Err(RvgpError::InvalidInput(format!(
            "sample count must be in 1..={n}, got {count}"
        )));
    }
    let mut indices = Vec::with_capacity(count);
    let mut min_d2 = vec![f64::INFINITY; n];
    let mut current = 0;
    for _ in 0..count {
        indices.push(current);
        min_d2[current] = f64::NEG_INFINITY;
        let anchor = points.point(current);
        let mut best = (f64::NEG_INFINITY, usize::MAX);
        for j in 0..n {
            if min_d2[j] == f64::NEG_INFINITY {
                continue;
            }
            let d2 = squared_distance(anchor, points.point(j));
            if d2 < min_d2[j] {
                min_d2[j] = d2;
            }
            if min_d2[j] > best.0 {
                best = (min_d2[j], j);
            }
        }
        current = best.1;
    }
    let spacing = spacing_of(points, &indices);
    Ok(FpsSample { indices, spacing })
}

fn spacing_of(points: &PointCloud, indices: &[usize]) -> f64 {
    if indices.len() < 2 {
        return 0.0;
    }
    let total: f64 = indices
        .iter()
        .map(|&a| {
            indices
                .iter()
                .filter(|&&b| b != a)
                .map(|&b| squared_distance(points.point(a), points.point(b)))
                .fold(f64::INFINITY, f64::min)
                .sqrt()
        })
        .sum();
    total / indices.len() as f64 / points.diameter()
}
