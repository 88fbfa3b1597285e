use nalgebra::{DMatrix, DVector};

use crate::error::{Result, RvgpError};

/// Sample positions in an ambient space, optionally with one vector per point.
///
/// Rows are points. Duplicate rows are rejected at construction because a
/// zero-length edge vector would make tangent frame estimation ill-posed.
#[derive(Debug, Clone, PartialEq)]
pub struct PointCloud {
    points: DMatrix<f64>,
    vectors: Option<DMatrix<f64>>,
    rows: Vec<Vec<f64>>,
}

impl PointCloud {
    pub fn new(points: DMatrix<f64>) -> Result<Self> {
        Self::with_vectors(points, None)
    }

    pub fn with_vectors(points: DMatrix<f64>, vectors: Option<DMatrix<f64>>) -> Result<Self> {
        let (n, d) = points.shape();
        if n < 2 {
            return Err(RvgpError::InvalidInput(format!(
                "point cloud needs at least 2 points, got {n}"
            )));
        }
        if d < 2 {
            return Err(RvgpError::InvalidInput(format!(
                "ambient dimension must be at least 2, got {d}"
            )));
        }
        check_finite(&points)?;
        if let Some(v) = &vectors {
            if v.shape() != (n, d) {
                return Err(RvgpError::DimensionMismatch(format!(
                    "vectors are {}x{}, points are {n}x{d}",
                    v.nrows(),
                    v.ncols()
                )));
            }
            check_finite(v)?;
        }
        let rows: Vec<Vec<f64>> = (0..n)
            .map(|i| points.row(i).iter().copied().collect())
            .collect();
        if let Some((first, second)) = find_duplicate(&rows) {
            return Err(RvgpError::DuplicatePoints { first, second });
        }
        Ok(Self {
            points,
            vectors,
            rows,
        })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let n = rows.len();
        let d = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != d) {
            return Err(RvgpError::DimensionMismatch(
                "rows have differing lengths".into(),
            ));
        }
        Self::new(DMatrix::from_fn(n, d, |i, j| rows[i][j]))
    }

    pub fn len(&self) -> usize {
        self.points.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.points.nrows() == 0
    }

    pub fn dim(&self) -> usize {
        self.points.ncols()
    }

    pub fn points(&self) -> &DMatrix<f64> {
        &self.points
    }

    pub fn vectors(&self) -> Option<&DMatrix<f64>> {
        self.vectors.as_ref()
    }

    /// Coordinates of point `i` as a slice.
    pub fn point(&self, i: usize) -> &[f64] {
        &self.rows[i]
    }

    pub fn point_vector(&self, i: usize) -> DVector<f64> {
        DVector::from_column_slice(&self.rows[i])
    }

    /// Largest pairwise Euclidean distance.
    pub fn diameter(&self) -> f64 {
        let n = self.len();
        let mut best = 0.0f64;
        for i in 0..n {
            for j in (i + 1)..n {
                best = best.max(super::squared_distance(&self.rows[i], &self.rows[j]));
            }
        }
        best.sqrt()
    }

    pub fn select(&self, indices: &[usize]) -> Result<Self> {
        let d = self.dim();
        let points = DMatrix::from_fn(indices.len(), d, |r, c| self.points[(indices[r], c)]);
        let vectors = self
            .vectors
            .as_ref()
            .map(|v| DMatrix::from_fn(indices.len(), d, |r, c| v[(indices[r], c)]));
        Self::with_vectors(points, vectors)
    }
}

fn check_finite(m: &DMatrix<f64>) -> Result<()> {
    for i in 0..m.nrows() {
        for j in 0..m.ncols() {
            if !m[(i, j)].is_finite() {
                return Err(RvgpError::NonFinite { row: i, col: j });
            }
        }
    }
    Ok(())
}

/// First pair of bitwise-identical rows, by sorting lexicographically.
pub(crate) fn find_duplicate(rows: &[Vec<f64>]) -> Option<(usize, usize)> {
    let mut order: Vec<usize> = (0..rows.len()).collect();
    order.sort_by(|&a, &b| {
        rows[a]
            .iter()
            .zip(&rows[b])
            .map(|(x, y)| x.total_cmp(y))
            .find(|o| o.is_ne())
            .unwrap_or(std::cmp::Ordering::Equal)
            .then(a.cmp(&b))
    });
    order
        .windows(2)
        .filter(|w| rows[w[0]] == rows[w[1]])
        .map(|w| (w[0].min(w[1]), w[0].max(w[1])))
        .min()
}
