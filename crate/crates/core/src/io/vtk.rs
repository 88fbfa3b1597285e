use std::path::Path;

use nalgebra::DMatrix;

use super::text::{ensure_finite, join_floats, write_atomic};
use crate::error::{Result, RvgpError};

/// Legacy ASCII VTK polydata with one vector attribute. Faces, when given,
/// are written as polygons; otherwise each point is a vertex cell.
pub fn write_vtk(
    path: &Path,
    points: &DMatrix<f64>,
    faces: Option<&[[usize; 3]]>,
    vectors: &DMatrix<f64>,
    name: &str,
) -> Result<()> {
    let n = points.nrows();
    let d = points.ncols();
    if vectors.shape() != (n, d) {
        return Err(RvgpError::DimensionMismatch(format!(
            "{} vectors of dimension {} for {n} points of dimension {d}",
            vectors.nrows(),
            vectors.ncols()
        )));
    }
    if !(1..=3).contains(&d) {
        return Err(RvgpError::DimensionMismatch(format!("VTK needs dimension <= 3, got {d}")));
    }
    if name.is_empty() || name.chars().any(char::is_whitespace) {
        return Err(RvgpError::InvalidInput(format!("attribute name {name:?} must be a single token")));
    }
    ensure_finite(points.iter().chain(vectors.iter()), "VTK data")?;
    let pad = |m: &DMatrix<f64>, i: usize| {
        let mut row: Vec<f64> = m.row(i).iter().copied().collect();
        row.resize(3, 0.0);
        join_floats(&row, " ")
    };
    let mut out = String::from("# vtk DataFile Version 3.0\nrvgp vector field\nASCII\nDATASET POLYDATA\n");
    out.push_str(&format!("POINTS {n} double\n"));
    for i in 0..n {
        out.push_str(&pad(points, i));
        out.push('\n');
    }
    match faces {
        Some(faces) => {
            if let Some(bad) = faces.iter().flatten().find(|&&v| v >= n) {
                return Err(RvgpError::IndexOutOfRange {
                    what: "points",
                    index: *bad,
                    len: n,
                });
            }
            out.push_str(&format!("POLYGONS {} {}\n", faces.len(), faces.len() * 4));
            for f in faces {
                out.push_str(&format!("3 {} {} {}\n", f[0], f[1], f[2]));
            }
        }
        None => {
            out.push_str(&format!("VERTICES {n} {}\n", 2 * n));
            for i in 0..n {
                out.push_str(&format!("1 {i}\n"));
            }
        }
    }
    out.push_str(&format!("POINT_DATA {n}\nVECTORS {name} double\n"));
    for i in 0..n {
        out.push_str(&pad(vectors, i));
        out.push('\n');
    }
    write_atomic(path, out.as_bytes())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn layout_and_zero_vectors() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("f.vtk");
        let points = DMatrix::from_row_slice(3, 3, &[0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 1.5, 0.0]);
        write_vtk(&path, &points, Some(&[[0, 1, 2]]), &DMatrix::zeros(3, 3), "velocity").unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "# vtk DataFile Version 3.0");
        assert!(lines.contains(&"POINTS 3 double"));
        assert!(lines.contains(&"POINT_DATA 3"));
        let at = lines.iter().position(|l| *l == "VECTORS velocity double").unwrap();
        assert_eq!(&lines[at + 1..], &["0 0 0", "0 0 0", "0 0 0"]);
        assert!(lines.contains(&"0 1.5 0"));
    }

    #[test]
    fn planar_points_are_padded() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("p.vtk");
        let points = DMatrix::from_row_slice(2, 2, &[0.0, 1.0, 2.0, 3.0]);
        let vectors = DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, -1.0]);
        write_vtk(&path, &points, None, &vectors, "v").unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        assert!(text.contains("VERTICES 2 4\n1 0\n1 1\n"));
        assert!(text.ends_with("VECTORS v double\n1 0 0\n0 -1 0\n"));
    }

    #[test]
    fn rejects_mismatch() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("x.vtk");
        let p = DMatrix::zeros(2, 3);
        assert!(write_vtk(&path, &p, None, &DMatrix::zeros(3, 3), "v").is_err());
        assert!(write_vtk(&path, &p, None, &DMatrix::zeros(2, 3), "two words").is_err());
        assert!(write_vtk(&path, &p, Some(&[[0, 1, 4]]), &DMatrix::zeros(2, 3), "v").is_err());
    }
}
