//! Triangle meshes and parametric fixtures.

use std::collections::HashMap;
use std::f64::consts::PI;

use nalgebra::DMatrix;

use super::cloud::PointCloud;
use crate::error::{Result, RvgpError};

#[derive(Debug, Clone, PartialEq)]
pub struct TriangleMesh {
    pub points: PointCloud,
    pub faces: Vec<[usize; 3]>,
}

impl TriangleMesh {
    pub fn new(points: PointCloud, faces: Vec<[usize; 3]>) -> Result<Self> {
        let n = points.len();
        for (f, face) in faces.iter().enumerate() {
            if let Some(&bad) = face.iter().find(|&&v| v >= n) {
                return Err(RvgpError::InvalidInput(format!(
                    "face {f} references vertex {bad}, mesh has {n}"
                )));
            }
            if face[0] == face[1] || face[1] == face[2] || face[0] == face[2] {
                return Err(RvgpError::InvalidInput(format!(
                    "face {f} is degenerate: {face:?}"
                )));
            }
        }
        Ok(Self { points, faces })
    }

    /// Number of undirected edges shared by more than two faces.
    pub fn non_manifold_edges(&self) -> usize {
        let mut count: HashMap<(usize, usize), usize> = HashMap::new();
        for f in &self.faces {
            for (a, b) in [(f[0], f[1]), (f[1], f[2]), (f[2], f[0])] {
                *count.entry((a.min(b), a.max(b))).or_default() += 1;
            }
        }
        count.values().filter(|&&c| c > 2).count()
    }
}

/// Parametric torus around the z axis with `major_segments * minor_segments` vertices.
pub fn torus(
    major_radius: f64,
    minor_radius: f64,
    major_segments: usize,
    minor_segments: usize,
) -> Result<TriangleMesh> {
    if major_segments < 3 || minor_segments < 3 {
        return Err(RvgpError::InvalidInput(
            "torus needs at least 3 segments in each direction".into(),
        ));
    }
    if !(minor_radius > 0.0 && major_radius > minor_radius) {
        return Err(RvgpError::InvalidInput(format!(
            "torus radii must satisfy 0 < minor < major, got {minor_radius}, {major_radius}"
        )));
    }
    let n = major_segments * minor_segments;
    let idx = |a: usize, b: usize| (a % major_segments) * minor_segments + (b % minor_segments);
    let mut points = DMatrix::zeros(n, 3);
    for a in 0..major_segments {
        let u = 2.0 * PI * a as f64 / major_segments as f64;
        for b in 0..minor_segments {
            let v = 2.0 * PI * b as f64 / minor_segments as f64;
            let row = idx(a, b);
            let rho = major_radius + minor_radius * v.cos();
            points[(row, 0)] = rho * u.cos();
            points[(row, 1)] = rho * u.sin();
            points[(row, 2)] = minor_radius * v.sin();
        }
    }
    let mut faces = Vec::with_capacity(2 * n);
    for a in 0..major_segments {
        for b in 0..minor_segments {
            let p00 = idx(a, b);
            let p10 = idx(a + 1, b);
            let p01 = idx(a, b + 1);
            let p11 = idx(a + 1, b + 1);
            faces.push([p00, p10, p11]);
            faces.push([p00, p11, p01]);
        }
    }
    TriangleMesh::new(PointCloud::new(points)?, faces)
}

/// Unit icosphere: an icosahedron subdivided `subdivisions` times.
/// Vertex count is `10 * 4^s + 2`.
pub fn icosphere(subdivisions: usize) -> Result<TriangleMesh> {
    let t = (1.0 + 5f64.sqrt()) / 2.0;
    let mut verts: Vec<[f64; 3]> = vec![
        [-1.0, t, 0.0],
        [1.0, t, 0.0],
        [-1.0, -t, 0.0],
        [1.0, -t, 0.0],
        [0.0, -1.0, t],
        [0.0, 1.0, t],
        [0.0, -1.0, -t],
        [0.0, 1.0, -t],
        [t, 0.0, -1.0],
        [t, 0.0, 1.0],
        [-t, 0.0, -1.0],
        [-t, 0.0, 1.0],
    ];
    for v in &mut verts {
        normalize3(v);
    }
    let mut faces: Vec<[usize; 3]> = vec![
        [0, 11, 5],
        [0, 5, 1],
        [0, 1, 7],
        [0, 7, 10],
        [0, 10, 11],
        [1, 5, 9],
        [5, 11, 4],
        [11, 10, 2],
        [10, 7, 6],
        [7, 1, 8],
        [3, 9, 4],
        [3, 4, 2],
        [3, 2, 6],
        [3, 6, 8],
        [3, 8, 9],
        [4, 9, 5],
        [2, 4, 11],
        [6, 2, 10],
        [8, 6, 7],
        [9, 8, 1],
    ];
    for _ in 0..subdivisions {
        let mut cache: HashMap<(usize, usize), usize> = HashMap::new();
        let mut midpoint = |a: usize, b: usize, verts: &mut Vec<[f64; 3]>| -> usize {
            let key = (a.min(b), a.max(b));
            *cache.entry(key).or_insert_with(|| {
                let mut m = [
                    (verts[a][0] + verts[b][0]) / 2.0,
                    (verts[a][1] + verts[b][1]) / 2.0,
                    (verts[a][2] + verts[b][2]) / 2.0,
                ];
                normalize3(&mut m);
                verts.push(m);
                verts.len() - 1
            })
        };
        let mut next = Vec::with_capacity(faces.len() * 4);
        for &[a, b, c] in &faces {
            let ab = midpoint(a, b, &mut verts);
            let bc = midpoint(b, c, &mut verts);
            let ca = midpoint(c, a, &mut verts);
            next.extend_from_slice(&[[a, ab, ca], [b, bc, ab], [c, ca, bc], [ab, bc, ca]]);
        }
        faces = next;
    }
    let points = DMatrix::from_fn(verts.len(), 3, |i, j| verts[i][j]);
    TriangleMesh::new(PointCloud::new(points)?, faces)
}

fn normalize3(v: &mut [f64; 3]) {
    let n = (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt();
    v.iter_mut().for_each(|x| *x /= n);
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn torus_vertex_count_is_grid_product() {
        let m = torus(1.0, 0.35, 17, 9).unwrap();
        assert_eq!(m.points.len(), 17 * 9);
        assert_eq!(m.faces.len(), 2 * 17 * 9);
        assert_eq!(m.non_manifold_edges(), 0);
        // closed-form parametrization: distance to the core circle is the minor radius
        for i in 0..m.points.len() {
            let p = m.points.point(i);
            let rho = (p[0] * p[0] + p[1] * p[1]).sqrt();
            let r = ((rho - 1.0).powi(2) + p[2] * p[2]).sqrt();
            assert!((r - 0.35).abs() < 1e-12);
        }
    }

    #[test]
    fn icosphere_counts() {
        for s in 0..3 {
            let m = icosphere(s).unwrap();
            assert_eq!(m.points.len(), 10 * 4usize.pow(s as u32) + 2);
            assert_eq!(m.faces.len(), 20 * 4usize.pow(s as u32));
        }
    }
}
