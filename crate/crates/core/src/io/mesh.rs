use std::path::Path;

use nalgebra::DMatrix;

use super::text::{join_floats, parse_error, parse_finite, read_text, write_atomic};
use crate::error::{Result, RvgpError};
use crate::geometry::{PointCloud, TriangleMesh};

/// Loads an ASCII OBJ or PLY file, chosen by extension.
pub fn load_mesh(path: &Path) -> Result<TriangleMesh> {
    match path.extension().and_then(|e| e.to_str()).map(str::to_ascii_lowercase).as_deref() {
        Some("obj") => read_obj(path),
        Some("ply") => read_ply(path),
        _ => Err(RvgpError::InvalidInput(format!(
            "{}: unsupported mesh format (expected .obj or .ply)",
            path.display()
        ))),
    }
}

fn finish(path: &Path, vertices: Vec<f64>, faces: Vec<[usize; 3]>) -> Result<TriangleMesh> {
    let n = vertices.len() / 3;
    let points = PointCloud::new(DMatrix::from_row_slice(n, 3, &vertices)).map_err(|e| match e {
        RvgpError::DuplicatePoints { first, second } => RvgpError::InvalidInput(format!(
            "{}: vertices {first} and {second} coincide",
            path.display()
        )),
        other => other,
    })?;
    let mesh = TriangleMesh::new(points, faces)?;
    let bad = mesh.non_manifold_edges();
    if bad > 0 {
        log::warn!("{}: {bad} non-manifold edge(s)", path.display());
    }
    Ok(mesh)
}

/// Fan triangulation `(0, k, k + 1)` of a polygon.
fn fan(path: &Path, line: usize, polygon: &[usize], faces: &mut Vec<[usize; 3]>) -> Result<()> {
    if polygon.len() < 3 {
        return Err(parse_error(path, line, format!("face with {} vertices", polygon.len())));
    }
    for k in 1..polygon.len() - 1 {
        let tri = [polygon[0], polygon[k], polygon[k + 1]];
        if tri[0] == tri[1] || tri[1] == tri[2] || tri[0] == tri[2] {
            return Err(parse_error(path, line, format!("degenerate face {tri:?}")));
        }
        faces.push(tri);
    }
    Ok(())
}

pub fn read_obj(path: &Path) -> Result<TriangleMesh> {
    let text = read_text(path)?;
    let mut vertices = Vec::new();
    let mut faces = Vec::new();
    for (no, raw) in text.lines().enumerate() {
        let line = no + 1;
        let content = raw.split('#').next().unwrap_or("").trim();
        let mut tokens = content.split_whitespace();
        let Some(keyword) = tokens.next() else { continue };
        let args: Vec<&str> = tokens.collect();
        match keyword {
            "v" => {
                if !(3..=4).contains(&args.len()) {
                    return Err(parse_error(path, line, format!("vertex needs 3 coordinates, found {}", args.len())));
                }
                for a in &args[..3] {
                    vertices.push(parse_finite(path, line, a)?);
                }
            }
            "f" => {
                let count = vertices.len() / 3;
                let polygon = args
                    .iter()
                    .map(|a| obj_index(path, line, a, count))
                    .collect::<Result<Vec<_>>>()?;
                fan(path, line, &polygon, &mut faces)?;
            }
            "vn" | "vt" | "vp" | "g" | "o" | "s" | "usemtl" | "mtllib" => {}
            other => return Err(parse_error(path, line, format!("unknown element type {other:?}"))),
        }
    }
    finish(path, vertices, faces)
}

/// `i`, `i/t`, `i//n` or `i/t/n`, 1-based or negative (relative).
fn obj_index(path: &Path, line: usize, token: &str, count: usize) -> Result<usize> {
    let head = token.split('/').next().unwrap_or("");
    let raw: i64 = head
        .parse()
        .map_err(|_| parse_error(path, line, format!("bad vertex reference {token:?}")))?;
    let index = match raw {
        r if r > 0 => r - 1,
        r if r < 0 => count as i64 + r,
        _ => return Err(parse_error(path, line, "vertex index 0 is invalid in OBJ")),
    };
    if index < 0 || index as usize >= count {
        return Err(parse_error(path, line, format!("vertex reference {raw} out of range ({count} vertices so far)")));
    }
    Ok(index as usize)
}

struct PlyElement {
    name: String,
    count: usize,
    /// Scalar property names; for faces the list comes first and is not listed.
    scalars: Vec<String>,
    has_list: bool,
}

const PLY_SCALARS: &[&str] = &[
    "char", "uchar", "short", "ushort", "int", "uint", "float", "double", "int8", "uint8", "int16", "uint16",
    "int32", "uint32", "float32", "float64",
];

pub fn read_ply(path: &Path) -> Result<TriangleMesh> {
    let text = read_text(path)?;
    let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l.trim()));
    match lines.next() {
        Some((_, "ply")) => {}
        _ => return Err(parse_error(path, 1, "missing `ply` magic")),
    }
    let mut elements: Vec<PlyElement> = Vec::new();
    let mut ended = false;
    let mut format_seen = false;
    for (line, content) in lines.by_ref() {
        let tokens: Vec<&str> = content.split_whitespace().collect();
        match tokens.as_slice() {
            ["format", "ascii", "1.0"] => format_seen = true,
            ["format", other, ..] => return Err(parse_error(path, line, format!("unsupported PLY format {other:?}"))),
            ["comment", ..] | ["obj_info", ..] => {}
            ["element", name, count] => {
                if *name != "vertex" && *name != "face" {
                    return Err(parse_error(path, line, format!("unknown element type {name:?}")));
                }
                let count = count
                    .parse()
                    .map_err(|_| parse_error(path, line, format!("bad element count {count:?}")))?;
                elements.push(PlyElement {
                    name: name.to_string(),
                    count,
                    scalars: Vec::new(),
                    has_list: false,
                });
            }
            ["property", "list", count_ty, index_ty, name] => {
                let el = elements
                    .last_mut()
                    .ok_or_else(|| parse_error(path, line, "property before any element"))?;
                if el.name != "face" || el.has_list || !el.scalars.is_empty() {
                    return Err(parse_error(path, line, "list property must be the first face property"));
                }
                if !PLY_SCALARS.contains(count_ty) || !PLY_SCALARS.contains(index_ty) {
                    return Err(parse_error(path, line, "unknown list property type"));
                }
                if *name != "vertex_indices" && *name != "vertex_index" {
                    return Err(parse_error(path, line, format!("unexpected face list {name:?}")));
                }
                el.has_list = true;
            }
            ["property", ty, name] => {
                let el = elements
                    .last_mut()
                    .ok_or_else(|| parse_error(path, line, "property before any element"))?;
                if !PLY_SCALARS.contains(ty) {
                    return Err(parse_error(path, line, format!("unknown property type {ty:?}")));
                }
                el.scalars.push(name.to_string());
            }
            ["end_header"] => {
                ended = true;
                break;
            }
            _ => return Err(parse_error(path, line, format!("malformed header line {content:?}"))),
        }
    }
    if !ended || !format_seen {
        return Err(parse_error(path, 1, "incomplete PLY header"));
    }
    let mut vertices = Vec::new();
    let mut faces = Vec::new();
    let mut n_vertices = 0;
    for el in &elements {
        let axes = if el.name == "vertex" {
            let find = |axis: &str| {
                el.scalars
                    .iter()
                    .position(|s| s == axis)
                    .ok_or_else(|| parse_error(path, 1, format!("vertex element lacks `{axis}`")))
            };
            Some([find("x")?, find("y")?, find("z")?])
        } else {
            if !el.has_list {
                return Err(parse_error(path, 1, "face element lacks a vertex index list"));
            }
            None
        };
        for _ in 0..el.count {
            let (line, content) = lines
                .next()
                .ok_or_else(|| parse_error(path, text.lines().count(), format!("file ends inside {} data", el.name)))?;
            let tokens: Vec<&str> = content.split_whitespace().collect();
            if let Some(axes) = axes {
                if tokens.len() != el.scalars.len() {
                    return Err(parse_error(path, line, format!("expected {} values, found {}", el.scalars.len(), tokens.len())));
                }
                let values = tokens.iter().map(|t| parse_finite(path, line, t)).collect::<Result<Vec<_>>>()?;
                vertices.extend(axes.iter().map(|&a| values[a]));
                n_vertices += 1;
            } else {
                let k: usize = tokens
                    .first()
                    .and_then(|t| t.parse().ok())
                    .ok_or_else(|| parse_error(path, line, "face line must start with a vertex count"))?;
                if tokens.len() != 1 + k + el.scalars.len() {
                    return Err(parse_error(path, line, format!("face declares {k} vertices but has {} values", tokens.len() - 1)));
                }
                let polygon = tokens[1..=k]
                    .iter()
                    .map(|t| {
                        t.parse::<usize>()
                            .ok()
                            .filter(|&i| i < n_vertices)
                            .ok_or_else(|| parse_error(path, line, format!("bad vertex index {t:?}")))
                    })
                    .collect::<Result<Vec<_>>>()?;
                fan(path, line, &polygon, &mut faces)?;
            }
        }
    }
    if let Some((line, extra)) = lines.find(|(_, l)| !l.is_empty()) {
        return Err(parse_error(path, line, format!("unexpected data after last element: {extra:?}")));
    }
    finish(path, vertices, faces)
}

fn check_3d(mesh: &TriangleMesh) -> Result<()> {
    if mesh.points.dim() != 3 {
        return Err(RvgpError::DimensionMismatch(format!(
            "mesh files hold 3D vertices, mesh has dimension {}",
            mesh.points.dim()
        )));
    }
    Ok(())
}

pub fn write_obj(path: &Path, mesh: &TriangleMesh) -> Result<()> {
    check_3d(mesh)?;
    let mut out = String::new();
    for i in 0..mesh.points.len() {
        out.push_str(&format!("v {}\n", join_floats(mesh.points.point(i), " ")));
    }
    for f in &mesh.faces {
        out.push_str(&format!("f {} {} {}\n", f[0] + 1, f[1] + 1, f[2] + 1));
    }
    write_atomic(path, out.as_bytes())
}

pub fn write_ply(path: &Path, mesh: &TriangleMesh) -> Result<()> {
    check_3d(mesh)?;
    let mut out = format!(
        "ply\nformat ascii 1.0\nelement vertex {}\nproperty double x\nproperty double y\nproperty double z\nelement face {}\nproperty list uchar int vertex_indices\nend_header\n",
        mesh.points.len(),
        mesh.faces.len()
    );
    for i in 0..mesh.points.len() {
        out.push_str(&join_floats(mesh.points.point(i), " "));
        out.push('\n');
    }
    for f in &mesh.faces {
        out.push_str(&format!("3 {} {} {}\n", f[0], f[1], f[2]));
    }
    write_atomic(path, out.as_bytes())
}
