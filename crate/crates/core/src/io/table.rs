use std::collections::HashSet;
use std::path::Path;

use nalgebra::DMatrix;

use super::text::{ensure_finite, format_float, parse_error, parse_finite, write_atomic};
use crate::error::{Result, RvgpError};
use crate::geometry::PointCloud;

/// Rows of `id,x0..x{d-1}[,v0..v{d-1}]`.
#[derive(Debug, Clone, PartialEq)]
pub struct FieldTable {
    pub ids: Vec<String>,
    pub points: DMatrix<f64>,
    pub vectors: Option<DMatrix<f64>>,
}

impl FieldTable {
    /// Ids `0..n` for a cloud, with optional vectors.
    pub fn from_cloud(cloud: &PointCloud, vectors: Option<DMatrix<f64>>) -> Self {
        Self {
            ids: (0..cloud.len()).map(|i| i.to_string()).collect(),
            points: cloud.points().clone(),
            vectors,
        }
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.points.ncols()
    }

    /// Keeps the listed rows, in the given order.
    pub fn select(&self, rows: &[usize]) -> Self {
        Self {
            ids: rows.iter().map(|&r| self.ids[r].clone()).collect(),
            points: self.points.select_rows(rows),
            vectors: self.vectors.as_ref().map(|v| v.select_rows(rows)),
        }
    }

    pub fn to_cloud(&self) -> Result<PointCloud> {
        PointCloud::with_vectors(self.points.clone(), self.vectors.clone())
    }
}

fn header_dim(path: &Path, header: &csv::StringRecord) -> Result<(usize, bool)> {
    let fields: Vec<&str> = header.iter().collect();
    if fields.first() != Some(&"id") {
        return Err(parse_error(path, 1, "first column must be `id`"));
    }
    let rest = &fields[1..];
    let d = rest.iter().take_while(|f| f.starts_with('x')).count();
    let has_vectors = match rest.len() {
        l if l == d => false,
        l if l == 2 * d => true,
        _ => return Err(parse_error(path, 1, "expected columns x0..x{d-1} optionally followed by v0..v{d-1}")),
    };
    for (c, name) in rest.iter().enumerate() {
        let expected = if c < d { format!("x{c}") } else { format!("v{}", c - d) };
        if *name != expected {
            return Err(parse_error(path, 1, format!("column {} should be `{expected}`, found `{name}`", c + 2)));
        }
    }
    if d == 0 {
        return Err(parse_error(path, 1, "no coordinate columns"));
    }
    Ok((d, has_vectors))
}

pub fn read_field_csv(path: &Path) -> Result<FieldTable> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_path(path)
        .map_err(|e| csv_error(path, e))?;
    let header = reader.headers().map_err(|e| csv_error(path, e))?.clone();
    let (d, has_vectors) = header_dim(path, &header)?;
    let mut ids = Vec::new();
    let mut values = Vec::new();
    let mut seen = HashSet::new();
    for record in reader.records() {
        let record = record.map_err(|e| csv_error(path, e))?;
        let line = record.position().map_or(0, |p| p.line() as usize);
        let id = record[0].trim().to_string();
        if id.is_empty() {
            return Err(parse_error(path, line, "empty id"));
        }
        if !seen.insert(id.clone()) {
            return Err(parse_error(path, line, format!("duplicate id {id:?}")));
        }
        for token in record.iter().skip(1) {
            values.push(parse_finite(path, line, token)?);
        }
        ids.push(id);
    }
    if ids.is_empty() {
        return Err(parse_error(path, 2, "no data rows"));
    }
    let width = if has_vectors { 2 * d } else { d };
    let all = DMatrix::from_row_slice(ids.len(), width, &values);
    Ok(FieldTable {
        ids,
        points: all.columns(0, d).into_owned(),
        vectors: has_vectors.then(|| all.columns(d, d).into_owned()),
    })
}

fn csv_error(path: &Path, e: csv::Error) -> RvgpError {
    let line = e.position().map_or(0, |p| p.line() as usize);
    match e.kind() {
        csv::ErrorKind::Io(_) => match e.into_kind() {
            csv::ErrorKind::Io(io) => RvgpError::Io {
                path: path.to_path_buf(),
                source: io,
            },
            _ => unreachable!(),
        },
        _ => parse_error(path, line, e.to_string()),
    }
}

pub fn write_field_csv(path: &Path, table: &FieldTable) -> Result<()> {
    let (n, d) = table.points.shape();
    if table.ids.len() != n {
        return Err(RvgpError::DimensionMismatch(format!("{} ids for {n} points", table.ids.len())));
    }
    if let Some(v) = &table.vectors {
        if v.shape() != (n, d) {
            return Err(RvgpError::DimensionMismatch(format!(
                "vectors are {}x{}, points are {n}x{d}",
                v.nrows(),
                v.ncols()
            )));
        }
        ensure_finite(v.iter(), "vector table")?;
    }
    ensure_finite(table.points.iter(), "point table")?;
    let mut writer = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(Vec::new());
    let mut header = vec!["id".to_string()];
    header.extend((0..d).map(|c| format!("x{c}")));
    if table.vectors.is_some() {
        header.extend((0..d).map(|c| format!("v{c}")));
    }
    writer.write_record(&header)?;
    for i in 0..n {
        let mut row = vec![table.ids[i].clone()];
        row.extend(table.points.row(i).iter().map(|&x| format_float(x)));
        if let Some(v) = &table.vectors {
            row.extend(v.row(i).iter().map(|&x| format_float(x)));
        }
        writer.write_record(&row)?;
    }
    let bytes = writer.into_inner().map_err(|e| RvgpError::InvalidInput(e.to_string()))?;
    write_atomic(path, &bytes)
}

/// Plain numeric table with a header row; every cell is a finite float.
pub(crate) fn write_matrix_csv(path: &Path, header: &[String], rows: &[Vec<f64>]) -> Result<()> {
    let mut writer = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(Vec::new());
    writer.write_record(header)?;
    for row in rows {
        if row.len() != header.len() {
            return Err(RvgpError::DimensionMismatch(format!("row of {} values under {} columns", row.len(), header.len())));
        }
        ensure_finite(row.iter(), "matrix")?;
        writer.write_record(row.iter().map(|&x| format_float(x)))?;
    }
    let bytes = writer.into_inner().map_err(|e| RvgpError::InvalidInput(e.to_string()))?;
    write_atomic(path, &bytes)
}

pub(crate) fn read_matrix_csv(path: &Path, expected_header: &[String]) -> Result<Vec<Vec<f64>>> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_path(path)
        .map_err(|e| csv_error(path, e))?;
    let header: Vec<String> = reader.headers().map_err(|e| csv_error(path, e))?.iter().map(String::from).collect();
    if header != expected_header {
        return Err(parse_error(path, 1, format!("expected header {}", expected_header.join(","))));
    }
    let mut rows = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|e| csv_error(path, e))?;
        let line = record.position().map_or(0, |p| p.line() as usize);
        rows.push(record.iter().map(|t| parse_finite(path, line, t)).collect::<Result<Vec<_>>>()?);
    }
    Ok(rows)
}

pub(crate) fn numbered(prefix: &str, count: usize) -> impl Iterator<Item = String> + '_ {
    (0..count).map(move |c| format!("{prefix}{c}"))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip_with_vectors() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("f.csv");
        let table = FieldTable {
            ids: vec!["a".into(), "b".into()],
            points: DMatrix::from_row_slice(2, 3, &[0.1, 0.2, 1.0 / 3.0, -1.0, 2.5e-9, 3.0]),
            vectors: Some(DMatrix::from_row_slice(2, 3, &[0.0, 1.0, 0.0, 1e300, -0.5, 0.0])),
        };
        write_field_csv(&path, &table).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        assert!(text.starts_with("id,x0,x1,x2,v0,v1,v2\na,0.1,0.2,0.3333333333333333,0,1,0\n"));
        assert_eq!(read_field_csv(&path).unwrap(), table);
        let before = std::fs::read(&path).unwrap();
        write_field_csv(&path, &table).unwrap();
        assert_eq!(std::fs::read(&path).unwrap(), before);
    }

    #[test]
    fn points_only() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("p.csv");
        std::fs::write(&path, "id,x0,x1\n7,1,2\n8,3,4\n").unwrap();
        let t = read_field_csv(&path).unwrap();
        assert_eq!(t.ids, vec!["7", "8"]);
        assert!(t.vectors.is_none());
        assert_eq!(t.points[(1, 0)], 3.0);
    }

    fn parse_err(body: &str) -> (usize, String) {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bad.csv");
        std::fs::write(&path, body).unwrap();
        match read_field_csv(&path).unwrap_err() {
            RvgpError::Parse { line, message, .. } => (line, message),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn malformed_files_are_located() {
        assert_eq!(parse_err("id,x0,x1\n0,1,2\n1,NaN,2\n").0, 3);
        assert_eq!(parse_err("id,x0,x1\n0,1,2\n1,inf,2\n").0, 3);
        assert_eq!(parse_err("id,x0,x1\n0,1,2\n1,abc,2\n").0, 3);
        assert_eq!(parse_err("id,x0,x1\n0,1,2\n0,3,4\n").0, 3);
        assert_eq!(parse_err("id,x0,x1\n0,1\n").0, 2);
        assert_eq!(parse_err("name,x0,x1\n0,1,2\n").0, 1);
        assert_eq!(parse_err("id,x0,x1,v0\n0,1,2,3\n").0, 1);
        assert_eq!(parse_err("id,x0,x2\n0,1,2\n").0, 1);
        assert_eq!(parse_err("id,x0,x1\n").0, 2);
        let dir = tempfile::tempdir().unwrap();
        assert!(matches!(read_field_csv(&dir.path().join("missing.csv")), Err(RvgpError::Io { .. })));
    }
}
