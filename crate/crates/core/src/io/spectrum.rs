use std::path::{Path, PathBuf};

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::table::{numbered, read_matrix_csv, write_matrix_csv};
use super::text::{read_text, write_atomic};
use crate::error::{Result, RvgpError};
use crate::spectral::{SolverKind, Spectrum};

pub(crate) const SIGN_CONVENTION: &str = "largest-magnitude entry of each eigenvector is positive";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct SpectrumManifest {
    nodes: usize,
    fiber_dim: usize,
    k: usize,
    solver: SolverKind,
    tolerance: f64,
    max_residual: f64,
    next_eigenvalue: Option<f64>,
    sign_convention: String,
    eigenvalues: String,
    eigenvectors: String,
}

/// Writes `eigenvalues.csv`, `eigenvectors.csv` and `spectrum.json` into
/// `dir`; returns the written paths.
pub fn write_spectrum(dir: &Path, spectrum: &Spectrum) -> Result<Vec<PathBuf>> {
    let k = spectrum.k();
    let values: Vec<Vec<f64>> = spectrum.eigenvalues.iter().enumerate().map(|(i, &l)| vec![i as f64, l]).collect();
    let values_path = dir.join("eigenvalues.csv");
    write_matrix_csv(&values_path, &["index".into(), "eigenvalue".into()], &values)?;

    let mut header = vec!["row".to_string()];
    header.extend(numbered("u", k));
    let rows: Vec<Vec<f64>> = (0..spectrum.dim())
        .map(|r| std::iter::once(r as f64).chain(spectrum.eigenvectors.row(r).iter().copied()).collect())
        .collect();
    let vectors_path = dir.join("eigenvectors.csv");
    write_matrix_csv(&vectors_path, &header, &rows)?;

    let manifest = SpectrumManifest {
        nodes: spectrum.nodes(),
        fiber_dim: spectrum.fiber_dim,
        k,
        solver: spectrum.solver,
        tolerance: spectrum.tolerance,
        max_residual: spectrum.max_residual,
        next_eigenvalue: spectrum.next_eigenvalue,
        sign_convention: SIGN_CONVENTION.into(),
        eigenvalues: "eigenvalues.csv".into(),
        eigenvectors: "eigenvectors.csv".into(),
    };
    let manifest_path = dir.join("spectrum.json");
    let mut json = serde_json::to_vec_pretty(&manifest)?;
    json.push(b'\n');
    write_atomic(&manifest_path, &json)?;
    Ok(vec![values_path, vectors_path, manifest_path])
}

pub fn read_spectrum(dir: &Path) -> Result<Spectrum> {
    let manifest_path = dir.join("spectrum.json");
    let manifest: SpectrumManifest = serde_json::from_str(&read_text(&manifest_path)?)?;
    let k = manifest.k;
    let dim = manifest.nodes * manifest.fiber_dim;
    let values = read_matrix_csv(&dir.join(&manifest.eigenvalues), &["index".into(), "eigenvalue".into()])?;
    let mut header = vec!["row".to_string()];
    header.extend(numbered("u", k));
    let vectors = read_matrix_csv(&dir.join(&manifest.eigenvectors), &header)?;
    if values.len() != k || vectors.len() != dim {
        return Err(RvgpError::DimensionMismatch(format!(
            "{}: manifest says k = {k} over {dim} rows, files hold {} values and {} rows",
            manifest_path.display(),
            values.len(),
            vectors.len()
        )));
    }
    Ok(Spectrum {
        eigenvalues: DVector::from_iterator(k, values.iter().map(|r| r[1])),
        eigenvectors: DMatrix::from_fn(dim, k, |r, c| vectors[r][c + 1]),
        fiber_dim: manifest.fiber_dim,
        next_eigenvalue: manifest.next_eigenvalue,
        max_residual: manifest.max_residual,
        solver: manifest.solver,
        tolerance: manifest.tolerance,
    })
}
