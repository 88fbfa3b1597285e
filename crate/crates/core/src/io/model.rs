use std::path::{Path, PathBuf};

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::table::{numbered, read_matrix_csv, write_matrix_csv};
use super::text::{read_text, write_atomic};
use crate::error::{Result, RvgpError};
use crate::geometry::GaugeFrameSet;
use crate::gp::{FeatureSet, MaternHyperparams, RvgpModel};

const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct ModelManifest {
    format_version: u32,
    hyperparams: MaternHyperparams,
    c_norm: f64,
    nodes: usize,
    k: usize,
    output_dim: usize,
    fiber_dim: usize,
    noise_variance: f64,
    jitter: f64,
    train_nodes: Vec<usize>,
    eigenvalues: String,
    encodings: String,
    frames: Option<String>,
    training: String,
    alpha: String,
    cholesky: String,
}

fn indexed_header(lead: &[&str], prefix: &str, count: usize) -> Vec<String> {
    lead.iter().map(|s| s.to_string()).chain(numbered(prefix, count)).collect()
}

/// Writes `model.json` plus CSV matrices into `dir`; returns the written paths.
pub fn save_model(dir: &Path, model: &RvgpModel) -> Result<Vec<PathBuf>> {
    let features = model.features();
    let (n, k, r, m) = (features.len(), features.k(), features.output_dim(), features.fiber_dim());
    let mut written = Vec::new();
    let mut put = |name: &str, header: Vec<String>, rows: Vec<Vec<f64>>| -> Result<()> {
        let path = dir.join(name);
        write_matrix_csv(&path, &header, &rows)?;
        written.push(path);
        Ok(())
    };

    put(
        "eigenvalues.csv",
        vec!["index".into(), "eigenvalue".into()],
        features.eigenvalues().iter().enumerate().map(|(i, &l)| vec![i as f64, l]).collect(),
    )?;
    let mut enc_rows = Vec::with_capacity(n * r);
    for i in 0..n {
        let p = features.encoding(i);
        for a in 0..r {
            enc_rows.push([i as f64, a as f64].into_iter().chain(p.row(a).iter().copied()).collect());
        }
    }
    put("encodings.csv", indexed_header(&["node", "row"], "e", k), enc_rows)?;
    if let Some(frames) = features.frames() {
        let mut rows = Vec::with_capacity(n * frames.ambient_dim());
        for i in 0..n {
            let t = frames.frame(i);
            for a in 0..t.nrows() {
                rows.push([i as f64, a as f64].into_iter().chain(t.row(a).iter().copied()).collect());
            }
        }
        put("frames.csv", indexed_header(&["node", "row"], "t", m), rows)?;
    }
    let targets = model.targets();
    put(
        "training.csv",
        indexed_header(&["node"], "y", r),
        model
            .train_nodes()
            .iter()
            .enumerate()
            .map(|(s, &i)| std::iter::once(i as f64).chain(targets.row(s).iter().copied()).collect())
            .collect(),
    )?;
    put(
        "alpha.csv",
        vec!["index".into(), "alpha".into()],
        model.weights().iter().enumerate().map(|(i, &a)| vec![i as f64, a]).collect(),
    )?;
    let l = model.gram().factor();
    put(
        "cholesky.csv",
        indexed_header(&[], "l", l.ncols()),
        l.row_iter().map(|row| row.iter().copied().collect()).collect(),
    )?;

    let manifest = ModelManifest {
        format_version: FORMAT_VERSION,
        hyperparams: *model.hyperparams(),
        c_norm: model.c_norm(),
        nodes: n,
        k,
        output_dim: r,
        fiber_dim: m,
        noise_variance: model.gram().noise_variance,
        jitter: model.gram().jitter,
        train_nodes: model.train_nodes().to_vec(),
        eigenvalues: "eigenvalues.csv".into(),
        encodings: "encodings.csv".into(),
        frames: features.frames().map(|_| "frames.csv".into()),
        training: "training.csv".into(),
        alpha: "alpha.csv".into(),
        cholesky: "cholesky.csv".into(),
    };
    let path = dir.join("model.json");
    let mut json = serde_json::to_vec_pretty(&manifest)?;
    json.push(b'\n');
    write_atomic(&path, &json)?;
    written.push(path);
    Ok(written)
}

/// Reads a saved model and refits it from the stored encodings and
/// training data; the stored normalization and weights must be reproduced.
pub fn load_model(dir: &Path) -> Result<RvgpModel> {
    let manifest_path = dir.join("model.json");
    let manifest: ModelManifest = serde_json::from_str(&read_text(&manifest_path)?)?;
    if manifest.format_version != FORMAT_VERSION {
        return Err(RvgpError::InvalidInput(format!(
            "{}: unsupported model format version {}",
            manifest_path.display(),
            manifest.format_version
        )));
    }
    let (n, k, r, m) = (manifest.nodes, manifest.k, manifest.output_dim, manifest.fiber_dim);
    let mismatch = |what: &str| {
        RvgpError::DimensionMismatch(format!("{}: {what} does not match the manifest", manifest_path.display()))
    };

    let eig = read_matrix_csv(&dir.join(&manifest.eigenvalues), &["index".into(), "eigenvalue".into()])?;
    if eig.len() != k {
        return Err(mismatch("eigenvalue count"));
    }
    let eigenvalues = DVector::from_iterator(k, eig.iter().map(|row| row[1]));

    let enc = read_matrix_csv(&dir.join(&manifest.encodings), &indexed_header(&["node", "row"], "e", k))?;
    if enc.len() != n * r {
        return Err(mismatch("encoding rows"));
    }
    let encodings = (0..n)
        .map(|i| DMatrix::from_fn(r, k, |a, c| enc[i * r + a][c + 2]))
        .collect();

    let frames = match &manifest.frames {
        Some(name) => {
            let rows = read_matrix_csv(&dir.join(name), &indexed_header(&["node", "row"], "t", m))?;
            if rows.len() != n * r {
                return Err(mismatch("frame rows"));
            }
            Some(GaugeFrameSet::new(
                (0..n).map(|i| DMatrix::from_fn(r, m, |a, c| rows[i * r + a][c + 2])).collect(),
            )?)
        }
        None => None,
    };
    let features = FeatureSet::from_parts(encodings, eigenvalues, m, frames)?;

    let training = read_matrix_csv(&dir.join(&manifest.training), &indexed_header(&["node"], "y", r))?;
    let nodes: Vec<usize> = training.iter().map(|row| row[0] as usize).collect();
    if nodes != manifest.train_nodes {
        return Err(mismatch("training node list"));
    }
    let targets = DMatrix::from_fn(nodes.len(), r, |s, a| training[s][a + 1]);
    let model = RvgpModel::fit(&features, &nodes, &targets, &manifest.hyperparams)?;

    let alpha = read_matrix_csv(&dir.join(&manifest.alpha), &["index".into(), "alpha".into()])?;
    let scale = model.weights().amax().max(f64::MIN_POSITIVE);
    let alpha_err = alpha
        .iter()
        .zip(model.weights().iter())
        .map(|(row, w)| (row[1] - w).abs())
        .fold(0.0, f64::max);
    if alpha.len() != model.weights().len() || alpha_err > 1e-8 * scale {
        return Err(RvgpError::InvalidInput(format!(
            "{}: refitted weights differ from the stored ones",
            manifest_path.display()
        )));
    }
    if (model.c_norm() - manifest.c_norm).abs() > 1e-12 * manifest.c_norm.abs() {
        return Err(RvgpError::InvalidInput(format!(
            "{}: refitted normalization {} differs from stored {}",
            manifest_path.display(),
            model.c_norm(),
            manifest.c_norm
        )));
    }
    Ok(model)
}
