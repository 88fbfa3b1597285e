use nalgebra::{Cholesky, DMatrix, DVector, Dyn};

use super::kernel::{FeatureSet, SpectralFilter};
use crate::error::{Result, RvgpError};

/// Noisy training covariance `K + (noise^2 + jitter) I` and its Cholesky factor.
#[derive(Debug, Clone)]
pub struct Gram {
    /// Noise-free prior covariance, exactly symmetric.
    pub prior: DMatrix<f64>,
    pub noise_variance: f64,
    /// Extra diagonal added on the jitter ladder (0 if none was needed).
    pub jitter: f64,
    cholesky: Cholesky<f64, Dyn>,
}

impl Gram {
    pub fn dim(&self) -> usize {
        self.prior.nrows()
    }

    pub fn factor(&self) -> DMatrix<f64> {
        self.cholesky.l()
    }

    pub fn solve(&self, b: &DVector<f64>) -> DVector<f64> {
        self.cholesky.solve(b)
    }

    pub fn solve_matrix(&self, b: &DMatrix<f64>) -> DMatrix<f64> {
        self.cholesky.solve(b)
    }

    /// `L^-1 B` for the lower factor `L`.
    pub fn solve_lower(&self, b: &DMatrix<f64>) -> DMatrix<f64> {
        self.cholesky
            .l_dirty()
            .solve_lower_triangular(b)
            .expect("Cholesky factor has a positive diagonal")
    }

    pub fn log_determinant(&self) -> f64 {
        let l = self.cholesky.l_dirty();
        2.0 * (0..l.nrows()).map(|i| l[(i, i)].ln()).sum::<f64>()
    }

    /// The matrix that was factored.
    pub fn noisy(&self) -> DMatrix<f64> {
        let mut m = self.prior.clone();
        for i in 0..m.nrows() {
            m[(i, i)] += self.noise_variance + self.jitter;
        }
        m
    }
}

/// Prior covariance over `nodes` (node-major, `output_dim` values per node).
pub(crate) fn prior_covariance(
    features: &FeatureSet,
    nodes: &[usize],
    filter: &SpectralFilter,
    sigma: f64,
    c_norm: f64,
) -> DMatrix<f64> {
    let q = features.weighted_rows(nodes, filter);
    let mut k = &q * q.transpose() * (sigma * sigma * c_norm);
    mirror_lower(&mut k);
    k
}

pub(crate) fn mirror_lower(m: &mut DMatrix<f64>) {
    for c in 0..m.ncols() {
        for r in (c + 1)..m.nrows() {
            m[(c, r)] = m[(r, c)];
        }
    }
}

/// Factors `m + shift I`, walking the jitter ladder
/// `0, 1e-10, 1e-9, ..., 1e-4` (relative to the mean diagonal of `m`).
pub(crate) fn factor_with_jitter(m: &DMatrix<f64>, shift: f64) -> Result<(Cholesky<f64, Dyn>, f64)> {
    let n = m.nrows();
    let diag: Vec<f64> = (0..n).map(|i| m[(i, i)]).collect();
    let mean = diag.iter().sum::<f64>() / n.max(1) as f64;
    let scale = if mean > 0.0 { mean } else { 1.0 };
    let ladder = std::iter::once(0.0).chain((0..=6).map(|p| scale * 10f64.powi(p - 10)));
    let mut last = 0.0;
    for jitter in ladder {
        let mut trial = m.clone();
        for i in 0..n {
            trial[(i, i)] += shift + jitter;
        }
        if let Some(c) = Cholesky::new(trial) {
            return Ok((c, jitter));
        }
        last = jitter;
    }
    Err(RvgpError::NotPositiveDefinite {
        jitter: last,
        min_diag: diag.iter().copied().fold(f64::INFINITY, f64::min),
        max_diag: diag.iter().copied().fold(f64::NEG_INFINITY, f64::max),
    })
}

pub fn assemble_gram(
    features: &FeatureSet,
    nodes: &[usize],
    filter: &SpectralFilter,
    sigma: f64,
    noise: f64,
    c_norm: f64,
) -> Result<Gram> {
    if nodes.is_empty() {
        return Err(RvgpError::InvalidInput("Gram matrix needs at least one node".into()));
    }
    features.check_nodes(nodes)?;
    if filter.weights.len() != features.k() {
        return Err(RvgpError::DimensionMismatch(format!(
            "filter has {} weights, features have k = {}",
            filter.weights.len(),
            features.k()
        )));
    }
    let prior = prior_covariance(features, nodes, filter, sigma, c_norm);
    let noise_variance = noise * noise;
    let (cholesky, jitter) = factor_with_jitter(&prior, noise_variance)?;
    Ok(Gram {
        prior,
        noise_variance,
        jitter,
        cholesky,
    })
}
