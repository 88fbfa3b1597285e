use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};

use super::gram::{assemble_gram, mirror_lower, Gram};
use super::kernel::{spectral_filter, FeatureSet, MaternHyperparams, SpectralFilter};
use crate::error::{Result, RvgpError};

/// Posterior mean (one row per query node) and per-node covariance blocks.
#[derive(Debug, Clone, PartialEq)]
pub struct Prediction {
    pub mean: DMatrix<f64>,
    pub covariances: Vec<DMatrix<f64>>,
}

/// A fitted GP: features, hyperparameters and the factored training Gram.
/// Immutable after fitting.
#[derive(Debug, Clone)]
pub struct RvgpModel {
    features: FeatureSet,
    hyper: MaternHyperparams,
    filter: SpectralFilter,
    c_norm: f64,
    train_nodes: Vec<usize>,
    targets: DVector<f64>,
    gram: Gram,
    weights: DVector<f64>,
}

impl RvgpModel {
    /// Conditions the prior on `targets` (one row per training node).
    pub fn fit(
        features: &FeatureSet,
        train_nodes: &[usize],
        targets: &DMatrix<f64>,
        hyper: &MaternHyperparams,
    ) -> Result<Self> {
        hyper.validate()?;
        features.check_nodes(train_nodes)?;
        let r = features.output_dim();
        if targets.nrows() != train_nodes.len() || targets.ncols() != r {
            return Err(RvgpError::DimensionMismatch(format!(
                "targets are {}x{}, expected {}x{r}",
                targets.nrows(),
                targets.ncols(),
                train_nodes.len()
            )));
        }
        if targets.iter().any(|v| !v.is_finite()) {
            return Err(RvgpError::InvalidInput("training vectors must be finite".into()));
        }
        let mut seen = vec![false; features.len()];
        for &i in train_nodes {
            if std::mem::replace(&mut seen[i], true) {
                return Err(RvgpError::InvalidInput(format!("training node {i} listed twice")));
            }
        }
        let filter = spectral_filter(features.eigenvalues(), hyper)?;
        let c_norm = features.normalization(&filter);
        let gram = assemble_gram(features, train_nodes, &filter, hyper.sigma, hyper.noise, c_norm)?;
        let flat = flatten(targets);
        let weights = gram.solve(&flat);
        Ok(Self {
            features: features.clone(),
            hyper: *hyper,
            filter,
            c_norm,
            train_nodes: train_nodes.to_vec(),
            targets: flat,
            gram,
            weights,
        })
    }

    pub fn features(&self) -> &FeatureSet {
        &self.features
    }

    pub fn hyperparams(&self) -> &MaternHyperparams {
        &self.hyper
    }

    pub fn filter(&self) -> &SpectralFilter {
        &self.filter
    }

    pub fn c_norm(&self) -> f64 {
        self.c_norm
    }

    pub fn train_nodes(&self) -> &[usize] {
        &self.train_nodes
    }

    pub fn gram(&self) -> &Gram {
        &self.gram
    }

    /// `(K + noise^2 I)^-1 y`.
    pub fn weights(&self) -> &DVector<f64> {
        &self.weights
    }

    /// Training targets, one row per training node.
    pub fn targets(&self) -> DMatrix<f64> {
        let r = self.features.output_dim();
        DMatrix::from_fn(self.train_nodes.len(), r, |i, a| self.targets[i * r + a])
    }

    pub fn predict(&self, query: &[usize]) -> Result<Prediction> {
        self.features.check_nodes(query)?;
        Ok(self.predict_rows(self.features.weighted_rows(query, &self.filter)))
    }

    /// Prediction at points outside the graph from encodings built by
    /// [`super::extend_encoding`] (or any `d x k` encodings).
    pub fn predict_encodings(&self, encodings: &[DMatrix<f64>]) -> Result<Prediction> {
        let (r, k) = (self.features.output_dim(), self.features.k());
        if let Some(p) = encodings.iter().find(|p| p.shape() != (r, k)) {
            return Err(RvgpError::DimensionMismatch(format!(
                "encoding is {}x{}, expected {r}x{k}",
                p.nrows(),
                p.ncols()
            )));
        }
        let mut rows = DMatrix::zeros(encodings.len() * r, k);
        for (slot, p) in encodings.iter().enumerate() {
            for c in 0..k {
                let w = self.filter.weights[c].sqrt();
                for a in 0..r {
                    rows[(slot * r + a, c)] = p[(a, c)] * w;
                }
            }
        }
        Ok(self.predict_rows(rows))
    }

    fn predict_rows(&self, qs: DMatrix<f64>) -> Prediction {
        let r = self.features.output_dim();
        let nq = qs.nrows() / r.max(1);
        let s = self.hyper.sigma * self.hyper.sigma * self.c_norm;
        let qt = self.features.weighted_rows(&self.train_nodes, &self.filter);
        let cross = &qs * qt.transpose() * s;
        let mean_flat = &cross * &self.weights;
        let mean = DMatrix::from_fn(nq, r, |i, a| mean_flat[i * r + a]);
        let v = self.gram.solve_lower(&cross.transpose());
        let covariances = (0..nq)
            .map(|slot| {
                let q = qs.rows(slot * r, r);
                let vb = v.columns(slot * r, r);
                let mut cov = q * q.transpose() * s - vb.transpose() * vb;
                symmetrize(&mut cov);
                cov
            })
            .collect();
        Prediction { mean, covariances }
    }

    /// `-1/2 y^T (K + noise^2 I)^-1 y - 1/2 log det(K + noise^2 I) - N/2 log 2 pi`.
    pub fn log_marginal_likelihood(&self) -> f64 {
        let n = self.targets.len() as f64;
        -0.5 * self.targets.dot(&self.weights) - 0.5 * self.gram.log_determinant() - 0.5 * n * (2.0 * PI).ln()
    }
}

pub(crate) fn flatten(rows: &DMatrix<f64>) -> DVector<f64> {
    let r = rows.ncols();
    DVector::from_fn(rows.nrows() * r, |i, _| rows[(i / r, i % r)])
}

pub(crate) fn symmetrize(m: &mut DMatrix<f64>) {
    for c in 0..m.ncols() {
        for r in (c + 1)..m.nrows() {
            let avg = 0.5 * (m[(r, c)] + m[(c, r)]);
            m[(r, c)] = avg;
        }
    }
    mirror_lower(m);
}
