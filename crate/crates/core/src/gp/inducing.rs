use nalgebra::DMatrix;

use super::gram::{factor_with_jitter, mirror_lower};
use super::kernel::{spectral_filter, FeatureSet, MaternHyperparams};
use super::model::{flatten, symmetrize, Prediction};
use crate::error::{Result, RvgpError};

/// Deterministic-training-conditional (DTC) posterior with inducing
/// variables expressed in tangent coordinates at `inducing_nodes`.
///
/// Mean `K_*u (K_uu + s^-2 K_uf K_fu)^-1 s^-2 K_uf y`; covariance
/// `K_** - K_*u K_uu^-1 K_u* + K_*u (K_uu + s^-2 K_uf K_fu)^-1 K_u*`.
/// With the inducing set equal to the training set this reproduces the
/// exact posterior.
pub fn inducing_point_predict(
    features: &FeatureSet,
    train_nodes: &[usize],
    targets: &DMatrix<f64>,
    inducing_nodes: &[usize],
    hyper: &MaternHyperparams,
    query: &[usize],
) -> Result<Prediction> {
    hyper.validate()?;
    features.check_nodes(train_nodes)?;
    features.check_nodes(inducing_nodes)?;
    features.check_nodes(query)?;
    if inducing_nodes.is_empty() || inducing_nodes.len() > train_nodes.len() {
        return Err(RvgpError::InvalidInput(format!(
            "inducing set size {} must be in 1..={}",
            inducing_nodes.len(),
            train_nodes.len()
        )));
    }
    if !(hyper.noise > 0.0) {
        return Err(RvgpError::InvalidInput("inducing-point prediction needs noise > 0".into()));
    }
    let r = features.output_dim();
    if targets.shape() != (train_nodes.len(), r) {
        return Err(RvgpError::DimensionMismatch(format!(
            "targets are {}x{}, expected {}x{r}",
            targets.nrows(),
            targets.ncols(),
            train_nodes.len()
        )));
    }
    let filter = spectral_filter(features.eigenvalues(), hyper)?;
    let c_norm = features.normalization(&filter);
    let s = hyper.sigma * hyper.sigma * c_norm;
    let inv_noise = 1.0 / (hyper.noise * hyper.noise);

    let qf = features.weighted_rows(train_nodes, &filter);
    let qs = features.weighted_rows(query, &filter);
    let m = features.tangent_basis(inducing_nodes[0]).ncols();
    let mut qu = DMatrix::zeros(inducing_nodes.len() * m, features.k());
    for (slot, &i) in inducing_nodes.iter().enumerate() {
        let local = features.tangent_basis(i).transpose() * features.weighted_rows(&[i], &filter);
        qu.rows_mut(slot * m, m).copy_from(&local);
    }

    let mut k_uu = &qu * qu.transpose() * s;
    mirror_lower(&mut k_uu);
    let k_uf = &qu * qf.transpose() * s;
    let k_su = &qs * qu.transpose() * s;
    let mut sigma = &k_uu + &k_uf * k_uf.transpose() * inv_noise;
    mirror_lower(&mut sigma);

    let (sigma_chol, _) = factor_with_jitter(&sigma, 0.0)?;
    let (kuu_chol, _) = factor_with_jitter(&k_uu, 0.0)?;

    let y = flatten(targets);
    let rhs = &k_uf * y * inv_noise;
    let mean_flat = &k_su * sigma_chol.solve(&rhs);
    let mean = DMatrix::from_fn(query.len(), r, |i, a| mean_flat[i * r + a]);

    let k_us = k_su.transpose();
    let a = kuu_chol.l_dirty().solve_lower_triangular(&k_us).expect("positive diagonal");
    let b = sigma_chol.l_dirty().solve_lower_triangular(&k_us).expect("positive diagonal");
    let covariances = (0..query.len())
        .map(|slot| {
            let q = qs.rows(slot * r, r);
            let ab = a.columns(slot * r, r);
            let bb = b.columns(slot * r, r);
            let mut cov = q * q.transpose() * s - ab.transpose() * ab + bb.transpose() * bb;
            symmetrize(&mut cov);
            cov
        })
        .collect();
    Ok(Prediction { mean, covariances })
}
