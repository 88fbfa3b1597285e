use nalgebra::DMatrix;

use crate::error::{Result, RvgpError};
use crate::gp::{fit_channelwise_hyperparameters, FeatureSet, FitOutcome, MaternHyperparams, RvgpModel, SearchConfig, Smoothness};

/// Per-channel scalar GP with the squared-exponential (`nu = inf`) filter on
/// graph-Laplacian encodings. `hyper.nu` is ignored. Outputs are ambient
/// vectors and are not projected onto tangent spaces.
pub fn baseline_scalar_rbf_predict(
    features: &FeatureSet,
    train_nodes: &[usize],
    targets: &DMatrix<f64>,
    query: &[usize],
    hyper: &MaternHyperparams,
) -> Result<DMatrix<f64>> {
    if features.output_dim() != 1 {
        return Err(RvgpError::DimensionMismatch(format!(
            "baseline needs scalar features, got output dimension {}",
            features.output_dim()
        )));
    }
    let hyper = MaternHyperparams {
        nu: Smoothness::Infinite,
        ..*hyper
    };
    let mut out = DMatrix::zeros(query.len(), targets.ncols());
    for c in 0..targets.ncols() {
        let y = targets.columns(c, 1).into_owned();
        let model = RvgpModel::fit(features, train_nodes, &y, &hyper)?;
        out.set_column(c, &model.predict(query)?.mean.column(0));
    }
    Ok(out)
}

/// Evidence search for the baseline: one hyperparameter set shared by all channels.
pub fn fit_baseline_hyperparameters(
    features: &FeatureSet,
    train_nodes: &[usize],
    targets: &DMatrix<f64>,
    config: &SearchConfig,
) -> Result<FitOutcome> {
    fit_channelwise_hyperparameters(features, train_nodes, targets, Smoothness::Infinite, config)
}
