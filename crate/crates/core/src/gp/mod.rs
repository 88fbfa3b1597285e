//! Matérn kernels on the tangent bundle, exact posterior inference,
//! evidence-based hyperparameter search and an inducing-point approximation.

mod extension;
mod gram;
mod inducing;
mod kernel;
mod model;
mod search;

pub use extension::extend_encoding;
pub use gram::{assemble_gram, Gram};
pub use inducing::inducing_point_predict;
pub use kernel::{
    kernel_block, spectral_filter, FeatureSet, MaternHyperparams, Smoothness, SpectralFilter,
};
pub use model::{Prediction, RvgpModel};
pub use search::{fit_channelwise_hyperparameters, fit_hyperparameters, FitOutcome, SearchConfig};

#[cfg(test)]
mod tests;
