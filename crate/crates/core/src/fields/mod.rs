//! Ground-truth fields from heat flow, the scalar-kernel baseline and the
//! evaluation metrics.

mod baseline;
mod field;
mod generate;
mod heat;
mod metrics;

pub use baseline::{baseline_scalar_rbf_predict, fit_baseline_hyperparameters};
pub use field::TangentField;
pub use generate::{generate_experiment_field, mask_around, random_split, Anchors, ExperimentField, FieldSpec};
pub use heat::{connection_heat, heat_flow, scalar_heat, vector_heat, HeatOptions, VectorHeat, SINGULAR_THRESHOLD};
pub use metrics::{alignment_score, angular_error, boundary_max_angular_jump, out_of_tangent, MetricReport, TangentDeviation};
