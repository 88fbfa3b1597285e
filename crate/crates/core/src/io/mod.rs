//! Readers and writers. Every writer is deterministic: the same input
//! produces the same bytes. Floats are written in their shortest
//! round-trip form.

mod config;
mod mesh;
mod model;
mod spectrum;
mod table;
mod text;
mod vtk;

pub use config::{
    ExperimentConfig, ExperimentKind, ExtensionConfig, FixedHyperparams, GeneratorSpec, GpConfig, GraphConfig, InducingConfig, InputSpec, MaskSpec,
    SplitConfig, CONFIG_SCHEMA,
};
pub use mesh::{load_mesh, read_obj, read_ply, write_obj, write_ply};
pub use model::{load_model, save_model};
pub use spectrum::{read_spectrum, write_spectrum};
pub use table::{read_field_csv, write_field_csv, FieldTable};
pub use text::{format_float, write_atomic};
pub use vtk::write_vtk;
