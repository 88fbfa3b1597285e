use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::text::read_text;
use crate::error::{Result, RvgpError};
use crate::fields::FieldSpec;
use crate::geometry::{ConnectivityPolicy, FrameNeighbors, Weighting};
use crate::gp::{SearchConfig, Smoothness};
use crate::spectral::EigenOptions;

/// JSON schema for [`ExperimentConfig`] documents.
pub const CONFIG_SCHEMA: &str = include_str!("../../schema/experiment_config.schema.json");

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExperimentKind {
    Generate,
    Superresolve,
    Inpaint,
    Fit,
    Predict,
    Eval,
    Spectrum,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum GeneratorSpec {
    Torus {
        major_radius: f64,
        minor_radius: f64,
        major_segments: usize,
        minor_segments: usize,
    },
    Icosphere {
        subdivisions: usize,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum InputSpec {
    /// ASCII OBJ or PLY surface.
    Mesh(PathBuf),
    /// Point-cloud CSV (`id,x0,...`); vectors in the file are ignored.
    Points(PathBuf),
    Generator(GeneratorSpec),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GraphConfig {
    /// Use mesh edges when the input has faces; otherwise a kNN graph.
    pub mesh_edges: bool,
    pub k_neighbors: usize,
    pub weighting: Weighting,
    pub on_disconnected: ConnectivityPolicy,
}

impl Default for GraphConfig {
    fn default() -> Self {
        Self {
            mesh_edges: true,
            k_neighbors: 5,
            weighting: Weighting::Unit,
            on_disconnected: ConnectivityPolicy::Error,
        }
    }
}

/// Fixed values for the fitted hyperparameters (`nu` comes from [`GpConfig`]).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FixedHyperparams {
    pub sigma: f64,
    pub kappa: f64,
    pub noise: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GpConfig {
    pub nu: Smoothness,
    /// Starting point (with `fit`) or final values (without).
    pub hyperparams: Option<FixedHyperparams>,
    /// Maximize the evidence; otherwise use `hyperparams` or the defaults.
    pub fit: bool,
    /// Search box and schedule; defaults to two decades around the start.
    pub search: Option<SearchConfig>,
}

impl Default for GpConfig {
    fn default() -> Self {
        Self {
            nu: Smoothness::Finite(1.5),
            hyperparams: None,
            fit: true,
            search: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SplitConfig {
    pub train_fraction: f64,
}

impl Default for SplitConfig {
    fn default() -> Self {
        Self { train_fraction: 0.5 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum MaskSpec {
    /// Explicit node ids.
    Nodes(Vec<String>),
    /// The given fraction of nodes nearest the strongest singularity candidate.
    AroundSingularity { fraction: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InducingConfig {
    /// Inducing nodes as a fraction of the training nodes, chosen by furthest-point sampling.
    pub fraction: f64,
}

/// Off-graph query points for `predict`, encoded from their nearest nodes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExtensionConfig {
    /// Point CSV (`id,x0,...`).
    pub points: PathBuf,
    #[serde(default = "default_extension_neighbors")]
    pub neighbors: usize,
}

fn default_extension_neighbors() -> usize {
    8
}
fn default_manifold_dim() -> usize {
    2
}
fn default_k() -> usize {
    50
}
fn default_output() -> PathBuf {
    PathBuf::from("out")
}

/// One experiment run, as a single JSON document. Relative paths are
/// resolved against the directory containing the document.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub experiment: ExperimentKind,
    #[serde(default)]
    pub input: Option<InputSpec>,
    /// Vector field CSV over the input nodes; generated in-process when absent.
    #[serde(default)]
    pub field: Option<PathBuf>,
    #[serde(default)]
    pub graph: GraphConfig,
    #[serde(default = "default_manifold_dim")]
    pub manifold_dim: usize,
    #[serde(default)]
    pub frame_neighbors: FrameNeighbors,
    /// Number of eigenpairs.
    #[serde(default = "default_k")]
    pub k: usize,
    /// Extra values of `k` evaluated by `superresolve`.
    #[serde(default)]
    pub k_sweep: Vec<usize>,
    #[serde(default)]
    pub eigen: EigenOptions,
    #[serde(default)]
    pub field_spec: FieldSpec,
    #[serde(default)]
    pub gp: GpConfig,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub split: SplitConfig,
    #[serde(default)]
    pub mask: Option<MaskSpec>,
    #[serde(default)]
    pub inducing: Option<InducingConfig>,
    /// Saved model directory for `predict`.
    #[serde(default)]
    pub model: Option<PathBuf>,
    /// Node ids to predict; all nodes when absent.
    #[serde(default)]
    pub query: Option<Vec<String>>,
    #[serde(default)]
    pub extension: Option<ExtensionConfig>,
    /// Prediction CSV for `eval`.
    #[serde(default)]
    pub prediction: Option<PathBuf>,
    /// Reference CSV for `eval`.
    #[serde(default)]
    pub truth: Option<PathBuf>,
    #[serde(default = "default_output")]
    pub output_dir: PathBuf,
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    /// Reads, resolves relative paths against the file's directory and validates.
    pub fn load(path: &Path) -> Result<Self> {
        let text = read_text(path)?;
        let mut config = Self::from_json(&text).map_err(|e| match e {
            RvgpError::Json(j) => RvgpError::Parse {
                path: path.to_path_buf(),
                line: j.line(),
                message: j.to_string(),
            },
            other => other,
        })?;
        let base = path.parent().unwrap_or(Path::new("."));
        config.resolve_paths(base);
        config.validate()?;
        Ok(config)
    }

    pub fn resolve_paths(&mut self, base: &Path) {
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        match &mut self.input {
            Some(InputSpec::Mesh(p)) | Some(InputSpec::Points(p)) => fix(p),
            _ => {}
        }
        let extension = self.extension.as_mut().map(|e| &mut e.points);
        let optional = [&mut self.field, &mut self.model, &mut self.prediction, &mut self.truth];
        for p in optional.into_iter().filter_map(Option::as_mut).chain(extension) {
            fix(p);
        }
        fix(&mut self.output_dir);
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(RvgpError::InvalidInput(m));
        let need = |what: &str, present: bool| -> Result<()> {
            if present {
                Ok(())
            } else {
                Err(RvgpError::InvalidInput(format!("`{what}` is required for this experiment")))
            }
        };
        if self.k == 0 || self.k_sweep.contains(&0) {
            return bad("k must be >= 1".into());
        }
        if self.manifold_dim == 0 {
            return bad("manifold_dim must be >= 1".into());
        }
        let f = self.split.train_fraction;
        if !(f > 0.0 && f <= 1.0) {
            return bad(format!("split.train_fraction must be in (0, 1], got {f}"));
        }
        if let Some(InducingConfig { fraction }) = self.inducing {
            if !(fraction > 0.0 && fraction <= 1.0) {
                return bad(format!("inducing.fraction must be in (0, 1], got {fraction}"));
            }
        }
        if let Some(MaskSpec::AroundSingularity { fraction }) = self.mask {
            if !(fraction > 0.0 && fraction < 1.0) {
                return bad(format!("mask fraction must be in (0, 1), got {fraction}"));
            }
        }
        if !(self.field_spec.tau >= 0.0 && self.field_spec.tau.is_finite()) {
            return bad(format!("field_spec.tau must be >= 0, got {}", self.field_spec.tau));
        }
        if let Some(GeneratorSpec::Torus { major_radius, minor_radius, .. }) = self.input.as_ref().and_then(|i| match i {
            InputSpec::Generator(g) => Some(*g),
            _ => None,
        }) {
            if !(major_radius > minor_radius && minor_radius > 0.0) {
                return bad("torus radii must satisfy major > minor > 0".into());
            }
        }
        match self.experiment {
            ExperimentKind::Eval => {
                need("prediction", self.prediction.is_some())?;
                need("truth", self.truth.is_some())?;
            }
            ExperimentKind::Predict => {
                need("input", self.input.is_some())?;
                need("model", self.model.is_some())?;
            }
            ExperimentKind::Inpaint => {
                need("input", self.input.is_some())?;
                need("mask", self.mask.is_some())?;
            }
            _ => need("input", self.input.is_some())?,
        }
        let mut paths: Vec<&Path> = Vec::new();
        if let Some(InputSpec::Mesh(p) | InputSpec::Points(p)) = &self.input {
            paths.push(p);
        }
        paths.extend([&self.field, &self.model, &self.prediction, &self.truth].into_iter().flatten().map(PathBuf::as_path));
        if let Some(e) = &self.extension {
            if e.neighbors < self.manifold_dim {
                return bad(format!("extension.neighbors must be >= manifold_dim, got {}", e.neighbors));
            }
            paths.push(&e.points);
        }
        if let Some(missing) = paths.into_iter().find(|p| !p.exists()) {
            return bad(format!("referenced path {} does not exist", missing.display()));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_document_gets_defaults() {
        let c = ExperimentConfig::from_json(
            r#"{"experiment": "superresolve", "input": {"generator": {"torus": {"major_radius": 1, "minor_radius": 0.4, "major_segments": 20, "minor_segments": 20}}}, "seed": 7}"#,
        )
        .unwrap();
        assert_eq!(c.k, 50);
        assert_eq!(c.split.train_fraction, 0.5);
        assert_eq!(c.field_spec.tau, 100.0);
        assert_eq!(c.gp.nu, Smoothness::Finite(1.5));
        assert!(c.graph.mesh_edges);
        c.validate().unwrap();
    }

    #[test]
    fn rejects_unknown_and_invalid() {
        assert!(ExperimentConfig::from_json(r#"{"experiment": "superresolve", "bogus": 1}"#).is_err());
        assert!(ExperimentConfig::from_json(r#"{"experiment": "train"}"#).is_err());
        assert!(ExperimentConfig::from_json(r#"{"experiment": "fit", "seed": -1}"#).is_err());
        let c = ExperimentConfig::from_json(r#"{"experiment": "fit", "input": {"mesh": "/no/such/file.obj"}}"#).unwrap();
        assert!(c.validate().is_err());
        let c = ExperimentConfig::from_json(r#"{"experiment": "inpaint", "input": {"generator": {"icosphere": {"subdivisions": 1}}}}"#).unwrap();
        assert!(c.validate().is_err());
        let c = ExperimentConfig::from_json(r#"{"experiment": "generate", "input": {"generator": {"icosphere": {"subdivisions": 1}}}, "k": 0}"#).unwrap();
        assert!(c.validate().is_err());
    }

    #[test]
    fn relative_paths_resolve_against_config_dir() {
        let dir = tempfile::tempdir().unwrap();
        std::fs::write(dir.path().join("m.obj"), "v 0 0 0\n").unwrap();
        let path = dir.path().join("c.json");
        std::fs::write(&path, r#"{"experiment": "spectrum", "input": {"mesh": "m.obj"}, "output_dir": "res"}"#).unwrap();
        let c = ExperimentConfig::load(&path).unwrap();
        assert_eq!(c.input, Some(InputSpec::Mesh(dir.path().join("m.obj"))));
        assert_eq!(c.output_dir, dir.path().join("res"));
    }

    #[test]
    fn schema_lists_every_field() {
        let schema: serde_json::Value = serde_json::from_str(CONFIG_SCHEMA).unwrap();
        let props = schema["properties"].as_object().unwrap();
        let c = ExperimentConfig::from_json(r#"{"experiment": "eval"}"#).unwrap();
        let value = serde_json::to_value(&c).unwrap();
        let keys: Vec<&String> = value.as_object().unwrap().keys().collect();
        let schema_keys: Vec<&String> = props.keys().collect();
        assert_eq!(keys, schema_keys);
        assert_eq!(schema["required"], serde_json::json!(["experiment"]));
        assert_eq!(schema["additionalProperties"], serde_json::json!(false));
    }
}
