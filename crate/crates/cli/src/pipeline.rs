//! Shared steps: inputs to geometry, ground truth, hyperparameters.

use std::collections::HashMap;
use std::path::Path;

use anyhow::{anyhow, bail, Context, Result};
use nalgebra::DMatrix;
use rvgp::bundle::TangentBundle;
use rvgp::fields::{
    fit_baseline_hyperparameters, generate_experiment_field, ExperimentField,
};
use rvgp::geometry::{
    build_knn_graph, mesh, ConnectivityPolicy, GraphOptions, PointCloud, ProximityGraph, TriangleMesh,
};
use rvgp::gp::{
    fit_hyperparameters, FeatureSet, FitOutcome, MaternHyperparams, SearchConfig, Smoothness,
};
use rvgp::io::{load_mesh, read_field_csv, ExperimentConfig, FieldTable, GeneratorSpec, InputSpec};
use rvgp::spectral::Spectrum;
use rvgp::RvgpError;

/// Nodes of the experiment with their external ids.
#[derive(Debug, Clone)]
pub struct Input {
    pub ids: Vec<String>,
    pub cloud: PointCloud,
    pub faces: Option<Vec<[usize; 3]>>,
}

impl Input {
    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    /// Row index per id.
    pub fn index(&self) -> HashMap<&str, usize> {
        self.ids.iter().enumerate().map(|(i, id)| (id.as_str(), i)).collect()
    }

    /// Node indices for the listed ids, in the given order.
    pub fn lookup(&self, ids: &[String], what: &str) -> Result<Vec<usize>> {
        let index = self.index();
        ids.iter()
            .map(|id| index.get(id.as_str()).copied().ok_or_else(|| anyhow!("{what}: unknown node id `{id}`")))
            .collect()
    }

    pub fn table(&self, rows: &[usize], vectors: &DMatrix<f64>) -> FieldTable {
        FieldTable {
            ids: rows.iter().map(|&r| self.ids[r].clone()).collect(),
            points: self.cloud.points().select_rows(rows),
            vectors: Some(vectors.clone()),
        }
    }
}

pub fn load_input(config: &ExperimentConfig) -> Result<Input> {
    let spec = config.input.as_ref().ok_or_else(|| anyhow!("config has no `input`"))?;
    let (cloud, faces, ids) = match spec {
        InputSpec::Mesh(path) => {
            let m = load_mesh(path)?;
            (m.points, Some(m.faces), None)
        }
        InputSpec::Points(path) => {
            let table = read_field_csv(path)?;
            let cloud = PointCloud::new(table.points.clone())?;
            (cloud, None, Some(table.ids))
        }
        InputSpec::Generator(g) => {
            let m = match *g {
                GeneratorSpec::Torus {
                    major_radius,
                    minor_radius,
                    major_segments,
                    minor_segments,
                } => mesh::torus(major_radius, minor_radius, major_segments, minor_segments)?,
                GeneratorSpec::Icosphere { subdivisions } => mesh::icosphere(subdivisions)?,
            };
            (m.points, Some(m.faces), None)
        }
    };
    let ids = ids.unwrap_or_else(|| (0..cloud.len()).map(|i| i.to_string()).collect());
    Ok(Input { ids, cloud, faces })
}

pub fn build_graph(config: &ExperimentConfig, input: &Input) -> Result<ProximityGraph> {
    let g = &config.graph;
    let graph = match (&input.faces, g.mesh_edges) {
        (Some(faces), true) => {
            let mesh = TriangleMesh::new(input.cloud.clone(), faces.clone())?;
            let graph = ProximityGraph::from_mesh(&mesh, g.weighting)?;
            let components = graph.component_count();
            if components > 1 {
                match g.on_disconnected {
                    ConnectivityPolicy::Error => return Err(RvgpError::Disconnected { components }.into()),
                    ConnectivityPolicy::Warn => log::warn!("mesh graph has {components} connected components"),
                }
            }
            graph
        }
        _ => build_knn_graph(
            &input.cloud,
            &GraphOptions {
                k_neighbors: g.k_neighbors,
                weighting: g.weighting,
                on_disconnected: g.on_disconnected,
            },
        )?,
    };
    Ok(graph)
}

pub fn build_bundle(config: &ExperimentConfig, input: &Input) -> Result<TangentBundle> {
    let graph = build_graph(config, input)?;
    log::info!("graph: {} nodes, {} edges", graph.len(), graph.edges().len());
    Ok(TangentBundle::build(input.cloud.clone(), graph, config.manifold_dim, config.frame_neighbors)?)
}

pub fn warn_degenerate_cut(spectrum: &Spectrum) {
    if spectrum.splits_degenerate_cluster() {
        log::warn!(
            "k = {} cuts through a degenerate eigenvalue cluster; the kernel depends on the solver's basis there",
            spectrum.k()
        );
    }
}

/// Ground truth over all nodes: the `field` CSV when given, else the
/// vector heat field generated from the config seed.
pub enum Truth {
    Loaded(DMatrix<f64>),
    Generated(Box<ExperimentField>),
}

impl Truth {
    pub fn ambient(&self) -> &DMatrix<f64> {
        match self {
            Truth::Loaded(v) => v,
            Truth::Generated(g) => g.field().ambient(),
        }
    }

    /// Strongest singularity candidate: from the heat run when generated,
    /// else the node with the smallest vector.
    pub fn singularity_center(&self) -> usize {
        match self {
            Truth::Generated(g) => g.heat.singularity_center(),
            Truth::Loaded(v) => (0..v.nrows())
                .min_by(|&a, &b| v.row(a).norm().total_cmp(&v.row(b).norm()).then(a.cmp(&b)))
                .unwrap_or(0),
        }
    }
}

pub fn load_truth(config: &ExperimentConfig, input: &Input, bundle: &TangentBundle) -> Result<Truth> {
    match &config.field {
        Some(path) => {
            let table = read_field_csv(path)?;
            check_ids(&table.ids, &input.ids).with_context(|| format!("field {} vs input", path.display()))?;
            let vectors = table
                .vectors
                .ok_or_else(|| anyhow!("field file {} has no vector columns", path.display()))?;
            Ok(Truth::Loaded(vectors))
        }
        None => Ok(Truth::Generated(Box::new(generate_experiment_field(
            bundle,
            &config.field_spec,
            config.seed,
        )?))),
    }
}

/// Errors unless both id lists agree row by row; reports the first ten offending rows.
pub fn check_ids(got: &[String], expected: &[String]) -> Result<()> {
    let offenders: Vec<String> = (0..got.len().max(expected.len()))
        .filter(|&r| got.get(r) != expected.get(r))
        .take(10)
        .map(|r| {
            let show = |v: Option<&String>| v.map_or("<missing>".to_string(), |s| format!("`{s}`"));
            format!("row {}: {} vs {}", r + 1, show(got.get(r)), show(expected.get(r)))
        })
        .collect();
    if offenders.is_empty() {
        Ok(())
    } else {
        Err(RvgpError::IdMismatch(offenders).into())
    }
}

pub fn rows(matrix: &DMatrix<f64>, nodes: &[usize]) -> DMatrix<f64> {
    matrix.select_rows(nodes)
}

/// Whole-field matrix with `values` written over the listed nodes.
pub fn overlay(base: &DMatrix<f64>, nodes: &[usize], values: &DMatrix<f64>) -> DMatrix<f64> {
    let mut out = base.clone();
    for (r, &i) in nodes.iter().enumerate() {
        out.row_mut(i).copy_from(&values.row(r));
    }
    out
}

/// Chosen hyperparameters and the search that produced them, if any.
pub struct HyperChoice {
    pub hyper: MaternHyperparams,
    pub search: Option<FitOutcome>,
}

pub fn starting_hyper(config: &ExperimentConfig, bundle: &TangentBundle, nu: Smoothness) -> MaternHyperparams {
    let mut h = MaternHyperparams::initial(bundle.graph.mean_edge_length(&bundle.points));
    h.nu = nu;
    if let Some(f) = config.gp.hyperparams {
        h.sigma = f.sigma;
        h.kappa = f.kappa;
        h.noise = f.noise;
    }
    h
}

fn search_config(config: &ExperimentConfig, start: &MaternHyperparams) -> SearchConfig {
    config.gp.search.clone().unwrap_or_else(|| SearchConfig::around(start))
}

pub fn choose_rvgp_hyper(
    config: &ExperimentConfig,
    bundle: &TangentBundle,
    features: &FeatureSet,
    train: &[usize],
    targets: &DMatrix<f64>,
) -> Result<HyperChoice> {
    let start = starting_hyper(config, bundle, config.gp.nu);
    if !config.gp.fit {
        return Ok(HyperChoice { hyper: start, search: None });
    }
    let outcome = fit_hyperparameters(features, train, targets, config.gp.nu, &search_config(config, &start))?;
    log::info!("fitted {:?} (log evidence {:.6})", outcome.hyper, outcome.log_marginal_likelihood);
    Ok(HyperChoice {
        hyper: outcome.hyper,
        search: Some(outcome),
    })
}

pub fn choose_baseline_hyper(
    config: &ExperimentConfig,
    bundle: &TangentBundle,
    features: &FeatureSet,
    train: &[usize],
    targets: &DMatrix<f64>,
) -> Result<HyperChoice> {
    let start = starting_hyper(config, bundle, Smoothness::Infinite);
    if !config.gp.fit {
        return Ok(HyperChoice { hyper: start, search: None });
    }
    let outcome = fit_baseline_hyperparameters(features, train, targets, &search_config(config, &start))?;
    log::info!("baseline fitted {:?}", outcome.hyper);
    Ok(HyperChoice {
        hyper: outcome.hyper,
        search: Some(outcome),
    })
}

pub fn hyper_json(choice: &HyperChoice) -> serde_json::Value {
    serde_json::json!({
        "hyperparams": choice.hyper,
        "fitted": choice.search.is_some(),
        "log_marginal_likelihood": choice.search.as_ref().map(|s| s.log_marginal_likelihood),
        "evaluations": choice.search.as_ref().map(|s| s.evaluations),
    })
}

pub fn ensure_dir(path: &Path) -> Result<()> {
    std::fs::create_dir_all(path).with_context(|| format!("creating {}", path.display()))
}

pub fn require_same_dim(input: &Input, vectors: &DMatrix<f64>, what: &str) -> Result<()> {
    if vectors.ncols() != input.cloud.dim() {
        bail!("{what} vectors have dimension {}, points have {}", vectors.ncols(), input.cloud.dim());
    }
    Ok(())
}

/// `round(fraction * |train|)` training nodes (at least one) chosen by
/// furthest-point sampling over their positions.
pub fn fps_inducing(cloud: &PointCloud, train: &[usize], fraction: f64) -> Result<Vec<usize>> {
    let count = ((fraction * train.len() as f64).round() as usize).clamp(1, train.len());
    let sub = cloud.select(train)?;
    let sample = rvgp::geometry::furthest_point_sample(&sub, count)?;
    let mut nodes: Vec<usize> = sample.indices.iter().map(|&i| train[i]).collect();
    nodes.sort_unstable();
    Ok(nodes)
}
