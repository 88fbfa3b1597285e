use std::path::{Path, PathBuf};

use anyhow::{anyhow, bail, Result};
use nalgebra::DMatrix;
use rvgp::fields::{
    alignment_score, angular_error, baseline_scalar_rbf_predict, boundary_max_angular_jump, mask_around,
    out_of_tangent, random_split, MetricReport, TangentField,
};
use rvgp::gp::{extend_encoding, inducing_point_predict, FeatureSet, Prediction, RvgpModel};
use rvgp::io::{
    format_float, load_model, read_field_csv, save_model, write_atomic, write_field_csv, write_spectrum, write_vtk,
    ExperimentConfig, FieldTable, InducingConfig, MaskSpec,
};
use rvgp::spectral::dirichlet_energy;
use serde_json::{json, Map, Value};

use crate::manifest::{inventory, RunManifest, Timer, MANIFEST_FILE};
use crate::pipeline::{self as pipe, Input};

/// State shared by every command while it runs.
struct Run {
    config: ExperimentConfig,
    out: PathBuf,
    timer: Timer,
    outputs: Vec<PathBuf>,
    summary: Map<String, Value>,
}

impl Run {
    fn path(&self, name: &str) -> PathBuf {
        self.out.join(name)
    }

    fn csv(&mut self, name: &str, table: &FieldTable) -> Result<()> {
        let path = self.path(name);
        write_field_csv(&path, table)?;
        self.outputs.push(path);
        Ok(())
    }

    fn vtk(&mut self, name: &str, input: &Input, vectors: &DMatrix<f64>, attribute: &str) -> Result<()> {
        let path = self.path(name);
        write_vtk(&path, input.cloud.points(), input.faces.as_deref(), vectors, attribute)?;
        self.outputs.push(path);
        Ok(())
    }

    fn metrics(&mut self, reports: &[MetricReport]) -> Result<()> {
        if let Some(bad) = reports.iter().find(|r| !r.value.is_finite()) {
            bail!("metric {} is not finite", bad.metric);
        }
        let path = self.path("metrics.json");
        let mut text = serde_json::to_string_pretty(reports)?;
        text.push('\n');
        write_atomic(&path, text.as_bytes())?;
        self.outputs.push(path);
        Ok(())
    }

    fn note(&mut self, key: &str, value: Value) {
        self.summary.insert(key.to_string(), value);
    }
}

pub fn execute(command: &str, config: ExperimentConfig, config_hash: String) -> Result<RunManifest> {
    let out = config.output_dir.clone();
    pipe::ensure_dir(&out)?;
    let seed = config.seed;
    let mut run = Run {
        config,
        out,
        timer: Timer::default(),
        outputs: Vec::new(),
        summary: Map::new(),
    };
    match command {
        "generate" => generate(&mut run)?,
        "superresolve" => superresolve(&mut run)?,
        "inpaint" => inpaint(&mut run)?,
        "fit" => fit(&mut run)?,
        "predict" => predict(&mut run)?,
        "eval" => eval(&mut run)?,
        "spectrum" => spectrum(&mut run)?,
        other => bail!("unknown command `{other}`"),
    }
    let outputs = inventory(&run.out, &run.outputs)?;
    let manifest = RunManifest {
        tool: "rvgp".into(),
        version: env!("CARGO_PKG_VERSION").into(),
        command: command.into(),
        config_hash,
        seed,
        stages: run.timer.into_stages(),
        outputs,
        summary: Value::Object(run.summary),
    };
    let mut text = serde_json::to_string_pretty(&manifest)?;
    text.push('\n');
    write_atomic(&run.out.join(MANIFEST_FILE), text.as_bytes())?;
    Ok(manifest)
}

fn renamed(mut report: MetricReport, prefix: &str, suffix: &str) -> MetricReport {
    report.metric = format!("{prefix}{}{suffix}", report.metric);
    report
}

fn generate(run: &mut Run) -> Result<()> {
    let config = run.config.clone();
    let input = run.timer.stage("input", || pipe::load_input(&config))?;
    let bundle = run.timer.stage("geometry", || pipe::build_bundle(&config, &input))?;
    let field = run
        .timer
        .stage("field", || rvgp::fields::generate_experiment_field(&bundle, &config.field_spec, config.seed))?;
    let all: Vec<usize> = (0..input.len()).collect();
    let vectors = field.field().ambient().clone();
    run.csv("field.csv", &input.table(&all, &vectors))?;
    run.vtk("field.vtk", &input, &vectors, "field")?;
    let center = field.heat.singularity_center();
    run.note("nodes", json!(input.len()));
    run.note("anchors", json!(field.anchors.iter().map(|&i| &input.ids[i]).collect::<Vec<_>>()));
    run.note("anchor_spacing", json!(field.spacing));
    run.note("tau", json!(config.field_spec.tau));
    run.note("singularity_candidates", json!(field.heat.singular.len()));
    run.note(
        "singular_nodes",
        json!(field.heat.singular.iter().map(|&i| &input.ids[i]).collect::<Vec<_>>()),
    );
    run.note("singularity_center", json!(input.ids[center]));
    run.note("min_direction_norm", json!(field.heat.direction_norms[center]));
    Ok(())
}

fn predict_split(
    inducing: Option<InducingConfig>,
    input: &Input,
    features: &FeatureSet,
    train: &[usize],
    targets: &DMatrix<f64>,
    hyper: &rvgp::gp::MaternHyperparams,
    query: &[usize],
) -> Result<(Prediction, Option<usize>)> {
    match inducing {
        Some(ind) => {
            let nodes = pipe::fps_inducing(&input.cloud, train, ind.fraction)?;
            let p = inducing_point_predict(features, train, targets, &nodes, hyper, query)?;
            Ok((p, Some(nodes.len())))
        }
        None => Ok((RvgpModel::fit(features, train, targets, hyper)?.predict(query)?, None)),
    }
}

fn superresolve(run: &mut Run) -> Result<()> {
    let config = run.config.clone();
    let input = run.timer.stage("input", || pipe::load_input(&config))?;
    let bundle = run.timer.stage("geometry", || pipe::build_bundle(&config, &input))?;
    let truth = run.timer.stage("field", || pipe::load_truth(&config, &input, &bundle))?;
    let truth = truth.ambient();
    pipe::require_same_dim(&input, truth, "field")?;
    let n = input.len();
    let (train, test) = random_split(n, config.split.train_fraction, config.seed)?;
    if test.is_empty() {
        bail!(
            "train fraction {} leaves no test nodes out of {n}; nothing to superresolve",
            config.split.train_fraction
        );
    }
    let mut ks = vec![config.k];
    for &k in &config.k_sweep {
        if !ks.contains(&k) {
            ks.push(k);
        }
    }
    let k_max = *ks.iter().max().expect("nonempty");
    let spectrum = run
        .timer
        .stage("spectrum", || bundle.connection_spectrum(k_max, &config.eigen))?;
    let targets = pipe::rows(truth, &train);
    let held_out = pipe::rows(truth, &test);
    let mut reports = Vec::new();
    let mut per_k = Vec::new();
    for &k in &ks {
        let sub = spectrum.truncate(k)?;
        pipe::warn_degenerate_cut(&sub);
        let features = FeatureSet::from_connection(&sub, &bundle.frames)?;
        let stage = format!("fit_predict_k{k}");
        let (choice, prediction, inducing) = run.timer.stage(&stage, || -> Result<_> {
            let choice = pipe::choose_rvgp_hyper(&config, &bundle, &features, &train, &targets)?;
            let (p, inducing) = predict_split(config.inducing, &input, &features, &train, &targets, &choice.hyper, &test)?;
            Ok((choice, p, inducing))
        })?;
        let suffix = if k == config.k { String::new() } else { format!("_k{k}") };
        reports.push(renamed(alignment_score(&prediction.mean, &held_out)?, "", &suffix));
        reports.push(renamed(angular_error(&prediction.mean, &held_out)?, "", &suffix));
        let mut info = pipe::hyper_json(&choice);
        info["k"] = json!(k);
        info["inducing_nodes"] = json!(inducing);
        per_k.push(info);
        let name = if k == config.k { "predictions.csv".to_string() } else { format!("predictions_k{k}.csv") };
        run.csv(&name, &input.table(&test, &prediction.mean))?;
        if k == config.k {
            let full = pipe::overlay(truth, &test, &prediction.mean);
            run.vtk("superresolved.vtk", &input, &full, "superresolved")?;
        }
    }
    run.csv("heldout_truth.csv", &input.table(&test, &held_out))?;
    run.metrics(&reports)?;
    run.note("nodes", json!(n));
    run.note("train_nodes", json!(train.len()));
    run.note("test_nodes", json!(test.len()));
    run.note("runs", Value::Array(per_k));
    Ok(())
}

fn inpaint(run: &mut Run) -> Result<()> {
    let config = run.config.clone();
    let input = run.timer.stage("input", || pipe::load_input(&config))?;
    let bundle = run.timer.stage("geometry", || pipe::build_bundle(&config, &input))?;
    let truth = run.timer.stage("field", || pipe::load_truth(&config, &input, &bundle))?;
    let n = input.len();
    let mask = match config.mask.as_ref().ok_or_else(|| anyhow!("inpaint needs a `mask`"))? {
        MaskSpec::Nodes(ids) => {
            let mut nodes = input.lookup(ids, "mask")?;
            nodes.sort_unstable();
            nodes.dedup();
            nodes
        }
        MaskSpec::AroundSingularity { fraction } => {
            let center = truth.singularity_center();
            run.note("mask_center", json!(input.ids[center]));
            mask_around(&bundle.points, center, *fraction)?
        }
    };
    if mask.is_empty() {
        bail!("mask is empty: there are no nodes to inpaint");
    }
    if mask.len() == n {
        bail!("mask covers all {n} nodes: there is nothing to train on");
    }
    let truth = truth.ambient();
    pipe::require_same_dim(&input, truth, "field")?;
    let train: Vec<usize> = (0..n).filter(|i| mask.binary_search(i).is_err()).collect();
    let targets = pipe::rows(truth, &train);
    let masked_truth = pipe::rows(truth, &mask);

    let features = run.timer.stage("spectrum", || -> Result<_> {
        let s = bundle.connection_spectrum(config.k, &config.eigen)?;
        pipe::warn_degenerate_cut(&s);
        Ok(FeatureSet::from_connection(&s, &bundle.frames)?)
    })?;
    let (choice, rvgp_pred) = run.timer.stage("rvgp", || -> Result<_> {
        let choice = pipe::choose_rvgp_hyper(&config, &bundle, &features, &train, &targets)?;
        let (p, _) = predict_split(config.inducing, &input, &features, &train, &targets, &choice.hyper, &mask)?;
        Ok((choice, p.mean))
    })?;
    let scalar = run.timer.stage("scalar_spectrum", || -> Result<_> {
        let s = bundle.scalar_spectrum(config.k, &config.eigen)?;
        Ok(FeatureSet::from_scalar(&s)?)
    })?;
    let (base_choice, base_pred) = run.timer.stage("baseline", || -> Result<_> {
        let choice = pipe::choose_baseline_hyper(&config, &bundle, &scalar, &train, &targets)?;
        let p = baseline_scalar_rbf_predict(&scalar, &train, &targets, &mask, &choice.hyper)?;
        Ok((choice, p))
    })?;

    let mut reports = Vec::new();
    for (name, pred) in [("rvgp", &rvgp_pred), ("baseline", &base_pred)] {
        let prefix = format!("{name}.");
        let full = pipe::overlay(truth, &mask, pred);
        reports.push(renamed(alignment_score(pred, &masked_truth)?, &prefix, ""));
        reports.push(renamed(angular_error(pred, &masked_truth)?, &prefix, ""));
        for r in out_of_tangent(&bundle.frames, &mask, pred)?.reports() {
            reports.push(renamed(r, &prefix, ""));
        }
        reports.push(renamed(boundary_max_angular_jump(&bundle.graph, &mask, &full)?, &prefix, ""));
        run.csv(&format!("{name}.csv"), &input.table(&mask, pred))?;
        run.vtk(&format!("{name}.vtk"), &input, &full, name)?;
    }
    reports.push(renamed(boundary_max_angular_jump(&bundle.graph, &mask, truth)?, "truth.", ""));
    run.csv("masked_truth.csv", &input.table(&mask, &masked_truth))?;
    run.metrics(&reports)?;
    run.note("nodes", json!(n));
    run.note("masked_nodes", json!(mask.iter().map(|&i| &input.ids[i]).collect::<Vec<_>>()));
    run.note("rvgp", pipe::hyper_json(&choice));
    run.note("baseline", pipe::hyper_json(&base_choice));
    Ok(())
}

fn fit(run: &mut Run) -> Result<()> {
    let config = run.config.clone();
    let input = run.timer.stage("input", || pipe::load_input(&config))?;
    let bundle = run.timer.stage("geometry", || pipe::build_bundle(&config, &input))?;
    let truth = run.timer.stage("field", || pipe::load_truth(&config, &input, &bundle))?;
    let truth = truth.ambient();
    let (train, _) = random_split(input.len(), config.split.train_fraction, config.seed)?;
    let targets = pipe::rows(truth, &train);
    let features = run.timer.stage("spectrum", || -> Result<_> {
        let s = bundle.connection_spectrum(config.k, &config.eigen)?;
        pipe::warn_degenerate_cut(&s);
        Ok(FeatureSet::from_connection(&s, &bundle.frames)?)
    })?;
    let (choice, model) = run.timer.stage("fit", || -> Result<_> {
        let choice = pipe::choose_rvgp_hyper(&config, &bundle, &features, &train, &targets)?;
        let model = RvgpModel::fit(&features, &train, &targets, &choice.hyper)?;
        Ok((choice, model))
    })?;
    let dir = run.path("model");
    let files = run.timer.stage("write", || save_model(&dir, &model))?;
    run.outputs.extend(files);
    run.metrics(&[MetricReport {
        metric: "log_marginal_likelihood".into(),
        value: model.log_marginal_likelihood(),
        n_nodes: train.len(),
        n_excluded: 0,
    }])?;
    run.note("nodes", json!(input.len()));
    run.note("train_nodes", json!(train.iter().map(|&i| &input.ids[i]).collect::<Vec<_>>()));
    run.note("model", pipe::hyper_json(&choice));
    Ok(())
}

fn variance_csv(path: &Path, ids: &[String], prediction: &Prediction) -> Result<()> {
    let mut text = String::from("id,variance\n");
    for (id, cov) in ids.iter().zip(&prediction.covariances) {
        text.push_str(&format!("{id},{}\n", format_float(cov.trace().max(0.0))));
    }
    write_atomic(path, text.as_bytes())?;
    Ok(())
}

fn predict(run: &mut Run) -> Result<()> {
    let config = run.config.clone();
    let input = run.timer.stage("input", || pipe::load_input(&config))?;
    let model_dir = config.model.clone().ok_or_else(|| anyhow!("predict needs `model`"))?;
    let model = run.timer.stage("load_model", || load_model(&model_dir))?;
    if model.features().len() != input.len() {
        bail!("model covers {} nodes, input has {}", model.features().len(), input.len());
    }
    let query = match &config.query {
        Some(ids) => input.lookup(ids, "query")?,
        None => (0..input.len()).collect(),
    };
    if query.is_empty() {
        bail!("query is empty");
    }
    let prediction = run.timer.stage("predict", || model.predict(&query))?;
    let table = input.table(&query, &prediction.mean);
    run.csv("predictions.csv", &table)?;
    let var_path = run.path("predictive_variance.csv");
    variance_csv(&var_path, &table.ids, &prediction)?;
    run.outputs.push(var_path);
    let full_order = query.len() == input.len() && query.iter().enumerate().all(|(r, &i)| r == i);
    if full_order {
        run.vtk("predictions.vtk", &input, &prediction.mean, "prediction")?;
    } else {
        let path = run.path("predictions.vtk");
        write_vtk(&path, &table.points, None, &prediction.mean, "prediction")?;
        run.outputs.push(path);
    }
    if let Some(ext) = &config.extension {
        let points = read_field_csv(&ext.points)?;
        let encoded = run.timer.stage("extension", || -> Result<_> {
            let mut encodings = Vec::with_capacity(points.len());
            for r in 0..points.len() {
                let x: Vec<f64> = points.points.row(r).iter().copied().collect();
                encodings.push(extend_encoding(&input.cloud, model.features(), &x, ext.neighbors)?.1);
            }
            Ok(model.predict_encodings(&encodings)?)
        })?;
        let table = FieldTable {
            ids: points.ids.clone(),
            points: points.points.clone(),
            vectors: Some(encoded.mean.clone()),
        };
        run.csv("extension_predictions.csv", &table)?;
        let path = run.path("extension_variance.csv");
        variance_csv(&path, &points.ids, &encoded)?;
        run.outputs.push(path);
        run.note("extension_points", json!(points.len()));
    }
    run.note("query_nodes", json!(query.len()));
    run.note("hyperparams", json!(model.hyperparams()));
    Ok(())
}

fn eval(run: &mut Run) -> Result<()> {
    let config = run.config.clone();
    let pred_path = config.prediction.clone().ok_or_else(|| anyhow!("eval needs `prediction`"))?;
    let truth_path = config.truth.clone().ok_or_else(|| anyhow!("eval needs `truth`"))?;
    let (pred, truth) = run.timer.stage("read", || -> Result<_> {
        Ok((read_field_csv(&pred_path)?, read_field_csv(&truth_path)?))
    })?;
    pipe::check_ids(&pred.ids, &truth.ids)?;
    let pv = pred.vectors.as_ref().ok_or_else(|| anyhow!("{} has no vector columns", pred_path.display()))?;
    let tv = truth.vectors.as_ref().ok_or_else(|| anyhow!("{} has no vector columns", truth_path.display()))?;
    let mut reports = vec![alignment_score(pv, tv)?, angular_error(pv, tv)?];
    if config.input.is_some() {
        let input = run.timer.stage("input", || pipe::load_input(&config))?;
        if pred.ids == input.ids {
            let bundle = run.timer.stage("geometry", || pipe::build_bundle(&config, &input))?;
            for (name, v) in [("prediction", pv), ("truth", tv)] {
                let coords = TangentField::project(&bundle.frames, v)?;
                reports.push(MetricReport {
                    metric: format!("{name}.dirichlet_energy"),
                    value: dirichlet_energy(&bundle.graph, &bundle.transports, coords.coords())?,
                    n_nodes: input.len(),
                    n_excluded: 0,
                });
            }
        } else {
            log::warn!("prediction does not list every input node in order; skipping Dirichlet energies");
        }
    }
    run.metrics(&reports)?;
    run.note("nodes", json!(pred.len()));
    Ok(())
}

fn spectrum(run: &mut Run) -> Result<()> {
    let config = run.config.clone();
    let input = run.timer.stage("input", || pipe::load_input(&config))?;
    let bundle = run.timer.stage("geometry", || pipe::build_bundle(&config, &input))?;
    let spectrum = run
        .timer
        .stage("spectrum", || bundle.connection_spectrum(config.k, &config.eigen))?;
    pipe::warn_degenerate_cut(&spectrum);
    let dir = run.path("spectrum");
    let files = write_spectrum(&dir, &spectrum)?;
    run.outputs.extend(files);
    run.note("nodes", json!(input.len()));
    run.note("k", json!(spectrum.k()));
    run.note("splits_degenerate_cluster", json!(spectrum.splits_degenerate_cluster()));
    Ok(())
}
