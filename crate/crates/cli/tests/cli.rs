use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use rvgp::fields::{alignment_score, angular_error, MetricReport};
use rvgp::io::{read_field_csv, write_field_csv, FieldTable};
use rvgp_cli::RunManifest;

const INPUT: &str = r#"{"generator": {"torus": {"major_radius": 1.0, "minor_radius": 0.4, "major_segments": 12, "minor_segments": 8}}}"#;

fn rvgp(args: &[&str], config: Option<&Path>, out: &Path) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_rvgp"));
    cmd.args(args).arg("--out").arg(out).arg("--log-level").arg("error");
    if let Some(c) = config {
        cmd.arg("--config").arg(c);
    }
    cmd.output().unwrap()
}

fn write_config(dir: &Path, name: &str, body: &str) -> PathBuf {
    let path = dir.join(name);
    fs::write(&path, body).unwrap();
    path
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn metrics(dir: &Path) -> Vec<MetricReport> {
    serde_json::from_str(&fs::read_to_string(dir.join("metrics.json")).unwrap()).unwrap()
}

fn manifest(dir: &Path) -> RunManifest {
    serde_json::from_str(&fs::read_to_string(dir.join("run_manifest.json")).unwrap()).unwrap()
}

fn generated_field(dir: &Path) -> PathBuf {
    let c = write_config(dir, "gen.json", &format!(r#"{{"experiment": "generate", "input": {INPUT}, "seed": 2}}"#));
    let out = dir.join("gen");
    let o = rvgp(&["generate"], Some(&c), &out);
    assert!(o.status.success(), "{}", stderr(&o));
    out.join("field.csv")
}

#[test]
fn superresolve_rejects_full_training_fraction() {
    let dir = tempfile::tempdir().unwrap();
    let c = write_config(
        dir.path(),
        "c.json",
        &format!(r#"{{"experiment": "superresolve", "input": {INPUT}, "k": 10, "split": {{"train_fraction": 1.0}}}}"#),
    );
    let o = rvgp(&["superresolve"], Some(&c), &dir.path().join("out"));
    assert!(!o.status.success());
    assert!(stderr(&o).contains("no test nodes"), "{}", stderr(&o));
    assert!(!dir.path().join("out/run_manifest.json").exists());
}

#[test]
fn inpaint_rejects_empty_and_full_masks() {
    let dir = tempfile::tempdir().unwrap();
    let all: Vec<String> = (0..96).map(|i| format!("\"{i}\"")).collect();
    for (mask, message) in [("[]".to_string(), "mask is empty"), (format!("[{}]", all.join(",")), "covers all 96 nodes")] {
        let c = write_config(
            dir.path(),
            "c.json",
            &format!(r#"{{"experiment": "inpaint", "input": {INPUT}, "k": 10, "mask": {{"nodes": {mask}}}}}"#),
        );
        let o = rvgp(&["inpaint"], Some(&c), &dir.path().join("out"));
        assert!(!o.status.success());
        assert!(stderr(&o).contains(message), "{}", stderr(&o));
    }
    let c = write_config(
        dir.path(),
        "c.json",
        &format!(r#"{{"experiment": "inpaint", "input": {INPUT}, "k": 10, "mask": {{"nodes": ["nope"]}}}}"#),
    );
    let o = rvgp(&["inpaint"], Some(&c), &dir.path().join("out"));
    assert!(stderr(&o).contains("unknown node id `nope`"));
}

#[test]
fn eval_of_identical_fields_and_direct_metrics() {
    let dir = tempfile::tempdir().unwrap();
    let field = generated_field(dir.path());
    let out = dir.path().join("same");
    let f = field.to_str().unwrap();
    let o = rvgp(&["eval", "--prediction", f, "--truth", f], None, &out);
    assert!(o.status.success(), "{}", stderr(&o));
    let m = metrics(&out);
    assert_eq!((m[0].metric.as_str(), m[0].value), ("alignment", 1.0));
    assert_eq!((m[1].metric.as_str(), m[1].value), ("angular_error", 0.0));

    // perturbed prediction: CLI metrics equal direct library calls
    let mut table = read_field_csv(&field).unwrap();
    let truth = table.vectors.clone().unwrap();
    let pred = truth.map_with_location(|r, c, v| v + 0.01 * (((r * 3 + c) % 5) as f64 - 2.0));
    table.vectors = Some(pred.clone());
    let pred_path = dir.path().join("pred.csv");
    write_field_csv(&pred_path, &table).unwrap();
    let c = write_config(
        dir.path(),
        "eval.json",
        &format!(
            r#"{{"experiment": "eval", "input": {INPUT}, "prediction": "pred.csv", "truth": "gen/field.csv"}}"#
        ),
    );
    let out = dir.path().join("perturbed");
    let o = rvgp(&["eval"], Some(&c), &out);
    assert!(o.status.success(), "{}", stderr(&o));
    let m = metrics(&out);
    assert_eq!(m[0], alignment_score(&pred, &truth).unwrap());
    assert_eq!(m[1], angular_error(&pred, &truth).unwrap());
    let names: Vec<&str> = m.iter().map(|r| r.metric.as_str()).collect();
    assert_eq!(names[2..], ["prediction.dirichlet_energy", "truth.dirichlet_energy"]);
    assert!(m[2].value > m[3].value);
}

#[test]
fn eval_reports_id_mismatches() {
    let dir = tempfile::tempdir().unwrap();
    let field = generated_field(dir.path());
    let table = read_field_csv(&field).unwrap();
    let rows: Vec<usize> = (0..table.len()).rev().collect();
    let shuffled = table.select(&rows);
    let path = dir.path().join("shuffled.csv");
    write_field_csv(&path, &shuffled).unwrap();
    let o = rvgp(&["eval", "--prediction", path.to_str().unwrap(), "--truth", field.to_str().unwrap()], None, &dir.path().join("e"));
    assert!(!o.status.success());
    let err = stderr(&o);
    assert!(err.contains("node id mismatch"), "{err}");
    assert!(err.contains("row 1: `95` vs `0`"), "{err}");
    assert!(!err.contains("row 11:"), "{err}");
}

#[test]
fn generate_on_genus_zero_reports_singularities() {
    let dir = tempfile::tempdir().unwrap();
    let c = write_config(
        dir.path(),
        "c.json",
        r#"{"experiment": "generate", "input": {"generator": {"icosphere": {"subdivisions": 2}}}, "seed": 1, "field_spec": {"tau": 10}}"#,
    );
    let out = dir.path().join("out");
    let o = rvgp(&["generate"], Some(&c), &out);
    assert!(o.status.success(), "{}", stderr(&o));
    let m = manifest(&out);
    assert!(m.summary["singularity_candidates"].as_u64().is_some());
    assert_eq!(m.summary["nodes"], 162);
    let paths: Vec<&str> = m.outputs.iter().map(|e| e.path.as_str()).collect();
    assert_eq!(paths, ["field.csv", "field.vtk"]);
    let vtk = fs::read_to_string(out.join("field.vtk")).unwrap();
    assert!(vtk.starts_with("# vtk DataFile Version 3.0\n"));
    assert!(vtk.contains("POLYGONS 320 1280\n"));
}

#[test]
fn config_hash_tracks_content_and_seed_override() {
    let dir = tempfile::tempdir().unwrap();
    let a = write_config(dir.path(), "a.json", &format!(r#"{{"experiment": "spectrum", "input": {INPUT}, "k": 6}}"#));
    let b = write_config(dir.path(), "b.json", &format!(r#"{{"k": 6, "input": {INPUT}, "experiment": "spectrum"}}"#));
    let hash = |config: &Path, extra: &[&str], out: &str| {
        let mut args = vec!["spectrum"];
        args.extend_from_slice(extra);
        let o = rvgp(&args, Some(config), &dir.path().join(out));
        assert!(o.status.success(), "{}", stderr(&o));
        manifest(&dir.path().join(out)).config_hash
    };
    let h = hash(&a, &[], "a");
    assert_eq!(h, hash(&b, &[], "b"));
    assert_ne!(h, hash(&a, &["--seed", "9"], "c"));
    let m = manifest(&dir.path().join("c"));
    assert_eq!(m.seed, 9);
    assert_eq!(m.command, "spectrum");
    assert_eq!(m.outputs.len(), 3);
}

#[test]
fn fit_then_predict_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let field = generated_field(dir.path());
    let c = write_config(
        dir.path(),
        "fit.json",
        &format!(r#"{{"experiment": "fit", "input": {INPUT}, "k": 12, "field": "gen/field.csv", "split": {{"train_fraction": 0.75}}, "gp": {{"fit": false, "hyperparams": {{"sigma": 0.1, "kappa": 1.0, "noise": 0.001}}}}}}"#),
    );
    let o = rvgp(&["fit"], Some(&c), &dir.path().join("fit"));
    assert!(o.status.success(), "{}", stderr(&o));
    assert_eq!(metrics(&dir.path().join("fit"))[0].metric, "log_marginal_likelihood");

    let points = dir.path().join("points.csv");
    let src = read_field_csv(&field).unwrap();
    let off = FieldTable {
        ids: vec!["p".into()],
        points: src.points.rows(0, 1) * 1.02,
        vectors: None,
    };
    write_field_csv(&points, &off).unwrap();
    let c = write_config(
        dir.path(),
        "predict.json",
        &format!(r#"{{"experiment": "predict", "input": {INPUT}, "model": "fit/model", "query": ["4", "1"], "extension": {{"points": "points.csv"}}}}"#),
    );
    let out = dir.path().join("pred");
    let o = rvgp(&["predict"], Some(&c), &out);
    assert!(o.status.success(), "{}", stderr(&o));
    let pred = read_field_csv(&out.join("predictions.csv")).unwrap();
    assert_eq!(pred.ids, ["4", "1"]);
    let ext = read_field_csv(&out.join("extension_predictions.csv")).unwrap();
    assert_eq!(ext.ids, ["p"]);
    let variance = fs::read_to_string(out.join("predictive_variance.csv")).unwrap();
    assert!(variance.starts_with("id,variance\n4,"));
}

#[test]
fn subcommand_must_match_config() {
    let dir = tempfile::tempdir().unwrap();
    let c = write_config(dir.path(), "c.json", &format!(r#"{{"experiment": "fit", "input": {INPUT}}}"#));
    let o = rvgp(&["spectrum"], Some(&c), &dir.path().join("o"));
    assert!(!o.status.success());
    assert!(stderr(&o).contains("declares experiment `fit`"));
    let o = rvgp(&["spectrum"], None, &dir.path().join("o"));
    assert!(stderr(&o).contains("needs --config"));
    let bad = write_config(dir.path(), "bad.json", r#"{"experiment": "fit", "typo": 1}"#);
    let o = rvgp(&["fit"], Some(&bad), &dir.path().join("o"));
    assert!(stderr(&o).contains("unknown field `typo`"), "{}", stderr(&o));
}

#[test]
fn shipped_configs_parse() {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs");
    let mut seen = 0;
    for entry in fs::read_dir(&dir).unwrap() {
        let path = entry.unwrap().path();
        let text = fs::read_to_string(&path).unwrap();
        let config = rvgp::io::ExperimentConfig::from_json(&text).unwrap_or_else(|e| panic!("{}: {e}", path.display()));
        let stem = path.file_stem().unwrap().to_string_lossy().into_owned();
        let kind = serde_json::to_value(config.experiment).unwrap();
        assert_eq!(stem, format!("torus_{}", kind.as_str().unwrap()));
        seen += 1;
    }
    assert_eq!(seen, 7);
}
