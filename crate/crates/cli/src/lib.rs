//! The `rvgp` command line: one experiment per invocation, driven by a
//! JSON config, writing CSV/VTK/JSON outputs plus a run manifest.

pub mod commands;
pub mod manifest;
pub mod pipeline;

use std::path::PathBuf;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use rvgp::io::{ExperimentConfig, ExperimentKind};

pub use manifest::{RunManifest, MANIFEST_FILE};

#[derive(Debug, Parser)]
#[command(name = "rvgp", version, about = "Vector-field Gaussian processes on manifolds")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    #[command(flatten)]
    pub common: Common,
}

#[derive(Debug, Clone, Args)]
pub struct Common {
    /// Experiment config (JSON).
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Output directory; overrides `output_dir`.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Overrides the config seed.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// error, warn, info, debug or trace (env_logger filter syntax).
    #[arg(long, global = true, default_value = "warn")]
    pub log_level: String,
}

#[derive(Debug, Clone, Subcommand)]
pub enum Command {
    /// Ground-truth tangent field by the vector heat method.
    Generate,
    /// Fit on a seeded fraction of the nodes and predict the rest.
    Superresolve,
    /// Predict a masked region with RVGP and the scalar baseline.
    Inpaint,
    /// Fit hyperparameters and save the model.
    Fit,
    /// Predict from a saved model.
    Predict,
    /// Compare a prediction CSV to a reference CSV.
    Eval {
        /// Overrides `prediction`.
        #[arg(long)]
        prediction: Option<PathBuf>,
        /// Overrides `truth`.
        #[arg(long)]
        truth: Option<PathBuf>,
    },
    /// Connection-Laplacian eigenpairs.
    Spectrum,
}

impl Command {
    pub fn kind(&self) -> ExperimentKind {
        match self {
            Command::Generate => ExperimentKind::Generate,
            Command::Superresolve => ExperimentKind::Superresolve,
            Command::Inpaint => ExperimentKind::Inpaint,
            Command::Fit => ExperimentKind::Fit,
            Command::Predict => ExperimentKind::Predict,
            Command::Eval { .. } => ExperimentKind::Eval,
            Command::Spectrum => ExperimentKind::Spectrum,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Command::Generate => "generate",
            Command::Superresolve => "superresolve",
            Command::Inpaint => "inpaint",
            Command::Fit => "fit",
            Command::Predict => "predict",
            Command::Eval { .. } => "eval",
            Command::Spectrum => "spectrum",
        }
    }
}

/// Loads the config, applies overrides and runs the command.
pub fn run(cli: &Cli) -> Result<RunManifest> {
    let kind = cli.command.kind();
    let (raw, mut config) = match &cli.common.config {
        Some(path) => {
            let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
            let raw: serde_json::Value =
                serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))?;
            let mut config = ExperimentConfig::from_json(&text).with_context(|| format!("parsing {}", path.display()))?;
            config.resolve_paths(path.parent().unwrap_or(std::path::Path::new(".")));
            (raw, config)
        }
        None if kind == ExperimentKind::Eval => {
            let raw = serde_json::json!({ "experiment": "eval" });
            (raw.clone(), serde_json::from_value(raw)?)
        }
        None => bail!("`{}` needs --config", cli.command.name()),
    };
    if config.experiment != kind {
        bail!(
            "config declares experiment `{}` but the subcommand is `{}`",
            serde_json::to_value(config.experiment)?.as_str().unwrap_or("?"),
            cli.command.name()
        );
    }
    let mut overrides = serde_json::Map::new();
    if let Some(seed) = cli.common.seed {
        config.seed = seed;
        overrides.insert("seed".into(), seed.into());
    }
    if let Command::Eval { prediction, truth } = &cli.command {
        let cwd = std::env::current_dir()?;
        if let Some(p) = prediction {
            overrides.insert("prediction".into(), p.display().to_string().into());
            config.prediction = Some(cwd.join(p));
        }
        if let Some(p) = truth {
            overrides.insert("truth".into(), p.display().to_string().into());
            config.truth = Some(cwd.join(p));
        }
    }
    if let Some(out) = &cli.common.out {
        config.output_dir = out.clone();
    }
    config.validate()?;
    let hash = manifest::config_hash(&raw, &serde_json::Value::Object(overrides));
    commands::execute(cli.command.name(), config, hash)
}
