use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use anyhow::{Context, Result};
use serde::{Deserialize, Serialize};
use serde_json::Value;
use sha2::{Digest, Sha256};

pub const MANIFEST_FILE: &str = "run_manifest.json";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Stage {
    pub name: String,
    pub seconds: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OutputEntry {
    /// Relative to the output directory, `/`-separated.
    pub path: String,
    pub bytes: u64,
    pub sha256: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub tool: String,
    pub version: String,
    pub command: String,
    pub config_hash: String,
    pub seed: u64,
    pub stages: Vec<Stage>,
    pub outputs: Vec<OutputEntry>,
    pub summary: Value,
}

/// Recursively sorts object keys.
pub fn canonical(value: &Value) -> Value {
    match value {
        Value::Object(map) => {
            let mut entries: Vec<(&String, &Value)> = map.iter().collect();
            entries.sort_by(|a, b| a.0.cmp(b.0));
            Value::Object(entries.into_iter().map(|(k, v)| (k.clone(), canonical(v))).collect())
        }
        Value::Array(items) => Value::Array(items.iter().map(canonical).collect()),
        other => other.clone(),
    }
}

/// sha256 of the compact canonical JSON of `{"config": .., "overrides": ..}`.
pub fn config_hash(raw_config: &Value, overrides: &Value) -> String {
    let doc = serde_json::json!({ "config": raw_config, "overrides": overrides });
    let text = serde_json::to_string(&canonical(&doc)).expect("JSON values serialize");
    hex::encode(Sha256::digest(text.as_bytes()))
}

pub fn file_sha256(path: &Path) -> Result<(u64, String)> {
    let bytes = fs::read(path).with_context(|| format!("reading {}", path.display()))?;
    Ok((bytes.len() as u64, hex::encode(Sha256::digest(&bytes))))
}

/// Wall time per named stage, in call order.
#[derive(Debug, Default)]
pub struct Timer {
    stages: Vec<Stage>,
}

impl Timer {
    pub fn stage<T>(&mut self, name: &str, f: impl FnOnce() -> T) -> T {
        let start = Instant::now();
        let out = f();
        let seconds = start.elapsed().as_secs_f64();
        log::info!("{name}: {seconds:.3} s");
        self.stages.push(Stage {
            name: name.to_string(),
            seconds,
        });
        out
    }

    pub fn into_stages(self) -> Vec<Stage> {
        self.stages
    }
}

pub fn inventory(out_dir: &Path, files: &[PathBuf]) -> Result<Vec<OutputEntry>> {
    let mut entries = Vec::with_capacity(files.len());
    for file in files {
        let rel = file.strip_prefix(out_dir).unwrap_or(file);
        let path = rel
            .components()
            .map(|c| c.as_os_str().to_string_lossy().into_owned())
            .collect::<Vec<_>>()
            .join("/");
        let (bytes, sha256) = file_sha256(file)?;
        entries.push(OutputEntry { path, bytes, sha256 });
    }
    entries.sort_by(|a, b| a.path.cmp(&b.path));
    entries.dedup_by(|a, b| a.path == b.path);
    Ok(entries)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hash_ignores_key_order() {
        let a: Value = serde_json::from_str(r#"{"experiment": "fit", "gp": {"nu": 1.5, "fit": true}, "seed": 3}"#).unwrap();
        let b: Value = serde_json::from_str(r#"{"seed": 3, "gp": {"fit": true, "nu": 1.5}, "experiment": "fit"}"#).unwrap();
        let o = serde_json::json!({});
        assert_eq!(config_hash(&a, &o), config_hash(&b, &o));
        assert_ne!(config_hash(&a, &o), config_hash(&a, &serde_json::json!({"seed": 4})));
        assert_eq!(config_hash(&a, &o).len(), 64);
    }

    #[test]
    fn inventory_is_relative_and_sorted() {
        let dir = tempfile::tempdir().unwrap();
        let b = dir.path().join("sub").join("b.txt");
        fs::create_dir_all(b.parent().unwrap()).unwrap();
        fs::write(&b, "b").unwrap();
        let a = dir.path().join("a.txt");
        fs::write(&a, "").unwrap();
        let inv = inventory(dir.path(), &[b, a]).unwrap();
        assert_eq!(inv[0].path, "a.txt");
        assert_eq!(inv[0].sha256, "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855");
        assert_eq!(inv[1].path, "sub/b.txt");
        assert_eq!(inv[1].bytes, 1);
    }
}
