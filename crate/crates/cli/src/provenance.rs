use std::fs;
use std::path::{Path, PathBuf};

use rockfrag::pipeline::PipelineConfig;
use serde::Serialize;
use serde_json::Value;
use sha2::{Digest, Sha256};

use crate::CliError;

#[derive(Debug, Clone, Serialize)]
pub struct InputDigest {
    pub path: String,
    pub sha256: String,
}

/// Where a report came from. Contains no timestamps so reruns are
/// byte-identical.
#[derive(Debug, Clone, Serialize)]
pub struct Provenance {
    pub tool: &'static str,
    pub tool_version: &'static str,
    pub command: String,
    pub config_sha256: String,
    /// `key=value` for every setting that differs from the built-in defaults.
    pub overrides: Vec<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    pub inputs: Vec<InputDigest>,
}

impl Provenance {
    pub fn new(command: &str, config: &PipelineConfig, extra_overrides: &[String]) -> Self {
        let value = serde_json::to_value(config).expect("config serializes");
        let default = serde_json::to_value(PipelineConfig::default()).expect("config serializes");
        let mut overrides = Vec::new();
        diff_keys(&default, &value, String::new(), &mut overrides);
        overrides.extend(extra_overrides.iter().cloned());
        Provenance {
            tool: "rockfrag",
            tool_version: env!("CARGO_PKG_VERSION"),
            command: command.to_string(),
            config_sha256: hex::encode(Sha256::digest(value.to_string().as_bytes())),
            overrides,
            seed: None,
            inputs: Vec::new(),
        }
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = Some(seed);
        self
    }

    pub fn input(&mut self, path: &Path) -> Result<(), CliError> {
        let sha256 = if path.is_dir() {
            digest_dir(path)?
        } else {
            digest_file(path)?
        };
        self.inputs.push(InputDigest {
            path: path.display().to_string(),
            sha256,
        });
        Ok(())
    }
}

fn diff_keys(a: &Value, b: &Value, prefix: String, out: &mut Vec<String>) {
    match (a, b) {
        (Value::Object(x), Value::Object(y)) => {
            for (k, vb) in y {
                let key = if prefix.is_empty() {
                    k.clone()
                } else {
                    format!("{prefix}.{k}")
                };
                match x.get(k) {
                    Some(va) => diff_keys(va, vb, key, out),
                    None => out.push(format!("{key}={vb}")),
                }
            }
        }
        _ if a != b => out.push(format!("{prefix}={b}")),
        _ => {}
    }
}

pub fn digest_file(path: &Path) -> Result<String, CliError> {
    let bytes = fs::read(path).map_err(|e| CliError::data(format!("cannot read {}: {e}", path.display())))?;
    Ok(hex::encode(Sha256::digest(&bytes)))
}

/// Digest over the relative paths and contents of every file below `dir`,
/// visited in sorted order.
pub fn digest_dir(dir: &Path) -> Result<String, CliError> {
    let mut files = Vec::new();
    collect_files(dir, &mut files)?;
    files.sort();
    let mut h = Sha256::new();
    for f in files {
        let rel = f.strip_prefix(dir).unwrap_or(&f);
        h.update(rel.to_string_lossy().as_bytes());
        h.update([0]);
        h.update(digest_file(&f)?.as_bytes());
    }
    Ok(hex::encode(h.finalize()))
}

fn collect_files(dir: &Path, out: &mut Vec<PathBuf>) -> Result<(), CliError> {
    let entries = fs::read_dir(dir).map_err(|e| CliError::data(format!("cannot list {}: {e}", dir.display())))?;
    for entry in entries {
        let path = entry.map_err(|e| CliError::data(e.to_string()))?.path();
        if path.is_dir() {
            collect_files(&path, out)?;
        } else {
            out.push(path);
        }
    }
    Ok(())
}
