//! Run manifests: what was run, on which inputs, and what came out.

use std::fs;
use std::path::{Path, PathBuf};
use std::time::Duration;

use anyhow::{Context, Result};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

pub const MANIFEST_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InputDigest {
    pub path: PathBuf,
    pub bytes: u64,
    pub sha256: String,
}

impl InputDigest {
    pub fn of(path: &Path, contents: &[u8]) -> Self {
        InputDigest {
            path: path.to_path_buf(),
            bytes: contents.len() as u64,
            sha256: hex::encode(Sha256::digest(contents)),
        }
    }
}

/// Reads a file and records its digest in one go, so the digest always
/// describes the bytes that were actually parsed.
pub fn read_input(path: &Path, inputs: &mut Vec<InputDigest>) -> Result<Vec<u8>> {
    let bytes = fs::read(path).with_context(|| format!("reading {}", path.display()))?;
    inputs.push(InputDigest::of(path, &bytes));
    Ok(bytes)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Status {
    Ok,
    Skipped,
}

impl Status {
    pub fn as_str(self) -> &'static str {
        match self {
            Status::Ok => "ok",
            Status::Skipped => "skipped",
        }
    }
}

/// Result of one (failure, statistic) attempt.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TreeOutcome {
    pub failure: String,
    pub statistic: String,
    pub status: Status,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub significance: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub depth: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub gates: Option<usize>,
    pub runtime_ms: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub skip_reason: Option<String>,
}

impl TreeOutcome {
    pub fn runtime(d: Duration) -> f64 {
        d.as_secs_f64() * 1e3
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub format_version: u32,
    pub tool: String,
    pub version: String,
    pub command: String,
    /// Flags, effective learner settings and schema as used by the run.
    pub config: serde_json::Value,
    pub inputs: Vec<InputDigest>,
    pub threads: usize,
    pub outcomes: Vec<TreeOutcome>,
    pub outputs: Vec<PathBuf>,
}

impl RunManifest {
    pub fn new(command: &str, config: serde_json::Value) -> Self {
        RunManifest {
            format_version: MANIFEST_VERSION,
            tool: "ftlearn".into(),
            version: env!("CARGO_PKG_VERSION").into(),
            command: command.into(),
            config,
            inputs: Vec::new(),
            threads: rayon::current_num_threads(),
            outcomes: Vec::new(),
            outputs: Vec::new(),
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("manifest serializes") + "\n"
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_json()).with_context(|| format!("writing {}", path.display()))
    }
}

/// `out/tree.json` -> `out/tree.manifest.json`.
pub fn beside(path: &Path) -> PathBuf {
    path.with_extension("manifest.json")
}

/// Fallback for runs whose results only go to stdout.
pub const DEFAULT_MANIFEST: &str = "ftlearn-manifest.json";
