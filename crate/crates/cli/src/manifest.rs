//! Run manifests: what ran, on which inputs, and what it wrote.

use std::path::{Path, PathBuf};
use std::time::{Instant, SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{CliError, Result};
use crate::io::write_file;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub command: String,
    /// SHA-256 over the command's parameters and input file contents; output
    /// locations and timing are excluded.
    pub config_digest: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    pub version: String,
    pub started_unix: f64,
    pub wall_clock_seconds: f64,
    pub outputs: Vec<String>,
}

/// Collects digest input while a command runs.
pub struct ManifestBuilder {
    command: String,
    hasher: Sha256,
    seed: Option<u64>,
    started_unix: f64,
    start: Instant,
    outputs: Vec<PathBuf>,
}

impl ManifestBuilder {
    pub fn new(command: &str) -> Self {
        let mut hasher = Sha256::new();
        hasher.update(command.as_bytes());
        ManifestBuilder {
            command: command.into(),
            hasher,
            seed: None,
            started_unix: SystemTime::now()
                .duration_since(UNIX_EPOCH)
                .map_or(0.0, |d| d.as_secs_f64()),
            start: Instant::now(),
            outputs: Vec::new(),
        }
    }

    /// Adds a labelled field; the length prefix keeps field boundaries
    /// unambiguous.
    pub fn field(&mut self, label: &str, bytes: &[u8]) {
        for part in [label.as_bytes(), bytes] {
            self.hasher.update((part.len() as u64).to_le_bytes());
            self.hasher.update(part);
        }
    }

    pub fn param(&mut self, label: &str, value: &impl Serialize) {
        let json = serde_json::to_vec(value).expect("parameters serialize");
        self.field(label, &json);
    }

    pub fn input_file(&mut self, label: &str, path: &Path) -> Result<()> {
        let bytes = std::fs::read(path).map_err(|e| CliError::io(path, e))?;
        self.field(label, &bytes);
        Ok(())
    }

    pub fn seed(&mut self, seed: u64) {
        self.seed = Some(seed);
        self.param("seed", &seed);
    }

    pub fn output(&mut self, path: &Path) {
        self.outputs.push(path.to_path_buf());
    }

    pub fn finish(self) -> RunManifest {
        RunManifest {
            command: self.command,
            config_digest: hex::encode(self.hasher.finalize()),
            seed: self.seed,
            version: env!("CARGO_PKG_VERSION").into(),
            started_unix: self.started_unix,
            wall_clock_seconds: self.start.elapsed().as_secs_f64(),
            outputs: self.outputs.iter().map(|p| p.display().to_string()).collect(),
        }
    }
}

pub fn write_manifest(path: &Path, manifest: &RunManifest) -> Result<()> {
    let json = serde_json::to_string_pretty(manifest).expect("manifest serializes");
    write_file(path, &(json + "\n"))
}

/// `out.csv` -> `out.csv.manifest.json`.
pub fn sidecar(path: &Path) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(".manifest.json");
    PathBuf::from(s)
}
