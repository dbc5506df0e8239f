//! Run manifests: what ran, with which inputs, producing which artifacts.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::digest::file_sha256;
use crate::error::{CliResult, DataContext, Failure};

pub const FORMAT: &str = "rankdistill-manifest/v1";

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct Manifest {
    pub format: String,
    pub command: String,
    /// Command-line arguments after the program name.
    pub args: Vec<String>,
    pub toolkit_version: String,
    /// Effective training config as TOML, when the command trains.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub config: Option<String>,
    pub dataset_fingerprint: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub split_fingerprint: Option<String>,
    pub seeds: Vec<u64>,
    pub checkpoints: Vec<String>,
    pub reports: Vec<String>,
    /// Logs carry wall-clock times and are listed without hashes.
    pub logs: Vec<String>,
    /// sha256 of every deterministic artifact, keyed by path relative to the
    /// output directory.
    pub artifacts: BTreeMap<String, String>,
    pub timings_s: BTreeMap<String, f64>,
}

impl Manifest {
    pub fn new(command: &str, args: Vec<String>) -> Self {
        Manifest {
            format: FORMAT.into(),
            command: command.into(),
            args,
            toolkit_version: env!("CARGO_PKG_VERSION").into(),
            ..Manifest::default()
        }
    }

    /// Records a deterministic artifact under `out`.
    pub fn artifact(&mut self, out: &Path, path: &Path) -> CliResult<String> {
        let rel = relative(out, path);
        self.artifacts.insert(rel.clone(), file_sha256(path)?);
        Ok(rel)
    }

    pub fn checkpoint(&mut self, out: &Path, path: &Path) -> CliResult<()> {
        let rel = self.artifact(out, path)?;
        self.checkpoints.push(rel);
        Ok(())
    }

    pub fn report(&mut self, out: &Path, path: &Path) -> CliResult<()> {
        let rel = self.artifact(out, path)?;
        self.reports.push(rel);
        Ok(())
    }

    pub fn log(&mut self, out: &Path, path: &Path) {
        self.logs.push(relative(out, path));
    }

    pub fn write(&self, out: &Path) -> CliResult<PathBuf> {
        let path = out.join("manifest.json");
        let mut text = serde_json::to_string_pretty(self).expect("manifest serializes");
        text.push('\n');
        std::fs::write(&path, text).data_ctx(format!("writing {}", path.display()))?;
        Ok(path)
    }

    pub fn load(path: &Path) -> CliResult<Self> {
        let text = std::fs::read_to_string(path).data_ctx(format!("reading manifest {}", path.display()))?;
        let m: Manifest = serde_json::from_str(&text).data_ctx(format!("parsing manifest {}", path.display()))?;
        if m.format != FORMAT {
            return Err(Failure::data(format!("{}: unsupported manifest format `{}`", path.display(), m.format)));
        }
        Ok(m)
    }
}

fn relative(out: &Path, path: &Path) -> String {
    path.strip_prefix(out).unwrap_or(path).to_string_lossy().replace('\\', "/")
}
