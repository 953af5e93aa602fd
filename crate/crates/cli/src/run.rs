//! Append-only run directories and their manifests.

use std::fs::{self, OpenOptions};
use std::io::{ErrorKind, Write};
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use dualmink_core::{GroupCertificate, IntegrabilityExponent, OrthogonalGroup, SphericalGrid};
use serde::{Deserialize, Serialize};

use crate::error::{CliError, CliResult};

pub const MANIFEST: &str = "manifest.json";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupRecord {
    pub label: String,
    pub order: usize,
    pub certificate: GroupCertificate,
}

impl GroupRecord {
    pub fn of(group: &OrthogonalGroup) -> Self {
        Self {
            label: group.label().to_string(),
            order: group.order(),
            certificate: dualmink_core::certify(group),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExponentRecord {
    pub n: usize,
    pub p: f64,
    pub q: f64,
    /// `None` when `q* = ∞`.
    pub q_star: Option<f64>,
    pub s: Option<IntegrabilityExponent>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridRecord {
    pub role: String,
    pub scheme: String,
    pub nodes: usize,
    pub seed: u64,
    /// Label of the group the grid was made stable under.
    pub symmetrized_by: Option<String>,
}

impl GridRecord {
    pub fn of(role: impl Into<String>, grid: &SphericalGrid) -> Self {
        Self {
            role: role.into(),
            scheme: grid.scheme().name().to_string(),
            nodes: grid.len(),
            seed: grid.seed(),
            symmetrized_by: grid.symmetry().map(|(label, _)| label.to_string()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub tool: String,
    pub version: String,
    pub command: String,
    /// Fully resolved input: re-running it reproduces the run.
    pub config: serde_json::Value,
    pub group: Option<GroupRecord>,
    pub exponent: Option<ExponentRecord>,
    pub grids: Vec<GridRecord>,
    pub outcome: serde_json::Value,
    pub exit_code: u8,
    /// Files written next to the manifest, in write order.
    pub files: Vec<String>,
    pub started_unix: f64,
    pub finished_unix: f64,
}

impl RunManifest {
    pub fn new(command: &str, config: serde_json::Value) -> Self {
        Self {
            tool: env!("CARGO_PKG_NAME").to_string(),
            version: env!("CARGO_PKG_VERSION").to_string(),
            command: command.to_string(),
            config,
            group: None,
            exponent: None,
            grids: Vec::new(),
            outcome: serde_json::Value::Null,
            exit_code: 0,
            files: Vec::new(),
            started_unix: unix_now(),
            finished_unix: 0.0,
        }
    }

    pub fn read(path: &Path) -> CliResult<Self> {
        let text = fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        serde_json::from_str(&text)
            .map_err(|e| CliError::Schema(format!("{}: {e}", path.display())))
    }
}

fn unix_now() -> f64 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_secs_f64())
        .unwrap_or(0.0)
}

/// A fresh directory `<root>/<command>-NNNN`. Existing directories are never
/// reused and files are never overwritten.
#[derive(Debug)]
pub struct RunDir {
    path: PathBuf,
    files: Vec<String>,
}

impl RunDir {
    pub fn create(root: &Path, command: &str) -> CliResult<Self> {
        fs::create_dir_all(root).map_err(|e| CliError::io(root, e))?;
        for index in 1.. {
            let path = root.join(format!("{command}-{index:04}"));
            match fs::create_dir(&path) {
                Ok(()) => {
                    return Ok(Self {
                        path,
                        files: Vec::new(),
                    })
                }
                Err(e) if e.kind() == ErrorKind::AlreadyExists => continue,
                Err(e) => return Err(CliError::io(path, e)),
            }
        }
        unreachable!("run index space exhausted")
    }

    pub fn path(&self) -> &Path {
        &self.path
    }

    pub fn write(&mut self, name: &str, contents: &str) -> CliResult<()> {
        let path = self.path.join(name);
        let mut file = OpenOptions::new()
            .write(true)
            .create_new(true)
            .open(&path)
            .map_err(|e| CliError::io(&path, e))?;
        file.write_all(contents.as_bytes())
            .map_err(|e| CliError::io(&path, e))?;
        self.files.push(name.to_string());
        Ok(())
    }

    pub fn write_toml<T: Serialize>(&mut self, name: &str, value: &T) -> CliResult<()> {
        let text = toml::to_string(value)
            .map_err(|e| CliError::Schema(format!("cannot serialise {name}: {e}")))?;
        self.write(name, &text)
    }

    pub fn write_csv<T: Serialize>(&mut self, name: &str, rows: &[T]) -> CliResult<()> {
        let path = self.path.join(name);
        let mut writer = csv::Writer::from_writer(Vec::new());
        for row in rows {
            writer
                .serialize(row)
                .map_err(|e| CliError::io(&path, std::io::Error::other(e)))?;
        }
        let bytes = writer
            .into_inner()
            .map_err(|e| CliError::io(&path, std::io::Error::other(e.to_string())))?;
        self.write(name, &String::from_utf8_lossy(&bytes))
    }

    /// Writes the manifest last, listing every file written before it.
    pub fn finish(mut self, mut manifest: RunManifest) -> CliResult<PathBuf> {
        manifest.files = self.files.clone();
        manifest.finished_unix = unix_now();
        let text = serde_json::to_string_pretty(&manifest)
            .map_err(|e| CliError::Schema(format!("cannot serialise manifest: {e}")))?;
        self.write(MANIFEST, &text)?;
        Ok(self.path)
    }
}
