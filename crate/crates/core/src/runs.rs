//! File-based run tracker: `<root>/<run_id>/manifest.json` plus an
//! `artifacts/` directory per run. Manifests are written once; a rerun
//! with identical inputs must reproduce identical metrics and artifacts.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};
use serde_json::Value;
use thiserror::Error;

use crate::util::{format_machine, sha256_hex};

pub const CODE_VERSION: &str = env!("CARGO_PKG_VERSION");
const MANIFEST: &str = "manifest.json";
const ARTIFACTS: &str = "artifacts";

#[derive(Debug, Error)]
pub enum TrackerError {
    #[error("no run matches `{0}`")]
    NotFound(String),
    #[error("run prefix `{0}` is ambiguous")]
    Ambiguous(String),
    #[error("parent run `{0}` does not exist")]
    MissingParent(String),
    #[error("parent link from `{0}` would create a cycle")]
    Cycle(String),
    #[error("run `{run_id}` already exists with different {what}")]
    Conflict { run_id: String, what: String },
    #[error("corrupt manifest {path}: {message}")]
    Corrupt { path: String, message: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ArtifactRef {
    /// Relative to the run directory.
    pub path: String,
    pub sha256: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub run_id: String,
    #[serde(default)]
    pub parent_run_id: Option<String>,
    pub command: String,
    pub seed: u64,
    pub code_version: String,
    /// Full configuration snapshot; non-integer numbers stored as strings.
    pub config: Value,
    pub metrics: Value,
    pub artifacts: BTreeMap<String, ArtifactRef>,
    pub created_unix: u64,
}

/// Replaces every non-integer JSON number with its 17-digit string form.
pub fn canonical_floats(value: Value) -> Value {
    match value {
        Value::Number(n) if n.is_f64() => Value::String(format_machine(n.as_f64().unwrap_or(f64::NAN))),
        Value::Array(items) => Value::Array(items.into_iter().map(canonical_floats).collect()),
        Value::Object(map) => Value::Object(map.into_iter().map(|(k, v)| (k, canonical_floats(v))).collect()),
        other => other,
    }
}

/// A 17-digit string for a metric; non-finite values included.
pub fn metric(x: f64) -> Value {
    Value::String(format_machine(x))
}

/// Content hash of the inputs of a run. Timestamps do not contribute.
pub fn run_id(command: &str, config: &Value, seed: u64, parent: Option<&str>) -> String {
    let key = serde_json::json!({
        "command": command,
        "config": canonical_floats(config.clone()),
        "seed": seed,
        "code_version": CODE_VERSION,
        "parent": parent,
    });
    sha256_hex(key.to_string().as_bytes())[..16].to_string()
}

/// A run that has not been committed yet.
#[derive(Clone, Debug)]
pub struct PendingRun {
    pub run_id: String,
    pub parent_run_id: Option<String>,
    pub command: String,
    pub seed: u64,
    pub config: Value,
    pub metrics: Value,
    artifacts: Vec<(String, Vec<u8>)>,
}

impl PendingRun {
    pub fn add_artifact(&mut self, name: &str, bytes: Vec<u8>) {
        self.artifacts.push((name.to_string(), bytes));
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CommitOutcome {
    Created,
    /// A run with the same id, metrics and artifacts already existed.
    Unchanged,
}

#[derive(Clone, Debug)]
pub struct Tracker {
    root: PathBuf,
}

impl Tracker {
    pub fn new(root: impl Into<PathBuf>) -> Self {
        Tracker { root: root.into() }
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn run_dir(&self, id: &str) -> PathBuf {
        self.root.join(id)
    }

    pub fn artifact_path(&self, manifest: &RunManifest, name: &str) -> Option<PathBuf> {
        manifest.artifacts.get(name).map(|a| self.run_dir(&manifest.run_id).join(&a.path))
    }

    pub fn begin(&self, command: &str, config: Value, seed: u64, parent: Option<String>) -> PendingRun {
        let config = canonical_floats(config);
        PendingRun {
            run_id: run_id(command, &config, seed, parent.as_deref()),
            parent_run_id: parent,
            command: command.to_string(),
            seed,
            config,
            metrics: Value::Object(Default::default()),
            artifacts: Vec::new(),
        }
    }

    /// Writes the run, or confirms that an identical one exists.
    pub fn commit(&self, run: PendingRun) -> Result<(RunManifest, CommitOutcome), TrackerError> {
        let artifacts: BTreeMap<String, ArtifactRef> = run
            .artifacts
            .iter()
            .map(|(name, bytes)| {
                (name.clone(), ArtifactRef { path: format!("{ARTIFACTS}/{name}"), sha256: sha256_hex(bytes) })
            })
            .collect();
        let metrics = canonical_floats(run.metrics);
        let dir = self.run_dir(&run.run_id);
        if dir.join(MANIFEST).exists() {
            let existing = self.read_manifest(&run.run_id)?;
            if existing.metrics != metrics {
                return Err(TrackerError::Conflict { run_id: run.run_id, what: "metrics".into() });
            }
            if existing.artifacts != artifacts {
                return Err(TrackerError::Conflict { run_id: run.run_id, what: "artifacts".into() });
            }
            return Ok((existing, CommitOutcome::Unchanged));
        }
        if let Some(parent) = &run.parent_run_id {
            self.check_parent(&run.run_id, parent)?;
        }
        let manifest = RunManifest {
            run_id: run.run_id,
            parent_run_id: run.parent_run_id,
            command: run.command,
            seed: run.seed,
            code_version: CODE_VERSION.to_string(),
            config: run.config,
            metrics,
            artifacts,
            created_unix: SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0),
        };
        fs::create_dir_all(dir.join(ARTIFACTS))?;
        for (name, bytes) in &run.artifacts {
            fs::write(dir.join(ARTIFACTS).join(name), bytes)?;
        }
        let text = serde_json::to_string_pretty(&manifest).expect("manifests serialize") + "\n";
        let tmp = dir.join(format!("{MANIFEST}.tmp"));
        fs::write(&tmp, text)?;
        fs::rename(tmp, dir.join(MANIFEST))?;
        Ok((manifest, CommitOutcome::Created))
    }

    fn check_parent(&self, child: &str, parent: &str) -> Result<(), TrackerError> {
        let mut current = Some(parent.to_string());
        let mut steps = 0usize;
        while let Some(id) = current {
            if id == child {
                return Err(TrackerError::Cycle(child.to_string()));
            }
            if !self.run_dir(&id).join(MANIFEST).exists() {
                return Err(TrackerError::MissingParent(id));
            }
            steps += 1;
            if steps > 100_000 {
                return Err(TrackerError::Cycle(child.to_string()));
            }
            current = self.read_manifest(&id)?.parent_run_id;
        }
        Ok(())
    }

    fn read_manifest(&self, id: &str) -> Result<RunManifest, TrackerError> {
        let path = self.run_dir(id).join(MANIFEST);
        let text = fs::read_to_string(&path)?;
        serde_json::from_str(&text)
            .map_err(|e| TrackerError::Corrupt { path: path.display().to_string(), message: e.to_string() })
    }

    /// Loads a run by id or unique id prefix.
    pub fn load(&self, id: &str) -> Result<RunManifest, TrackerError> {
        if self.run_dir(id).join(MANIFEST).exists() {
            return self.read_manifest(id);
        }
        let matches: Vec<String> = self.ids()?.into_iter().filter(|r| r.starts_with(id)).collect();
        match matches.len() {
            0 => Err(TrackerError::NotFound(id.to_string())),
            1 => self.read_manifest(&matches[0]),
            _ => Err(TrackerError::Ambiguous(id.to_string())),
        }
    }

    fn ids(&self) -> Result<Vec<String>, TrackerError> {
        if !self.root.exists() {
            return Ok(Vec::new());
        }
        let mut ids = Vec::new();
        for entry in fs::read_dir(&self.root)? {
            let entry = entry?;
            if entry.path().join(MANIFEST).exists() {
                ids.push(entry.file_name().to_string_lossy().into_owned());
            }
        }
        ids.sort();
        Ok(ids)
    }

    /// All runs, oldest first; ties broken by id.
    pub fn list(&self) -> Result<Vec<RunManifest>, TrackerError> {
        let mut runs = self.ids()?.iter().map(|id| self.read_manifest(id)).collect::<Result<Vec<_>, _>>()?;
        runs.sort_by(|a, b| (a.created_unix, &a.run_id).cmp(&(b.created_unix, &b.run_id)));
        Ok(runs)
    }
}
