//! Resolving models, policies and config files from command-line input.

use std::path::Path;

use serde::de::DeserializeOwned;
use serde::Serialize;
use serde_json::{json, Map, Value};

use rlcheck::benchmarks;
use rlcheck::lang::{parse_model, parse_overrides, SymbolicModel};
use rlcheck::model::BuildLimits;
use rlcheck::policy::{policy_from_json, AnyPolicy};
use rlcheck::runs::{RunManifest, Tracker};
use rlcheck::util::sha256_hex;

use crate::args::{LimitArgs, ModelArgs};
use crate::error::{CliError, CliResult};

pub const POLICY_ARTIFACT: &str = "policy.json";
pub const MODEL_ARTIFACT: &str = "model.prism";

/// Overlays the options given on the command line onto the config file.
pub fn merge_config<T: Serialize + DeserializeOwned>(args: &T, config: Option<&Path>) -> CliResult<T> {
    let Some(path) = config else {
        return Ok(serde_json::from_value(serde_json::to_value(args)?)?);
    };
    let text = read_text(path)?;
    let mut base: Map<String, Value> = match serde_json::from_str(&text)? {
        Value::Object(m) => m,
        _ => return Err(CliError::usage("config file must hold a JSON object")),
    };
    if let Value::Object(flags) = serde_json::to_value(args)? {
        base.extend(flags);
    }
    Ok(serde_json::from_value(Value::Object(base))?)
}

pub fn read_text(path: &Path) -> CliResult<String> {
    std::fs::read_to_string(path).map_err(|e| CliError::new(crate::error::IO, format!("{}: {e}", path.display())))
}

pub fn limits(args: &LimitArgs) -> BuildLimits {
    let d = BuildLimits::default();
    BuildLimits {
        max_states: args.max_states.unwrap_or(d.max_states),
        max_transitions: args.max_transitions.unwrap_or(d.max_transitions),
    }
}

/// A model together with what is needed to reload it.
pub struct LoadedModel {
    pub model: SymbolicModel,
    /// `{env | model, model_sha256, const}` for manifests.
    pub snapshot: Value,
    /// Source text when the model came from a file.
    pub file_source: Option<String>,
    /// Benchmark name, if any.
    pub env: Option<String>,
}

impl LoadedModel {
    /// Reward structure named in the benchmark catalogue, else the first
    /// declared one.
    pub fn default_reward(&self) -> Option<String> {
        if let Some(env) = &self.env {
            if let Ok(entry) = benchmarks::entry(env) {
                return Some(entry.reward.to_string());
            }
        }
        self.model.rewards.first().map(|r| r.name.clone())
    }
}

fn join_consts(a: Option<&str>, b: Option<&str>) -> Option<String> {
    match (a, b) {
        (Some(a), Some(b)) => Some(format!("{a},{b}")),
        (a, b) => a.or(b).map(str::to_string),
    }
}

pub fn load_model(args: &ModelArgs) -> CliResult<LoadedModel> {
    let consts = args.consts.clone().unwrap_or_default();
    let overrides = parse_overrides(&consts)?;
    if let Some(env) = &args.env {
        let model = benchmarks::load_benchmark(env, &overrides)?;
        let snapshot = json!({"env": env, "const": consts});
        return Ok(LoadedModel { model, snapshot, file_source: None, env: Some(env.clone()) });
    }
    if let Some(path) = &args.model {
        let text = read_text(path)?;
        let model = parse_model(&text, &overrides)?;
        let snapshot = json!({
            "model": path.display().to_string(),
            "model_sha256": sha256_hex(text.as_bytes()),
            "const": consts,
        });
        return Ok(LoadedModel { model, snapshot, file_source: Some(text), env: None });
    }
    Err(CliError::usage("one of --env or --model is required"))
}

/// The model a run was trained on; `extra` may replace it or add constants.
pub fn run_model(tracker: &Tracker, run: &RunManifest, extra: &ModelArgs) -> CliResult<LoadedModel> {
    if extra.env.is_some() || extra.model.is_some() {
        return load_model(extra);
    }
    let config = &run.config;
    let consts = join_consts(config.get("const").and_then(Value::as_str).filter(|s| !s.is_empty()), extra.consts.as_deref());
    if let Some(env) = config.get("env").and_then(Value::as_str) {
        return load_model(&ModelArgs { env: Some(env.to_string()), model: None, consts });
    }
    let path = tracker
        .artifact_path(run, MODEL_ARTIFACT)
        .ok_or_else(|| CliError::usage(format!("run {} records no model", run.run_id)))?;
    let mut loaded = load_model(&ModelArgs { env: None, model: Some(path), consts })?;
    loaded.snapshot["model"] = config.get("model").cloned().unwrap_or(Value::Null);
    Ok(loaded)
}

pub fn load_policy_text(text: &str, model: &SymbolicModel) -> CliResult<AnyPolicy> {
    Ok(policy_from_json(text, model)?)
}

pub fn run_policy_text(tracker: &Tracker, run: &RunManifest) -> CliResult<String> {
    let path = tracker
        .artifact_path(run, POLICY_ARTIFACT)
        .ok_or_else(|| CliError::usage(format!("run {} has no policy artifact", run.run_id)))?;
    read_text(&path)
}
