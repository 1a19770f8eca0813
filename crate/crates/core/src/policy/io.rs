//! Policy files: a JSON envelope
//! `{format_version, kind, model_fingerprint, payload}`.
//!
//! Tabular payload: `{variables, actions, default, entries}` with `entries`
//! a sorted array of `[state_vector, action_name]`. MLP payload:
//! `{variables, actions, layer_sizes, weights, biases, input_lo, input_hi}`
//! with one row-major weight array per layer. Doubles are written in
//! shortest round-trip decimal form, so weights reload bit-identically.

use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::lang::{ActionId, SymbolicModel};
use crate::model::StateValuation;

use super::{model_fingerprint, AnyPolicy, Layer, Mlp, MlpPolicy, PolicyError, TabularPolicy};

pub const FORMAT_VERSION: u64 = 1;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PolicyFile {
    pub format_version: u64,
    pub kind: String,
    pub model_fingerprint: String,
    pub payload: Value,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct TabularPayload {
    variables: Vec<String>,
    actions: Vec<String>,
    default: String,
    entries: Vec<(Vec<i64>, String)>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct MlpPayload {
    variables: Vec<String>,
    actions: Vec<String>,
    layer_sizes: Vec<usize>,
    weights: Vec<Vec<f64>>,
    biases: Vec<Vec<f64>>,
    input_lo: Vec<f64>,
    input_hi: Vec<f64>,
}

fn action_name(model: &SymbolicModel, a: ActionId) -> String {
    if a.index() < model.actions.len() || a == ActionId::DEADLOCK {
        model.action_name(a).to_string()
    } else {
        format!("#{}", a.0)
    }
}

fn corrupt(e: impl std::fmt::Display) -> PolicyError {
    PolicyError::Corrupt(e.to_string())
}

/// Serializes a policy trained on `model`.
pub fn policy_to_json(policy: &AnyPolicy, model: &SymbolicModel) -> String {
    let variables: Vec<String> = model.variables.iter().map(|v| v.name.clone()).collect();
    let payload = match policy {
        AnyPolicy::Tabular(p) => serde_json::to_value(TabularPayload {
            variables,
            actions: model.actions.clone(),
            default: action_name(model, p.default),
            entries: p.table.iter().map(|(s, a)| (s.0.clone(), action_name(model, *a))).collect(),
        }),
        AnyPolicy::Mlp(p) => serde_json::to_value(MlpPayload {
            variables,
            actions: model.actions.clone(),
            layer_sizes: p.net.sizes(),
            weights: p.net.layers.iter().map(|l| l.weights.clone()).collect(),
            biases: p.net.layers.iter().map(|l| l.biases.clone()).collect(),
            input_lo: p.input_lo.clone(),
            input_hi: p.input_hi.clone(),
        }),
    }
    .expect("payloads serialize");
    let file = PolicyFile {
        format_version: FORMAT_VERSION,
        kind: policy.kind().to_string(),
        model_fingerprint: model_fingerprint(model),
        payload,
    };
    serde_json::to_string_pretty(&file).expect("policy files serialize")
}

fn check_fingerprint(file: &PolicyFile, model: &SymbolicModel) -> Result<(), PolicyError> {
    let found = model_fingerprint(model);
    if file.model_fingerprint != found {
        return Err(PolicyError::FingerprintMismatch { expected: file.model_fingerprint.clone(), found });
    }
    Ok(())
}

fn check_dimension(expected: usize, model: &SymbolicModel) -> Result<(), PolicyError> {
    if expected != model.variables.len() {
        return Err(PolicyError::DimensionMismatch { expected, found: model.variables.len() });
    }
    Ok(())
}

fn resolve_action(model: &SymbolicModel, name: &str) -> Result<ActionId, PolicyError> {
    model.action_id(name).ok_or_else(|| PolicyError::UnknownAction(name.to_string()))
}

/// Parses a policy file and checks it against `model`.
pub fn policy_from_json(text: &str, model: &SymbolicModel) -> Result<AnyPolicy, PolicyError> {
    let file: PolicyFile = serde_json::from_str(text).map_err(corrupt)?;
    if file.format_version != FORMAT_VERSION {
        return Err(PolicyError::Version(file.format_version));
    }
    match file.kind.as_str() {
        "tabular" => {
            let payload: TabularPayload = serde_json::from_value(file.payload.clone()).map_err(corrupt)?;
            check_dimension(payload.variables.len(), model)?;
            check_fingerprint(&file, model)?;
            let mut policy = TabularPolicy::new();
            policy.default = resolve_action(model, &payload.default)?;
            for (state, action) in payload.entries {
                if state.len() != model.variables.len() {
                    return Err(PolicyError::DimensionMismatch { expected: state.len(), found: model.variables.len() });
                }
                policy.insert(StateValuation(state), resolve_action(model, &action)?);
            }
            Ok(AnyPolicy::Tabular(policy))
        }
        "mlp" => {
            let p: MlpPayload = serde_json::from_value(file.payload.clone()).map_err(corrupt)?;
            let n_in = *p.layer_sizes.first().ok_or_else(|| corrupt("empty layer_sizes"))?;
            check_dimension(n_in, model)?;
            check_fingerprint(&file, model)?;
            let layers = p.layer_sizes.len().checked_sub(1).filter(|&l| l > 0).ok_or_else(|| corrupt("too few layers"))?;
            if p.weights.len() != layers || p.biases.len() != layers {
                return Err(corrupt("layer count differs from layer_sizes"));
            }
            if p.input_lo.len() != n_in || p.input_hi.len() != n_in {
                return Err(corrupt("input scaling has wrong length"));
            }
            if *p.layer_sizes.last().unwrap() != model.actions.len() {
                return Err(corrupt("output size differs from the action alphabet"));
            }
            let mut net = Vec::with_capacity(layers);
            for (i, (w, b)) in p.weights.into_iter().zip(p.biases).enumerate() {
                let (n_in, n_out) = (p.layer_sizes[i], p.layer_sizes[i + 1]);
                if w.len() != n_in * n_out || b.len() != n_out {
                    return Err(corrupt(format!("layer {i} has wrong shape")));
                }
                net.push(Layer { n_in, n_out, weights: w, biases: b });
            }
            let net = Mlp { layers: net };
            if !net.is_finite() {
                return Err(corrupt("non-finite weights"));
            }
            Ok(AnyPolicy::Mlp(MlpPolicy { net, input_lo: p.input_lo, input_hi: p.input_hi }))
        }
        other => Err(corrupt(format!("unknown policy kind `{other}`"))),
    }
}

pub fn save_policy(path: impl AsRef<Path>, policy: &AnyPolicy, model: &SymbolicModel) -> Result<(), PolicyError> {
    std::fs::write(path, policy_to_json(policy, model) + "\n")?;
    Ok(())
}

pub fn load_policy(path: impl AsRef<Path>, model: &SymbolicModel) -> Result<AnyPolicy, PolicyError> {
    let text = std::fs::read_to_string(path)?;
    policy_from_json(&text, model)
}
