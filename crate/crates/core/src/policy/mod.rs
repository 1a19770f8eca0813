//! Deterministic policies (lookup tables and small feedforward networks)
//! and the agents that train them against the simulator.

mod io;
mod mlp;
mod train;

use std::collections::BTreeMap;
use std::sync::Arc;

use thiserror::Error;

use crate::lang::{ActionId, SymbolicModel};
use crate::model::{ModelError, StateValuation};
use crate::util::sha256_hex;

pub use io::{load_policy, policy_from_json, policy_to_json, save_policy, PolicyFile, FORMAT_VERSION};
pub use mlp::{mlp_backprop_check, mlp_gradient_error, Gradients, Layer, Mlp, MlpPolicy};
pub use train::{
    deep_q_train, q_learning_train, DqnConfig, QLearnConfig, ReplayBuffer, TrainingMetrics, Transition,
};

#[derive(Debug, Error)]
pub enum PolicyError {
    #[error("invalid training configuration: {0}")]
    Config(String),
    #[error("non-finite {what} at episode {episode}, step {step}")]
    NonFinite { what: String, episode: usize, step: usize },
    #[error("policy expects {expected} state variables, model has {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("policy was trained on a different model (fingerprint {expected}, model {found})")]
    FingerprintMismatch { expected: String, found: String },
    #[error("unsupported policy format version {0}")]
    Version(u64),
    #[error("corrupt policy file: {0}")]
    Corrupt(String),
    #[error("unknown action `{0}`")]
    UnknownAction(String),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// A deterministic map from valuations to actions. Whether the action is
/// enabled is the caller's concern.
pub trait Policy: Send + Sync {
    fn act(&self, state: &StateValuation) -> ActionId;
}

impl<P: Policy + ?Sized> Policy for &P {
    fn act(&self, state: &StateValuation) -> ActionId {
        (**self).act(state)
    }
}

impl<P: Policy + ?Sized> Policy for Box<P> {
    fn act(&self, state: &StateValuation) -> ActionId {
        (**self).act(state)
    }
}

impl<P: Policy + ?Sized> Policy for Arc<P> {
    fn act(&self, state: &StateValuation) -> ActionId {
        (**self).act(state)
    }
}

/// Any closure can serve as a policy.
pub struct FnPolicy<F>(pub F);

impl<F: Fn(&StateValuation) -> ActionId + Send + Sync> Policy for FnPolicy<F> {
    fn act(&self, state: &StateValuation) -> ActionId {
        (self.0)(state)
    }
}

/// Identifies a model by its variable names and action alphabet. Bounds and
/// constants are left out so a policy can be checked against variants of
/// the same model (e.g. another tank size).
pub fn model_fingerprint(model: &SymbolicModel) -> String {
    let mut text = String::from("vars");
    for v in &model.variables {
        text.push('\0');
        text.push_str(&v.name);
    }
    text.push_str("\0actions");
    for a in &model.actions {
        text.push('\0');
        text.push_str(a);
    }
    sha256_hex(text.as_bytes())
}

/// Lookup table; unseen states get `default` (the first action of the
/// alphabet unless set otherwise).
#[derive(Clone, Debug, PartialEq, Eq, Default)]
pub struct TabularPolicy {
    pub table: BTreeMap<StateValuation, ActionId>,
    pub default: ActionId,
}

impl TabularPolicy {
    pub fn new() -> Self {
        TabularPolicy::default()
    }

    /// Table from `(valuation, action)` pairs.
    pub fn from_pairs(pairs: impl IntoIterator<Item = (StateValuation, ActionId)>) -> Self {
        TabularPolicy { table: pairs.into_iter().collect(), default: ActionId(0) }
    }

    pub fn insert(&mut self, state: StateValuation, action: ActionId) {
        self.table.insert(state, action);
    }

    pub fn len(&self) -> usize {
        self.table.len()
    }

    pub fn is_empty(&self) -> bool {
        self.table.is_empty()
    }
}

impl Policy for TabularPolicy {
    fn act(&self, state: &StateValuation) -> ActionId {
        self.table.get(state).copied().unwrap_or(self.default)
    }
}

/// A policy loaded from disk.
#[derive(Clone, Debug, PartialEq)]
pub enum AnyPolicy {
    Tabular(TabularPolicy),
    Mlp(MlpPolicy),
}

impl AnyPolicy {
    pub fn kind(&self) -> &'static str {
        match self {
            AnyPolicy::Tabular(_) => "tabular",
            AnyPolicy::Mlp(_) => "mlp",
        }
    }
}

impl Policy for AnyPolicy {
    fn act(&self, state: &StateValuation) -> ActionId {
        match self {
            AnyPolicy::Tabular(p) => p.act(state),
            AnyPolicy::Mlp(p) => p.act(state),
        }
    }
}

/// Index of the largest value; ties go to the lowest index.
pub fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, v) in values.iter().enumerate().skip(1) {
        if *v > values[best] {
            best = i;
        }
    }
    best
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tabular_lookup_and_default() {
        let p = TabularPolicy::from_pairs([(StateValuation(vec![0]), ActionId(1))]);
        assert_eq!(p.act(&StateValuation(vec![0])), ActionId(1));
        assert_eq!(p.act(&StateValuation(vec![3])), ActionId(0));
    }

    #[test]
    fn argmax_prefers_lowest_index() {
        assert_eq!(argmax(&[0.0, 0.0, 0.0]), 0);
        assert_eq!(argmax(&[1.0, 2.0, 2.0]), 1);
    }
}
