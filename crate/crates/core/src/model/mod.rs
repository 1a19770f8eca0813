//! Semantics of a [`SymbolicModel`]: explicit-state construction by
//! breadth-first exploration and a syntax-driven simulator.

mod explicit;
mod expand;
mod export;
mod simulator;

use std::fmt;
use std::ops::Deref;

use thiserror::Error;

use crate::lang::{EvalError, SymbolicModel};

pub use explicit::{build_mdp, explore, BuildLimits, Choice, Expansion, ExplicitMdp, Exploration, Selector};
pub use expand::{Distribution, Expander};
pub use export::{read_model, to_bytes, write_model, ModelHeader};
pub use simulator::{
    enabled_actions, reset, step, InvalidActionHandler, ScriptedUniforms, SimStep, Simulator,
    UniformSource,
};

/// One assignment of all model variables, in declaration order. Bools are
/// stored as 0/1. Ordering is lexicographic over the vector.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, serde::Serialize, serde::Deserialize)]
#[serde(transparent)]
pub struct StateValuation(pub Vec<i64>);

impl StateValuation {
    pub fn initial(model: &SymbolicModel) -> StateValuation {
        StateValuation(model.initial_values())
    }

    /// Copy with one slot replaced.
    pub fn with(&self, slot: usize, value: i64) -> StateValuation {
        let mut v = self.0.clone();
        v[slot] = value;
        StateValuation(v)
    }

    pub fn display<'a>(&'a self, model: &'a SymbolicModel) -> impl fmt::Display + 'a {
        DisplayState { state: self, model }
    }
}

impl Deref for StateValuation {
    type Target = [i64];

    fn deref(&self) -> &[i64] {
        &self.0
    }
}

struct DisplayState<'a> {
    state: &'a StateValuation,
    model: &'a SymbolicModel,
}

impl fmt::Display for DisplayState<'_> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("(")?;
        for (i, (var, value)) in self.model.variables.iter().zip(self.state.iter()).enumerate() {
            if i > 0 {
                f.write_str(", ")?;
            }
            match var.kind {
                crate::lang::VarKind::Bool => write!(f, "{}={}", var.name, *value != 0)?,
                _ => write!(f, "{}={}", var.name, value)?,
            }
        }
        f.write_str(")")
    }
}

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("state space limit exceeded: {states} states, {transitions} transitions explored")]
    LimitExceeded { states: usize, transitions: usize },
    #[error("probabilities of {command} sum to {sum} in state {state}")]
    ProbabilitySum { command: String, state: String, sum: f64 },
    #[error("invalid probability {prob} in {command} at state {state}")]
    InvalidProbability { command: String, state: String, prob: f64 },
    #[error("{command} assigns {value} to `{var}` outside its bounds in state {state}")]
    OutOfBounds { command: String, var: String, value: i64, state: String },
    #[error("action `{action}` has several enabled commands in module `{module}` at state {state}")]
    NondeterministicAction { action: String, module: String, state: String },
    #[error("dtmc model has several enabled actions in state {state}")]
    DtmcChoice { state: String },
    #[error("cannot evaluate {context} in state {state}: {source}")]
    Eval { context: String, state: String, source: EvalError },
    #[error("action `{action}` is not enabled in state {state}")]
    InvalidAction { action: String, state: String },
    #[error("permissive policy allows no enabled action in state {state}")]
    EmptyPermissive { state: String },
    #[error("model policy mismatch: {0}")]
    Mismatch(String),
    #[error("corrupt model file: {0}")]
    Corrupt(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}
