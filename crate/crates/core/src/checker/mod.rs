//! Reachability, step-bounded reachability and expected-reward queries on
//! explicit models.
//!
//! Unbounded queries run graph precomputation first, so states with value
//! exactly 0 or 1 are assigned rather than iterated, then Gauss-Seidel
//! value iteration over the remaining states. Divergent expectations are
//! reported as `f64::INFINITY`.

mod numeric;
mod property;
mod qualitative;

use std::time::Instant;

use thiserror::Error;

use crate::induced::{build_induced_dtmc, InvalidActionRule};
use crate::lang::{ActionId, LangError, SymbolicModel};
use crate::model::{BuildLimits, ExplicitMdp, ModelError};
use crate::policy::Policy;

pub use numeric::{bounded_reachability, expected_reward, extract_choices, reachability, Iteration};
pub use property::{parse_property, Opt, Property, Quantifier, Target};
pub use qualitative::{precompute_qualitative, prob0, prob1, Predecessors, QualMode};

#[derive(Debug, Error)]
pub enum CheckError {
    #[error("property syntax error: {0}")]
    Syntax(String),
    #[error("unknown reward structure `{0}`")]
    UnknownReward(String),
    #[error("{0}")]
    KindMismatch(String),
    #[error("{0}")]
    Unsupported(String),
    #[error("value iteration did not converge after {iterations} iterations (residual {residual:e})")]
    NonConvergence { iterations: usize, residual: f64 },
    #[error(transparent)]
    Lang(#[from] LangError),
    #[error(transparent)]
    Model(#[from] ModelError),
}

#[derive(Clone, Copy, Debug, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct CheckOptions {
    /// Absolute residual threshold for one full sweep.
    pub epsilon: f64,
    pub max_iterations: usize,
    /// Keep the value of every state in the result.
    pub per_state: bool,
}

impl Default for CheckOptions {
    fn default() -> Self {
        CheckOptions { epsilon: 1e-9, max_iterations: 1_000_000, per_state: false }
    }
}

/// Answer to a query at the initial state, with model statistics.
#[derive(Clone, Debug, PartialEq, serde::Serialize)]
pub struct CheckResult {
    pub value: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub per_state: Option<Vec<f64>>,
    pub iterations: usize,
    pub residual: f64,
    pub states: usize,
    pub choices: usize,
    pub transitions: usize,
    pub build_seconds: f64,
    pub check_seconds: f64,
    pub fallback_count: usize,
}

fn require_chain(mdp: &ExplicitMdp, prop: &Property) -> Result<(), CheckError> {
    if prop.quantifier.opt().is_none() && !mdp.is_deterministic() {
        return Err(CheckError::KindMismatch(format!(
            "`{prop}` needs a model with one choice per state; use a min/max quantifier on an MDP"
        )));
    }
    Ok(())
}

fn rewards_for<'a>(mdp: &'a ExplicitMdp, prop: &Property) -> Result<Option<&'a [f64]>, CheckError> {
    match &prop.reward {
        None => Ok(None),
        Some(name) => mdp.reward(name).map(Some).ok_or_else(|| CheckError::UnknownReward(name.clone())),
    }
}

/// Evaluates `prop` on an explicit model built from `model`.
pub fn check(
    model: &SymbolicModel,
    mdp: &ExplicitMdp,
    prop: &Property,
    opts: &CheckOptions,
) -> Result<CheckResult, CheckError> {
    check_observed(model, mdp, prop, opts, &mut |_| {})
}

/// As [`check`], passing every value-iteration sweep to `observer`.
pub fn check_observed(
    model: &SymbolicModel,
    mdp: &ExplicitMdp,
    prop: &Property,
    opts: &CheckOptions,
    observer: &mut dyn FnMut(&[f64]),
) -> Result<CheckResult, CheckError> {
    prop.validate(model)?;
    require_chain(mdp, prop)?;
    let started = Instant::now();
    let target = prop.target_states(model, mdp)?;
    let opt = prop.quantifier.opt();
    let it = if prop.quantifier.is_probability() {
        match prop.bound {
            Some(k) => bounded_reachability(mdp, &target, k, opt),
            None => {
                let (zero, one) = precompute_qualitative(mdp, &target, QualMode::from(opt));
                reachability(mdp, &zero, &one, opt, opts, observer)?
            }
        }
    } else {
        let rewards = if prop.quantifier.is_time() { None } else { rewards_for(mdp, prop)? };
        expected_reward(mdp, &target, rewards, opt, opts, observer)?
    };
    Ok(CheckResult {
        value: it.values[0],
        per_state: opts.per_state.then(|| it.values.clone()),
        iterations: it.iterations,
        residual: it.residual,
        states: mdp.num_states(),
        choices: mdp.num_choices(),
        transitions: mdp.num_transitions(),
        build_seconds: 0.0,
        check_seconds: started.elapsed().as_secs_f64(),
        fallback_count: 0,
    })
}

/// Parses and checks a property string.
pub fn check_str(model: &SymbolicModel, mdp: &ExplicitMdp, text: &str, opts: &CheckOptions) -> Result<CheckResult, CheckError> {
    check(model, mdp, &parse_property(text)?, opts)
}

/// Optimal choice per state for a min/max query, ties broken towards the
/// lowest action index among choices within `epsilon` of the optimum.
pub fn extract_policy(
    model: &SymbolicModel,
    mdp: &ExplicitMdp,
    prop: &Property,
    opts: &CheckOptions,
) -> Result<Vec<ActionId>, CheckError> {
    let opt = prop
        .quantifier
        .opt()
        .ok_or_else(|| CheckError::Unsupported("policy extraction needs a min/max quantifier".into()))?;
    if prop.bound.is_some() {
        return Err(CheckError::Unsupported("policy extraction for step-bounded queries".into()));
    }
    let opts = CheckOptions { per_state: true, ..*opts };
    let result = check(model, mdp, prop, &opts)?;
    let values = result.per_state.expect("per-state values requested");
    let rewards = if prop.quantifier.is_probability() {
        None
    } else if prop.quantifier.is_time() {
        Some(vec![1.0; mdp.num_choices()])
    } else {
        rewards_for(mdp, prop)?.map(<[f64]>::to_vec)
    };
    Ok(extract_choices(mdp, &values, rewards.as_deref(), opt, opts.epsilon))
}

#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct PolicyCheckOptions {
    pub limits: BuildLimits,
    pub invalid_action: InvalidActionRule,
    pub check: CheckOptions,
}

/// Builds the chain induced by `policy` and checks `prop` on it.
pub fn check_policy(
    model: &SymbolicModel,
    policy: &dyn Policy,
    prop: &Property,
    opts: &PolicyCheckOptions,
) -> Result<CheckResult, CheckError> {
    if prop.quantifier.opt().is_some() {
        return Err(CheckError::KindMismatch(format!("`{prop}` ranges over schedulers; use P, T or R for a policy")));
    }
    prop.validate(model)?;
    let started = Instant::now();
    let dtmc = build_induced_dtmc(model, policy, opts.limits, opts.invalid_action)?;
    let build_seconds = started.elapsed().as_secs_f64();
    let mut result = check(model, &dtmc.mdp, prop, &opts.check)?;
    result.build_seconds = build_seconds;
    result.fallback_count = dtmc.fallback_count;
    Ok(result)
}
