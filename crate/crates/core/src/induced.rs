//! Models induced by composing a model with a policy: a chain for a
//! deterministic policy, a sub-MDP for a permissive one. Only states
//! reachable under the policy are built.

use serde::{Deserialize, Serialize};

use crate::lang::{ActionId, SymbolicModel};
use crate::model::{explore, BuildLimits, ExplicitMdp, ModelError, Selector, StateValuation};
use crate::policy::Policy;
use crate::transforms::PermissiveSource;

/// What to do when a deterministic policy picks a disabled action.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum InvalidActionRule {
    #[default]
    Error,
    /// Take the lowest-index enabled action and count the state.
    FallbackFirst,
}

/// What to do when a permissive policy allows no enabled action.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EmptyIntersectionRule {
    /// Keep every enabled action and count the state.
    #[default]
    FullAct,
    Error,
}

pub struct InducedDtmc {
    pub mdp: ExplicitMdp,
    /// Action taken in each state; `ActionId::DEADLOCK` at deadlocks.
    pub chosen: Vec<ActionId>,
    pub fallback_count: usize,
}

pub struct InducedMdp {
    pub mdp: ExplicitMdp,
    pub fallback_count: usize,
}

fn state_text(model: &SymbolicModel, state: &StateValuation) -> String {
    state.display(model).to_string()
}

struct PolicySelector<'a> {
    model: &'a SymbolicModel,
    policy: &'a dyn Policy,
    rule: InvalidActionRule,
}

impl Selector for PolicySelector<'_> {
    fn select(&self, state: &StateValuation, enabled: &[ActionId]) -> Result<(Vec<ActionId>, bool), ModelError> {
        let a = self.policy.act(state);
        if enabled.contains(&a) {
            return Ok((vec![a], false));
        }
        match self.rule {
            InvalidActionRule::FallbackFirst => Ok((vec![enabled[0]], true)),
            InvalidActionRule::Error => {
                let action = if a.index() < self.model.actions.len() {
                    self.model.action_name(a).to_string()
                } else {
                    format!("#{}", a.0)
                };
                Err(ModelError::InvalidAction { action, state: state_text(self.model, state) })
            }
        }
    }
}

struct PermissiveSelector<'a> {
    model: &'a SymbolicModel,
    source: &'a dyn PermissiveSource,
    rule: EmptyIntersectionRule,
}

impl Selector for PermissiveSelector<'_> {
    fn select(&self, state: &StateValuation, enabled: &[ActionId]) -> Result<(Vec<ActionId>, bool), ModelError> {
        let allowed = self.source.actions(state);
        let keep: Vec<ActionId> = enabled.iter().copied().filter(|a| allowed.contains(a)).collect();
        if !keep.is_empty() {
            return Ok((keep, false));
        }
        match self.rule {
            EmptyIntersectionRule::FullAct => Ok((enabled.to_vec(), true)),
            EmptyIntersectionRule::Error => Err(ModelError::EmptyPermissive { state: state_text(self.model, state) }),
        }
    }
}

/// The chain `M[pi]`. The exploration evaluates the policy once per
/// reachable state.
pub fn build_induced_dtmc(
    model: &SymbolicModel,
    policy: &dyn Policy,
    limits: BuildLimits,
    rule: InvalidActionRule,
) -> Result<InducedDtmc, ModelError> {
    let selector = PolicySelector { model, policy, rule };
    let exploration = explore(model, limits, &selector)?;
    let mdp = exploration.mdp;
    let chosen = (0..mdp.num_states()).map(|s| mdp.choice_action[mdp.state_start[s]]).collect();
    Ok(InducedDtmc { mdp, chosen, fallback_count: exploration.fallback.count_ones() })
}

/// The sub-MDP `M[tau]` keeping, in each state, the enabled actions that
/// `tau` allows.
pub fn build_induced_mdp(
    model: &SymbolicModel,
    source: &dyn PermissiveSource,
    limits: BuildLimits,
    rule: EmptyIntersectionRule,
) -> Result<InducedMdp, ModelError> {
    let selector = PermissiveSelector { model, source, rule };
    let exploration = explore(model, limits, &selector)?;
    Ok(InducedMdp { fallback_count: exploration.fallback.count_ones(), mdp: exploration.mdp })
}

/// Sidecar record describing how an induced model was built.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct InducedProvenance {
    pub model_fingerprint: String,
    pub policy_fingerprint: String,
    /// Canonical text of the transform applied to the policy, if any.
    pub transform: Option<String>,
    /// `"dtmc"` or `"mdp"`.
    pub induced_kind: String,
    pub invalid_action: InvalidActionRule,
    pub empty_intersection: EmptyIntersectionRule,
    pub fallback_count: usize,
    pub states: usize,
    pub choices: usize,
    pub transitions: usize,
}

impl InducedProvenance {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("provenance serializes")
    }
}
