use std::collections::HashMap;
use std::ops::Range;

use bitvec::vec::BitVec;
use rayon::prelude::*;

use crate::lang::{ActionId, SymbolicModel};

use super::expand::Expander;
use super::{Distribution, ModelError, StateValuation};

/// Exploration limits. Exceeding either aborts the build.
#[derive(Clone, Copy, Debug, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub struct BuildLimits {
    pub max_states: usize,
    pub max_transitions: usize,
}

impl Default for BuildLimits {
    fn default() -> Self {
        BuildLimits { max_states: 5_000_000, max_transitions: 500_000_000 }
    }
}

/// Explicit transition system in compressed sparse row form. State 0 is the
/// initial state; states are numbered in breadth-first discovery order.
#[derive(Clone, Debug, PartialEq)]
pub struct ExplicitMdp {
    pub variables: Vec<String>,
    /// Action alphabet of the source model; choices refer to it by index.
    pub actions: Vec<String>,
    pub states: Vec<StateValuation>,
    /// Choices of state `s` are `state_start[s]..state_start[s + 1]`.
    pub state_start: Vec<usize>,
    pub choice_action: Vec<ActionId>,
    /// Transitions of choice `c` are `choice_start[c]..choice_start[c + 1]`.
    pub choice_start: Vec<usize>,
    pub succ: Vec<u32>,
    pub prob: Vec<f64>,
    /// Per reward structure, one value per choice.
    pub rewards: Vec<(String, Vec<f64>)>,
    pub labels: Vec<(String, BitVec)>,
    pub deadlocks: BitVec,
}

/// Borrowed view of one choice.
#[derive(Clone, Copy, Debug)]
pub struct Choice<'a> {
    pub index: usize,
    pub action: ActionId,
    pub succ: &'a [u32],
    pub prob: &'a [f64],
}

impl ExplicitMdp {
    pub fn num_states(&self) -> usize {
        self.states.len()
    }

    pub fn num_choices(&self) -> usize {
        self.choice_action.len()
    }

    pub fn num_transitions(&self) -> usize {
        self.succ.len()
    }

    pub fn choice_range(&self, s: usize) -> Range<usize> {
        self.state_start[s]..self.state_start[s + 1]
    }

    pub fn choice(&self, c: usize) -> Choice<'_> {
        let r = self.choice_start[c]..self.choice_start[c + 1];
        Choice { index: c, action: self.choice_action[c], succ: &self.succ[r.clone()], prob: &self.prob[r] }
    }

    pub fn choices(&self, s: usize) -> impl Iterator<Item = Choice<'_>> + '_ {
        self.choice_range(s).map(move |c| self.choice(c))
    }

    /// The choice of `s` labeled with `action`, if present.
    pub fn choice_for(&self, s: usize, action: ActionId) -> Option<usize> {
        self.choice_range(s).find(|&c| self.choice_action[c] == action)
    }

    pub fn action_name(&self, a: ActionId) -> &str {
        if a == ActionId::DEADLOCK {
            ActionId::DEADLOCK_NAME
        } else {
            &self.actions[a.index()]
        }
    }

    pub fn label(&self, name: &str) -> Option<&BitVec> {
        self.labels.iter().find(|(n, _)| n == name).map(|(_, b)| b)
    }

    pub fn reward(&self, name: &str) -> Option<&[f64]> {
        self.rewards.iter().find(|(n, _)| n == name).map(|(_, r)| r.as_slice())
    }

    /// True when every state has exactly one choice.
    pub fn is_deterministic(&self) -> bool {
        self.state_start.windows(2).all(|w| w[1] - w[0] == 1)
    }

    pub fn state_index(&self, v: &StateValuation) -> Option<usize> {
        self.states.iter().position(|s| s == v)
    }

    /// Evaluates a boolean expression on every state.
    pub fn states_satisfying(&self, e: &crate::lang::Expr) -> Result<BitVec, crate::lang::EvalError> {
        let mut out = BitVec::with_capacity(self.num_states());
        for s in &self.states {
            out.push(e.eval_bool(s)?);
        }
        Ok(out)
    }
}

/// Decides which enabled actions of a state are expanded.
pub trait Selector: Sync {
    /// Returns the actions to keep, sorted and drawn from `enabled`
    /// (which is non-empty), plus whether a fallback rule engaged.
    fn select(&self, state: &StateValuation, enabled: &[ActionId]) -> Result<(Vec<ActionId>, bool), ModelError>;
}

struct AllActions;

impl Selector for AllActions {
    fn select(&self, _: &StateValuation, enabled: &[ActionId]) -> Result<(Vec<ActionId>, bool), ModelError> {
        Ok((enabled.to_vec(), false))
    }
}

/// Expansion of one state, computed independently of ID assignment.
pub struct Expansion {
    pub choices: Vec<(ActionId, Distribution, Vec<f64>)>,
    pub labels: Vec<bool>,
    pub deadlock: bool,
    pub fallback: bool,
}

/// Result of an exploration: the explicit model and per-state fallback flags.
pub struct Exploration {
    pub mdp: ExplicitMdp,
    pub fallback: BitVec,
}

const BATCH: usize = 4096;

fn expand_state(
    expander: &Expander<'_>,
    selector: &dyn Selector,
    state: &StateValuation,
) -> Result<Expansion, ModelError> {
    let model = expander.model();
    let labels = model
        .labels
        .iter()
        .map(|(name, e)| {
            e.eval_bool(state).map_err(|source| ModelError::Eval {
                context: format!("label \"{name}\""),
                state: state.display(model).to_string(),
                source,
            })
        })
        .collect::<Result<Vec<_>, _>>()?;
    let enabled = expander.enabled_actions(state)?;
    if enabled.is_empty() {
        let zeros = vec![0.0; model.rewards.len()];
        return Ok(Expansion {
            choices: vec![(ActionId::DEADLOCK, vec![(state.clone(), 1.0)], zeros)],
            labels,
            deadlock: true,
            fallback: false,
        });
    }
    let (keep, fallback) = selector.select(state, &enabled)?;
    let mut choices = Vec::with_capacity(keep.len());
    for a in keep {
        let dist = expander.distribution(state, a)?.ok_or_else(|| ModelError::InvalidAction {
            action: model.action_name(a).to_string(),
            state: state.display(model).to_string(),
        })?;
        let silent = model.is_silent(a);
        let rewards = model
            .rewards
            .iter()
            .map(|r| {
                r.value(state, a, silent).map_err(|source| ModelError::Eval {
                    context: format!("reward structure \"{}\"", r.name),
                    state: state.display(model).to_string(),
                    source,
                })
            })
            .collect::<Result<Vec<_>, _>>()?;
        choices.push((a, dist, rewards));
    }
    Ok(Expansion { choices, labels, deadlock: false, fallback })
}

/// Breadth-first exploration from the initial state, expanding only the
/// actions chosen by `selector`. Frontier batches are expanded in parallel;
/// IDs are committed sequentially so numbering is deterministic.
pub fn explore(
    model: &SymbolicModel,
    limits: BuildLimits,
    selector: &dyn Selector,
) -> Result<Exploration, ModelError> {
    let expander = Expander::new(model);
    let init = StateValuation::initial(model);
    let mut index: HashMap<StateValuation, u32> = HashMap::new();
    index.insert(init.clone(), 0);
    let mut states = vec![init];

    let mut state_start = vec![0usize];
    let mut choice_action = Vec::new();
    let mut choice_start = vec![0usize];
    let mut succ: Vec<u32> = Vec::new();
    let mut prob = Vec::new();
    let mut rewards: Vec<Vec<f64>> = vec![Vec::new(); model.rewards.len()];
    let mut labels: Vec<BitVec> = vec![BitVec::new(); model.labels.len()];
    let mut deadlocks = BitVec::new();
    let mut fallback = BitVec::new();

    let mut next = 0;
    while next < states.len() {
        let end = states.len().min(next + BATCH);
        let batch: Vec<Result<Expansion, ModelError>> =
            states[next..end].par_iter().map(|s| expand_state(&expander, selector, s)).collect();
        for expansion in batch {
            let expansion = expansion?;
            for (bits, value) in labels.iter_mut().zip(&expansion.labels) {
                bits.push(*value);
            }
            deadlocks.push(expansion.deadlock);
            fallback.push(expansion.fallback);
            for (action, dist, rew) in expansion.choices {
                for (target, p) in dist {
                    let id = match index.get(&target) {
                        Some(&id) => id,
                        None => {
                            let id = states.len();
                            if id >= limits.max_states || id >= u32::MAX as usize {
                                return Err(ModelError::LimitExceeded {
                                    states: states.len(),
                                    transitions: succ.len(),
                                });
                            }
                            index.insert(target.clone(), id as u32);
                            states.push(target);
                            id as u32
                        }
                    };
                    if succ.len() >= limits.max_transitions {
                        return Err(ModelError::LimitExceeded { states: states.len(), transitions: succ.len() });
                    }
                    succ.push(id);
                    prob.push(p);
                }
                choice_action.push(action);
                choice_start.push(succ.len());
                for (col, r) in rewards.iter_mut().zip(rew) {
                    col.push(r);
                }
            }
            state_start.push(choice_action.len());
        }
        next = end;
    }

    let mdp = ExplicitMdp {
        variables: model.variables.iter().map(|v| v.name.clone()).collect(),
        actions: model.actions.clone(),
        states,
        state_start,
        choice_action,
        choice_start,
        succ,
        prob,
        rewards: model.rewards.iter().map(|r| r.name.clone()).zip(rewards).collect(),
        labels: model.labels.iter().map(|(n, _)| n.clone()).zip(labels).collect(),
        deadlocks,
    };
    Ok(Exploration { mdp, fallback })
}

/// Builds the full reachable MDP of a model.
pub fn build_mdp(model: &SymbolicModel, limits: BuildLimits) -> Result<ExplicitMdp, ModelError> {
    explore(model, limits, &AllActions).map(|e| e.mdp)
}
