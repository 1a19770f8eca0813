use crate::lang::{ActionId, Command, ModelKind, SymbolicModel, VarKind};

use super::{ModelError, StateValuation};

/// Successor distribution of one (state, action) pair, in first-occurrence
/// order of the synchronized update enumeration.
pub type Distribution = Vec<(StateValuation, f64)>;

pub(crate) const PROB_TOLERANCE: f64 = 1e-9;

/// Computes enabled actions and successor distributions from the
/// symbolic model, with synchronization precompiled per action.
pub struct Expander<'m> {
    model: &'m SymbolicModel,
    /// Per action: participating modules and their commands with that action.
    plans: Vec<Vec<(usize, Vec<usize>)>>,
}

impl<'m> Expander<'m> {
    pub fn new(model: &'m SymbolicModel) -> Self {
        let mut plans: Vec<Vec<(usize, Vec<usize>)>> = vec![Vec::new(); model.actions.len()];
        for (mi, module) in model.modules.iter().enumerate() {
            for (ci, cmd) in module.commands.iter().enumerate() {
                let plan = &mut plans[cmd.action.index()];
                match plan.last_mut() {
                    Some((m, cmds)) if *m == mi => cmds.push(ci),
                    _ => plan.push((mi, vec![ci])),
                }
            }
        }
        Expander { model, plans }
    }

    pub fn model(&self) -> &'m SymbolicModel {
        self.model
    }

    fn guard(&self, module: usize, cmd: usize, state: &StateValuation) -> Result<bool, ModelError> {
        let c = &self.model.modules[module].commands[cmd];
        c.guard.eval_bool(state).map_err(|source| ModelError::Eval {
            context: format!("guard of {}", describe_command(self.model, module, cmd)),
            state: state.display(self.model).to_string(),
            source,
        })
    }

    /// The single enabled command of `module` for `action`, if any.
    fn enabled_command(
        &self,
        action: ActionId,
        module: usize,
        cmds: &[usize],
        state: &StateValuation,
    ) -> Result<Option<usize>, ModelError> {
        let mut found = None;
        for &ci in cmds {
            if self.guard(module, ci, state)? {
                if found.is_some() {
                    return Err(ModelError::NondeterministicAction {
                        action: self.model.action_name(action).to_string(),
                        module: self.model.modules[module].name.clone(),
                        state: state.display(self.model).to_string(),
                    });
                }
                found = Some(ci);
            }
        }
        Ok(found)
    }

    /// Actions whose guards hold in every participating module, sorted.
    pub fn enabled_actions(&self, state: &StateValuation) -> Result<Vec<ActionId>, ModelError> {
        let mut out = Vec::new();
        'actions: for (a, plan) in self.plans.iter().enumerate() {
            let action = ActionId(a as u16);
            for (module, cmds) in plan {
                if self.enabled_command(action, *module, cmds, state)?.is_none() {
                    continue 'actions;
                }
            }
            out.push(action);
        }
        if self.model.kind == ModelKind::Dtmc && out.len() > 1 {
            return Err(ModelError::DtmcChoice { state: state.display(self.model).to_string() });
        }
        Ok(out)
    }

    /// Successor distribution of `action` in `state`; `None` if disabled.
    pub fn distribution(
        &self,
        state: &StateValuation,
        action: ActionId,
    ) -> Result<Option<Distribution>, ModelError> {
        let Some(plan) = self.plans.get(action.index()) else {
            return Ok(None);
        };
        let mut combos: Distribution = vec![(state.clone(), 1.0)];
        for (module, cmds) in plan {
            let Some(ci) = self.enabled_command(action, *module, cmds, state)? else {
                return Ok(None);
            };
            let outcomes = command_outcomes(self.model, *module, ci, state)?;
            let mut next = Vec::with_capacity(combos.len() * outcomes.len());
            for (partial, p) in &combos {
                for (ui, q) in &outcomes {
                    let succ = apply_update(self.model, *module, ci, *ui, state, partial)?;
                    next.push((succ, p * q));
                }
            }
            combos = next;
        }
        Ok(Some(merge_duplicates(combos)))
    }

    /// All enabled (action, distribution) pairs of a state.
    pub fn choices(&self, state: &StateValuation) -> Result<Vec<(ActionId, Distribution)>, ModelError> {
        let mut out = Vec::new();
        for action in self.enabled_actions(state)? {
            if let Some(d) = self.distribution(state, action)? {
                out.push((action, d));
            }
        }
        Ok(out)
    }
}

pub(crate) fn describe_command(model: &SymbolicModel, module: usize, cmd: usize) -> String {
    let c: &Command = &model.modules[module].commands[cmd];
    format!(
        "module `{}` command {} [{}]",
        model.modules[module].name,
        cmd,
        c.label.as_deref().unwrap_or("")
    )
}

/// Evaluates and validates a command's update probabilities. Zero-probability
/// updates are dropped; the rest must lie in (0,1] and sum to 1.
pub(crate) fn command_outcomes(
    model: &SymbolicModel,
    module: usize,
    cmd: usize,
    state: &StateValuation,
) -> Result<Vec<(usize, f64)>, ModelError> {
    let c = &model.modules[module].commands[cmd];
    let mut out = Vec::with_capacity(c.updates.len());
    let mut sum = 0.0;
    for (ui, u) in c.updates.iter().enumerate() {
        let p = u.prob.eval_f64(state).map_err(|source| ModelError::Eval {
            context: format!("probability of {}", describe_command(model, module, cmd)),
            state: state.display(model).to_string(),
            source,
        })?;
        if !p.is_finite() || !(0.0..=1.0 + PROB_TOLERANCE).contains(&p) {
            return Err(ModelError::InvalidProbability {
                command: describe_command(model, module, cmd),
                state: state.display(model).to_string(),
                prob: p,
            });
        }
        sum += p;
        if p > 0.0 {
            out.push((ui, p));
        }
    }
    if (sum - 1.0).abs() > PROB_TOLERANCE {
        return Err(ModelError::ProbabilitySum {
            command: describe_command(model, module, cmd),
            state: state.display(model).to_string(),
            sum,
        });
    }
    Ok(out)
}

/// Applies one update: right-hand sides read `pre`, results are written into
/// a copy of `partial` (which may already hold other modules' writes).
pub(crate) fn apply_update(
    model: &SymbolicModel,
    module: usize,
    cmd: usize,
    update: usize,
    pre: &StateValuation,
    partial: &StateValuation,
) -> Result<StateValuation, ModelError> {
    let u = &model.modules[module].commands[cmd].updates[update];
    let mut next = partial.clone();
    for (slot, e) in &u.assignments {
        let var = &model.variables[*slot];
        let value = e.eval(pre).map_err(|source| ModelError::Eval {
            context: format!("assignment to `{}` in {}", var.name, describe_command(model, module, cmd)),
            state: pre.display(model).to_string(),
            source,
        })?;
        let raw = value.to_slot().expect("assignment types are checked at resolution");
        let (lo, hi) = var.bounds();
        if raw < lo || raw > hi || (var.kind == VarKind::Bool && !(0..=1).contains(&raw)) {
            return Err(ModelError::OutOfBounds {
                command: describe_command(model, module, cmd),
                var: var.name.clone(),
                value: raw,
                state: pre.display(model).to_string(),
            });
        }
        next.0[*slot] = raw;
    }
    Ok(next)
}

fn merge_duplicates(combos: Distribution) -> Distribution {
    let mut out: Distribution = Vec::with_capacity(combos.len());
    for (s, p) in combos {
        match out.iter_mut().find(|(t, _)| *t == s) {
            Some((_, q)) => *q += p,
            None => out.push((s, p)),
        }
    }
    out
}
