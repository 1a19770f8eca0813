use crate::lang::{ActionId, Command, EvalError, Expr, SymbolicModel};

use super::expand::{describe_command, PROB_TOLERANCE};
use super::{Distribution, ModelError, StateValuation};

/// Source of uniform samples in `[0, 1)`.
pub trait UniformSource {
    fn next_uniform(&mut self) -> f64;
}

impl<R: rand::RngCore> UniformSource for R {
    fn next_uniform(&mut self) -> f64 {
        rand::Rng::random::<f64>(self)
    }
}

/// Replays a fixed list of uniforms, cycling when exhausted.
#[derive(Clone, Debug)]
pub struct ScriptedUniforms {
    values: Vec<f64>,
    pos: usize,
}

impl ScriptedUniforms {
    pub fn new(values: Vec<f64>) -> Self {
        assert!(!values.is_empty(), "scripted uniforms need at least one value");
        ScriptedUniforms { values, pos: 0 }
    }
}

impl UniformSource for ScriptedUniforms {
    fn next_uniform(&mut self) -> f64 {
        let u = self.values[self.pos % self.values.len()];
        self.pos += 1;
        u
    }
}

/// What `step` does with an action that is not enabled.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum InvalidActionHandler {
    #[default]
    Error,
    /// Stay in place with reward 0.
    SelfLoopZeroReward,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SimStep {
    pub next_state: StateValuation,
    pub reward: f64,
    /// Target reached or no action enabled in `next_state`.
    pub terminal: bool,
}

/// Gym-style environment over a symbolic model. Works directly on commands
/// and never builds the state space.
#[derive(Clone)]
pub struct Simulator<'m> {
    model: &'m SymbolicModel,
    reward: Option<usize>,
    target: Option<Expr>,
    handler: InvalidActionHandler,
}

fn eval_err(model: &SymbolicModel, context: String, state: &StateValuation, source: EvalError) -> ModelError {
    ModelError::Eval { context, state: state.display(model).to_string(), source }
}

impl<'m> Simulator<'m> {
    /// Simulator with no reward structure, no target and the error handler.
    pub fn new(model: &'m SymbolicModel) -> Self {
        Simulator { model, reward: None, target: None, handler: InvalidActionHandler::Error }
    }

    /// Selects the reward structure reported by `step`.
    pub fn with_reward(mut self, name: &str) -> Result<Self, ModelError> {
        let idx = self
            .model
            .reward_index(name)
            .ok_or_else(|| ModelError::Mismatch(format!("model has no reward structure \"{name}\"")))?;
        self.reward = Some(idx);
        Ok(self)
    }

    pub fn with_target(mut self, target: Expr) -> Self {
        self.target = Some(target);
        self
    }

    pub fn with_handler(mut self, handler: InvalidActionHandler) -> Self {
        self.handler = handler;
        self
    }

    pub fn model(&self) -> &'m SymbolicModel {
        self.model
    }

    pub fn reset(&self) -> StateValuation {
        StateValuation::initial(self.model)
    }

    /// For each module taking part in `action`, the enabled command with that
    /// action. `None` if some participant has none enabled.
    fn participants(&self, state: &StateValuation, action: ActionId) -> Result<Option<Vec<(usize, usize)>>, ModelError> {
        if action.index() >= self.model.actions.len() {
            return Ok(None);
        }
        let mut out = Vec::new();
        for (mi, module) in self.model.modules.iter().enumerate() {
            let mut takes_part = false;
            let mut chosen: Option<usize> = None;
            for (ci, cmd) in module.commands.iter().enumerate() {
                if cmd.action != action {
                    continue;
                }
                takes_part = true;
                let ok = cmd
                    .guard
                    .eval_bool(state)
                    .map_err(|e| eval_err(self.model, format!("guard of {}", describe_command(self.model, mi, ci)), state, e))?;
                if ok {
                    if chosen.is_some() {
                        return Err(ModelError::NondeterministicAction {
                            action: self.model.action_name(action).to_string(),
                            module: module.name.clone(),
                            state: state.display(self.model).to_string(),
                        });
                    }
                    chosen = Some(ci);
                }
            }
            if takes_part {
                match chosen {
                    Some(ci) => out.push((mi, ci)),
                    None => return Ok(None),
                }
            }
        }
        Ok(Some(out))
    }

    pub fn enabled_actions(&self, state: &StateValuation) -> Result<Vec<ActionId>, ModelError> {
        let mut out = Vec::new();
        for a in 0..self.model.actions.len() {
            let a = ActionId(a as u16);
            if self.participants(state, a)?.is_some() {
                out.push(a);
            }
        }
        Ok(out)
    }

    pub fn is_terminal(&self, state: &StateValuation) -> Result<bool, ModelError> {
        if let Some(t) = &self.target {
            if t.eval_bool(state).map_err(|e| eval_err(self.model, "target".into(), state, e))? {
                return Ok(true);
            }
        }
        Ok(self.enabled_actions(state)?.is_empty())
    }

    fn probabilities(&self, module: usize, cmd: usize, state: &StateValuation) -> Result<Vec<f64>, ModelError> {
        let c: &Command = &self.model.modules[module].commands[cmd];
        let mut probs = Vec::with_capacity(c.updates.len());
        for u in &c.updates {
            let p = u.prob.eval_f64(state).map_err(|e| {
                eval_err(self.model, format!("probability of {}", describe_command(self.model, module, cmd)), state, e)
            })?;
            if !p.is_finite() || !(0.0..=1.0 + PROB_TOLERANCE).contains(&p) {
                return Err(ModelError::InvalidProbability {
                    command: describe_command(self.model, module, cmd),
                    state: state.display(self.model).to_string(),
                    prob: p,
                });
            }
            probs.push(p);
        }
        let sum: f64 = probs.iter().sum();
        if (sum - 1.0).abs() > PROB_TOLERANCE {
            return Err(ModelError::ProbabilitySum {
                command: describe_command(self.model, module, cmd),
                state: state.display(self.model).to_string(),
                sum,
            });
        }
        Ok(probs)
    }

    fn assign(
        &self,
        module: usize,
        cmd: usize,
        update: usize,
        pre: &StateValuation,
        next: &mut StateValuation,
    ) -> Result<(), ModelError> {
        let u = &self.model.modules[module].commands[cmd].updates[update];
        for (slot, e) in &u.assignments {
            let var = &self.model.variables[*slot];
            let value = e
                .eval(pre)
                .map_err(|err| eval_err(self.model, format!("assignment to `{}`", var.name), pre, err))?
                .to_slot()
                .expect("assignment types are checked at resolution");
            let (lo, hi) = var.bounds();
            if value < lo || value > hi {
                return Err(ModelError::OutOfBounds {
                    command: describe_command(self.model, module, cmd),
                    var: var.name.clone(),
                    value,
                    state: pre.display(self.model).to_string(),
                });
            }
            next.0[*slot] = value;
        }
        Ok(())
    }

    fn reward_of(&self, state: &StateValuation, action: ActionId) -> Result<f64, ModelError> {
        let Some(idx) = self.reward else { return Ok(0.0) };
        let r = &self.model.rewards[idx];
        let v = r
            .value(state, action, self.model.is_silent(action))
            .map_err(|e| eval_err(self.model, format!("reward structure \"{}\"", r.name), state, e))?;
        Ok(if r.is_penalty() { -v } else { v })
    }

    fn terminal_credit(&self, state: &StateValuation) -> Result<f64, ModelError> {
        let Some(idx) = self.reward else { return Ok(0.0) };
        let r = &self.model.rewards[idx];
        let v = r
            .state_value(state)
            .map_err(|e| eval_err(self.model, format!("reward structure \"{}\"", r.name), state, e))?;
        Ok(if r.is_penalty() { -v } else { v })
    }

    /// Samples one transition. Each participating module draws one uniform,
    /// in module order, and picks the first update whose cumulative
    /// probability exceeds it. Entering a terminal state also pays that
    /// state's state-scoped reward, since no choice leaves it.
    pub fn step(
        &self,
        state: &StateValuation,
        action: ActionId,
        rng: &mut dyn UniformSource,
    ) -> Result<SimStep, ModelError> {
        let Some(parts) = self.participants(state, action)? else {
            return match self.handler {
                InvalidActionHandler::Error => Err(ModelError::InvalidAction {
                    action: if action.index() < self.model.actions.len() || action == ActionId::DEADLOCK {
                        self.model.action_name(action).to_string()
                    } else {
                        format!("#{}", action.0)
                    },
                    state: state.display(self.model).to_string(),
                }),
                InvalidActionHandler::SelfLoopZeroReward => Ok(SimStep {
                    next_state: state.clone(),
                    reward: 0.0,
                    terminal: self.is_terminal(state)?,
                }),
            };
        };
        let mut reward = self.reward_of(state, action)?;
        let mut next = state.clone();
        for (mi, ci) in parts {
            let probs = self.probabilities(mi, ci, state)?;
            let u = rng.next_uniform();
            let mut cum = 0.0;
            let mut pick = None;
            for (i, p) in probs.iter().enumerate() {
                if *p <= 0.0 {
                    continue;
                }
                cum += p;
                pick = Some(i);
                if u < cum {
                    break;
                }
            }
            let pick = pick.expect("a valid distribution has a positive atom");
            self.assign(mi, ci, pick, state, &mut next)?;
        }
        let terminal = self.is_terminal(&next)?;
        if terminal {
            reward += self.terminal_credit(&next)?;
        }
        Ok(SimStep { next_state: next, reward, terminal })
    }

    /// Every successor `step` can produce, with its probability. Equal
    /// successors are merged in first-occurrence order.
    pub fn support(&self, state: &StateValuation, action: ActionId) -> Result<Option<Distribution>, ModelError> {
        let Some(parts) = self.participants(state, action)? else { return Ok(None) };
        let mut acc: Distribution = vec![(state.clone(), 1.0)];
        for (mi, ci) in parts {
            let probs = self.probabilities(mi, ci, state)?;
            let mut grown = Vec::new();
            for (partial, p) in &acc {
                for (ui, q) in probs.iter().enumerate() {
                    if *q <= 0.0 {
                        continue;
                    }
                    let mut next = partial.clone();
                    self.assign(mi, ci, ui, state, &mut next)?;
                    grown.push((next, p * q));
                }
            }
            acc = grown;
        }
        let mut merged: Distribution = Vec::new();
        for (s, p) in acc {
            if let Some(entry) = merged.iter_mut().find(|(t, _)| *t == s) {
                entry.1 += p;
            } else {
                merged.push((s, p));
            }
        }
        Ok(Some(merged))
    }
}

/// Initial valuation of a model.
pub fn reset(model: &SymbolicModel) -> StateValuation {
    StateValuation::initial(model)
}

/// Enabled actions of `state`, sorted by alphabet index.
pub fn enabled_actions(model: &SymbolicModel, state: &StateValuation) -> Result<Vec<ActionId>, ModelError> {
    Simulator::new(model).enabled_actions(state)
}

/// One simulation step reporting the first reward structure, if any.
pub fn step(
    model: &SymbolicModel,
    state: &StateValuation,
    action: ActionId,
    rng: &mut dyn UniformSource,
) -> Result<SimStep, ModelError> {
    let mut sim = Simulator::new(model);
    if let Some(r) = model.rewards.first() {
        sim = sim.with_reward(&r.name)?;
    }
    sim.step(state, action, rng)
}
