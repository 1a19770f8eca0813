use std::collections::{HashMap, VecDeque};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::lang::{ActionId, SymbolicModel};
use crate::model::{InvalidActionHandler, Simulator, StateValuation};
use crate::util::derive_seed;

use super::{argmax, MlpPolicy, PolicyError, TabularPolicy};

/// Tabular Q-learning settings; also the shared part of [`DqnConfig`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct QLearnConfig {
    pub episodes: usize,
    pub max_steps_per_episode: usize,
    /// Learning rate of the tabular update.
    pub alpha: f64,
    pub gamma: f64,
    pub epsilon_start: f64,
    /// Multiplicative decay per environment step.
    pub epsilon_decay: f64,
    pub epsilon_min: f64,
    pub seed: u64,
}

impl Default for QLearnConfig {
    fn default() -> Self {
        QLearnConfig {
            episodes: 1000,
            max_steps_per_episode: 100,
            alpha: 0.1,
            gamma: 0.99,
            epsilon_start: 1.0,
            epsilon_decay: 0.99999,
            epsilon_min: 0.1,
            seed: 128,
        }
    }
}

impl QLearnConfig {
    pub fn validate(&self) -> Result<(), PolicyError> {
        let bad = |m: &str| Err(PolicyError::Config(m.to_string()));
        if !(0.0..=1.0).contains(&self.gamma) {
            return bad("gamma must lie in [0, 1]");
        }
        if !(self.epsilon_decay > 0.0 && self.epsilon_decay <= 1.0) {
            return bad("epsilon_decay must lie in (0, 1]");
        }
        if !(0.0..=1.0).contains(&self.epsilon_start) || !(0.0..=1.0).contains(&self.epsilon_min) {
            return bad("epsilon values must lie in [0, 1]");
        }
        if self.epsilon_min > self.epsilon_start {
            return bad("epsilon_min must not exceed epsilon_start");
        }
        if !(self.alpha > 0.0 && self.alpha <= 1.0) {
            return bad("alpha must lie in (0, 1]");
        }
        if self.max_steps_per_episode == 0 {
            return bad("max_steps_per_episode must be positive");
        }
        Ok(())
    }
}

/// Deep Q-learning settings. `base.alpha` is unused; the network is trained
/// with plain SGD at `learning_rate`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DqnConfig {
    #[serde(flatten)]
    pub base: QLearnConfig,
    pub hidden: Vec<usize>,
    pub batch_size: usize,
    pub replay_capacity: usize,
    /// Target network refresh period, in learning steps.
    pub target_sync_interval: usize,
    pub learning_rate: f64,
}

impl Default for DqnConfig {
    fn default() -> Self {
        DqnConfig {
            base: QLearnConfig::default(),
            hidden: vec![32, 32],
            batch_size: 100,
            replay_capacity: 10_000,
            target_sync_interval: 100,
            learning_rate: 1e-4,
        }
    }
}

impl DqnConfig {
    pub fn validate(&self) -> Result<(), PolicyError> {
        self.base.validate()?;
        let bad = |m: &str| Err(PolicyError::Config(m.to_string()));
        if self.hidden.contains(&0) {
            return bad("hidden layers must have at least one neuron");
        }
        if self.batch_size == 0 || self.replay_capacity < self.batch_size {
            return bad("need 0 < batch_size <= replay_capacity");
        }
        if self.target_sync_interval == 0 {
            return bad("target_sync_interval must be positive");
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return bad("learning_rate must be positive");
        }
        Ok(())
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct TrainingMetrics {
    pub episode_rewards: Vec<f64>,
    pub episode_lengths: Vec<usize>,
    pub total_steps: usize,
    pub learning_steps: usize,
    pub final_epsilon: f64,
}

impl TrainingMetrics {
    /// Mean reward over the last `window` episodes.
    pub fn trailing_mean(&self, window: usize) -> f64 {
        let tail = &self.episode_rewards[self.episode_rewards.len().saturating_sub(window)..];
        if tail.is_empty() {
            0.0
        } else {
            tail.iter().sum::<f64>() / tail.len() as f64
        }
    }
}

fn simulator<'m>(
    model: &'m SymbolicModel,
    target_label: Option<&str>,
    reward: &str,
) -> Result<Simulator<'m>, PolicyError> {
    let mut sim = Simulator::new(model).with_reward(reward)?.with_handler(InvalidActionHandler::SelfLoopZeroReward);
    if let Some(label) = target_label {
        let target = model.label(label).map_err(|e| PolicyError::Config(e.to_string()))?;
        sim = sim.with_target(target.clone());
    }
    Ok(sim)
}

struct Exploration {
    epsilon: f64,
    decay: f64,
    min: f64,
}

impl Exploration {
    fn advance(&mut self) {
        self.epsilon = (self.epsilon * self.decay).max(self.min);
    }
}

/// Epsilon-greedy tabular Q-learning. Exploration samples the full action
/// alphabet; disabled actions become zero-reward self-loops. Episodes end at
/// the target label, a deadlock, or the step cap.
pub fn q_learning_train(
    model: &SymbolicModel,
    cfg: &QLearnConfig,
    target_label: Option<&str>,
    reward: &str,
) -> Result<(TabularPolicy, TrainingMetrics), PolicyError> {
    cfg.validate()?;
    let sim = simulator(model, target_label, reward)?;
    let n_actions = model.actions.len();
    let mut env_rng = ChaCha8Rng::seed_from_u64(derive_seed(cfg.seed, "env"));
    let mut agent_rng = ChaCha8Rng::seed_from_u64(derive_seed(cfg.seed, "agent"));
    let mut q: HashMap<StateValuation, Vec<f64>> = HashMap::new();
    let mut explore = Exploration { epsilon: cfg.epsilon_start, decay: cfg.epsilon_decay, min: cfg.epsilon_min };
    let mut metrics = TrainingMetrics::default();

    for _ in 0..cfg.episodes {
        let mut state = sim.reset();
        let mut total = 0.0;
        let mut steps = 0;
        if !sim.is_terminal(&state)? {
            for _ in 0..cfg.max_steps_per_episode {
                let row = q.entry(state.clone()).or_insert_with(|| vec![0.0; n_actions]);
                let a = if agent_rng.random::<f64>() < explore.epsilon {
                    agent_rng.random_range(0..n_actions)
                } else {
                    argmax(row)
                };
                let step = sim.step(&state, ActionId(a as u16), &mut env_rng)?;
                let future = if step.terminal {
                    0.0
                } else {
                    q.get(&step.next_state).map_or(0.0, |r| r.iter().copied().fold(f64::NEG_INFINITY, f64::max))
                };
                let row = q.get_mut(&state).expect("row inserted above");
                row[a] += cfg.alpha * (step.reward + cfg.gamma * future - row[a]);
                explore.advance();
                total += step.reward;
                steps += 1;
                state = step.next_state;
                if step.terminal {
                    break;
                }
            }
        }
        metrics.episode_rewards.push(total);
        metrics.episode_lengths.push(steps);
        metrics.total_steps += steps;
    }
    metrics.learning_steps = metrics.total_steps;
    metrics.final_epsilon = explore.epsilon;
    let policy = TabularPolicy::from_pairs(q.into_iter().map(|(s, row)| (s, ActionId(argmax(&row) as u16))));
    Ok((policy, metrics))
}

/// One stored experience; states are already encoded for the network.
#[derive(Clone, Debug, PartialEq)]
pub struct Transition {
    pub state: Vec<f64>,
    pub action: usize,
    pub reward: f64,
    pub next: Vec<f64>,
    pub terminal: bool,
}

/// Fixed-capacity FIFO of transitions.
#[derive(Clone, Debug)]
pub struct ReplayBuffer {
    items: VecDeque<Transition>,
    capacity: usize,
}

impl ReplayBuffer {
    pub fn new(capacity: usize) -> Self {
        assert!(capacity > 0, "replay capacity must be positive");
        ReplayBuffer { items: VecDeque::with_capacity(capacity), capacity }
    }

    pub fn push(&mut self, t: Transition) {
        if self.items.len() == self.capacity {
            self.items.pop_front();
        }
        self.items.push_back(t);
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn get(&self, i: usize) -> &Transition {
        &self.items[i]
    }
}

/// Deep Q-learning with uniform experience replay and a target network.
/// Each environment step, once the buffer holds a batch, draws
/// `batch_size` transitions with replacement and takes one SGD step on the
/// mean squared TD error of the taken actions.
pub fn deep_q_train(
    model: &SymbolicModel,
    cfg: &DqnConfig,
    target_label: Option<&str>,
    reward: &str,
) -> Result<(MlpPolicy, TrainingMetrics), PolicyError> {
    cfg.validate()?;
    let base = &cfg.base;
    let sim = simulator(model, target_label, reward)?;
    let n_actions = model.actions.len();
    let mut env_rng = ChaCha8Rng::seed_from_u64(derive_seed(base.seed, "env"));
    let mut agent_rng = ChaCha8Rng::seed_from_u64(derive_seed(base.seed, "agent"));
    let mut replay_rng = ChaCha8Rng::seed_from_u64(derive_seed(base.seed, "replay"));
    let mut init_rng = ChaCha8Rng::seed_from_u64(derive_seed(base.seed, "init"));

    let mut policy = MlpPolicy::random(model, &cfg.hidden, &mut init_rng);
    let mut target_net = policy.net.clone();
    let mut grads = policy.net.zero_gradients();
    let mut replay = ReplayBuffer::new(cfg.replay_capacity);
    let mut explore = Exploration { epsilon: base.epsilon_start, decay: base.epsilon_decay, min: base.epsilon_min };
    let mut metrics = TrainingMetrics::default();
    let mut target_vec = vec![0.0; n_actions];

    for episode in 0..base.episodes {
        let mut state = sim.reset();
        let mut x = policy.encode(&state);
        let mut total = 0.0;
        let mut steps = 0;
        if !sim.is_terminal(&state)? {
            for step_index in 0..base.max_steps_per_episode {
                let a = if agent_rng.random::<f64>() < explore.epsilon {
                    agent_rng.random_range(0..n_actions)
                } else {
                    argmax(&policy.net.forward(&x))
                };
                let step = sim.step(&state, ActionId(a as u16), &mut env_rng)?;
                let x_next = policy.encode(&step.next_state);
                replay.push(Transition {
                    state: x,
                    action: a,
                    reward: step.reward,
                    next: x_next.clone(),
                    terminal: step.terminal,
                });

                if replay.len() >= cfg.batch_size {
                    grads.clear();
                    let mut loss = 0.0;
                    for _ in 0..cfg.batch_size {
                        let t = replay.get(replay_rng.random_range(0..replay.len()));
                        let y = if t.terminal {
                            t.reward
                        } else {
                            let next_q = target_net.forward(&t.next);
                            t.reward + base.gamma * next_q.iter().copied().fold(f64::NEG_INFINITY, f64::max)
                        };
                        target_vec[t.action] = y;
                        loss += policy.net.accumulate(&t.state, &target_vec, Some(t.action), &mut grads);
                    }
                    if !loss.is_finite() {
                        return Err(PolicyError::NonFinite { what: "loss".into(), episode, step: step_index });
                    }
                    policy.net.apply_gradients(&grads, cfg.learning_rate / cfg.batch_size as f64);
                    if !policy.net.is_finite() {
                        return Err(PolicyError::NonFinite { what: "weights".into(), episode, step: step_index });
                    }
                    metrics.learning_steps += 1;
                    if metrics.learning_steps % cfg.target_sync_interval == 0 {
                        target_net = policy.net.clone();
                    }
                }

                explore.advance();
                total += step.reward;
                steps += 1;
                state = step.next_state;
                x = x_next;
                if step.terminal {
                    break;
                }
            }
        }
        metrics.episode_rewards.push(total);
        metrics.episode_lengths.push(steps);
        metrics.total_steps += steps;
    }
    metrics.final_epsilon = explore.epsilon;
    Ok((policy, metrics))
}
