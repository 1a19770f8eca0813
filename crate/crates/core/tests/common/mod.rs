//! Shared fixtures and independent oracles for the integration tests.
#![allow(dead_code)]

use std::collections::{BTreeMap, HashMap, VecDeque};

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use rlcheck::benchmarks::load_benchmark;
use rlcheck::lang::{parse_overrides, ActionId, SymbolicModel};
use rlcheck::model::{ExplicitMdp, Simulator, StateValuation};
use rlcheck::policy::{q_learning_train, QLearnConfig, TabularPolicy};

pub fn load(name: &str, consts: &str) -> SymbolicModel {
    load_benchmark(name, &parse_overrides(consts).unwrap()).unwrap()
}

/// Successor map of one (state, action): valuation to probability.
pub type Support = BTreeMap<StateValuation, f64>;

/// Exhaustive breadth-first search driven only by the simulator. Deadlocks
/// get the self-loop the builder adds.
pub fn simulator_bfs(model: &SymbolicModel) -> HashMap<StateValuation, BTreeMap<ActionId, Support>> {
    let sim = Simulator::new(model);
    let init = sim.reset();
    let mut seen = HashMap::new();
    let mut queue = VecDeque::from([init.clone()]);
    let mut queued = std::collections::HashSet::from([init]);
    while let Some(s) = queue.pop_front() {
        let mut choices = BTreeMap::new();
        let enabled = sim.enabled_actions(&s).unwrap();
        if enabled.is_empty() {
            choices.insert(ActionId::DEADLOCK, Support::from([(s.clone(), 1.0)]));
        }
        for a in enabled {
            let dist = sim.support(&s, a).unwrap().expect("enabled action has a support");
            let mut support = Support::new();
            for (t, p) in dist {
                *support.entry(t).or_insert(0.0) += p;
            }
            choices.insert(a, support);
        }
        for support in choices.values() {
            for t in support.keys() {
                if queued.insert(t.clone()) {
                    queue.push_back(t.clone());
                }
            }
        }
        seen.insert(s, choices);
    }
    seen
}

/// The builder's model in the same shape as [`simulator_bfs`].
pub fn builder_view(mdp: &ExplicitMdp) -> HashMap<StateValuation, BTreeMap<ActionId, Support>> {
    (0..mdp.num_states())
        .map(|s| {
            let choices = mdp
                .choices(s)
                .map(|c| {
                    let support = c.succ.iter().zip(c.prob).map(|(t, p)| (mdp.states[*t as usize].clone(), *p)).collect();
                    (c.action, support)
                })
                .collect();
            (mdp.states[s].clone(), choices)
        })
        .collect()
}

pub fn target_bits(mdp: &ExplicitMdp, label: &str) -> Vec<bool> {
    mdp.label(label).unwrap().iter().map(|b| *b).collect()
}

/// States that reach `target` with positive probability using only the
/// choices accepted by `allowed`.
fn can_reach(mdp: &ExplicitMdp, target: &[bool], allowed: &dyn Fn(usize) -> bool) -> Vec<bool> {
    let n = mdp.num_states();
    let mut reach = target.to_vec();
    loop {
        let mut changed = false;
        for s in 0..n {
            if reach[s] {
                continue;
            }
            let hit = mdp.choices(s).any(|c| allowed(c.index) && c.succ.iter().any(|t| reach[*t as usize]));
            if hit {
                reach[s] = true;
                changed = true;
            }
        }
        if !changed {
            return reach;
        }
    }
}

/// Exact reachability values of the chain that takes choice `pick[s]` in
/// every state, by one dense linear solve.
pub fn evaluate_choices(mdp: &ExplicitMdp, target: &[bool], pick: &[usize]) -> Vec<f64> {
    let n = mdp.num_states();
    let mut picked = vec![false; mdp.num_choices()];
    for &c in pick {
        picked[c] = true;
    }
    let reach = can_reach(mdp, target, &|c| picked[c]);
    let unknown: Vec<usize> = (0..n).filter(|&s| reach[s] && !target[s]).collect();
    let pos: HashMap<usize, usize> = unknown.iter().enumerate().map(|(i, &s)| (s, i)).collect();
    let m = unknown.len();
    let mut a = DMatrix::<f64>::identity(m, m);
    let mut b = DVector::<f64>::zeros(m);
    for (i, &s) in unknown.iter().enumerate() {
        let c = mdp.choice(pick[s]);
        for (t, p) in c.succ.iter().zip(c.prob) {
            let t = *t as usize;
            if target[t] {
                b[i] += p;
            } else if let Some(&j) = pos.get(&t) {
                a[(i, j)] -= p;
            }
        }
    }
    let x = a.lu().solve(&b).expect("evaluation system is non-singular");
    (0..n)
        .map(|s| if target[s] { 1.0 } else { pos.get(&s).map_or(0.0, |&i| x[i]) })
        .collect()
}

/// Maximal reachability by policy iteration with exact evaluation. A
/// choice is switched only on strict improvement, so the loop ends.
pub fn policy_iteration_max(mdp: &ExplicitMdp, target: &[bool]) -> Vec<f64> {
    let n = mdp.num_states();
    let mut pick: Vec<usize> = (0..n).map(|s| mdp.state_start[s]).collect();
    loop {
        let x = evaluate_choices(mdp, target, &pick);
        let mut changed = false;
        for (s, slot) in pick.iter_mut().enumerate() {
            let value = |c: usize| {
                let ch = mdp.choice(c);
                ch.succ.iter().zip(ch.prob).map(|(t, p)| p * x[*t as usize]).sum::<f64>()
            };
            let current = value(*slot);
            for c in mdp.choice_range(s) {
                if value(c) > current + 1e-12 {
                    *slot = c;
                    changed = true;
                    break;
                }
            }
        }
        if !changed {
            return x;
        }
    }
}

/// Plain Jacobi value iteration over the full model restricted to the
/// action `policy` picks in each state, for comparison with the induced
/// chain. Iterates until the update is below 1e-15 or 10^6 sweeps.
pub fn restricted_vi(mdp: &ExplicitMdp, target: &[bool], policy: &dyn rlcheck::policy::Policy) -> Vec<f64> {
    let n = mdp.num_states();
    let pick: Vec<usize> = (0..n)
        .map(|s| {
            let a = policy.act(&mdp.states[s]);
            mdp.choice_for(s, a).unwrap_or(mdp.state_start[s])
        })
        .collect();
    let mut x: Vec<f64> = target.iter().map(|&t| if t { 1.0 } else { 0.0 }).collect();
    for _ in 0..1_000_000 {
        let next: Vec<f64> = (0..n)
            .map(|s| {
                if target[s] {
                    return 1.0;
                }
                let c = mdp.choice(pick[s]);
                c.succ.iter().zip(c.prob).map(|(t, p)| p * x[*t as usize]).sum()
            })
            .collect();
        let delta = next.iter().zip(&x).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        x = next;
        if delta < 1e-15 {
            break;
        }
    }
    x
}

/// A uniformly random enabled action per state of `mdp`.
pub fn random_policy(mdp: &ExplicitMdp, seed: u64) -> TabularPolicy {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    TabularPolicy::from_pairs((0..mdp.num_states()).map(|s| {
        let r = mdp.choice_range(s);
        let c = rng.random_range(r);
        (mdp.states[s].clone(), mdp.choice_action[c])
    }))
}

/// A quickly trained taxi policy (imperfect on purpose).
pub fn small_taxi_policy(model: &SymbolicModel, episodes: usize) -> TabularPolicy {
    let cfg = QLearnConfig { episodes, seed: 7, ..Default::default() };
    q_learning_train(model, &cfg, Some("done"), "penalty_steps").unwrap().0
}
