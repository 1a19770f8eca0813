//! Graph-based precomputation of the states with reachability value exactly
//! 0 or exactly 1. No numerics are involved.

use std::collections::VecDeque;

use bitvec::vec::BitVec;

use crate::model::ExplicitMdp;

use super::property::Opt;

/// How the value is quantified over choices.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum QualMode {
    Min,
    Max,
    /// Single choice per state; min and max coincide.
    Dtmc,
}

impl From<Option<Opt>> for QualMode {
    fn from(opt: Option<Opt>) -> Self {
        match opt {
            Some(Opt::Min) => QualMode::Min,
            Some(Opt::Max) => QualMode::Max,
            None => QualMode::Dtmc,
        }
    }
}

/// Reverse edges: for every state, the (source state, choice) pairs with a
/// transition into it.
pub struct Predecessors {
    start: Vec<usize>,
    entries: Vec<(u32, u32)>,
}

impl Predecessors {
    pub fn new(mdp: &ExplicitMdp) -> Self {
        let n = mdp.num_states();
        let mut count = vec![0usize; n + 1];
        for &t in &mdp.succ {
            count[t as usize + 1] += 1;
        }
        for i in 0..n {
            count[i + 1] += count[i];
        }
        let mut fill = count.clone();
        let mut entries = vec![(0u32, 0u32); mdp.succ.len()];
        for s in 0..n {
            for c in mdp.choice_range(s) {
                for &t in &mdp.succ[mdp.choice_start[c]..mdp.choice_start[c + 1]] {
                    entries[fill[t as usize]] = (s as u32, c as u32);
                    fill[t as usize] += 1;
                }
            }
        }
        Predecessors { start: count, entries }
    }

    pub fn of(&self, t: usize) -> &[(u32, u32)] {
        &self.entries[self.start[t]..self.start[t + 1]]
    }
}

fn not(bits: &BitVec) -> BitVec {
    !bits.clone()
}

/// States from which some path reaches `target` (value > 0 under max).
fn reach_exists(pre: &Predecessors, n: usize, target: &BitVec) -> BitVec {
    let mut seen = target.clone();
    let mut queue: VecDeque<usize> = target.iter_ones().collect();
    while let Some(t) = queue.pop_front() {
        for &(s, _) in pre.of(t) {
            let s = s as usize;
            if !seen[s] {
                seen.set(s, true);
                queue.push_back(s);
            }
        }
        debug_assert!(seen.len() == n);
    }
    seen
}

/// States where every choice reaches `target` with positive probability
/// (value > 0 under min).
fn reach_forall(mdp: &ExplicitMdp, pre: &Predecessors, target: &BitVec) -> BitVec {
    let n = mdp.num_states();
    let mut seen = target.clone();
    let mut choice_hit: BitVec = BitVec::repeat(false, mdp.num_choices());
    let mut remaining: Vec<usize> = (0..n).map(|s| mdp.choice_range(s).len()).collect();
    let mut queue: VecDeque<usize> = target.iter_ones().collect();
    while let Some(t) = queue.pop_front() {
        for &(s, c) in pre.of(t) {
            let (s, c) = (s as usize, c as usize);
            if seen[s] || choice_hit[c] {
                continue;
            }
            choice_hit.set(c, true);
            remaining[s] -= 1;
            if remaining[s] == 0 {
                seen.set(s, true);
                queue.push_back(s);
            }
        }
    }
    seen
}

/// Value exactly 0 under the mode.
pub fn prob0(mdp: &ExplicitMdp, pre: &Predecessors, target: &BitVec, mode: QualMode) -> BitVec {
    match mode {
        QualMode::Max | QualMode::Dtmc => not(&reach_exists(pre, mdp.num_states(), target)),
        QualMode::Min => not(&reach_forall(mdp, pre, target)),
    }
}

/// Value exactly 1 under the mode. `zero` must be `prob0` for the same mode.
pub fn prob1(mdp: &ExplicitMdp, pre: &Predecessors, target: &BitVec, zero: &BitVec, mode: QualMode) -> BitVec {
    match mode {
        QualMode::Min | QualMode::Dtmc => {
            // Value < 1 iff some scheduler reaches a value-0 state with
            // positive probability before the target.
            let outside = !target.clone();
            let mut below = zero.clone();
            let mut queue: VecDeque<usize> = zero.iter_ones().collect();
            while let Some(t) = queue.pop_front() {
                for &(s, _) in pre.of(t) {
                    let s = s as usize;
                    if !below[s] && outside[s] {
                        below.set(s, true);
                        queue.push_back(s);
                    }
                }
            }
            not(&below)
        }
        QualMode::Max => prob1_exists(mdp, pre, target, zero),
    }
}

/// Greatest fixpoint of: states with a choice that stays inside the
/// candidate set and moves closer to the target with positive probability.
fn prob1_exists(mdp: &ExplicitMdp, pre: &Predecessors, target: &BitVec, zero: &BitVec) -> BitVec {
    let n = mdp.num_states();
    let mut candidate = !zero.clone();
    loop {
        let mut stays: BitVec = BitVec::repeat(false, mdp.num_choices());
        for s in candidate.iter_ones() {
            for c in mdp.choice_range(s) {
                let succ = &mdp.succ[mdp.choice_start[c]..mdp.choice_start[c + 1]];
                if succ.iter().all(|&t| candidate[t as usize]) {
                    stays.set(c, true);
                }
            }
        }
        let mut reached = target.clone() & candidate.clone();
        let mut queue: VecDeque<usize> = reached.iter_ones().collect();
        while let Some(t) = queue.pop_front() {
            for &(s, c) in pre.of(t) {
                let s = s as usize;
                if !reached[s] && candidate[s] && stays[c as usize] {
                    reached.set(s, true);
                    queue.push_back(s);
                }
            }
        }
        if reached == candidate {
            debug_assert!(reached.len() == n);
            return reached;
        }
        candidate = reached;
    }
}

/// `(prob0, prob1)` for reaching `target` under the mode.
pub fn precompute_qualitative(mdp: &ExplicitMdp, target: &BitVec, mode: QualMode) -> (BitVec, BitVec) {
    let pre = Predecessors::new(mdp);
    let zero = prob0(mdp, &pre, target, mode);
    let one = prob1(mdp, &pre, target, &zero, mode);
    (zero, one)
}
