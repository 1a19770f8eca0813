//! Value iteration for unbounded and step-bounded reachability and for
//! expected accumulated reward.

use bitvec::vec::BitVec;
use rayon::prelude::*;

use crate::lang::ActionId;
use crate::model::ExplicitMdp;

use super::property::Opt;
use super::qualitative::{precompute_qualitative, QualMode};
use super::{CheckError, CheckOptions};

/// Values for every state plus convergence statistics.
#[derive(Clone, Debug, PartialEq)]
pub struct Iteration {
    pub values: Vec<f64>,
    pub iterations: usize,
    pub residual: f64,
}

#[inline]
fn better(opt: Option<Opt>, candidate: f64, best: f64) -> bool {
    match opt {
        Some(Opt::Min) => candidate < best,
        _ => candidate > best,
    }
}

#[inline]
fn worst(opt: Option<Opt>) -> f64 {
    match opt {
        Some(Opt::Min) => f64::INFINITY,
        _ => f64::NEG_INFINITY,
    }
}

#[inline]
fn choice_value(mdp: &ExplicitMdp, c: usize, x: &[f64]) -> f64 {
    let r = mdp.choice_start[c]..mdp.choice_start[c + 1];
    let mut acc = 0.0;
    for (t, p) in mdp.succ[r.clone()].iter().zip(&mdp.prob[r]) {
        acc += p * x[*t as usize];
    }
    acc
}

/// Gauss-Seidel sweeps in state order over the states in `unknown`, until
/// the largest change in one sweep drops below epsilon. `observer` sees the
/// vector after every sweep.
#[allow(clippy::too_many_arguments)]
fn gauss_seidel(
    mdp: &ExplicitMdp,
    unknown: &[usize],
    allowed: impl Fn(usize) -> bool,
    reward: impl Fn(usize) -> f64,
    opt: Option<Opt>,
    mut x: Vec<f64>,
    opts: &CheckOptions,
    observer: &mut dyn FnMut(&[f64]),
) -> Result<Iteration, CheckError> {
    let mut iterations = 0;
    loop {
        let mut residual: f64 = 0.0;
        for &s in unknown {
            let mut best = worst(opt);
            for c in mdp.choice_range(s) {
                if !allowed(c) {
                    continue;
                }
                let v = reward(c) + choice_value(mdp, c, &x);
                if better(opt, v, best) {
                    best = v;
                }
            }
            residual = residual.max((best - x[s]).abs());
            x[s] = best;
        }
        iterations += 1;
        observer(&x);
        if residual < opts.epsilon {
            return Ok(Iteration { values: x, iterations, residual });
        }
        if iterations >= opts.max_iterations {
            return Err(CheckError::NonConvergence { iterations, residual });
        }
    }
}

/// Unbounded reachability. States in `zero`/`one` are fixed to 0/1, the
/// rest start at 0 and are iterated.
pub fn reachability(
    mdp: &ExplicitMdp,
    zero: &BitVec,
    one: &BitVec,
    opt: Option<Opt>,
    opts: &CheckOptions,
    observer: &mut dyn FnMut(&[f64]),
) -> Result<Iteration, CheckError> {
    let n = mdp.num_states();
    let mut x = vec![0.0; n];
    let mut unknown = Vec::new();
    for s in 0..n {
        if one[s] {
            x[s] = 1.0;
        } else if !zero[s] {
            unknown.push(s);
        }
    }
    if unknown.is_empty() {
        return Ok(Iteration { values: x, iterations: 0, residual: 0.0 });
    }
    gauss_seidel(mdp, &unknown, |_| true, |_| 0.0, opt, x, opts, observer)
}

/// Probability of reaching `target` within `k` steps, by `k` synchronous
/// backups from the target indicator.
pub fn bounded_reachability(mdp: &ExplicitMdp, target: &BitVec, k: u64, opt: Option<Opt>) -> Iteration {
    let n = mdp.num_states();
    let mut x: Vec<f64> = (0..n).map(|s| if target[s] { 1.0 } else { 0.0 }).collect();
    let mut next = x.clone();
    let mut residual = 0.0;
    for _ in 0..k {
        next.par_iter_mut().enumerate().for_each(|(s, out)| {
            if target[s] {
                *out = 1.0;
                return;
            }
            let mut best = worst(opt);
            for c in mdp.choice_range(s) {
                let v = choice_value(mdp, c, &x);
                if better(opt, v, best) {
                    best = v;
                }
            }
            *out = best;
        });
        residual = x.iter().zip(&next).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        std::mem::swap(&mut x, &mut next);
    }
    Iteration { values: x, iterations: k as usize, residual }
}

/// Expected reward accumulated until `target` is reached; `rewards` holds
/// one value per choice (`None` charges 1 per step). States that fail to
/// reach the target almost surely under the relevant scheduler get +inf:
/// for min that is any scheduler (max-probability < 1), for max it is the
/// worst one (min-probability < 1).
pub fn expected_reward(
    mdp: &ExplicitMdp,
    target: &BitVec,
    rewards: Option<&[f64]>,
    opt: Option<Opt>,
    opts: &CheckOptions,
    observer: &mut dyn FnMut(&[f64]),
) -> Result<Iteration, CheckError> {
    let n = mdp.num_states();
    let mode = match opt {
        Some(Opt::Min) => QualMode::Max,
        Some(Opt::Max) => QualMode::Min,
        None => QualMode::Dtmc,
    };
    let (_, sure) = precompute_qualitative(mdp, target, mode);
    let mut x = vec![0.0; n];
    let mut unknown = Vec::new();
    for s in 0..n {
        if target[s] {
            continue;
        }
        if !sure[s] {
            x[s] = f64::INFINITY;
        } else {
            unknown.push(s);
        }
    }
    // Choices leaving the almost-sure set are never optimal for min.
    let mut allowed: BitVec = BitVec::repeat(true, mdp.num_choices());
    for &s in &unknown {
        for c in mdp.choice_range(s) {
            let succ = &mdp.succ[mdp.choice_start[c]..mdp.choice_start[c + 1]];
            if succ.iter().any(|&t| x[t as usize].is_infinite()) {
                allowed.set(c, false);
            }
        }
    }
    if unknown.is_empty() {
        return Ok(Iteration { values: x, iterations: 0, residual: 0.0 });
    }
    let reward = |c: usize| rewards.map_or(1.0, |r| r[c]);
    gauss_seidel(mdp, &unknown, |c| allowed[c], reward, opt, x, opts, observer)
}

/// For every state, the lowest-index choice whose one-step value lies
/// within `epsilon` of the optimum, given converged `values`. Rewards are
/// added per choice when present. Choices into +inf states are skipped
/// unless every choice leads there.
pub fn extract_choices(
    mdp: &ExplicitMdp,
    values: &[f64],
    rewards: Option<&[f64]>,
    opt: Opt,
    epsilon: f64,
) -> Vec<ActionId> {
    let opt = Some(opt);
    (0..mdp.num_states())
        .map(|s| {
            let qs: Vec<(usize, f64)> = mdp
                .choice_range(s)
                .map(|c| (c, rewards.map_or(0.0, |r| r[c]) + choice_value(mdp, c, values)))
                .collect();
            let mut best = worst(opt);
            for &(_, q) in &qs {
                if better(opt, q, best) {
                    best = q;
                }
            }
            let pick = qs
                .iter()
                .find(|(_, q)| (q.is_infinite() && *q == best) || (q - best).abs() <= epsilon)
                .map(|(c, _)| *c)
                .expect("every state has a choice");
            mdp.choice_action[pick]
        })
        .collect()
}
