//! Sparse export format.
//!
//! A file is the magic line `rlcheck-model 1`, one line of compact JSON
//! ([`ModelHeader`]), then one little-endian record per transition:
//! `src: u32, act: u16, dst: u32, prob: f64` (18 bytes). Records are in
//! state, choice, successor order, so consecutive records sharing
//! `(src, act)` form one choice.

use std::io::{BufRead, BufReader, Read, Write};

use bitvec::vec::BitVec;

use crate::lang::ActionId;

use super::{ExplicitMdp, ModelError, StateValuation};

const MAGIC: &str = "rlcheck-model 1";
const RECORD: usize = 18;

#[derive(Clone, Debug, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct ModelHeader {
    pub num_states: usize,
    pub num_choices: usize,
    pub num_transitions: usize,
    pub variables: Vec<String>,
    pub actions: Vec<String>,
    pub states: Vec<StateValuation>,
    /// State IDs satisfying each label.
    pub labels: Vec<(String, Vec<u32>)>,
    pub deadlocks: Vec<u32>,
    /// Per reward structure, one value per choice in record order.
    pub rewards: Vec<(String, Vec<f64>)>,
}

fn ids(bits: &BitVec) -> Vec<u32> {
    bits.iter_ones().map(|i| i as u32).collect()
}

fn bits(n: usize, ids: &[u32]) -> Result<BitVec, ModelError> {
    let mut out = BitVec::repeat(false, n);
    for &i in ids {
        if i as usize >= n {
            return Err(ModelError::Corrupt(format!("state id {i} out of range")));
        }
        out.set(i as usize, true);
    }
    Ok(out)
}

pub fn write_model(mdp: &ExplicitMdp, mut out: impl Write) -> Result<(), ModelError> {
    let header = ModelHeader {
        num_states: mdp.num_states(),
        num_choices: mdp.num_choices(),
        num_transitions: mdp.num_transitions(),
        variables: mdp.variables.clone(),
        actions: mdp.actions.clone(),
        states: mdp.states.clone(),
        labels: mdp.labels.iter().map(|(n, b)| (n.clone(), ids(b))).collect(),
        deadlocks: ids(&mdp.deadlocks),
        rewards: mdp.rewards.iter().map(|(n, r)| (n.clone(), r.clone())).collect(),
    };
    writeln!(out, "{MAGIC}")?;
    serde_json::to_writer(&mut out, &header).map_err(std::io::Error::from)?;
    out.write_all(b"\n")?;
    let mut buf = Vec::with_capacity(mdp.num_transitions() * RECORD);
    for s in 0..mdp.num_states() {
        for choice in mdp.choices(s) {
            for (dst, p) in choice.succ.iter().zip(choice.prob) {
                buf.extend_from_slice(&(s as u32).to_le_bytes());
                buf.extend_from_slice(&choice.action.0.to_le_bytes());
                buf.extend_from_slice(&dst.to_le_bytes());
                buf.extend_from_slice(&p.to_le_bytes());
            }
        }
    }
    out.write_all(&buf)?;
    out.flush()?;
    Ok(())
}

/// Canonical byte serialization, used for determinism checks.
pub fn to_bytes(mdp: &ExplicitMdp) -> Vec<u8> {
    let mut buf = Vec::new();
    write_model(mdp, &mut buf).expect("writing to memory cannot fail");
    buf
}

pub fn read_model(input: impl Read) -> Result<ExplicitMdp, ModelError> {
    let mut reader = BufReader::new(input);
    let mut line = String::new();
    reader.read_line(&mut line)?;
    if line.trim_end() != MAGIC {
        return Err(ModelError::Corrupt("missing magic line".into()));
    }
    line.clear();
    reader.read_line(&mut line)?;
    let header: ModelHeader =
        serde_json::from_str(line.trim_end()).map_err(|e| ModelError::Corrupt(format!("header: {e}")))?;
    let mut body = Vec::new();
    reader.read_to_end(&mut body)?;
    if body.len() != header.num_transitions * RECORD {
        return Err(ModelError::Corrupt(format!(
            "expected {} transition records, found {} bytes",
            header.num_transitions,
            body.len()
        )));
    }
    let n = header.num_states;
    if header.states.len() != n {
        return Err(ModelError::Corrupt("state list length differs from header count".into()));
    }

    let mut per_state = vec![0usize; n];
    let mut choice_action = Vec::new();
    let mut choice_start = vec![0usize];
    let mut succ = Vec::with_capacity(header.num_transitions);
    let mut prob = Vec::with_capacity(header.num_transitions);
    let mut current: Option<(u32, u16)> = None;
    for rec in body.chunks_exact(RECORD) {
        let src = u32::from_le_bytes(rec[0..4].try_into().unwrap());
        let act = u16::from_le_bytes(rec[4..6].try_into().unwrap());
        let dst = u32::from_le_bytes(rec[6..10].try_into().unwrap());
        let p = f64::from_le_bytes(rec[10..18].try_into().unwrap());
        if src as usize >= n || dst as usize >= n {
            return Err(ModelError::Corrupt(format!("transition {src} -> {dst} out of range")));
        }
        if current != Some((src, act)) {
            if let Some((prev, prev_act)) = current {
                if src < prev || (src == prev && act < prev_act) {
                    return Err(ModelError::Corrupt("records are not in state, action order".into()));
                }
                choice_start.push(succ.len());
            }
            per_state[src as usize] += 1;
            choice_action.push(ActionId(act));
            current = Some((src, act));
        }
        succ.push(dst);
        prob.push(p);
    }
    if current.is_some() {
        choice_start.push(succ.len());
    }
    let mut state_start = Vec::with_capacity(n + 1);
    state_start.push(0);
    for count in per_state {
        state_start.push(state_start.last().unwrap() + count);
    }
    if choice_action.len() != header.num_choices {
        return Err(ModelError::Corrupt(format!(
            "header declares {} choices, records form {}",
            header.num_choices,
            choice_action.len()
        )));
    }
    let mut rewards = Vec::new();
    for (name, values) in header.rewards {
        if values.len() != header.num_choices {
            return Err(ModelError::Corrupt(format!("reward \"{name}\" has wrong length")));
        }
        rewards.push((name, values));
    }
    let mut labels = Vec::new();
    for (name, ids) in &header.labels {
        labels.push((name.clone(), bits(n, ids)?));
    }
    Ok(ExplicitMdp {
        variables: header.variables,
        actions: header.actions,
        states: header.states,
        state_start,
        choice_action,
        choice_start,
        succ,
        prob,
        rewards,
        labels,
        deadlocks: bits(n, &header.deadlocks)?,
    })
}
