//! Policies derived from a trained one: permissive policies that lump the
//! values of one variable into blocks, and remapped policies that see a
//! transformed value of one variable.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::lang::{ActionId, SymbolicModel, VarKind};
use crate::model::StateValuation;
use crate::policy::Policy;

#[derive(Debug, Error, PartialEq)]
pub enum TransformError {
    #[error("unknown variable `{0}`")]
    UnknownVariable(String),
    #[error("variable `{0}` is not a bounded integer")]
    NotInteger(String),
    #[error("invalid partition of `{variable}`: {message}")]
    Partition { variable: String, message: String },
    #[error("invalid remap of `{variable}`: {message}")]
    Remap { variable: String, message: String },
    #[error("malformed transform spec: {0}")]
    Spec(String),
}

fn int_variable(model: &SymbolicModel, name: &str) -> Result<(usize, i64, i64), TransformError> {
    let slot = model.variable_index(name).ok_or_else(|| TransformError::UnknownVariable(name.to_string()))?;
    match model.variables[slot].kind {
        VarKind::Int { lo, hi } => Ok((slot, lo, hi)),
        VarKind::Bool => Err(TransformError::NotInteger(name.to_string())),
    }
}

/// Disjoint, sorted integer intervals covering a variable's domain.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PartitionSpec {
    pub variable: String,
    /// Inclusive `(first, last)` pairs.
    pub blocks: Vec<(i64, i64)>,
}

impl PartitionSpec {
    pub fn new(model: &SymbolicModel, variable: &str, blocks: Vec<(i64, i64)>) -> Result<Self, TransformError> {
        let (_, lo, hi) = int_variable(model, variable)?;
        let err = |message: String| TransformError::Partition { variable: variable.to_string(), message };
        let mut expected = lo;
        for &(a, b) in &blocks {
            if a > b {
                return Err(err(format!("block [{a}..{b}] is empty")));
            }
            if a != expected {
                return Err(err(format!("blocks must be sorted and contiguous; expected a block starting at {expected}, found [{a}..{b}]")));
            }
            expected = b + 1;
        }
        if expected != hi + 1 {
            return Err(err(format!("blocks cover up to {} but the domain ends at {hi}", expected - 1)));
        }
        Ok(PartitionSpec { variable: variable.to_string(), blocks })
    }

    /// Every value its own block.
    pub fn singletons(model: &SymbolicModel, variable: &str) -> Result<Self, TransformError> {
        let (_, lo, hi) = int_variable(model, variable)?;
        Self::new(model, variable, (lo..=hi).map(|v| (v, v)).collect())
    }

    /// One block covering the whole domain.
    pub fn coarsest(model: &SymbolicModel, variable: &str) -> Result<Self, TransformError> {
        let (_, lo, hi) = int_variable(model, variable)?;
        Self::new(model, variable, vec![(lo, hi)])
    }

    pub fn block_of(&self, value: i64) -> Option<(i64, i64)> {
        self.blocks.iter().copied().find(|&(a, b)| a <= value && value <= b)
    }

    /// True if every block of `self` lies inside a block of `other`.
    pub fn refines(&self, other: &PartitionSpec) -> bool {
        self.variable == other.variable
            && self.blocks.iter().all(|&(a, b)| other.blocks.iter().any(|&(c, d)| c <= a && b <= d))
    }
}

/// Blocks `{lo}, ..., {start-1}, {start..hi}`.
pub fn tail_lumping_partition(model: &SymbolicModel, variable: &str, start: i64) -> Result<PartitionSpec, TransformError> {
    let (_, lo, hi) = int_variable(model, variable)?;
    if start < lo || start > hi {
        return Err(TransformError::Partition {
            variable: variable.to_string(),
            message: format!("tail start {start} outside [{lo}..{hi}]"),
        });
    }
    let mut blocks: Vec<(i64, i64)> = (lo..start).map(|v| (v, v)).collect();
    blocks.push((start, hi));
    PartitionSpec::new(model, variable, blocks)
}

/// A total map on a variable's domain with images inside the domain.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct RemapSpec {
    pub variable: String,
    pub map: BTreeMap<i64, i64>,
}

impl RemapSpec {
    pub fn new(model: &SymbolicModel, variable: &str, map: BTreeMap<i64, i64>) -> Result<Self, TransformError> {
        let (_, lo, hi) = int_variable(model, variable)?;
        let err = |message: String| TransformError::Remap { variable: variable.to_string(), message };
        for v in lo..=hi {
            let image = *map.get(&v).ok_or_else(|| err(format!("no image for {v}")))?;
            if image < lo || image > hi {
                return Err(err(format!("image {image} of {v} outside [{lo}..{hi}]")));
            }
        }
        if let Some(extra) = map.keys().find(|&&k| k < lo || k > hi) {
            return Err(err(format!("{extra} is outside the domain")));
        }
        Ok(RemapSpec { variable: variable.to_string(), map })
    }

    pub fn identity(model: &SymbolicModel, variable: &str) -> Result<Self, TransformError> {
        let (_, lo, hi) = int_variable(model, variable)?;
        Self::new(model, variable, (lo..=hi).map(|v| (v, v)).collect())
    }

    pub fn apply(&self, value: i64) -> i64 {
        self.map.get(&value).copied().unwrap_or(value)
    }

    /// `self` first, then `then`.
    pub fn compose(&self, then: &RemapSpec) -> Result<RemapSpec, TransformError> {
        if self.variable != then.variable {
            return Err(TransformError::Remap {
                variable: self.variable.clone(),
                message: format!("cannot compose with a remap of `{}`", then.variable),
            });
        }
        let map = self.map.iter().map(|(&k, &v)| (k, then.apply(v))).collect();
        Ok(RemapSpec { variable: self.variable.clone(), map })
    }
}

/// `mu(i) = min(i, cap)`.
pub fn clamp_remap(model: &SymbolicModel, variable: &str, cap: i64) -> Result<RemapSpec, TransformError> {
    let (_, lo, hi) = int_variable(model, variable)?;
    RemapSpec::new(model, variable, (lo..=hi).map(|v| (v, v.min(cap))).collect())
}

/// Maps states to sets of actions.
pub trait PermissiveSource: Send + Sync {
    /// Sorted, duplicate-free and non-empty.
    fn actions(&self, state: &StateValuation) -> Vec<ActionId>;
}

/// A deterministic policy seen as a permissive one with singleton sets.
pub struct Singleton<P>(pub P);

impl<P: Policy> PermissiveSource for Singleton<P> {
    fn actions(&self, state: &StateValuation) -> Vec<ActionId> {
        vec![self.0.act(state)]
    }
}

/// `tau(q, i)`: the union of the base policy's actions over `(q, k)` for all
/// `k` in the block containing `i`; only the partitioned variable varies.
pub struct PermissivePolicy<P> {
    base: P,
    spec: PartitionSpec,
    slot: usize,
}

impl<P: Policy> PermissivePolicy<P> {
    pub fn spec(&self) -> &PartitionSpec {
        &self.spec
    }

    pub fn base(&self) -> &P {
        &self.base
    }
}

impl<P: Policy> PermissiveSource for PermissivePolicy<P> {
    fn actions(&self, state: &StateValuation) -> Vec<ActionId> {
        let (a, b) = self.spec.block_of(state[self.slot]).expect("partition covers the declared domain");
        let mut out: Vec<ActionId> = (a..=b).map(|k| self.base.act(&state.with(self.slot, k))).collect();
        out.sort_unstable();
        out.dedup();
        out
    }
}

pub fn permissive<P: Policy>(base: P, spec: PartitionSpec, model: &SymbolicModel) -> Result<PermissivePolicy<P>, TransformError> {
    let (slot, _, _) = int_variable(model, &spec.variable)?;
    let spec = PartitionSpec::new(model, &spec.variable, spec.blocks)?;
    Ok(PermissivePolicy { base, spec, slot })
}

/// `tau(q, i) = pi(q, mu(i))`.
pub struct RemappedPolicy<P> {
    base: P,
    spec: RemapSpec,
    slot: usize,
}

impl<P: Policy> Policy for RemappedPolicy<P> {
    fn act(&self, state: &StateValuation) -> ActionId {
        let v = state[self.slot];
        let mapped = self.spec.apply(v);
        if mapped == v {
            self.base.act(state)
        } else {
            self.base.act(&state.with(self.slot, mapped))
        }
    }
}

pub fn remap<P: Policy>(base: P, spec: RemapSpec, model: &SymbolicModel) -> Result<RemappedPolicy<P>, TransformError> {
    let (slot, _, _) = int_variable(model, &spec.variable)?;
    let spec = RemapSpec::new(model, &spec.variable, spec.map)?;
    Ok(RemappedPolicy { base, spec, slot })
}

/// A parsed transform spec.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum TransformSpec {
    Partition(PartitionSpec),
    Remap(RemapSpec),
}

#[derive(Debug, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct Helpers {
    tail_start: Option<i64>,
    clamp_cap: Option<i64>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct SpecFile {
    variable: String,
    kind: String,
    #[serde(default)]
    blocks: Option<Vec<(i64, i64)>>,
    #[serde(default)]
    pairs: Option<Vec<(i64, i64)>>,
    #[serde(default)]
    helpers: Option<Helpers>,
}

/// Parses the JSON spec format
/// `{variable, kind: "partition"|"remap", blocks|pairs, helpers}` where
/// `helpers` is `{"tail_start": n}` or `{"clamp_cap": n}`.
pub fn parse_transform_spec(json: &str, model: &SymbolicModel) -> Result<TransformSpec, TransformError> {
    let file: SpecFile = serde_json::from_str(json).map_err(|e| TransformError::Spec(e.to_string()))?;
    let helpers = file.helpers.unwrap_or_default();
    match file.kind.as_str() {
        "partition" => match (file.blocks, helpers.tail_start) {
            (Some(blocks), None) => Ok(TransformSpec::Partition(PartitionSpec::new(model, &file.variable, blocks)?)),
            (None, Some(start)) => Ok(TransformSpec::Partition(tail_lumping_partition(model, &file.variable, start)?)),
            _ => Err(TransformError::Spec("a partition needs exactly one of `blocks` or `helpers.tail_start`".into())),
        },
        "remap" => match (file.pairs, helpers.clamp_cap) {
            (Some(pairs), None) => {
                Ok(TransformSpec::Remap(RemapSpec::new(model, &file.variable, pairs.into_iter().collect())?))
            }
            (None, Some(cap)) => Ok(TransformSpec::Remap(clamp_remap(model, &file.variable, cap)?)),
            _ => Err(TransformError::Spec("a remap needs exactly one of `pairs` or `helpers.clamp_cap`".into())),
        },
        other => Err(TransformError::Spec(format!("unknown kind `{other}`"))),
    }
}

/// Parses the short forms `var:tail=N` and `var:clamp=N`.
pub fn parse_short_spec(text: &str, model: &SymbolicModel) -> Result<TransformSpec, TransformError> {
    let bad = || TransformError::Spec(format!("expected `var:tail=N` or `var:clamp=N`, found `{text}`"));
    let (var, rest) = text.split_once(':').ok_or_else(bad)?;
    let (kind, n) = rest.split_once('=').ok_or_else(bad)?;
    let n: i64 = n.trim().parse().map_err(|_| bad())?;
    match kind.trim() {
        "tail" => Ok(TransformSpec::Partition(tail_lumping_partition(model, var.trim(), n)?)),
        "clamp" => Ok(TransformSpec::Remap(clamp_remap(model, var.trim(), n)?)),
        _ => Err(bad()),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lang::{parse_model, ConstOverrides};

    fn model() -> SymbolicModel {
        let src = "mdp module m fuel:[0..10] init 10; b: bool init false; [a] true -> true; [z] true -> true; endmodule";
        parse_model(src, &ConstOverrides::new()).unwrap()
    }

    #[test]
    fn tail_partitions() {
        let m = model();
        let p = tail_lumping_partition(&m, "fuel", 8).unwrap();
        assert_eq!(p.blocks.len(), 9);
        assert_eq!(*p.blocks.last().unwrap(), (8, 10));
        let p = tail_lumping_partition(&m, "fuel", 10).unwrap();
        assert_eq!(p, PartitionSpec::singletons(&m, "fuel").unwrap());
        let p = tail_lumping_partition(&m, "fuel", 0).unwrap();
        assert_eq!(p.blocks, vec![(0, 10)]);
        assert!(tail_lumping_partition(&m, "fuel", 11).is_err());
        assert!(matches!(tail_lumping_partition(&m, "b", 0), Err(TransformError::NotInteger(_))));
    }

    #[test]
    fn partition_validation() {
        let m = model();
        assert!(PartitionSpec::new(&m, "fuel", vec![(0, 4), (6, 10)]).is_err());
        assert!(PartitionSpec::new(&m, "fuel", vec![(0, 4), (4, 10)]).is_err());
        assert!(PartitionSpec::new(&m, "fuel", vec![(0, 9)]).is_err());
        assert!(PartitionSpec::new(&m, "nope", vec![(0, 9)]).is_err());
    }

    #[test]
    fn clamp_composition_is_min() {
        let m = model();
        let six = clamp_remap(&m, "fuel", 6).unwrap();
        let four = clamp_remap(&m, "fuel", 4).unwrap();
        assert_eq!(six.compose(&four).unwrap(), four);
        assert!(clamp_remap(&m, "fuel", 11).is_ok());
        assert!(RemapSpec::new(&m, "fuel", (0..=10).map(|v| (v, v + 1)).collect()).is_err());
    }

    #[test]
    fn spec_files() {
        let m = model();
        let t = parse_transform_spec(r#"{"variable":"fuel","kind":"partition","helpers":{"tail_start":8}}"#, &m).unwrap();
        assert_eq!(t, TransformSpec::Partition(tail_lumping_partition(&m, "fuel", 8).unwrap()));
        let t = parse_transform_spec(r#"{"variable":"fuel","kind":"remap","helpers":{"clamp_cap":6}}"#, &m).unwrap();
        assert_eq!(t, TransformSpec::Remap(clamp_remap(&m, "fuel", 6).unwrap()));
        let t = parse_transform_spec(r#"{"variable":"fuel","kind":"partition","blocks":[[0,5],[6,10]]}"#, &m).unwrap();
        assert!(matches!(t, TransformSpec::Partition(p) if p.blocks.len() == 2));
        assert!(parse_transform_spec(r#"{"variable":"fuel","kind":"blur"}"#, &m).is_err());
        assert_eq!(parse_short_spec("fuel:clamp=6", &m).unwrap(), TransformSpec::Remap(clamp_remap(&m, "fuel", 6).unwrap()));
        assert!(parse_short_spec("fuel=6", &m).is_err());
    }
}
