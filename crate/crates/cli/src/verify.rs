//! `verify` and `sweep`: policy-induced models and their properties.

use std::time::Instant;

use serde_json::{json, Value};

use rlcheck::checker::{check, parse_property, CheckOptions, CheckResult, Property};
use rlcheck::induced::{
    build_induced_dtmc, build_induced_mdp, EmptyIntersectionRule, InducedProvenance, InvalidActionRule,
};
use rlcheck::lang::{parse_overrides, SymbolicModel};
use rlcheck::model::{to_bytes, BuildLimits, ExplicitMdp};
use rlcheck::policy::{model_fingerprint, Policy};
use rlcheck::runs::{metric, Tracker};
use rlcheck::transforms::{
    clamp_remap, parse_short_spec, parse_transform_spec, permissive, remap, tail_lumping_partition, PartitionSpec,
    RemapSpec, TransformSpec,
};
use rlcheck::util::{format_human, format_machine, sha256_hex};

use crate::args::{ModelArgs, PolicySourceArgs, SweepArgs, VerifyArgs};
use crate::commands::print_commit;
use crate::error::{CliError, CliResult};
use crate::source::{limits, load_model, load_policy_text, read_text, run_model, run_policy_text, LoadedModel};

/// Model, policy text and parent run resolved from `--run` or `--policy`.
struct Source {
    loaded: LoadedModel,
    policy_text: String,
    parent: Option<String>,
}

fn resolve_source(tracker: &Tracker, source: &PolicySourceArgs, model: &ModelArgs) -> CliResult<Source> {
    if let Some(id) = &source.run {
        let run = tracker.load(id)?;
        if run.command != "train" {
            return Err(CliError::usage(format!("run {} is a `{}` run, not a training run", run.run_id, run.command)));
        }
        let loaded = run_model(tracker, &run, model)?;
        let policy_text = run_policy_text(tracker, &run)?;
        return Ok(Source { loaded, policy_text, parent: Some(run.run_id) });
    }
    let Some(path) = &source.policy else {
        return Err(CliError::usage("one of --run or --policy is required"));
    };
    let loaded = load_model(model)?;
    Ok(Source { loaded, policy_text: read_text(path)?, parent: None })
}

fn invalid_action_rule(text: Option<&str>) -> CliResult<InvalidActionRule> {
    match text.unwrap_or("error") {
        "error" => Ok(InvalidActionRule::Error),
        "fallback-first" => Ok(InvalidActionRule::FallbackFirst),
        other => Err(CliError::usage(format!("unknown --invalid-action `{other}` (error, fallback-first)"))),
    }
}

fn empty_rule(text: Option<&str>) -> CliResult<EmptyIntersectionRule> {
    match text.unwrap_or("full-act") {
        "full-act" => Ok(EmptyIntersectionRule::FullAct),
        "error" => Ok(EmptyIntersectionRule::Error),
        other => Err(CliError::usage(format!("unknown --empty-intersection `{other}` (full-act, error)"))),
    }
}

fn parse_props(texts: &[String]) -> CliResult<Vec<Property>> {
    if texts.is_empty() {
        return Err(CliError::usage("at least one --prop is required"));
    }
    texts.iter().map(|t| parse_property(t).map_err(CliError::from)).collect()
}

/// Properties of a deterministic policy use P, T or R; those of a
/// permissive one need min/max.
fn check_quantifiers(props: &[Property], permissive: bool) -> CliResult<()> {
    for p in props {
        match (permissive, p.quantifier.opt().is_some()) {
            (true, false) => {
                return Err(CliError::usage(format!("`{p}`: a permissive policy induces an MDP; use a min/max quantifier")))
            }
            (false, true) => {
                return Err(CliError::usage(format!("`{p}` ranges over schedulers; use P, T or R for a policy")))
            }
            _ => {}
        }
    }
    Ok(())
}

/// What is applied to the base policy: an optional remap, then an optional
/// partition.
#[derive(Default)]
struct Transforms {
    remap: Option<RemapSpec>,
    partition: Option<PartitionSpec>,
}

impl Transforms {
    fn add(&mut self, spec: TransformSpec) -> CliResult<()> {
        match spec {
            TransformSpec::Remap(r) => {
                self.remap = Some(match self.remap.take() {
                    Some(first) => first.compose(&r)?,
                    None => r,
                })
            }
            TransformSpec::Partition(p) => {
                if self.partition.is_some() {
                    return Err(CliError::usage("only one partition can be applied"));
                }
                self.partition = Some(p);
            }
        }
        Ok(())
    }

    fn describe(&self) -> Option<String> {
        let mut parts = Vec::new();
        if let Some(r) = &self.remap {
            parts.push(format!("remap {} {}", r.variable, serde_json::to_string(&r.map).expect("json")));
        }
        if let Some(p) = &self.partition {
            parts.push(format!("partition {} {}", p.variable, serde_json::to_string(&p.blocks).expect("json")));
        }
        (!parts.is_empty()).then(|| parts.join("; "))
    }
}

struct Induced {
    mdp: ExplicitMdp,
    fallback_count: usize,
    build_seconds: f64,
    kind: &'static str,
}

fn build_induced(
    model: &SymbolicModel,
    policy_text: &str,
    transforms: &Transforms,
    limits: BuildLimits,
    invalid: InvalidActionRule,
    empty: EmptyIntersectionRule,
) -> CliResult<Induced> {
    let base = load_policy_text(policy_text, model)?;
    let mut policy: Box<dyn Policy> = Box::new(base);
    if let Some(r) = &transforms.remap {
        policy = Box::new(remap(policy, r.clone(), model)?);
    }
    let started = Instant::now();
    let (mdp, fallback_count, kind) = match &transforms.partition {
        Some(p) => {
            let tau = permissive(policy, p.clone(), model)?;
            let induced = build_induced_mdp(model, &tau, limits, empty)?;
            (induced.mdp, induced.fallback_count, "mdp")
        }
        None => {
            let induced = build_induced_dtmc(model, policy.as_ref(), limits, invalid)?;
            (induced.mdp, induced.fallback_count, "dtmc")
        }
    };
    Ok(Induced { mdp, fallback_count, build_seconds: started.elapsed().as_secs_f64(), kind })
}

fn result_json(prop: &Property, r: &CheckResult, fallback_count: usize) -> Value {
    json!({
        "property": prop.to_string(),
        "value": metric(r.value),
        "iterations": r.iterations,
        "residual": metric(r.residual),
        "states": r.states,
        "choices": r.choices,
        "transitions": r.transitions,
        "fallback_count": fallback_count,
    })
}

pub fn verify(tracker: &Tracker, args: VerifyArgs) -> CliResult<()> {
    let props = parse_props(&args.props)?;
    let source = resolve_source(tracker, &args.source, &args.model)?;
    let model = &source.loaded.model;
    let mut transforms = Transforms::default();
    if let Some(text) = &args.remap {
        match parse_short_spec(text, model)? {
            spec @ TransformSpec::Remap(_) => transforms.add(spec)?,
            _ => return Err(CliError::usage("--remap expects VAR:clamp=N")),
        }
    }
    if let Some(text) = &args.permissive {
        match parse_short_spec(text, model)? {
            spec @ TransformSpec::Partition(_) => transforms.add(spec)?,
            _ => return Err(CliError::usage("--permissive expects VAR:tail=N")),
        }
    }
    if let Some(path) = &args.transform {
        transforms.add(parse_transform_spec(&read_text(path)?, model)?)?;
    }
    check_quantifiers(&props, transforms.partition.is_some())?;
    let invalid = invalid_action_rule(args.invalid_action.as_deref())?;
    let empty = empty_rule(args.empty_intersection.as_deref())?;
    let induced = build_induced(model, &source.policy_text, &transforms, limits(&args.limits), invalid, empty)?;

    let mut results = Vec::new();
    for prop in &props {
        let r = check(model, &induced.mdp, prop, &CheckOptions::default())?;
        if !args.json {
            println!("{prop} = {}", format_human(r.value));
            println!(
                "  states {}, choices {}, transitions {}, fallback {}, iterations {}, build {} s, check {} s",
                r.states,
                r.choices,
                r.transitions,
                induced.fallback_count,
                r.iterations,
                format_human(induced.build_seconds),
                format_human(r.check_seconds)
            );
        }
        results.push(result_json(prop, &r, induced.fallback_count));
    }

    let provenance = InducedProvenance {
        model_fingerprint: model_fingerprint(model),
        policy_fingerprint: sha256_hex(source.policy_text.as_bytes()),
        transform: transforms.describe(),
        induced_kind: induced.kind.to_string(),
        invalid_action: invalid,
        empty_intersection: empty,
        fallback_count: induced.fallback_count,
        states: induced.mdp.num_states(),
        choices: induced.mdp.num_choices(),
        transitions: induced.mdp.num_transitions(),
    };
    let mut config = source.loaded.snapshot.clone();
    config["props"] = json!(props.iter().map(ToString::to_string).collect::<Vec<_>>());
    config["transform"] = json!(transforms.describe());
    config["invalid_action"] = json!(invalid);
    config["empty_intersection"] = json!(empty);
    config["policy_sha256"] = json!(provenance.policy_fingerprint);
    config["limits"] = json!(limits(&args.limits));
    let mut run = tracker.begin("verify", config, 0, source.parent.clone());
    run.metrics = json!({ "properties": results });
    run.add_artifact("induced.provenance.json", (provenance.to_json() + "\n").into_bytes());
    if args.export_model {
        run.add_artifact("induced.bin", to_bytes(&induced.mdp));
    }
    let (manifest, outcome) = tracker.commit(run)?;
    if args.json {
        println!("{}", serde_json::to_string_pretty(&manifest).expect("json"));
    } else {
        print_commit(tracker, &manifest, outcome);
    }
    Ok(())
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum AxisKind {
    Const,
    Remap,
    Partition,
}

struct Axis {
    kind: AxisKind,
    name: String,
    lo: i64,
    hi: i64,
}

fn parse_axis(text: &str) -> CliResult<Axis> {
    let bad = || CliError::usage(format!("expected --axis KIND:NAME=A..B with KIND const, remap or partition; found `{text}`"));
    let (kind, rest) = text.split_once(':').ok_or_else(bad)?;
    let kind = match kind {
        "const" => AxisKind::Const,
        "remap" => AxisKind::Remap,
        "partition" => AxisKind::Partition,
        _ => return Err(bad()),
    };
    let (name, range) = rest.split_once('=').ok_or_else(bad)?;
    let (lo, hi) = range.split_once("..").ok_or_else(bad)?;
    let lo: i64 = lo.trim().parse().map_err(|_| bad())?;
    let hi: i64 = hi.trim().parse().map_err(|_| bad())?;
    if lo > hi {
        return Err(CliError::usage(format!("empty range {lo}..{hi}")));
    }
    Ok(Axis { kind, name: name.trim().to_string(), lo, hi })
}

struct Row {
    axis_value: i64,
    property: String,
    value: f64,
    note: String,
}

/// Everything one grid point needs; errors become NaN cells.
fn sweep_point(
    source: &Source,
    args: &SweepArgs,
    axis: &Axis,
    v: i64,
    props: &[Property],
    invalid: InvalidActionRule,
) -> Result<(SymbolicModel, Induced), CliError> {
    let mut transforms = Transforms::default();
    let model = match axis.kind {
        AxisKind::Const => {
            let mut overrides = parse_overrides(source.loaded.snapshot.get("const").and_then(Value::as_str).unwrap_or(""))?;
            overrides.extend(parse_overrides(args.model.consts.as_deref().unwrap_or(""))?);
            overrides.insert(axis.name.clone(), rlcheck::lang::Value::Int(v));
            let text: String = overrides.iter().map(|(k, x)| format!("{k}={x}")).collect::<Vec<_>>().join(",");
            let mut margs = ModelArgs { consts: Some(text), ..Default::default() };
            if let Some(env) = &source.loaded.env {
                margs.env = Some(env.clone());
                load_model(&margs)?.model
            } else {
                let text = source.loaded.file_source.as_deref().expect("file models keep their source");
                rlcheck::lang::parse_model(text, &parse_overrides(margs.consts.as_deref().unwrap_or(""))?)?
            }
        }
        _ => source.loaded.model.clone(),
    };
    match axis.kind {
        AxisKind::Const => {}
        AxisKind::Remap => transforms.add(TransformSpec::Remap(clamp_remap(&model, &axis.name, v)?))?,
        AxisKind::Partition => {
            transforms.add(TransformSpec::Partition(tail_lumping_partition(&model, &axis.name, v)?))?
        }
    }
    check_quantifiers(props, transforms.partition.is_some())?;
    let induced =
        build_induced(&model, &source.policy_text, &transforms, limits(&args.limits), invalid, EmptyIntersectionRule::FullAct)?;
    Ok((model, induced))
}

pub fn sweep(tracker: &Tracker, args: SweepArgs) -> CliResult<()> {
    let axis = parse_axis(args.axis.as_deref().ok_or_else(|| CliError::usage("--axis is required"))?)?;
    let props = parse_props(&args.props)?;
    let source = resolve_source(tracker, &args.source, &args.model)?;
    let invalid = invalid_action_rule(args.invalid_action.as_deref())?;
    let mut rows = Vec::new();
    for v in axis.lo..=axis.hi {
        match sweep_point(&source, &args, &axis, v, &props, invalid) {
            Ok((model, induced)) => {
                for prop in &props {
                    let (value, note) = match check(&model, &induced.mdp, prop, &CheckOptions::default()) {
                        Ok(r) => (r.value, String::new()),
                        Err(e) => (f64::NAN, CliError::from(e).to_string()),
                    };
                    rows.push(Row { axis_value: v, property: prop.to_string(), value, note });
                }
            }
            Err(e) => {
                for prop in &props {
                    rows.push(Row { axis_value: v, property: prop.to_string(), value: f64::NAN, note: e.to_string() });
                }
            }
        }
    }

    let mut writer = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(Vec::new());
    writer.write_record(["axis_value", "property", "value", "note"])?;
    for r in &rows {
        let value = if r.value.is_nan() { "NaN".to_string() } else { format_machine(r.value) };
        writer.write_record([r.axis_value.to_string(), r.property.clone(), value, r.note.clone()])?;
    }
    let table = writer.into_inner().map_err(|e| CliError::new(crate::error::IO, e.to_string()))?;
    print!("{}", String::from_utf8_lossy(&table));
    if let Some(path) = &args.out {
        std::fs::write(path, &table).map_err(|e| CliError::new(crate::error::IO, format!("{}: {e}", path.display())))?;
    }

    let mut config = source.loaded.snapshot.clone();
    config["axis"] = json!(args.axis);
    config["props"] = json!(props.iter().map(ToString::to_string).collect::<Vec<_>>());
    config["invalid_action"] = json!(invalid);
    config["policy_sha256"] = json!(sha256_hex(source.policy_text.as_bytes()));
    config["limits"] = json!(limits(&args.limits));
    let mut run = tracker.begin("sweep", config, 0, source.parent.clone());
    let failed = rows.iter().filter(|r| r.value.is_nan()).count();
    run.metrics = json!({ "rows": rows.len(), "failed_cells": failed });
    run.add_artifact("sweep.csv", table);
    let (manifest, outcome) = tracker.commit(run)?;
    eprintln!("run {}{}", manifest.run_id, if matches!(outcome, rlcheck::runs::CommitOutcome::Unchanged) { " (identical run already recorded)" } else { "" });
    Ok(())
}
