//! `info`, `build`, `simulate`, `train` and `runs`.

use std::time::Instant;

use rand::seq::IndexedRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde_json::{json, Value};

use rlcheck::lang::{SymbolicModel, VarKind};
use rlcheck::model::{build_mdp, write_model, InvalidActionHandler, Simulator};
use rlcheck::policy::{
    deep_q_train, policy_to_json, q_learning_train, AnyPolicy, DqnConfig, Policy, QLearnConfig, TrainingMetrics,
};
use rlcheck::runs::{metric, CommitOutcome, RunManifest, Tracker};
use rlcheck::util::{derive_seed, format_human};

use crate::args::{BuildArgs, InfoArgs, RunsCommand, SimulateArgs, TrainArgs};
use crate::error::{CliError, CliResult};
use crate::source::{limits, load_model, load_policy_text, read_text, run_model, run_policy_text, MODEL_ARTIFACT, POLICY_ARTIFACT};

fn describe_variable(model: &SymbolicModel, i: usize) -> String {
    let v = &model.variables[i];
    match v.kind {
        VarKind::Int { lo, hi } => format!("{}:[{lo}..{hi}] init {}", v.name, v.init),
        VarKind::Bool => format!("{}:bool init {}", v.name, v.init != 0),
    }
}

pub fn info(args: InfoArgs) -> CliResult<()> {
    let loaded = load_model(&args.model)?;
    let m = &loaded.model;
    let user_actions: Vec<&str> =
        m.actions.iter().filter(|a| !a.starts_with(rlcheck::lang::SILENT_PREFIX)).map(String::as_str).collect();
    let built = if args.build { Some(build_mdp(m, Default::default())?) } else { None };
    if args.json {
        let mut out = json!({
            "kind": m.kind.to_string(),
            "variables": (0..m.variables.len()).map(|i| describe_variable(m, i)).collect::<Vec<_>>(),
            "actions": m.actions,
            "user_actions": user_actions,
            "labels": m.labels.iter().map(|(n, _)| n).collect::<Vec<_>>(),
            "rewards": m.rewards.iter().map(|r| &r.name).collect::<Vec<_>>(),
            "constants": m.constants.iter().map(|c| (c.name.clone(), c.value.to_string())).collect::<Vec<_>>(),
        });
        if let Some(mdp) = &built {
            out["states"] = json!(mdp.num_states());
            out["choices"] = json!(mdp.num_choices());
            out["transitions"] = json!(mdp.num_transitions());
        }
        println!("{}", serde_json::to_string_pretty(&out).expect("json"));
        return Ok(());
    }
    println!("kind: {}", m.kind);
    println!("variables ({}):", m.variables.len());
    for i in 0..m.variables.len() {
        println!("  {}", describe_variable(m, i));
    }
    println!("actions ({} user, {} total): {}", user_actions.len(), m.actions.len(), m.actions.join(", "));
    println!("labels: {}", m.labels.iter().map(|(n, _)| n.as_str()).collect::<Vec<_>>().join(", "));
    println!("rewards: {}", m.rewards.iter().map(|r| r.name.as_str()).collect::<Vec<_>>().join(", "));
    if !m.constants.is_empty() {
        let consts: Vec<String> = m.constants.iter().map(|c| format!("{}={}", c.name, c.value)).collect();
        println!("constants: {}", consts.join(", "));
    }
    if let Some(mdp) = &built {
        println!("states: {}, choices: {}, transitions: {}", mdp.num_states(), mdp.num_choices(), mdp.num_transitions());
    }
    Ok(())
}

pub fn build(args: BuildArgs) -> CliResult<()> {
    let loaded = load_model(&args.model)?;
    let started = Instant::now();
    let mdp = build_mdp(&loaded.model, limits(&args.limits))?;
    let seconds = started.elapsed().as_secs_f64();
    if let Some(path) = &args.export {
        let file = std::fs::File::create(path)
            .map_err(|e| CliError::new(crate::error::IO, format!("{}: {e}", path.display())))?;
        write_model(&mdp, std::io::BufWriter::new(file))?;
    }
    let deadlocks = mdp.deadlocks.count_ones();
    if args.json {
        let out = json!({
            "states": mdp.num_states(),
            "choices": mdp.num_choices(),
            "transitions": mdp.num_transitions(),
            "deadlocks": deadlocks,
            "build_seconds": metric(seconds),
        });
        println!("{}", serde_json::to_string_pretty(&out).expect("json"));
    } else {
        println!(
            "states {}, choices {}, transitions {}, deadlocks {}, build {} s",
            mdp.num_states(),
            mdp.num_choices(),
            mdp.num_transitions(),
            deadlocks,
            format_human(seconds)
        );
    }
    Ok(())
}

pub fn simulate(tracker: &Tracker, args: SimulateArgs) -> CliResult<()> {
    let (loaded, policy) = match &args.run {
        Some(id) => {
            let run = tracker.load(id)?;
            let loaded = run_model(tracker, &run, &args.model)?;
            let policy = load_policy_text(&run_policy_text(tracker, &run)?, &loaded.model)?;
            (loaded, Some(policy))
        }
        None => {
            let loaded = load_model(&args.model)?;
            let policy = match &args.policy {
                Some(path) => Some(load_policy_text(&read_text(path)?, &loaded.model)?),
                None => None,
            };
            (loaded, policy)
        }
    };
    let model = &loaded.model;
    let handler = match args.invalid_action.as_deref().unwrap_or("error") {
        "error" => InvalidActionHandler::Error,
        "self-loop" => InvalidActionHandler::SelfLoopZeroReward,
        other => return Err(CliError::usage(format!("unknown --invalid-action `{other}` (error, self-loop)"))),
    };
    let mut sim = Simulator::new(model).with_handler(handler);
    if let Some(reward) = args.reward.clone().or_else(|| loaded.default_reward()) {
        sim = sim.with_reward(&reward)?;
    }
    if let Some(label) = &args.target {
        sim = sim.with_target(model.label(label)?.clone());
    }
    let seed = args.seed.unwrap_or(0);
    let mut env_rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, "env"));
    let mut agent_rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, "agent"));
    let max_steps = args.max_steps.unwrap_or(100);
    for episode in 0..args.episodes.unwrap_or(1) {
        let mut state = sim.reset();
        let mut total = 0.0;
        let mut steps = 0;
        while steps < max_steps && !sim.is_terminal(&state)? {
            let action = match &policy {
                Some(p) => p.act(&state),
                None => *sim.enabled_actions(&state)?.choose(&mut agent_rng).expect("non-terminal state has actions"),
            };
            let step = sim.step(&state, action, &mut env_rng)?;
            if args.trace {
                println!(
                    "  {} --{}--> {} reward {}",
                    state.display(model),
                    model.action_name(action),
                    step.next_state.display(model),
                    format_human(step.reward)
                );
            }
            total += step.reward;
            steps += 1;
            state = step.next_state;
            if step.terminal {
                break;
            }
        }
        println!("episode {episode}: reward {}, steps {steps}, final {}", format_human(total), state.display(model));
    }
    Ok(())
}

/// Ten equal slices of the episode trace, averaged.
fn reward_trace_summary(rewards: &[f64]) -> Vec<Value> {
    let n = rewards.len();
    if n == 0 {
        return Vec::new();
    }
    let buckets = n.min(10);
    (0..buckets)
        .map(|b| {
            let slice = &rewards[b * n / buckets..(b + 1) * n / buckets];
            metric(slice.iter().sum::<f64>() / slice.len() as f64)
        })
        .collect()
}

fn training_metrics(m: &TrainingMetrics) -> Value {
    let n = m.episode_rewards.len().max(1) as f64;
    json!({
        "episodes": m.episode_rewards.len(),
        "total_steps": m.total_steps,
        "learning_steps": m.learning_steps,
        "final_epsilon": metric(m.final_epsilon),
        "mean_reward": metric(m.episode_rewards.iter().sum::<f64>() / n),
        "mean_reward_last_100": metric(m.trailing_mean(100)),
        "min_reward": metric(m.episode_rewards.iter().copied().fold(f64::INFINITY, f64::min)),
        "max_reward": metric(m.episode_rewards.iter().copied().fold(f64::NEG_INFINITY, f64::max)),
        "mean_length": metric(m.episode_lengths.iter().sum::<usize>() as f64 / n),
        "reward_trace": reward_trace_summary(&m.episode_rewards),
    })
}

pub fn train(tracker: &Tracker, args: TrainArgs) -> CliResult<()> {
    let loaded = load_model(&args.model)?;
    let model = &loaded.model;
    let agent = args.agent.clone().unwrap_or_else(|| "qlearning".into());
    let d = QLearnConfig::default();
    let base = QLearnConfig {
        episodes: args.episodes.unwrap_or(d.episodes),
        max_steps_per_episode: args.max_steps.unwrap_or(d.max_steps_per_episode),
        alpha: args.alpha.unwrap_or(d.alpha),
        gamma: args.gamma.unwrap_or(d.gamma),
        epsilon_start: args.epsilon.unwrap_or(d.epsilon_start),
        epsilon_decay: args.epsilon_decay.unwrap_or(d.epsilon_decay),
        epsilon_min: args.epsilon_min.unwrap_or(d.epsilon_min),
        seed: args.seed.unwrap_or(d.seed),
    };
    let reward = args
        .reward
        .clone()
        .or_else(|| loaded.default_reward())
        .ok_or_else(|| CliError::usage("model has no reward structure; pass --reward"))?;
    let target = args.target.as_deref();
    let (policy, metrics, hyper) = match agent.as_str() {
        "qlearning" => {
            let (p, m) = q_learning_train(model, &base, target, &reward).map_err(|e| CliError::from(e).in_training())?;
            (AnyPolicy::Tabular(p), m, serde_json::to_value(&base).expect("json"))
        }
        "deepq" => {
            let d = DqnConfig::default();
            let cfg = DqnConfig {
                base: base.clone(),
                hidden: args.hidden.clone().unwrap_or(d.hidden),
                batch_size: args.batch_size.unwrap_or(d.batch_size),
                replay_capacity: args.replay_capacity.unwrap_or(d.replay_capacity),
                target_sync_interval: args.target_sync.unwrap_or(d.target_sync_interval),
                learning_rate: args.learning_rate.unwrap_or(d.learning_rate),
            };
            let (p, m) = deep_q_train(model, &cfg, target, &reward).map_err(|e| CliError::from(e).in_training())?;
            (AnyPolicy::Mlp(p), m, serde_json::to_value(&cfg).expect("json"))
        }
        other => return Err(CliError::usage(format!("unknown agent `{other}` (qlearning, deepq)"))),
    };
    let mut config = loaded.snapshot.clone();
    config["agent"] = json!(agent);
    config["hyperparameters"] = hyper;
    config["target"] = json!(target);
    config["reward"] = json!(reward);
    let mut run = tracker.begin("train", config, base.seed, None);
    run.metrics = training_metrics(&metrics);
    run.add_artifact(POLICY_ARTIFACT, (policy_to_json(&policy, model) + "\n").into_bytes());
    if let Some(text) = &loaded.file_source {
        run.add_artifact(MODEL_ARTIFACT, text.clone().into_bytes());
    }
    let (manifest, outcome) = tracker.commit(run)?;
    if args.json {
        println!("{}", serde_json::to_string_pretty(&manifest).expect("json"));
    } else {
        print_commit(tracker, &manifest, outcome);
        println!(
            "episodes {}, mean reward (last 100) {}, final epsilon {}",
            metrics.episode_rewards.len(),
            format_human(metrics.trailing_mean(100)),
            format_human(metrics.final_epsilon)
        );
        if let Some(path) = tracker.artifact_path(&manifest, POLICY_ARTIFACT) {
            println!("policy {}", path.display());
        }
    }
    Ok(())
}

pub fn print_commit(tracker: &Tracker, manifest: &RunManifest, outcome: CommitOutcome) {
    let note = match outcome {
        CommitOutcome::Created => "",
        CommitOutcome::Unchanged => " (identical run already recorded)",
    };
    println!("run {}{note}", manifest.run_id);
    println!("manifest {}", tracker.run_dir(&manifest.run_id).join("manifest.json").display());
}

fn summary(m: &RunManifest) -> String {
    let src = m.config.get("env").or_else(|| m.config.get("model")).and_then(Value::as_str).unwrap_or("-");
    match m.command.as_str() {
        "train" => format!(
            "{src} {} mean_last_100={}",
            m.config.get("agent").and_then(Value::as_str).unwrap_or("?"),
            m.metrics.get("mean_reward_last_100").and_then(Value::as_str).map(short).unwrap_or_default()
        ),
        _ => {
            let props = m.metrics.get("properties").and_then(Value::as_array).map(Vec::len).unwrap_or(0);
            let rows = m.metrics.get("rows").and_then(Value::as_u64);
            match rows {
                Some(r) => format!("{src} {r} rows"),
                None => format!("{src} {props} properties"),
            }
        }
    }
}

fn short(text: &str) -> String {
    text.parse::<f64>().map(format_human).unwrap_or_else(|_| text.to_string())
}

pub fn runs(tracker: &Tracker, cmd: RunsCommand) -> CliResult<()> {
    match cmd {
        RunsCommand::List { json } => {
            let runs = tracker.list()?;
            if json {
                println!("{}", serde_json::to_string_pretty(&runs).expect("json"));
                return Ok(());
            }
            println!("{:<16}  {:<8}  {:<16}  {:>10}  summary", "run_id", "command", "parent", "created");
            for r in &runs {
                println!(
                    "{:<16}  {:<8}  {:<16}  {:>10}  {}",
                    r.run_id,
                    r.command,
                    r.parent_run_id.as_deref().unwrap_or("-"),
                    r.created_unix,
                    summary(r)
                );
            }
        }
        RunsCommand::Show { id, json } => {
            let r = tracker.load(&id)?;
            if json {
                println!("{}", serde_json::to_string_pretty(&r).expect("json"));
                return Ok(());
            }
            println!("run {}", r.run_id);
            println!("command {}", r.command);
            println!("parent {}", r.parent_run_id.as_deref().unwrap_or("-"));
            println!("seed {}", r.seed);
            println!("code version {}", r.code_version);
            println!("created {}", r.created_unix);
            println!("config {}", serde_json::to_string(&r.config).expect("json"));
            println!("metrics {}", serde_json::to_string(&r.metrics).expect("json"));
            for (name, a) in &r.artifacts {
                println!("artifact {name} {} sha256={}", tracker.run_dir(&r.run_id).join(&a.path).display(), a.sha256);
            }
        }
    }
    Ok(())
}
