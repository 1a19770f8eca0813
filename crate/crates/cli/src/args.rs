//! Command-line surface. Every option struct doubles as the schema of the
//! JSON config file: keys are the field names, flags given on the command
//! line override them.

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};

#[derive(Debug, Parser)]
#[command(name = "rlcheck", version, about = "Train RL policies on PRISM-subset models and verify them")]
pub struct Cli {
    /// Directory holding tracked runs.
    #[arg(long, global = true, default_value = "runs")]
    pub runs_dir: PathBuf,
    /// JSON file with default values for the subcommand's options.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Describe a model: variables, actions, labels, rewards.
    Info(InfoArgs),
    /// Build the full explicit MDP and report its size.
    Build(BuildArgs),
    /// Run episodes in the simulator.
    Simulate(SimulateArgs),
    /// Train a policy and record the run.
    Train(TrainArgs),
    /// Check properties of a policy on its induced model.
    Verify(VerifyArgs),
    /// Verify a policy over a parameter grid and write a CSV table.
    Sweep(SweepArgs),
    /// Inspect tracked runs.
    #[command(subcommand)]
    Runs(RunsCommand),
}

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelArgs {
    /// Built-in benchmark name.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub env: Option<String>,
    /// Path to a PRISM-subset model file.
    #[arg(long, conflicts_with = "env")]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub model: Option<PathBuf>,
    /// Constant overrides, `NAME=VALUE,NAME=VALUE`.
    #[arg(long = "const")]
    #[serde(rename = "const", skip_serializing_if = "Option::is_none")]
    pub consts: Option<String>,
}

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LimitArgs {
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub max_states: Option<usize>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub max_transitions: Option<usize>,
}

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct InfoArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub model: ModelArgs,
    /// Also build the explicit model and report its size.
    #[arg(long)]
    #[serde(skip_serializing_if = "is_false")]
    pub build: bool,
    #[arg(long)]
    #[serde(skip_serializing_if = "is_false")]
    pub json: bool,
}

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BuildArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub model: ModelArgs,
    #[command(flatten)]
    #[serde(flatten)]
    pub limits: LimitArgs,
    /// Write the model in the binary export format.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub export: Option<PathBuf>,
    #[arg(long)]
    #[serde(skip_serializing_if = "is_false")]
    pub json: bool,
}

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimulateArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub model: ModelArgs,
    /// Policy file; without it (or --run) actions are drawn uniformly.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub policy: Option<PathBuf>,
    /// Take the policy (and the model) from a training run.
    #[arg(long, conflicts_with = "policy")]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub run: Option<String>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub episodes: Option<usize>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub max_steps: Option<usize>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    /// Label ending an episode (episodes always end at deadlocks).
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub target: Option<String>,
    /// Reward structure to report.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub reward: Option<String>,
    /// `error` or `self-loop`.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub invalid_action: Option<String>,
    /// Print every step.
    #[arg(long)]
    #[serde(skip_serializing_if = "is_false")]
    pub trace: bool,
}

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub model: ModelArgs,
    /// `qlearning` or `deepq`.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub agent: Option<String>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub episodes: Option<usize>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub max_steps: Option<usize>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub alpha: Option<f64>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub gamma: Option<f64>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub epsilon: Option<f64>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub epsilon_decay: Option<f64>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub epsilon_min: Option<f64>,
    /// Hidden layer widths for `deepq`, e.g. `32,32`.
    #[arg(long, value_delimiter = ',')]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub hidden: Option<Vec<usize>>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub batch_size: Option<usize>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub replay_capacity: Option<usize>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub target_sync: Option<usize>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub learning_rate: Option<f64>,
    /// Label ending an episode.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub target: Option<String>,
    /// Reward structure to learn from (default: the benchmark's).
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub reward: Option<String>,
    #[arg(long)]
    #[serde(skip_serializing_if = "is_false")]
    pub json: bool,
}

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PolicySourceArgs {
    /// Training run whose policy and model are verified.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub run: Option<String>,
    /// Policy file, used with --env or --model.
    #[arg(long, conflicts_with = "run")]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub policy: Option<PathBuf>,
}

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct VerifyArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub source: PolicySourceArgs,
    #[command(flatten)]
    #[serde(flatten)]
    pub model: ModelArgs,
    #[command(flatten)]
    #[serde(flatten)]
    pub limits: LimitArgs,
    /// Property to check; repeatable.
    #[arg(long = "prop")]
    #[serde(rename = "prop", skip_serializing_if = "Vec::is_empty")]
    pub props: Vec<String>,
    /// Permissive policy by lumping one variable, `VAR:tail=N`.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub permissive: Option<String>,
    /// Feature remapping of one variable, `VAR:clamp=N`.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub remap: Option<String>,
    /// JSON transform spec file (partition or remap).
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub transform: Option<PathBuf>,
    /// `error` or `fallback-first`.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub invalid_action: Option<String>,
    /// `full-act` or `error`.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub empty_intersection: Option<String>,
    /// Store the induced model as a run artifact.
    #[arg(long)]
    #[serde(skip_serializing_if = "is_false")]
    pub export_model: bool,
    #[arg(long)]
    #[serde(skip_serializing_if = "is_false")]
    pub json: bool,
}

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub source: PolicySourceArgs,
    #[command(flatten)]
    #[serde(flatten)]
    pub model: ModelArgs,
    #[command(flatten)]
    #[serde(flatten)]
    pub limits: LimitArgs,
    /// `const:NAME=A..B`, `remap:VAR=A..B` (clamp cap) or
    /// `partition:VAR=A..B` (tail start).
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub axis: Option<String>,
    /// Property to check at every grid point; repeatable.
    #[arg(long = "prop")]
    #[serde(rename = "prop", skip_serializing_if = "Vec::is_empty")]
    pub props: Vec<String>,
    /// `error` or `fallback-first`.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub invalid_action: Option<String>,
    /// Also write the table to this path.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
pub enum RunsCommand {
    /// List runs, oldest first.
    List {
        #[arg(long)]
        json: bool,
    },
    /// Show one run by id or unique prefix.
    Show {
        id: String,
        #[arg(long)]
        json: bool,
    },
}

fn is_false(b: &bool) -> bool {
    !*b
}
