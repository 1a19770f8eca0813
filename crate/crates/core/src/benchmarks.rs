//! Built-in environments as PRISM-subset fixtures, with structural
//! validation against closed-form reward definitions.

use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::lang::{parse_model, ConstOverrides, LangError, SymbolicModel, Value};
use crate::model::{build_mdp, BuildLimits, ModelError, StateValuation};

#[derive(Debug, Error)]
pub enum BenchmarkError {
    #[error("unknown benchmark `{0}` (known: coin, frozen_lake, taxi, collision_avoidance)")]
    Unknown(String),
    #[error(transparent)]
    Lang(#[from] LangError),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error("fixture `{fixture}` failed check `{check}` at {witness}")]
    Validation { fixture: String, check: String, witness: String },
}

/// A named environment with its model text and canonical properties.
#[derive(Debug)]
pub struct BenchmarkEntry {
    pub name: &'static str,
    pub source: &'static str,
    props: &'static str,
    /// Constants as declared in the fixture.
    pub default_constants: &'static [(&'static str, &'static str)],
    pub labels: &'static [&'static str],
    pub reward: &'static str,
}

impl BenchmarkEntry {
    pub fn properties(&self) -> Vec<&'static str> {
        self.props.lines().map(str::trim).filter(|l| !l.is_empty()).collect()
    }

    pub fn load(&self, overrides: &ConstOverrides) -> Result<SymbolicModel, BenchmarkError> {
        Ok(parse_model(self.source, overrides)?)
    }
}

static ENTRIES: &[BenchmarkEntry] = &[
    BenchmarkEntry {
        name: "coin",
        source: include_str!("../fixtures/coin.prism"),
        props: include_str!("../fixtures/coin.props"),
        default_constants: &[],
        labels: &["done"],
        reward: "goal",
    },
    BenchmarkEntry {
        name: "frozen_lake",
        source: include_str!("../fixtures/frozen_lake.prism"),
        props: include_str!("../fixtures/frozen_lake.props"),
        default_constants: &[("slippery", "0.333")],
        labels: &["water", "frisbee"],
        reward: "frisbee",
    },
    BenchmarkEntry {
        name: "taxi",
        source: include_str!("../fixtures/taxi.prism"),
        props: include_str!("../fixtures/taxi.props"),
        default_constants: &[("MAX_FUEL", "10"), ("MAX_JOBS", "2")],
        labels: &["empty", "done", "first_job"],
        reward: "penalty_steps",
    },
    BenchmarkEntry {
        name: "collision_avoidance",
        source: include_str!("../fixtures/collision_avoidance.prism"),
        props: include_str!("../fixtures/collision_avoidance.props"),
        default_constants: &[("xMax", "4"), ("yMax", "4"), ("slickness", "0")],
        labels: &["collide"],
        reward: "survival",
    },
];

pub fn entries() -> &'static [BenchmarkEntry] {
    ENTRIES
}

pub fn entry(name: &str) -> Result<&'static BenchmarkEntry, BenchmarkError> {
    ENTRIES.iter().find(|e| e.name == name).ok_or_else(|| BenchmarkError::Unknown(name.to_string()))
}

pub fn load_benchmark(name: &str, overrides: &ConstOverrides) -> Result<SymbolicModel, BenchmarkError> {
    entry(name)?.load(overrides)
}

/// Outcome of [`validate_fixture`].
#[derive(Clone, Debug, PartialEq)]
pub struct ValidationReport {
    pub fixture: String,
    pub states: usize,
    pub sampled_states: usize,
    pub checks: Vec<String>,
}

struct View<'a> {
    model: &'a SymbolicModel,
    state: &'a StateValuation,
}

impl View<'_> {
    fn get(&self, name: &str) -> i64 {
        self.state[self.model.variable_index(name).expect("fixture variable")]
    }

    fn constant(&self, name: &str) -> i64 {
        match self.model.constant(name) {
            Some(Value::Int(i)) => i,
            other => panic!("fixture constant {name} is not an int: {other:?}"),
        }
    }
}

/// Reward straight from the environment definitions: `None` asks for the
/// state-scoped part, `Some(a)` for the full reward of taking `a`.
fn closed_form_reward(name: &str, v: &View<'_>, action: Option<&str>) -> f64 {
    match name {
        "coin" => f64::from(u8::from(v.get("s") == 1)),
        "frozen_lake" => f64::from(u8::from(v.get("pos") == 15)),
        "collision_avoidance" => {
            let (x, y) = (v.get("x"), v.get("y"));
            let hit = (x, y) == (v.get("obstacle1_x"), v.get("obstacle1_y"))
                || (x, y) == (v.get("obstacle2_x"), v.get("obstacle2_y"));
            if hit {
                0.0
            } else {
                100.0
            }
        }
        "taxi" => {
            let Some(action) = action else { return 0.0 };
            let (x, y) = (v.get("x"), v.get("y"));
            let on_board = v.get("on_board") == 1;
            let (px, py) = (v.get("passenger_loc_x"), v.get("passenger_loc_y"));
            let (dx, dy) = (v.get("passenger_dest_x"), v.get("passenger_dest_y"));
            let moving = if on_board {
                21 + (x - dx).abs() + (y - dy).abs()
            } else {
                21 + (x - px).abs() + (y - py).abs()
            };
            let value = match action {
                "pick_up" if !on_board && (x, y) == (px, py) => 21,
                "drop" if on_board && (x, y) == (dx, dy) => 0,
                _ => moving,
            };
            value as f64
        }
        _ => unreachable!("closed form for unknown fixture"),
    }
}

/// States in which the environment ends by definition.
fn closed_form_terminal(name: &str, v: &View<'_>) -> bool {
    match name {
        "coin" => false,
        "frozen_lake" => [5, 7, 11, 12, 15].contains(&v.get("pos")),
        "collision_avoidance" => closed_form_reward(name, v, None) == 0.0,
        "taxi" => v.get("jobs_done") == v.constant("MAX_JOBS"),
        _ => unreachable!("closed form for unknown fixture"),
    }
}

const SAMPLE: usize = 100;

/// Builds a fixture with its default constants and checks that rewards
/// agree with the closed-form definitions on up to 100 sampled states, that
/// every label of interest holds somewhere and that deadlocks occur only in
/// terminal states.
pub fn validate_fixture(name: &str) -> Result<ValidationReport, BenchmarkError> {
    let entry = entry(name)?;
    let model = entry.load(&ConstOverrides::new())?;
    let mdp = build_mdp(&model, BuildLimits::default())?;
    let fail = |check: &str, witness: String| BenchmarkError::Validation {
        fixture: name.to_string(),
        check: check.to_string(),
        witness,
    };

    let n = mdp.num_states();
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let mut picked: Vec<usize> = if n <= SAMPLE { (0..n).collect() } else { sample(&mut rng, n, SAMPLE).into_vec() };
    picked.sort_unstable();

    let ri = model.reward_index(entry.reward).ok_or_else(|| fail("reward structure declared", entry.reward.into()))?;
    let structure = &model.rewards[ri];
    let rewards = mdp.reward(entry.reward).expect("built model carries every structure");
    for &s in &picked {
        let state = &mdp.states[s];
        let view = View { model: &model, state };
        let want = closed_form_reward(name, &view, None);
        let got = structure.state_value(state).map_err(|e| fail("state reward", e.to_string()))?;
        if got != want {
            return Err(fail("state reward", format!("{} (model {got}, expected {want})", state.display(&model))));
        }
        for choice in mdp.choices(s) {
            if choice.action == crate::lang::ActionId::DEADLOCK {
                continue;
            }
            let action = model.action_name(choice.action);
            let want = closed_form_reward(name, &view, Some(action));
            let got = rewards[choice.index];
            if got != want {
                return Err(fail(
                    "action reward",
                    format!("{} action {action} (model {got}, expected {want})", state.display(&model)),
                ));
            }
        }
    }

    for label in entry.labels {
        let bits = mdp.label(label).ok_or_else(|| fail("label declared", (*label).to_string()))?;
        if bits.not_any() {
            return Err(fail("label reachable", (*label).to_string()));
        }
    }

    for s in mdp.deadlocks.iter_ones() {
        let state = &mdp.states[s];
        if !closed_form_terminal(name, &View { model: &model, state }) {
            return Err(fail("deadlocks only in terminal states", state.display(&model).to_string()));
        }
    }

    Ok(ValidationReport {
        fixture: name.to_string(),
        states: n,
        sampled_states: picked.len(),
        checks: vec![
            "state and action rewards match closed forms".into(),
            "labels of interest are reachable".into(),
            "deadlocks only in terminal states".into(),
        ],
    })
}
