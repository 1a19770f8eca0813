//! Python bindings: load models, build and check them, train policies and
//! verify the chains they induce.

use pyo3::exceptions::{PyKeyError, PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyDict;

use rlcheck_core::benchmarks::{entries, load_benchmark};
use rlcheck_core::checker::{check, parse_property, CheckOptions, CheckResult};
use rlcheck_core::induced::{build_induced_dtmc, build_induced_mdp, EmptyIntersectionRule, InvalidActionRule};
use rlcheck_core::lang::{parse_model, parse_overrides, SymbolicModel};
use rlcheck_core::model::{build_mdp, BuildLimits, StateValuation};
use rlcheck_core::policy::{
    deep_q_train, policy_from_json, policy_to_json, q_learning_train, AnyPolicy, DqnConfig, Policy as _, QLearnConfig,
};
use rlcheck_core::transforms::{self, parse_short_spec, TransformSpec};

fn err(e: impl std::fmt::Display) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn limits(max_states: Option<usize>) -> BuildLimits {
    match max_states {
        Some(n) => BuildLimits { max_states: n, ..BuildLimits::default() },
        None => BuildLimits::default(),
    }
}

fn result_dict<'py>(py: Python<'py>, r: &CheckResult, fallback_count: usize) -> PyResult<Bound<'py, PyDict>> {
    let d = PyDict::new(py);
    d.set_item("value", r.value)?;
    d.set_item("iterations", r.iterations)?;
    d.set_item("residual", r.residual)?;
    d.set_item("states", r.states)?;
    d.set_item("choices", r.choices)?;
    d.set_item("transitions", r.transitions)?;
    d.set_item("fallback_count", fallback_count)?;
    Ok(d)
}

/// A parsed model with all constants resolved.
#[pyclass(module = "rlcheck", frozen)]
struct Model {
    inner: SymbolicModel,
}

#[pymethods]
impl Model {
    /// Loads a built-in benchmark, e.g. `Model.benchmark("taxi", "MAX_FUEL=6")`.
    #[staticmethod]
    #[pyo3(signature = (name, consts = ""))]
    fn benchmark(name: &str, consts: &str) -> PyResult<Self> {
        let overrides = parse_overrides(consts).map_err(err)?;
        Ok(Model { inner: load_benchmark(name, &overrides).map_err(err)? })
    }

    /// Parses model source text.
    #[staticmethod]
    #[pyo3(signature = (source, consts = ""))]
    fn parse(source: &str, consts: &str) -> PyResult<Self> {
        let overrides = parse_overrides(consts).map_err(err)?;
        Ok(Model { inner: parse_model(source, &overrides).map_err(err)? })
    }

    #[getter]
    fn variables(&self) -> Vec<(String, i64, i64)> {
        self.inner
            .variables
            .iter()
            .map(|v| {
                let (lo, hi) = v.bounds();
                (v.name.clone(), lo, hi)
            })
            .collect()
    }

    #[getter]
    fn actions(&self) -> Vec<String> {
        self.inner.actions.clone()
    }

    #[getter]
    fn labels(&self) -> Vec<String> {
        self.inner.labels.iter().map(|(name, _)| name.clone()).collect()
    }

    fn initial_state(&self) -> Vec<i64> {
        self.inner.initial_values()
    }

    fn to_source(&self) -> String {
        self.inner.to_source()
    }

    /// Builds the full MDP and returns its sizes.
    #[pyo3(signature = (max_states = None))]
    fn build<'py>(&self, py: Python<'py>, max_states: Option<usize>) -> PyResult<Bound<'py, PyDict>> {
        let mdp = py.detach(|| build_mdp(&self.inner, limits(max_states))).map_err(err)?;
        let d = PyDict::new(py);
        d.set_item("states", mdp.num_states())?;
        d.set_item("choices", mdp.num_choices())?;
        d.set_item("transitions", mdp.num_transitions())?;
        d.set_item("deadlocks", mdp.deadlocks.count_ones())?;
        Ok(d)
    }

    /// Checks a property on the full MDP.
    #[pyo3(signature = (prop, max_states = None))]
    fn check<'py>(&self, py: Python<'py>, prop: &str, max_states: Option<usize>) -> PyResult<Bound<'py, PyDict>> {
        let prop = parse_property(prop).map_err(err)?;
        let result = py
            .detach(|| {
                let mdp = build_mdp(&self.inner, limits(max_states)).map_err(|e| e.to_string())?;
                check(&self.inner, &mdp, &prop, &CheckOptions::default()).map_err(|e| e.to_string())
            })
            .map_err(PyRuntimeError::new_err)?;
        result_dict(py, &result, 0)
    }
}

/// A trained or loaded policy bound to the model it was made for.
#[pyclass(module = "rlcheck", frozen)]
struct Policy {
    inner: AnyPolicy,
    model: SymbolicModel,
}

#[pymethods]
impl Policy {
    #[staticmethod]
    fn from_json(text: &str, model: &Model) -> PyResult<Self> {
        Ok(Policy { inner: policy_from_json(text, &model.inner).map_err(err)?, model: model.inner.clone() })
    }

    fn to_json(&self) -> String {
        policy_to_json(&self.inner, &self.model)
    }

    #[getter]
    fn kind(&self) -> &'static str {
        self.inner.kind()
    }

    /// Action name chosen in a state given as variable values.
    fn act(&self, state: Vec<i64>) -> PyResult<String> {
        if state.len() != self.model.variables.len() {
            return Err(PyKeyError::new_err(format!(
                "expected {} variable values, got {}",
                self.model.variables.len(),
                state.len()
            )));
        }
        Ok(self.model.action_name(self.inner.act(&StateValuation(state))).to_string())
    }

    /// Builds the induced chain (or, with `permissive`, the induced MDP)
    /// and checks `prop` on it. `remap` and `permissive` take the short
    /// forms `VAR:clamp=N` and `VAR:tail=N`.
    #[pyo3(signature = (prop, remap = None, permissive = None, fallback = false, max_states = None))]
    fn verify<'py>(
        &self,
        py: Python<'py>,
        prop: &str,
        remap: Option<&str>,
        permissive: Option<&str>,
        fallback: bool,
        max_states: Option<usize>,
    ) -> PyResult<Bound<'py, PyDict>> {
        let prop = parse_property(prop).map_err(err)?;
        let remap_spec = match remap.map(|t| parse_short_spec(t, &self.model)).transpose().map_err(err)? {
            None => None,
            Some(TransformSpec::Remap(r)) => Some(r),
            Some(_) => return Err(PyValueError::new_err("remap expects VAR:clamp=N")),
        };
        let partition = match permissive.map(|t| parse_short_spec(t, &self.model)).transpose().map_err(err)? {
            None => None,
            Some(TransformSpec::Partition(p)) => Some(p),
            Some(_) => return Err(PyValueError::new_err("permissive expects VAR:tail=N")),
        };
        let invalid = if fallback { InvalidActionRule::FallbackFirst } else { InvalidActionRule::Error };
        let model = &self.model;
        let (result, fallback_count) = py
            .detach(|| -> Result<(CheckResult, usize), String> {
                let mut policy: Box<dyn rlcheck_core::policy::Policy + '_> = Box::new(&self.inner);
                if let Some(r) = remap_spec {
                    policy = Box::new(transforms::remap(policy, r, model).map_err(|e| e.to_string())?);
                }
                let limits = limits(max_states);
                let (mdp, fallbacks) = match partition {
                    Some(p) => {
                        let tau = transforms::permissive(policy, p, model).map_err(|e| e.to_string())?;
                        let induced =
                            build_induced_mdp(model, &tau, limits, EmptyIntersectionRule::FullAct).map_err(|e| e.to_string())?;
                        (induced.mdp, induced.fallback_count)
                    }
                    None => {
                        let induced = build_induced_dtmc(model, policy.as_ref(), limits, invalid).map_err(|e| e.to_string())?;
                        (induced.mdp, induced.fallback_count)
                    }
                };
                let r = check(model, &mdp, &prop, &CheckOptions::default()).map_err(|e| e.to_string())?;
                Ok((r, fallbacks))
            })
            .map_err(PyRuntimeError::new_err)?;
        result_dict(py, &result, fallback_count)
    }
}

/// Trains a policy with tabular (`qlearning`) or deep (`deepq`) Q-learning.
/// `reward` defaults to the model's first reward structure.
#[pyfunction]
#[pyo3(signature = (
    model, agent = "qlearning", episodes = 1000, seed = 128, target = None, reward = None,
    max_steps = 100, hidden = None,
))]
#[allow(clippy::too_many_arguments)]
fn train(
    py: Python<'_>,
    model: &Model,
    agent: &str,
    episodes: usize,
    seed: u64,
    target: Option<&str>,
    reward: Option<&str>,
    max_steps: usize,
    hidden: Option<Vec<usize>>,
) -> PyResult<Policy> {
    let m = &model.inner;
    let reward = match reward {
        Some(r) => r.to_string(),
        None => m.rewards.first().map(|r| r.name.clone()).ok_or_else(|| err("model has no reward structure"))?,
    };
    let base = QLearnConfig { episodes, seed, max_steps_per_episode: max_steps, ..QLearnConfig::default() };
    let policy = py
        .detach(|| match agent {
            "qlearning" => q_learning_train(m, &base, target, &reward).map(|(p, _)| AnyPolicy::Tabular(p)),
            "deepq" => {
                let defaults = DqnConfig::default();
                let cfg = DqnConfig { base, hidden: hidden.unwrap_or(defaults.hidden.clone()), ..defaults };
                deep_q_train(m, &cfg, target, &reward).map(|(p, _)| AnyPolicy::Mlp(p))
            }
            other => Err(rlcheck_core::policy::PolicyError::Config(format!(
                "unknown agent `{other}` (expected qlearning or deepq)"
            ))),
        })
        .map_err(err)?;
    Ok(Policy { inner: policy, model: m.clone() })
}

/// Names of the built-in benchmarks.
#[pyfunction]
fn benchmarks() -> Vec<&'static str> {
    entries().iter().map(|e| e.name).collect()
}

#[pymodule]
#[pyo3(name = "rlcheck")]
fn rlcheck_module(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<Model>()?;
    m.add_class::<Policy>()?;
    m.add_function(wrap_pyfunction!(train, m)?)?;
    m.add_function(wrap_pyfunction!(benchmarks, m)?)?;
    Ok(())
}
