//! PRISM-language subset: lexing, parsing, constant resolution, type
//! checking and expression evaluation.
//!
//! A parsed [`SymbolicModel`] is fully resolved: constants are folded,
//! formulas are inlined and every identifier refers to a state slot.

mod expr;
mod lexer;
mod parser;
mod print;
mod resolve;

use std::collections::BTreeMap;
use std::fmt;

use thiserror::Error;

pub use expr::{BinOp, EvalError, Expr, Func, Type, TypeError, UnOp, Value};
pub use lexer::Pos;
pub use resolve::ResolveOptions;
pub use print::expr_to_string;

/// Constant overrides supplied from outside the model text.
pub type ConstOverrides = BTreeMap<String, Value>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum LangError {
    #[error("lexical error at {pos}: {message}")]
    Lex { pos: Pos, message: String },
    #[error("syntax error at {pos}: {message}")]
    Syntax { pos: Pos, message: String },
    #[error("undeclared identifier `{name}` in {context}")]
    Undeclared { name: String, context: String },
    #[error("duplicate declaration of `{0}`")]
    Duplicate(String),
    #[error("type error in {context}: {message}")]
    Type { context: String, message: String },
    #[error("constant `{0}` has no value; supply it as an override")]
    UnresolvedConstant(String),
    #[error("override names unknown constant `{0}`")]
    UnknownOverride(String),
    #[error("unknown label `{0}`")]
    UnknownLabel(String),
    #[error("{0}")]
    Semantic(String),
    #[error("cannot evaluate {context}: {source}")]
    Eval { context: String, source: EvalError },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModelKind {
    Mdp,
    Dtmc,
}

impl fmt::Display for ModelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ModelKind::Mdp => "mdp",
            ModelKind::Dtmc => "dtmc",
        })
    }
}

/// Index into a model's sorted action alphabet.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ActionId(pub u16);

impl ActionId {
    /// Synthetic self-loop added to deadlocked states; not part of any
    /// alphabet.
    pub const DEADLOCK: ActionId = ActionId(u16::MAX);
    pub const DEADLOCK_NAME: &'static str = "τ#deadlock";

    pub fn index(self) -> usize {
        self.0 as usize
    }
}

/// Prefix of synthetic action names given to unlabeled commands.
pub const SILENT_PREFIX: &str = "τ#";

#[derive(Clone, Debug, PartialEq)]
pub struct Constant {
    pub name: String,
    pub value: Value,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum VarKind {
    Int { lo: i64, hi: i64 },
    Bool,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Variable {
    pub name: String,
    pub kind: VarKind,
    pub init: i64,
    /// Owning module, `None` for globals.
    pub module: Option<usize>,
}

impl Variable {
    pub fn bounds(&self) -> (i64, i64) {
        match self.kind {
            VarKind::Int { lo, hi } => (lo, hi),
            VarKind::Bool => (0, 1),
        }
    }

    pub fn ty(&self) -> Type {
        match self.kind {
            VarKind::Int { .. } => Type::Int,
            VarKind::Bool => Type::Bool,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Update {
    pub prob: Expr,
    /// (variable slot, new value)
    pub assignments: Vec<(usize, Expr)>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Command {
    pub action: ActionId,
    /// User label; `None` for unlabeled (silent) commands.
    pub label: Option<String>,
    pub guard: Expr,
    pub updates: Vec<Update>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Module {
    pub name: String,
    pub commands: Vec<Command>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum RewardScope {
    /// Applies to every choice leaving a satisfying state.
    State,
    /// Applies to choices of unlabeled commands.
    Silent,
    Action(ActionId),
}

#[derive(Clone, Debug, PartialEq)]
pub struct RewardItem {
    pub scope: RewardScope,
    pub guard: Expr,
    pub value: Expr,
}

#[derive(Clone, Debug, PartialEq)]
pub struct RewardStructure {
    pub name: String,
    pub items: Vec<RewardItem>,
}

impl RewardStructure {
    /// Structures named `penalty_*` hold costs; the simulator negates them.
    pub fn is_penalty(&self) -> bool {
        self.name.starts_with("penalty_")
    }

    /// Reward for taking `action` in `state`.
    pub fn value(
        &self,
        state: &[i64],
        action: ActionId,
        silent: bool,
    ) -> Result<f64, EvalError> {
        let mut total = 0.0;
        for item in &self.items {
            let applies = match item.scope {
                RewardScope::State => action != ActionId::DEADLOCK,
                RewardScope::Silent => silent,
                RewardScope::Action(a) => a == action,
            };
            if applies && item.guard.eval_bool(state)? {
                total += item.value.eval_f64(state)?;
            }
        }
        Ok(total)
    }

    /// Sum of the state-scoped items only.
    pub fn state_value(&self, state: &[i64]) -> Result<f64, EvalError> {
        let mut total = 0.0;
        for item in self.items.iter().filter(|i| i.scope == RewardScope::State) {
            if item.guard.eval_bool(state)? {
                total += item.value.eval_f64(state)?;
            }
        }
        Ok(total)
    }
}

/// A parsed, constant-resolved model in the PRISM-language subset.
#[derive(Clone, Debug, PartialEq)]
pub struct SymbolicModel {
    pub kind: ModelKind,
    pub constants: Vec<Constant>,
    /// Formula bodies after resolution and folding, kept for property targets.
    pub formulas: Vec<(String, Expr)>,
    /// Globals first, then each module's variables in module order.
    pub variables: Vec<Variable>,
    pub modules: Vec<Module>,
    pub labels: Vec<(String, Expr)>,
    pub rewards: Vec<RewardStructure>,
    /// Sorted, duplicate-free; silent names sort after user labels.
    pub actions: Vec<String>,
}

impl SymbolicModel {
    pub fn variable_index(&self, name: &str) -> Option<usize> {
        self.variables.iter().position(|v| v.name == name)
    }

    pub fn action_id(&self, name: &str) -> Option<ActionId> {
        if name == ActionId::DEADLOCK_NAME {
            return Some(ActionId::DEADLOCK);
        }
        self.actions.binary_search_by(|a| a.as_str().cmp(name)).ok().map(|i| ActionId(i as u16))
    }

    pub fn action_name(&self, id: ActionId) -> &str {
        if id == ActionId::DEADLOCK {
            ActionId::DEADLOCK_NAME
        } else {
            &self.actions[id.index()]
        }
    }

    pub fn is_silent(&self, id: ActionId) -> bool {
        id != ActionId::DEADLOCK && self.actions[id.index()].starts_with(SILENT_PREFIX)
    }

    pub fn constant(&self, name: &str) -> Option<Value> {
        self.constants.iter().find(|c| c.name == name).map(|c| c.value)
    }

    /// Predicate of a declared label.
    pub fn label(&self, name: &str) -> Result<&Expr, LangError> {
        self.labels
            .iter()
            .find(|(n, _)| n == name)
            .map(|(_, e)| e)
            .ok_or_else(|| LangError::UnknownLabel(name.to_string()))
    }

    pub fn reward_index(&self, name: &str) -> Option<usize> {
        self.rewards.iter().position(|r| r.name == name)
    }

    pub fn initial_values(&self) -> Vec<i64> {
        self.variables.iter().map(|v| v.init).collect()
    }

    /// Parses and resolves a boolean expression over this model's variables,
    /// constants and formulas (used for property targets).
    pub fn parse_condition(&self, text: &str) -> Result<Expr, LangError> {
        resolve::resolve_standalone(self, text, Type::Bool)
    }

    /// Renders the model back to source text.
    pub fn to_source(&self) -> String {
        print::print_model(self)
    }
}

/// Parses and resolves a model, folding constants and inlining formulas.
pub fn parse_model(source: &str, overrides: &ConstOverrides) -> Result<SymbolicModel, LangError> {
    parse_model_with(source, overrides, ResolveOptions::default())
}

pub fn parse_model_with(
    source: &str,
    overrides: &ConstOverrides,
    options: ResolveOptions,
) -> Result<SymbolicModel, LangError> {
    let mut parser = parser::Parser::new(source)?;
    let raw = parser.parse_program()?;
    resolve::resolve(&raw, overrides, options)
}

/// Parses `name=value,name=value`.
pub fn parse_overrides(text: &str) -> Result<ConstOverrides, LangError> {
    let mut out = ConstOverrides::new();
    for part in text.split(',').map(str::trim).filter(|p| !p.is_empty()) {
        let (name, value) = part
            .split_once('=')
            .ok_or_else(|| LangError::Semantic(format!("malformed constant override `{part}`")))?;
        let value = Value::parse_literal(value)
            .ok_or_else(|| LangError::Semantic(format!("malformed value in `{part}`")))?;
        out.insert(name.trim().to_string(), value);
    }
    Ok(out)
}

/// Evaluates an expression over a valuation.
pub fn eval_expr(e: &Expr, state: &[i64]) -> Result<Value, EvalError> {
    e.eval(state)
}

/// Returns the predicate of `label`, for use as a reachability target.
pub fn label_states<'m>(model: &'m SymbolicModel, label: &str) -> Result<&'m Expr, LangError> {
    model.label(label)
}
