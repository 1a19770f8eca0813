use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet};

use super::expr::{Expr, Type, Value};
use super::parser::{ConstType, Parser, RawProgram, RawVar, RawVarKind};
use super::{
    ActionId, Command, ConstOverrides, Constant, LangError, ModelKind, Module, RewardItem,
    RewardScope, RewardStructure, SymbolicModel, Update, VarKind, Variable, SILENT_PREFIX,
};

#[derive(Clone, Copy, Debug, Default)]
pub struct ResolveOptions {
    /// Fold formula bodies before inlining them instead of folding the
    /// inlined result. Both orders must produce the same model.
    pub fold_formulas_first: bool,
}

struct Scope<'a> {
    raw_consts: HashMap<&'a str, (ConstType, Option<&'a Expr>)>,
    overrides: &'a ConstOverrides,
    consts: HashMap<String, Value>,
    raw_formulas: HashMap<&'a str, &'a Expr>,
    formulas: HashMap<String, Expr>,
    vars: HashMap<String, (usize, Type)>,
    visiting: HashSet<String>,
    options: ResolveOptions,
}

impl<'a> Scope<'a> {
    fn constant(&mut self, name: &str) -> Result<Value, LangError> {
        if let Some(v) = self.consts.get(name) {
            return Ok(*v);
        }
        let (ty, raw) = self.raw_consts[name];
        if !self.visiting.insert(name.to_string()) {
            return Err(LangError::Semantic(format!("cyclic definition involving `{name}`")));
        }
        let value = if let Some(v) = self.overrides.get(name) {
            *v
        } else if let Some(e) = raw {
            let resolved = self.substitute(e, &format!("constant `{name}`"))?;
            if !resolved.is_constant() {
                return Err(LangError::Semantic(format!("constant `{name}` depends on a state variable")));
            }
            resolved.eval(&[]).map_err(|source| LangError::Eval {
                context: format!("constant `{name}`"),
                source,
            })?
        } else {
            return Err(LangError::UnresolvedConstant(name.to_string()));
        };
        self.visiting.remove(name);
        let value = match (ty, value) {
            (ConstType::Int, Value::Int(_)) | (ConstType::Bool, Value::Bool(_)) => value,
            (ConstType::Double, Value::Int(i)) => Value::Real(i as f64),
            (ConstType::Double, Value::Real(_)) => value,
            (_, v) => {
                return Err(LangError::Type {
                    context: format!("constant `{name}`"),
                    message: format!("declared {ty:?} but given {}", v.ty()),
                })
            }
        };
        self.consts.insert(name.to_string(), value);
        Ok(value)
    }

    fn formula(&mut self, name: &str) -> Result<Expr, LangError> {
        if let Some(e) = self.formulas.get(name) {
            return Ok(e.clone());
        }
        if !self.visiting.insert(name.to_string()) {
            return Err(LangError::Semantic(format!("cyclic definition involving `{name}`")));
        }
        let raw = self.raw_formulas[name];
        let mut body = self.substitute(raw, &format!("formula `{name}`"))?;
        if self.options.fold_formulas_first {
            body = body.fold();
        }
        self.visiting.remove(name);
        self.formulas.insert(name.to_string(), body.clone());
        Ok(body)
    }

    /// Replaces identifiers by variable slots, constant values, or inlined
    /// formula bodies. Does not fold.
    fn substitute(&mut self, e: &Expr, context: &str) -> Result<Expr, LangError> {
        Ok(match e {
            Expr::Ident(name) => {
                if let Some(&(slot, ty)) = self.vars.get(name) {
                    Expr::Var(slot, ty)
                } else if self.raw_consts.contains_key(name.as_str()) {
                    Expr::Lit(self.constant(name)?)
                } else if self.raw_formulas.contains_key(name.as_str()) {
                    self.formula(name)?
                } else {
                    return Err(LangError::Undeclared { name: name.clone(), context: context.into() });
                }
            }
            Expr::Lit(_) | Expr::Var(..) => e.clone(),
            Expr::Unary(op, a) => Expr::Unary(*op, Box::new(self.substitute(a, context)?)),
            Expr::Binary(op, a, b) => Expr::Binary(
                *op,
                Box::new(self.substitute(a, context)?),
                Box::new(self.substitute(b, context)?),
            ),
            Expr::Ite(c, a, b) => Expr::Ite(
                Box::new(self.substitute(c, context)?),
                Box::new(self.substitute(a, context)?),
                Box::new(self.substitute(b, context)?),
            ),
            Expr::Call(f, args) => Expr::Call(
                *f,
                args.iter().map(|a| self.substitute(a, context)).collect::<Result<_, _>>()?,
            ),
        })
    }

    /// Substitutes, folds and type checks against `expected` (numeric
    /// expectations accept both `Int` and `Real`).
    fn typed(&mut self, e: &Expr, expected: Type, context: &str) -> Result<Expr, LangError> {
        let resolved = self.substitute(e, context)?.fold();
        let ty = resolved.infer_type().map_err(|err| LangError::Type {
            context: context.into(),
            message: err.0,
        })?;
        let ok = match expected {
            Type::Bool => ty == Type::Bool,
            Type::Int => ty == Type::Int,
            Type::Real => ty != Type::Bool,
        };
        if !ok {
            return Err(LangError::Type {
                context: context.into(),
                message: format!("expected {expected}, found {ty}"),
            });
        }
        Ok(resolved)
    }

    fn const_int(&mut self, e: &Expr, context: &str) -> Result<i64, LangError> {
        match self.typed(e, Type::Int, context)? {
            Expr::Lit(Value::Int(i)) => Ok(i),
            _ => Err(LangError::Semantic(format!("{context} must be a constant integer"))),
        }
    }
}

pub fn resolve(
    raw: &RawProgram,
    overrides: &ConstOverrides,
    options: ResolveOptions,
) -> Result<SymbolicModel, LangError> {
    let mut names = HashSet::new();
    let mut declare = |name: &str| -> Result<(), LangError> {
        if !names.insert(name.to_string()) {
            return Err(LangError::Duplicate(name.to_string()));
        }
        Ok(())
    };
    for c in &raw.constants {
        declare(&c.name)?;
    }
    for (name, _, _) in &raw.formulas {
        declare(name)?;
    }
    let all_raw_vars: Vec<(&RawVar, Option<usize>)> = raw
        .globals
        .iter()
        .map(|v| (v, None))
        .chain(raw.modules.iter().enumerate().flat_map(|(m, md)| md.vars.iter().map(move |v| (v, Some(m)))))
        .collect();
    for (v, _) in &all_raw_vars {
        declare(&v.name)?;
    }
    let mut module_names = HashSet::new();
    for m in &raw.modules {
        if !module_names.insert(m.name.as_str()) {
            return Err(LangError::Duplicate(m.name.clone()));
        }
    }
    for name in overrides.keys() {
        if !raw.constants.iter().any(|c| &c.name == name) {
            return Err(LangError::UnknownOverride(name.clone()));
        }
    }

    let mut scope = Scope {
        raw_consts: raw.constants.iter().map(|c| (c.name.as_str(), (c.ty, c.value.as_ref()))).collect(),
        overrides,
        consts: HashMap::new(),
        raw_formulas: raw.formulas.iter().map(|(n, e, _)| (n.as_str(), e)).collect(),
        formulas: HashMap::new(),
        vars: HashMap::new(),
        visiting: HashSet::new(),
        options,
    };

    for c in &raw.constants {
        scope.constant(&c.name)?;
    }
    let constants = raw
        .constants
        .iter()
        .map(|c| Constant { name: c.name.clone(), value: scope.consts[&c.name] })
        .collect();

    let mut variables = Vec::new();
    for (slot, (v, module)) in all_raw_vars.iter().enumerate() {
        let ctx = format!("declaration of `{}`", v.name);
        let kind = match &v.kind {
            RawVarKind::Bool => VarKind::Bool,
            RawVarKind::Range(lo, hi) => {
                let lo = scope.const_int(lo, &ctx)?;
                let hi = scope.const_int(hi, &ctx)?;
                if lo > hi {
                    return Err(LangError::Semantic(format!("empty range {lo}..{hi} for `{}`", v.name)));
                }
                VarKind::Int { lo, hi }
            }
        };
        let init = match (&v.init, kind) {
            (None, VarKind::Int { lo, .. }) => lo,
            (None, VarKind::Bool) => 0,
            (Some(e), VarKind::Int { lo, hi }) => {
                let i = scope.const_int(e, &ctx)?;
                if i < lo || i > hi {
                    return Err(LangError::Semantic(format!(
                        "initial value {i} of `{}` outside {lo}..{hi}",
                        v.name
                    )));
                }
                i
            }
            (Some(e), VarKind::Bool) => match scope.typed(e, Type::Bool, &ctx)? {
                Expr::Lit(Value::Bool(b)) => b as i64,
                _ => return Err(LangError::Semantic(format!("{ctx}: init must be constant"))),
            },
        };
        let var = Variable { name: v.name.clone(), kind, init, module: *module };
        scope.vars.insert(var.name.clone(), (slot, var.ty()));
        variables.push(var);
    }

    for (name, _, _) in &raw.formulas {
        scope.formula(name)?;
    }
    let formulas = raw.formulas.iter().map(|(n, _, _)| (n.clone(), scope.formulas[n].fold())).collect();

    // action alphabet: user labels plus one synthetic name per unlabeled command
    let mut alphabet = BTreeSet::new();
    for m in &raw.modules {
        for (i, c) in m.commands.iter().enumerate() {
            alphabet.insert(match &c.action {
                Some(a) => a.clone(),
                None => silent_name(&m.name, i),
            });
        }
    }
    let actions: Vec<String> = alphabet.into_iter().collect();
    if actions.len() >= u16::MAX as usize {
        return Err(LangError::Semantic("too many actions".into()));
    }
    let action_id = |name: &str| ActionId(actions.binary_search_by(|a| a.as_str().cmp(name)).unwrap() as u16);

    let mut label_modules: BTreeMap<&str, BTreeSet<usize>> = BTreeMap::new();
    for (mi, m) in raw.modules.iter().enumerate() {
        for c in &m.commands {
            if let Some(a) = &c.action {
                label_modules.entry(a.as_str()).or_default().insert(mi);
            }
        }
    }

    let mut modules = Vec::new();
    for (mi, m) in raw.modules.iter().enumerate() {
        let mut commands = Vec::new();
        for (ci, c) in m.commands.iter().enumerate() {
            let ctx = format!("module `{}` command {} (line {})", m.name, ci, c.pos.line);
            let guard = scope.typed(&c.guard, Type::Bool, &ctx)?;
            let synchronized = c.action.as_ref().is_some_and(|a| label_modules[a.as_str()].len() > 1);
            let mut updates = Vec::new();
            for u in &c.updates {
                let prob = match &u.prob {
                    Some(p) => scope.typed(p, Type::Real, &ctx)?,
                    None => Expr::int(1),
                };
                let mut assignments = Vec::new();
                for (var, e, apos) in &u.assignments {
                    let actx = format!("{ctx}, assignment to `{var}` at {apos}");
                    let &(slot, ty) = scope.vars.get(var).ok_or_else(|| LangError::Undeclared {
                        name: var.clone(),
                        context: actx.clone(),
                    })?;
                    match variables[slot].module {
                        Some(owner) if owner != mi => {
                            return Err(LangError::Semantic(format!(
                                "{actx}: `{var}` belongs to module `{}`",
                                raw.modules[owner].name
                            )))
                        }
                        None if synchronized => {
                            return Err(LangError::Semantic(format!(
                                "{actx}: global `{var}` written by a synchronized command"
                            )))
                        }
                        _ => {}
                    }
                    if assignments.iter().any(|(s, _)| *s == slot) {
                        return Err(LangError::Semantic(format!("{actx}: variable assigned twice")));
                    }
                    assignments.push((slot, scope.typed(e, ty, &actx)?));
                }
                updates.push(Update { prob, assignments });
            }
            let action = match &c.action {
                Some(a) => action_id(a),
                None => action_id(&silent_name(&m.name, ci)),
            };
            commands.push(Command { action, label: c.action.clone(), guard, updates });
        }
        modules.push(Module { name: m.name.clone(), commands });
    }

    let mut labels = Vec::new();
    let mut seen_labels = HashSet::new();
    for (name, e, _) in &raw.labels {
        if !seen_labels.insert(name.as_str()) {
            return Err(LangError::Duplicate(format!("label \"{name}\"")));
        }
        labels.push((name.clone(), scope.typed(e, Type::Bool, &format!("label \"{name}\""))?));
    }

    let mut rewards = Vec::new();
    let mut seen_rewards = HashSet::new();
    for r in &raw.rewards {
        if !seen_rewards.insert(r.name.as_str()) {
            return Err(LangError::Duplicate(format!("rewards \"{}\"", r.name)));
        }
        let mut items = Vec::new();
        for item in &r.items {
            let ctx = format!("rewards \"{}\" (line {})", r.name, item.pos.line);
            let scope_kind = match &item.scope {
                None => RewardScope::State,
                Some(None) => RewardScope::Silent,
                Some(Some(a)) => {
                    if actions.binary_search(a).is_err() {
                        return Err(LangError::Undeclared { name: a.clone(), context: ctx });
                    }
                    RewardScope::Action(action_id(a))
                }
            };
            items.push(RewardItem {
                scope: scope_kind,
                guard: scope.typed(&item.guard, Type::Bool, &ctx)?,
                value: scope.typed(&item.value, Type::Real, &ctx)?,
            });
        }
        rewards.push(RewardStructure { name: r.name.clone(), items });
    }

    Ok(SymbolicModel {
        kind: raw.kind.unwrap_or(ModelKind::Mdp),
        constants,
        formulas,
        variables,
        modules,
        labels,
        rewards,
        actions,
    })
}

pub fn silent_name(module: &str, index: usize) -> String {
    format!("{SILENT_PREFIX}{module}#{index}")
}

/// Resolves a standalone expression against an already-resolved model.
pub fn resolve_standalone(model: &SymbolicModel, text: &str, expected: Type) -> Result<Expr, LangError> {
    let mut parser = Parser::new(text)?;
    let e = parser.expr()?;
    parser.expect_eof()?;
    let overrides = ConstOverrides::new();
    // formulas are already resolved; the raw map only answers membership
    let placeholder = Expr::Lit(Value::Bool(false));
    let mut scope = Scope {
        raw_consts: model.constants.iter().map(|c| (c.name.as_str(), (ConstType::Int, None))).collect(),
        overrides: &overrides,
        consts: model.constants.iter().map(|c| (c.name.clone(), c.value)).collect(),
        raw_formulas: model.formulas.iter().map(|(n, _)| (n.as_str(), &placeholder)).collect(),
        formulas: model.formulas.iter().cloned().collect(),
        vars: model.variables.iter().enumerate().map(|(i, v)| (v.name.clone(), (i, v.ty()))).collect(),
        visiting: HashSet::new(),
        options: ResolveOptions::default(),
    };
    scope.typed(&e, expected, &format!("expression `{text}`"))
}
