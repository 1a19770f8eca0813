//! Expression trees, static types, and the tree-walking evaluator.

use std::fmt;

use thiserror::Error;

/// Static type of an expression.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Type {
    Int,
    Real,
    Bool,
}

impl fmt::Display for Type {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Type::Int => "int",
            Type::Real => "double",
            Type::Bool => "bool",
        })
    }
}

/// A literal value.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Value {
    Int(i64),
    Real(f64),
    Bool(bool),
}

impl Value {
    pub fn ty(&self) -> Type {
        match self {
            Value::Int(_) => Type::Int,
            Value::Real(_) => Type::Real,
            Value::Bool(_) => Type::Bool,
        }
    }

    /// Numeric view; ints promote to reals.
    pub fn as_f64(&self) -> Option<f64> {
        match *self {
            Value::Int(i) => Some(i as f64),
            Value::Real(r) => Some(r),
            Value::Bool(_) => None,
        }
    }

    pub fn as_i64(&self) -> Option<i64> {
        match *self {
            Value::Int(i) => Some(i),
            _ => None,
        }
    }

    pub fn as_bool(&self) -> Option<bool> {
        match *self {
            Value::Bool(b) => Some(b),
            _ => None,
        }
    }

    /// Encoding used inside state vectors: bools as 0/1.
    pub fn to_slot(&self) -> Option<i64> {
        match *self {
            Value::Int(i) => Some(i),
            Value::Bool(b) => Some(b as i64),
            Value::Real(_) => None,
        }
    }

    /// Parses a CLI-style literal: `true`, `false`, an integer, a decimal, or a
    /// fraction `p/q`.
    pub fn parse_literal(text: &str) -> Option<Value> {
        let t = text.trim();
        match t {
            "true" => return Some(Value::Bool(true)),
            "false" => return Some(Value::Bool(false)),
            _ => {}
        }
        if let Ok(i) = t.parse::<i64>() {
            return Some(Value::Int(i));
        }
        if let Some((num, den)) = t.split_once('/') {
            let num: i64 = num.trim().parse().ok()?;
            let den: i64 = den.trim().parse().ok()?;
            if den == 0 {
                return None;
            }
            return Some(Value::Real(num as f64 / den as f64));
        }
        t.parse::<f64>().ok().filter(|r| r.is_finite()).map(Value::Real)
    }
}

impl fmt::Display for Value {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Value::Int(i) => write!(f, "{i}"),
            Value::Real(r) => write!(f, "{r:?}"),
            Value::Bool(b) => write!(f, "{b}"),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum UnOp {
    Neg,
    Not,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum BinOp {
    Add,
    Sub,
    Mul,
    Div,
    And,
    Or,
    Implies,
    Eq,
    Ne,
    Lt,
    Le,
    Gt,
    Ge,
}

impl BinOp {
    pub fn symbol(&self) -> &'static str {
        match self {
            BinOp::Add => "+",
            BinOp::Sub => "-",
            BinOp::Mul => "*",
            BinOp::Div => "/",
            BinOp::And => "&",
            BinOp::Or => "|",
            BinOp::Implies => "=>",
            BinOp::Eq => "=",
            BinOp::Ne => "!=",
            BinOp::Lt => "<",
            BinOp::Le => "<=",
            BinOp::Gt => ">",
            BinOp::Ge => ">=",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Func {
    Min,
    Max,
    Floor,
    Ceil,
    Mod,
    Pow,
}

impl Func {
    pub fn from_name(name: &str) -> Option<Func> {
        Some(match name {
            "min" => Func::Min,
            "max" => Func::Max,
            "floor" => Func::Floor,
            "ceil" => Func::Ceil,
            "mod" => Func::Mod,
            "pow" => Func::Pow,
            _ => return None,
        })
    }

    pub fn name(&self) -> &'static str {
        match self {
            Func::Min => "min",
            Func::Max => "max",
            Func::Floor => "floor",
            Func::Ceil => "ceil",
            Func::Mod => "mod",
            Func::Pow => "pow",
        }
    }
}

/// Expression tree. `Ident` only appears before resolution; resolved
/// expressions reference variables by state slot.
#[derive(Clone, Debug, PartialEq)]
pub enum Expr {
    Lit(Value),
    Ident(String),
    Var(usize, Type),
    Unary(UnOp, Box<Expr>),
    Binary(BinOp, Box<Expr>, Box<Expr>),
    Ite(Box<Expr>, Box<Expr>, Box<Expr>),
    Call(Func, Vec<Expr>),
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum EvalError {
    #[error("division by zero")]
    DivisionByZero,
    #[error("modulo by zero")]
    ModByZero,
    #[error("integer overflow")]
    Overflow,
    #[error("negative exponent in integer pow")]
    NegativeExponent,
    #[error("non-finite result")]
    NonFinite,
    #[error("unresolved identifier `{0}`")]
    Unresolved(String),
    #[error("operand type error in `{0}`")]
    Type(&'static str),
}

#[derive(Debug, Clone, PartialEq, Error)]
#[error("type error: {0}")]
pub struct TypeError(pub String);

impl Expr {
    pub fn int(i: i64) -> Expr {
        Expr::Lit(Value::Int(i))
    }

    pub fn boolean(b: bool) -> Expr {
        Expr::Lit(Value::Bool(b))
    }

    pub fn binary(op: BinOp, a: Expr, b: Expr) -> Expr {
        Expr::Binary(op, Box::new(a), Box::new(b))
    }

    /// True when the expression reads no state variable (and has no
    /// unresolved identifiers).
    pub fn is_constant(&self) -> bool {
        match self {
            Expr::Lit(_) => true,
            Expr::Ident(_) | Expr::Var(..) => false,
            Expr::Unary(_, a) => a.is_constant(),
            Expr::Binary(_, a, b) => a.is_constant() && b.is_constant(),
            Expr::Ite(c, a, b) => c.is_constant() && a.is_constant() && b.is_constant(),
            Expr::Call(_, args) => args.iter().all(Expr::is_constant),
        }
    }

    /// Evaluates over a state vector (bools stored as 0/1).
    pub fn eval(&self, state: &[i64]) -> Result<Value, EvalError> {
        match self {
            Expr::Lit(v) => Ok(*v),
            Expr::Ident(name) => Err(EvalError::Unresolved(name.clone())),
            Expr::Var(slot, ty) => {
                let raw = state[*slot];
                Ok(match ty {
                    Type::Bool => Value::Bool(raw != 0),
                    _ => Value::Int(raw),
                })
            }
            Expr::Unary(UnOp::Neg, a) => match a.eval(state)? {
                Value::Int(i) => i.checked_neg().map(Value::Int).ok_or(EvalError::Overflow),
                Value::Real(r) => Ok(Value::Real(-r)),
                Value::Bool(_) => Err(EvalError::Type("-")),
            },
            Expr::Unary(UnOp::Not, a) => Ok(Value::Bool(!a.eval_bool(state)?)),
            Expr::Binary(op, a, b) => eval_binary(*op, a, b, state),
            Expr::Ite(c, a, b) => {
                if c.eval_bool(state)? {
                    a.eval(state)
                } else {
                    b.eval(state)
                }
            }
            Expr::Call(func, args) => eval_call(*func, args, state),
        }
    }

    pub fn eval_bool(&self, state: &[i64]) -> Result<bool, EvalError> {
        self.eval(state)?.as_bool().ok_or(EvalError::Type("bool"))
    }

    pub fn eval_f64(&self, state: &[i64]) -> Result<f64, EvalError> {
        self.eval(state)?.as_f64().ok_or(EvalError::Type("number"))
    }

    /// Infers the static type of a resolved expression.
    pub fn infer_type(&self) -> Result<Type, TypeError> {
        match self {
            Expr::Lit(v) => Ok(v.ty()),
            Expr::Ident(name) => Err(TypeError(format!("unresolved identifier `{name}`"))),
            Expr::Var(_, ty) => Ok(*ty),
            Expr::Unary(UnOp::Neg, a) => match a.infer_type()? {
                Type::Bool => Err(TypeError("unary `-` applied to bool".into())),
                t => Ok(t),
            },
            Expr::Unary(UnOp::Not, a) => match a.infer_type()? {
                Type::Bool => Ok(Type::Bool),
                t => Err(TypeError(format!("`!` applied to {t}"))),
            },
            Expr::Binary(op, a, b) => {
                let (ta, tb) = (a.infer_type()?, b.infer_type()?);
                let numeric = |t: Type| t != Type::Bool;
                match op {
                    BinOp::Add | BinOp::Sub | BinOp::Mul => {
                        if !numeric(ta) || !numeric(tb) {
                            return Err(TypeError(format!("`{}` on {ta} and {tb}", op.symbol())));
                        }
                        Ok(if ta == Type::Int && tb == Type::Int { Type::Int } else { Type::Real })
                    }
                    BinOp::Div => {
                        if !numeric(ta) || !numeric(tb) {
                            return Err(TypeError(format!("`/` on {ta} and {tb}")));
                        }
                        Ok(Type::Real)
                    }
                    BinOp::And | BinOp::Or | BinOp::Implies => {
                        if ta != Type::Bool || tb != Type::Bool {
                            return Err(TypeError(format!("`{}` on {ta} and {tb}", op.symbol())));
                        }
                        Ok(Type::Bool)
                    }
                    BinOp::Eq | BinOp::Ne => {
                        if numeric(ta) != numeric(tb) {
                            return Err(TypeError(format!("`{}` on {ta} and {tb}", op.symbol())));
                        }
                        Ok(Type::Bool)
                    }
                    BinOp::Lt | BinOp::Le | BinOp::Gt | BinOp::Ge => {
                        if !numeric(ta) || !numeric(tb) {
                            return Err(TypeError(format!("`{}` on {ta} and {tb}", op.symbol())));
                        }
                        Ok(Type::Bool)
                    }
                }
            }
            Expr::Ite(c, a, b) => {
                if c.infer_type()? != Type::Bool {
                    return Err(TypeError("condition of `? :` must be bool".into()));
                }
                let (ta, tb) = (a.infer_type()?, b.infer_type()?);
                match (ta, tb) {
                    _ if ta == tb => Ok(ta),
                    (Type::Bool, _) | (_, Type::Bool) => {
                        Err(TypeError(format!("branches of `? :` are {ta} and {tb}")))
                    }
                    _ => Ok(Type::Real),
                }
            }
            Expr::Call(func, args) => {
                let types = args.iter().map(Expr::infer_type).collect::<Result<Vec<_>, _>>()?;
                if types.contains(&Type::Bool) {
                    return Err(TypeError(format!("`{}` applied to bool", func.name())));
                }
                let arity_ok = match func {
                    Func::Min | Func::Max => !args.is_empty(),
                    Func::Floor | Func::Ceil => args.len() == 1,
                    Func::Mod | Func::Pow => args.len() == 2,
                };
                if !arity_ok {
                    return Err(TypeError(format!(
                        "`{}` called with {} argument(s)",
                        func.name(),
                        args.len()
                    )));
                }
                let all_int = types.iter().all(|t| *t == Type::Int);
                match func {
                    Func::Min | Func::Max | Func::Pow => {
                        Ok(if all_int { Type::Int } else { Type::Real })
                    }
                    Func::Floor | Func::Ceil => Ok(Type::Int),
                    Func::Mod => {
                        if all_int {
                            Ok(Type::Int)
                        } else {
                            Err(TypeError("`mod` requires int arguments".into()))
                        }
                    }
                }
            }
        }
    }

    /// Folds every fully constant subtree to a literal. Subtrees whose
    /// evaluation fails are kept as-is so the error surfaces only if the
    /// subtree is actually reached at runtime.
    pub fn fold(&self) -> Expr {
        let folded = match self {
            Expr::Lit(_) | Expr::Ident(_) | Expr::Var(..) => return self.clone(),
            Expr::Unary(op, a) => Expr::Unary(*op, Box::new(a.fold())),
            Expr::Binary(op, a, b) => Expr::Binary(*op, Box::new(a.fold()), Box::new(b.fold())),
            Expr::Ite(c, a, b) => {
                Expr::Ite(Box::new(c.fold()), Box::new(a.fold()), Box::new(b.fold()))
            }
            Expr::Call(func, args) => Expr::Call(*func, args.iter().map(Expr::fold).collect()),
        };
        if folded.is_constant() {
            if let Ok(v) = folded.eval(&[]) {
                return Expr::Lit(v);
            }
        }
        folded
    }

    /// Visits every variable slot read by the expression.
    pub fn for_each_var(&self, f: &mut impl FnMut(usize)) {
        match self {
            Expr::Var(slot, _) => f(*slot),
            Expr::Lit(_) | Expr::Ident(_) => {}
            Expr::Unary(_, a) => a.for_each_var(f),
            Expr::Binary(_, a, b) => {
                a.for_each_var(f);
                b.for_each_var(f);
            }
            Expr::Ite(c, a, b) => {
                c.for_each_var(f);
                a.for_each_var(f);
                b.for_each_var(f);
            }
            Expr::Call(_, args) => args.iter().for_each(|a| a.for_each_var(f)),
        }
    }
}

fn eval_binary(op: BinOp, a: &Expr, b: &Expr, state: &[i64]) -> Result<Value, EvalError> {
    match op {
        BinOp::And => return Ok(Value::Bool(a.eval_bool(state)? && b.eval_bool(state)?)),
        BinOp::Or => return Ok(Value::Bool(a.eval_bool(state)? || b.eval_bool(state)?)),
        BinOp::Implies => return Ok(Value::Bool(!a.eval_bool(state)? || b.eval_bool(state)?)),
        _ => {}
    }
    let (va, vb) = (a.eval(state)?, b.eval(state)?);
    match op {
        BinOp::Add | BinOp::Sub | BinOp::Mul => match (va, vb) {
            (Value::Int(x), Value::Int(y)) => {
                let r = match op {
                    BinOp::Add => x.checked_add(y),
                    BinOp::Sub => x.checked_sub(y),
                    _ => x.checked_mul(y),
                };
                r.map(Value::Int).ok_or(EvalError::Overflow)
            }
            _ => {
                let (x, y) = numeric_pair(va, vb, op.symbol())?;
                Ok(Value::Real(match op {
                    BinOp::Add => x + y,
                    BinOp::Sub => x - y,
                    _ => x * y,
                }))
            }
        },
        BinOp::Div => {
            let (x, y) = numeric_pair(va, vb, "/")?;
            if y == 0.0 {
                return Err(EvalError::DivisionByZero);
            }
            Ok(Value::Real(x / y))
        }
        BinOp::Eq | BinOp::Ne => {
            let equal = match (va, vb) {
                (Value::Bool(x), Value::Bool(y)) => x == y,
                (Value::Int(x), Value::Int(y)) => x == y,
                _ => {
                    let (x, y) = numeric_pair(va, vb, op.symbol())?;
                    x == y
                }
            };
            Ok(Value::Bool(if op == BinOp::Eq { equal } else { !equal }))
        }
        BinOp::Lt | BinOp::Le | BinOp::Gt | BinOp::Ge => {
            let ord = match (va, vb) {
                (Value::Int(x), Value::Int(y)) => x.partial_cmp(&y),
                _ => {
                    let (x, y) = numeric_pair(va, vb, op.symbol())?;
                    x.partial_cmp(&y)
                }
            };
            let ord = ord.ok_or(EvalError::NonFinite)?;
            Ok(Value::Bool(match op {
                BinOp::Lt => ord.is_lt(),
                BinOp::Le => ord.is_le(),
                BinOp::Gt => ord.is_gt(),
                _ => ord.is_ge(),
            }))
        }
        BinOp::And | BinOp::Or | BinOp::Implies => unreachable!(),
    }
}

fn numeric_pair(a: Value, b: Value, op: &'static str) -> Result<(f64, f64), EvalError> {
    match (a.as_f64(), b.as_f64()) {
        (Some(x), Some(y)) => Ok((x, y)),
        _ => Err(EvalError::Type(op)),
    }
}

fn eval_call(func: Func, args: &[Expr], state: &[i64]) -> Result<Value, EvalError> {
    let values = args.iter().map(|a| a.eval(state)).collect::<Result<Vec<_>, _>>()?;
    match func {
        Func::Min | Func::Max => {
            let take_new = |new: f64, old: f64| if func == Func::Min { new < old } else { new > old };
            if values.iter().all(|v| matches!(v, Value::Int(_))) {
                let ints = values.iter().filter_map(Value::as_i64);
                let r = if func == Func::Min { ints.min() } else { ints.max() };
                return r.map(Value::Int).ok_or(EvalError::Type(func.name()));
            }
            let mut best: Option<f64> = None;
            for v in &values {
                let x = v.as_f64().ok_or(EvalError::Type(func.name()))?;
                best = Some(match best {
                    Some(b) if !take_new(x, b) => b,
                    _ => x,
                });
            }
            best.map(Value::Real).ok_or(EvalError::Type(func.name()))
        }
        Func::Floor | Func::Ceil => match values[0] {
            Value::Int(i) => Ok(Value::Int(i)),
            Value::Real(r) => {
                let r = if func == Func::Floor { r.floor() } else { r.ceil() };
                if !r.is_finite() || r.abs() > 9.0e15 {
                    return Err(EvalError::Overflow);
                }
                Ok(Value::Int(r as i64))
            }
            Value::Bool(_) => Err(EvalError::Type(func.name())),
        },
        Func::Mod => match (values[0], values[1]) {
            (Value::Int(_), Value::Int(0)) => Err(EvalError::ModByZero),
            (Value::Int(x), Value::Int(y)) => Ok(Value::Int(x.rem_euclid(y))),
            _ => Err(EvalError::Type("mod")),
        },
        Func::Pow => match (values[0], values[1]) {
            (Value::Int(base), Value::Int(exp)) => {
                if exp < 0 {
                    return Err(EvalError::NegativeExponent);
                }
                let exp = u32::try_from(exp).map_err(|_| EvalError::Overflow)?;
                base.checked_pow(exp).map(Value::Int).ok_or(EvalError::Overflow)
            }
            (a, b) => {
                let (x, y) = numeric_pair(a, b, "pow")?;
                let r = x.powf(y);
                if r.is_finite() {
                    Ok(Value::Real(r))
                } else {
                    Err(EvalError::NonFinite)
                }
            }
        },
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn var(slot: usize) -> Expr {
        Expr::Var(slot, Type::Int)
    }

    fn call(f: Func, args: Vec<Expr>) -> Expr {
        Expr::Call(f, args)
    }

    #[test]
    fn abs_via_max() {
        let e = call(
            Func::Max,
            vec![
                Expr::binary(BinOp::Sub, Expr::int(3), Expr::int(5)),
                Expr::binary(BinOp::Sub, Expr::int(5), Expr::int(3)),
            ],
        );
        assert_eq!(e.eval(&[]), Ok(Value::Int(2)));
    }

    #[test]
    fn guard_at_bound() {
        let e = Expr::binary(BinOp::Lt, var(0), Expr::int(4));
        assert_eq!(e.eval(&[4]), Ok(Value::Bool(false)));
        assert_eq!(e.eval(&[3]), Ok(Value::Bool(true)));
    }

    #[test]
    fn division_and_mod_by_zero() {
        let d = Expr::binary(BinOp::Div, Expr::int(1), var(0));
        assert_eq!(d.eval(&[0]), Err(EvalError::DivisionByZero));
        assert_eq!(d.eval(&[4]), Ok(Value::Real(0.25)));
        let m = call(Func::Mod, vec![Expr::int(7), var(0)]);
        assert_eq!(m.eval(&[0]), Err(EvalError::ModByZero));
        assert_eq!(call(Func::Mod, vec![Expr::int(-1), Expr::int(4)]).eval(&[]), Ok(Value::Int(3)));
    }

    #[test]
    fn short_circuit_skips_errors() {
        let bad = Expr::binary(
            BinOp::Gt,
            Expr::binary(BinOp::Div, Expr::int(1), Expr::int(0)),
            Expr::int(0),
        );
        let e = Expr::binary(BinOp::And, Expr::boolean(false), bad.clone());
        assert_eq!(e.eval(&[]), Ok(Value::Bool(false)));
        // folding keeps the failing subtree instead of erroring
        assert_eq!(bad.fold(), bad);
    }

    #[test]
    fn strict_typing() {
        let mixed = Expr::binary(BinOp::Add, Expr::boolean(true), Expr::int(1));
        assert!(mixed.infer_type().is_err());
        let cmp = Expr::binary(BinOp::Eq, Expr::boolean(true), Expr::int(1));
        assert!(cmp.infer_type().is_err());
        let promote = Expr::binary(BinOp::Add, Expr::Lit(Value::Real(0.5)), Expr::int(1));
        assert_eq!(promote.infer_type(), Ok(Type::Real));
        assert_eq!(Expr::binary(BinOp::Div, Expr::int(1), Expr::int(3)).infer_type(), Ok(Type::Real));
    }

    #[test]
    fn literal_parsing() {
        assert_eq!(Value::parse_literal("1/3"), Some(Value::Real(1.0 / 3.0)));
        assert_eq!(Value::parse_literal("0.333"), Some(Value::Real(0.333)));
        assert_eq!(Value::parse_literal("10"), Some(Value::Int(10)));
        assert_eq!(Value::parse_literal("true"), Some(Value::Bool(true)));
        assert_eq!(Value::parse_literal("abc"), None);
    }
}
