//! Parser round trips and expression evaluation against a reference
//! evaluator.

use proptest::prelude::*;

use rlcheck::benchmarks::entries;
use rlcheck::lang::{
    eval_expr, expr_to_string, parse_model, parse_model_with, BinOp, ConstOverrides, Expr, Func, ResolveOptions, SymbolicModel, Type,
    UnOp, Value,
};

#[test]
fn fixtures_print_and_reparse_to_the_same_model() {
    for e in entries() {
        let model = e.load(&ConstOverrides::new()).unwrap();
        let printed = model.to_source();
        let again = parse_model(&printed, &ConstOverrides::new()).unwrap_or_else(|err| panic!("{}: {err}\n{printed}", e.name));
        assert_eq!(again, model, "{}", e.name);
        assert_eq!(again.to_source(), printed);
    }
}

#[test]
fn folding_order_does_not_matter() {
    for e in entries() {
        let a = parse_model_with(e.source, &ConstOverrides::new(), ResolveOptions { fold_formulas_first: false }).unwrap();
        let b = parse_model_with(e.source, &ConstOverrides::new(), ResolveOptions { fold_formulas_first: true }).unwrap();
        assert_eq!(a, b, "{}", e.name);
    }
}

/// Well-typed expression over `x`, `y` (ints) and `b` (bool), kept apart
/// from the library's tree so the reference evaluator shares no code.
#[derive(Clone, Debug)]
enum Ref {
    Int(i64),
    Real(f64),
    Bool(bool),
    X,
    Y,
    B,
    Neg(Box<Ref>),
    Not(Box<Ref>),
    Arith(char, Box<Ref>, Box<Ref>),
    Div(Box<Ref>, Box<Ref>),
    Cmp(&'static str, Box<Ref>, Box<Ref>),
    Logic(char, Box<Ref>, Box<Ref>),
    Ite(Box<Ref>, Box<Ref>, Box<Ref>),
    MinMax(bool, Box<Ref>, Box<Ref>),
    Mod(Box<Ref>, Box<Ref>),
    Floor(Box<Ref>),
}

#[derive(Clone, Copy, Debug, PartialEq)]
enum RV {
    I(i64),
    R(f64),
    B(bool),
}

const X: i64 = 3;
const Y: i64 = -2;
const BV: bool = true;

fn num(v: RV) -> f64 {
    match v {
        RV::I(i) => i as f64,
        RV::R(r) => r,
        RV::B(_) => unreachable!("typed generator"),
    }
}

/// Naive evaluation; `None` is any evaluation error.
fn reference(e: &Ref) -> Option<RV> {
    use RV::*;
    Some(match e {
        Ref::Int(i) => I(*i),
        Ref::Real(r) => R(*r),
        Ref::Bool(b) => B(*b),
        Ref::X => I(X),
        Ref::Y => I(Y),
        Ref::B => B(BV),
        Ref::Neg(a) => match reference(a)? {
            I(i) => I(i.checked_neg()?),
            R(r) => R(-r),
            B(_) => unreachable!(),
        },
        Ref::Not(a) => match reference(a)? {
            B(b) => B(!b),
            _ => unreachable!(),
        },
        Ref::Arith(op, a, b) => match (reference(a)?, reference(b)?) {
            (I(x), I(y)) => I(match op {
                '+' => x.checked_add(y)?,
                '-' => x.checked_sub(y)?,
                _ => x.checked_mul(y)?,
            }),
            (va, vb) => {
                let (x, y) = (num(va), num(vb));
                R(match op {
                    '+' => x + y,
                    '-' => x - y,
                    _ => x * y,
                })
            }
        },
        Ref::Div(a, b) => {
            let (x, y) = (num(reference(a)?), num(reference(b)?));
            if y == 0.0 {
                return None;
            }
            R(x / y)
        }
        Ref::Cmp(op, a, b) => {
            let (va, vb) = (reference(a)?, reference(b)?);
            let ord = match (va, vb) {
                (I(x), I(y)) => x.cmp(&y),
                _ => num(va).partial_cmp(&num(vb))?,
            };
            B(match *op {
                "=" => ord.is_eq(),
                "!=" => ord.is_ne(),
                "<" => ord.is_lt(),
                "<=" => ord.is_le(),
                ">" => ord.is_gt(),
                _ => ord.is_ge(),
            })
        }
        Ref::Logic(op, a, b) => {
            let RV::B(x) = reference(a)? else { unreachable!() };
            let rhs = || match reference(b) {
                Some(RV::B(y)) => Some(y),
                None => None,
                _ => unreachable!(),
            };
            B(match op {
                '&' => x && rhs()?,
                '|' => x || rhs()?,
                _ => !x || rhs()?,
            })
        }
        Ref::Ite(c, a, b) => {
            let RV::B(c) = reference(c)? else { unreachable!() };
            if c {
                reference(a)?
            } else {
                reference(b)?
            }
        }
        Ref::MinMax(is_min, a, b) => match (reference(a)?, reference(b)?) {
            (I(x), I(y)) => I(if *is_min { x.min(y) } else { x.max(y) }),
            (va, vb) => {
                let (x, y) = (num(va), num(vb));
                let take_second = if *is_min { y < x } else { y > x };
                R(if take_second { y } else { x })
            }
        },
        Ref::Mod(a, b) => match (reference(a)?, reference(b)?) {
            (I(_), I(0)) => return None,
            (I(x), I(y)) => I(x.rem_euclid(y)),
            _ => unreachable!(),
        },
        Ref::Floor(a) => match reference(a)? {
            I(i) => I(i),
            R(r) => {
                let f = r.floor();
                if !f.is_finite() || f.abs() > 9.0e15 {
                    return None;
                }
                I(f as i64)
            }
            B(_) => unreachable!(),
        },
    })
}

fn to_expr(e: &Ref) -> Expr {
    let b = |e: &Ref| Box::new(to_expr(e));
    match e {
        Ref::Int(i) => Expr::Lit(Value::Int(*i)),
        Ref::Real(r) => Expr::Lit(Value::Real(*r)),
        Ref::Bool(v) => Expr::Lit(Value::Bool(*v)),
        Ref::X => Expr::Var(0, Type::Int),
        Ref::Y => Expr::Var(1, Type::Int),
        Ref::B => Expr::Var(2, Type::Bool),
        Ref::Neg(a) => Expr::Unary(UnOp::Neg, b(a)),
        Ref::Not(a) => Expr::Unary(UnOp::Not, b(a)),
        Ref::Arith(op, x, y) => {
            let op = match op {
                '+' => BinOp::Add,
                '-' => BinOp::Sub,
                _ => BinOp::Mul,
            };
            Expr::Binary(op, b(x), b(y))
        }
        Ref::Div(x, y) => Expr::Binary(BinOp::Div, b(x), b(y)),
        Ref::Cmp(op, x, y) => {
            let op = match *op {
                "=" => BinOp::Eq,
                "!=" => BinOp::Ne,
                "<" => BinOp::Lt,
                "<=" => BinOp::Le,
                ">" => BinOp::Gt,
                _ => BinOp::Ge,
            };
            Expr::Binary(op, b(x), b(y))
        }
        Ref::Logic(op, x, y) => {
            let op = match op {
                '&' => BinOp::And,
                '|' => BinOp::Or,
                _ => BinOp::Implies,
            };
            Expr::Binary(op, b(x), b(y))
        }
        Ref::Ite(c, x, y) => Expr::Ite(b(c), b(x), b(y)),
        Ref::MinMax(is_min, x, y) => {
            Expr::Call(if *is_min { Func::Min } else { Func::Max }, vec![to_expr(x), to_expr(y)])
        }
        Ref::Mod(x, y) => Expr::Call(Func::Mod, vec![to_expr(x), to_expr(y)]),
        Ref::Floor(x) => Expr::Call(Func::Floor, vec![to_expr(x)]),
    }
}

fn int_expr() -> impl Strategy<Value = Ref> {
    let leaf = prop_oneof![(-20i64..20).prop_map(Ref::Int), Just(Ref::X), Just(Ref::Y)];
    leaf.prop_recursive(4, 24, 3, |inner| {
        prop_oneof![
            inner.clone().prop_map(|a| Ref::Neg(Box::new(a))),
            (prop_oneof![Just('+'), Just('-'), Just('*')], inner.clone(), inner.clone())
                .prop_map(|(op, a, b)| Ref::Arith(op, Box::new(a), Box::new(b))),
            (any::<bool>(), inner.clone(), inner.clone()).prop_map(|(m, a, b)| Ref::MinMax(m, Box::new(a), Box::new(b))),
            (inner.clone(), inner.clone()).prop_map(|(a, b)| Ref::Mod(Box::new(a), Box::new(b))),
            (inner.clone(), inner.clone()).prop_map(|(a, b)| Ref::Floor(Box::new(Ref::Div(Box::new(a), Box::new(b))))),
            (
                (inner.clone(), inner.clone()).prop_map(|(a, b)| Ref::Cmp("<", Box::new(a), Box::new(b))),
                inner.clone(),
                inner
            )
                .prop_map(|(c, a, b)| Ref::Ite(Box::new(c), Box::new(a), Box::new(b))),
        ]
    })
}

fn real_expr() -> impl Strategy<Value = Ref> {
    prop_oneof![
        (-100i32..100).prop_map(|k| Ref::Real(f64::from(k) / 8.0)),
        (int_expr(), int_expr()).prop_map(|(a, b)| Ref::Div(Box::new(a), Box::new(b))),
        (int_expr(), (-40i32..40).prop_map(|k| Ref::Real(f64::from(k) / 4.0)))
            .prop_map(|(a, b)| Ref::Arith('*', Box::new(a), Box::new(b))),
    ]
}

fn bool_expr() -> impl Strategy<Value = Ref> {
    let cmp_op = prop_oneof![Just("="), Just("!="), Just("<"), Just("<="), Just(">"), Just(">=")];
    let leaf = prop_oneof![
        any::<bool>().prop_map(Ref::Bool),
        Just(Ref::B),
        (cmp_op.clone(), int_expr(), int_expr()).prop_map(|(op, a, b)| Ref::Cmp(op, Box::new(a), Box::new(b))),
        (cmp_op, real_expr(), int_expr()).prop_map(|(op, a, b)| Ref::Cmp(op, Box::new(a), Box::new(b))),
    ];
    leaf.prop_recursive(3, 16, 2, |inner| {
        prop_oneof![
            inner.clone().prop_map(|a| Ref::Not(Box::new(a))),
            (prop_oneof![Just('&'), Just('|'), Just('>')], inner.clone(), inner)
                .prop_map(|(op, a, b)| Ref::Logic(op, Box::new(a), Box::new(b))),
        ]
    })
}

fn value_of(v: Value) -> RV {
    match v {
        Value::Int(i) => RV::I(i),
        Value::Real(r) => RV::R(r),
        Value::Bool(b) => RV::B(b),
    }
}

fn same(a: Option<RV>, b: Option<RV>) -> bool {
    match (a, b) {
        (Some(RV::R(x)), Some(RV::R(y))) => x.to_bits() == y.to_bits(),
        _ => a == b,
    }
}

fn variables_model() -> SymbolicModel {
    let src = "mdp
module m
  x : [-5..5] init 3;
  y : [-5..5] init -2;
  b : bool init true;
  [tick] true -> true;
endmodule
";
    parse_model(src, &ConstOverrides::new()).unwrap()
}

const STATE: [i64; 3] = [X, Y, BV as i64];

proptest! {
    #![proptest_config(ProptestConfig { cases: 1000, ..ProptestConfig::default() })]

    #[test]
    fn eval_agrees_with_the_reference(e in prop_oneof![int_expr(), real_expr(), bool_expr()]) {
        let got = eval_expr(&to_expr(&e), &STATE).ok().map(value_of);
        prop_assert!(same(got, reference(&e)), "{:?}: {:?} vs {:?}", e, got, reference(&e));
    }

    #[test]
    fn printed_conditions_reparse_to_the_same_meaning(e in bool_expr()) {
        let model = variables_model();
        let names: Vec<String> = model.variables.iter().map(|v| v.name.clone()).collect();
        let expr = to_expr(&e);
        let text = expr_to_string(&expr, &names);
        let parsed = model.parse_condition(&text);
        let want = eval_expr(&expr, &STATE).ok().map(value_of);
        match parsed {
            Ok(p) => prop_assert!(same(eval_expr(&p, &STATE).ok().map(value_of), want), "{}", text),
            // Folding may surface a constant error at parse time.
            Err(_) => prop_assert!(want.is_none(), "{} failed to parse", text),
        }
    }

    #[test]
    fn folding_preserves_values(e in prop_oneof![int_expr(), bool_expr()]) {
        let expr = to_expr(&e);
        let folded = expr.fold();
        prop_assert!(same(eval_expr(&folded, &STATE).ok().map(value_of), eval_expr(&expr, &STATE).ok().map(value_of)));
    }
}
