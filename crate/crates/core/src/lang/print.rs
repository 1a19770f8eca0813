use std::fmt::Write;

use super::expr::{Expr, UnOp, Value};
use super::{ModelKind, RewardScope, SymbolicModel, VarKind, Variable};

fn write_expr(out: &mut String, e: &Expr, names: &[String]) {
    match e {
        Expr::Lit(v) => match v {
            Value::Int(i) if *i < 0 => write!(out, "({i})").unwrap(),
            Value::Real(r) if *r < 0.0 || (*r == 0.0 && r.is_sign_negative()) => {
                write!(out, "(-{:?})", -r).unwrap()
            }
            v => write!(out, "{v}").unwrap(),
        },
        Expr::Ident(n) => out.push_str(n),
        Expr::Var(slot, _) => out.push_str(&names[*slot]),
        Expr::Unary(op, a) => {
            out.push_str(if *op == UnOp::Neg { "(-" } else { "(!" });
            write_expr(out, a, names);
            out.push(')');
        }
        Expr::Binary(op, a, b) => {
            out.push('(');
            write_expr(out, a, names);
            write!(out, " {} ", op.symbol()).unwrap();
            write_expr(out, b, names);
            out.push(')');
        }
        Expr::Ite(c, a, b) => {
            out.push('(');
            write_expr(out, c, names);
            out.push_str(" ? ");
            write_expr(out, a, names);
            out.push_str(" : ");
            write_expr(out, b, names);
            out.push(')');
        }
        Expr::Call(f, args) => {
            write!(out, "{}(", f.name()).unwrap();
            for (i, a) in args.iter().enumerate() {
                if i > 0 {
                    out.push_str(", ");
                }
                write_expr(out, a, names);
            }
            out.push(')');
        }
    }
}

pub fn expr_to_string(e: &Expr, names: &[String]) -> String {
    let mut s = String::new();
    write_expr(&mut s, e, names);
    s
}

fn write_var(out: &mut String, v: &Variable) {
    match v.kind {
        VarKind::Int { lo, hi } => {
            writeln!(out, "{} : [{}..{}] init {};", v.name, lo, hi, v.init).unwrap()
        }
        VarKind::Bool => writeln!(out, "{} : bool init {};", v.name, v.init != 0).unwrap(),
    }
}

pub fn print_model(m: &SymbolicModel) -> String {
    let names: Vec<String> = m.variables.iter().map(|v| v.name.clone()).collect();
    let mut out = String::new();
    out.push_str(match m.kind {
        ModelKind::Mdp => "mdp\n\n",
        ModelKind::Dtmc => "dtmc\n\n",
    });
    for c in &m.constants {
        let ty = match c.value {
            Value::Int(_) => "int",
            Value::Real(_) => "double",
            Value::Bool(_) => "bool",
        };
        let mut lit = String::new();
        write_expr(&mut lit, &Expr::Lit(c.value), &names);
        writeln!(out, "const {ty} {} = {lit};", c.name).unwrap();
    }
    for (name, body) in &m.formulas {
        writeln!(out, "formula {name} = {};", expr_to_string(body, &names)).unwrap();
    }
    for v in m.variables.iter().filter(|v| v.module.is_none()) {
        out.push_str("global ");
        write_var(&mut out, v);
    }
    for (mi, module) in m.modules.iter().enumerate() {
        writeln!(out, "\nmodule {}", module.name).unwrap();
        for v in m.variables.iter().filter(|v| v.module == Some(mi)) {
            out.push_str("  ");
            write_var(&mut out, v);
        }
        for c in &module.commands {
            write!(out, "  [{}] {} -> ", c.label.as_deref().unwrap_or(""), expr_to_string(&c.guard, &names))
                .unwrap();
            for (ui, u) in c.updates.iter().enumerate() {
                if ui > 0 {
                    out.push_str(" + ");
                }
                write!(out, "{} : ", expr_to_string(&u.prob, &names)).unwrap();
                if u.assignments.is_empty() {
                    out.push_str("true");
                }
                for (ai, (slot, e)) in u.assignments.iter().enumerate() {
                    if ai > 0 {
                        out.push_str(" & ");
                    }
                    write!(out, "({}'={})", names[*slot], expr_to_string(e, &names)).unwrap();
                }
            }
            out.push_str(";\n");
        }
        out.push_str("endmodule\n");
    }
    out.push('\n');
    for (name, e) in &m.labels {
        writeln!(out, "label \"{name}\" = {};", expr_to_string(e, &names)).unwrap();
    }
    for r in &m.rewards {
        if r.name.is_empty() {
            out.push_str("\nrewards\n");
        } else {
            writeln!(out, "\nrewards \"{}\"", r.name).unwrap();
        }
        for item in &r.items {
            out.push_str("  ");
            match item.scope {
                RewardScope::State => {}
                RewardScope::Silent => out.push_str("[] "),
                RewardScope::Action(a) => write!(out, "[{}] ", m.action_name(a)).unwrap(),
            }
            writeln!(
                out,
                "{} : {};",
                expr_to_string(&item.guard, &names),
                expr_to_string(&item.value, &names)
            )
            .unwrap();
        }
        out.push_str("endrewards\n");
    }
    out
}
