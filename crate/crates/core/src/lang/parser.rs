//! Recursive-descent parser producing an unresolved program.

use super::expr::{BinOp, Expr, Func, UnOp, Value};
use super::lexer::{tokenize, Pos, Tok};
use super::{LangError, ModelKind};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ConstType {
    Int,
    Double,
    Bool,
}

#[derive(Clone, Debug)]
pub struct RawConst {
    pub name: String,
    pub ty: ConstType,
    pub value: Option<Expr>,
}

#[derive(Clone, Debug)]
pub enum RawVarKind {
    Range(Expr, Expr),
    Bool,
}

#[derive(Clone, Debug)]
pub struct RawVar {
    pub name: String,
    pub kind: RawVarKind,
    pub init: Option<Expr>,
}

#[derive(Clone, Debug)]
pub struct RawUpdate {
    pub prob: Option<Expr>,
    pub assignments: Vec<(String, Expr, Pos)>,
}

#[derive(Clone, Debug)]
pub struct RawCommand {
    pub action: Option<String>,
    pub guard: Expr,
    pub updates: Vec<RawUpdate>,
    pub pos: Pos,
}

#[derive(Clone, Debug)]
pub struct RawModule {
    pub name: String,
    pub vars: Vec<RawVar>,
    pub commands: Vec<RawCommand>,
}

/// `None` = state reward (every choice); `Some(None)` = unlabeled commands;
/// `Some(Some(a))` = choices labeled `a`.
pub type RewardScope = Option<Option<String>>;

#[derive(Clone, Debug)]
pub struct RawRewardItem {
    pub scope: RewardScope,
    pub guard: Expr,
    pub value: Expr,
    pub pos: Pos,
}

#[derive(Clone, Debug)]
pub struct RawRewards {
    pub name: String,
    pub items: Vec<RawRewardItem>,
}

#[derive(Clone, Debug, Default)]
pub struct RawProgram {
    pub kind: Option<ModelKind>,
    pub constants: Vec<RawConst>,
    pub formulas: Vec<(String, Expr, Pos)>,
    pub globals: Vec<RawVar>,
    pub modules: Vec<RawModule>,
    pub labels: Vec<(String, Expr, Pos)>,
    pub rewards: Vec<RawRewards>,
}

const RESERVED: &[&str] = &[
    "mdp", "dtmc", "const", "int", "double", "bool", "formula", "global", "module", "endmodule",
    "init", "label", "rewards", "endrewards", "true", "false", "min", "max", "floor", "ceil",
    "mod", "pow",
];

pub fn is_reserved(name: &str) -> bool {
    RESERVED.contains(&name)
}

pub struct Parser {
    toks: Vec<(Tok, Pos)>,
    at: usize,
}

impl Parser {
    pub fn new(src: &str) -> Result<Self, LangError> {
        Ok(Parser { toks: tokenize(src)?, at: 0 })
    }

    fn peek(&self) -> &Tok {
        &self.toks[self.at].0
    }

    fn peek_at(&self, offset: usize) -> &Tok {
        let i = (self.at + offset).min(self.toks.len() - 1);
        &self.toks[i].0
    }

    pub fn pos(&self) -> Pos {
        self.toks[self.at].1
    }

    fn advance(&mut self) -> Tok {
        let t = self.toks[self.at].0.clone();
        if self.at + 1 < self.toks.len() {
            self.at += 1;
        }
        t
    }

    fn error(&self, expected: &str) -> LangError {
        LangError::Syntax {
            pos: self.pos(),
            message: format!("expected {expected}, found {}", self.peek()),
        }
    }

    fn eat(&mut self, tok: &Tok) -> bool {
        if self.peek() == tok {
            self.advance();
            true
        } else {
            false
        }
    }

    fn expect(&mut self, tok: Tok) -> Result<(), LangError> {
        if self.eat(&tok) {
            Ok(())
        } else {
            Err(self.error(&tok.to_string()))
        }
    }

    fn is_keyword(&self, kw: &str) -> bool {
        matches!(self.peek(), Tok::Ident(s) if s == kw)
    }

    fn eat_keyword(&mut self, kw: &str) -> bool {
        if self.is_keyword(kw) {
            self.advance();
            true
        } else {
            false
        }
    }

    pub fn ident(&mut self) -> Result<String, LangError> {
        match self.peek().clone() {
            Tok::Ident(s) if !is_reserved(&s) => {
                self.advance();
                Ok(s)
            }
            _ => Err(self.error("identifier")),
        }
    }

    fn string(&mut self) -> Result<String, LangError> {
        match self.peek().clone() {
            Tok::Str(s) => {
                self.advance();
                Ok(s)
            }
            _ => Err(self.error("quoted name")),
        }
    }

    pub fn at_eof(&self) -> bool {
        *self.peek() == Tok::Eof
    }

    pub fn expect_eof(&self) -> Result<(), LangError> {
        if self.at_eof() {
            Ok(())
        } else {
            Err(self.error("end of input"))
        }
    }

    pub fn parse_program(&mut self) -> Result<RawProgram, LangError> {
        let mut prog = RawProgram::default();
        while !self.at_eof() {
            let pos = self.pos();
            if self.eat_keyword("mdp") {
                self.set_kind(&mut prog, ModelKind::Mdp, pos)?;
            } else if self.eat_keyword("dtmc") {
                self.set_kind(&mut prog, ModelKind::Dtmc, pos)?;
            } else if self.eat_keyword("const") {
                prog.constants.push(self.const_decl()?);
            } else if self.eat_keyword("formula") {
                let name = self.ident()?;
                self.expect(Tok::Eq)?;
                let e = self.expr()?;
                self.expect(Tok::Semi)?;
                prog.formulas.push((name, e, pos));
            } else if self.eat_keyword("global") {
                prog.globals.push(self.var_decl()?);
            } else if self.eat_keyword("module") {
                prog.modules.push(self.module()?);
            } else if self.eat_keyword("label") {
                let name = self.string()?;
                self.expect(Tok::Eq)?;
                let e = self.expr()?;
                self.expect(Tok::Semi)?;
                prog.labels.push((name, e, pos));
            } else if self.eat_keyword("rewards") {
                prog.rewards.push(self.rewards()?);
            } else {
                return Err(self.error("declaration"));
            }
        }
        Ok(prog)
    }

    fn set_kind(&self, prog: &mut RawProgram, kind: ModelKind, pos: Pos) -> Result<(), LangError> {
        if prog.kind.is_some() {
            return Err(LangError::Syntax { pos, message: "model type declared twice".into() });
        }
        prog.kind = Some(kind);
        Ok(())
    }

    fn const_decl(&mut self) -> Result<RawConst, LangError> {
        let ty = if self.eat_keyword("int") {
            ConstType::Int
        } else if self.eat_keyword("double") {
            ConstType::Double
        } else if self.eat_keyword("bool") {
            ConstType::Bool
        } else {
            ConstType::Int
        };
        let name = self.ident()?;
        let value = if self.eat(&Tok::Eq) { Some(self.expr()?) } else { None };
        self.expect(Tok::Semi)?;
        Ok(RawConst { name, ty, value })
    }

    fn var_decl(&mut self) -> Result<RawVar, LangError> {
        let name = self.ident()?;
        self.expect(Tok::Colon)?;
        let kind = if self.eat_keyword("bool") {
            RawVarKind::Bool
        } else {
            self.expect(Tok::LBracket)?;
            let lo = self.expr()?;
            self.expect(Tok::DotDot)?;
            let hi = self.expr()?;
            self.expect(Tok::RBracket)?;
            RawVarKind::Range(lo, hi)
        };
        let init = if self.eat_keyword("init") { Some(self.expr()?) } else { None };
        self.expect(Tok::Semi)?;
        Ok(RawVar { name, kind, init })
    }

    fn module(&mut self) -> Result<RawModule, LangError> {
        let name = self.ident()?;
        let mut vars = Vec::new();
        let mut commands = Vec::new();
        loop {
            if self.eat_keyword("endmodule") {
                break;
            }
            if *self.peek() == Tok::LBracket {
                commands.push(self.command()?);
            } else if matches!(self.peek(), Tok::Ident(_)) && *self.peek_at(1) == Tok::Colon {
                if !commands.is_empty() {
                    return Err(LangError::Syntax {
                        pos: self.pos(),
                        message: "variable declarations must precede commands".into(),
                    });
                }
                vars.push(self.var_decl()?);
            } else {
                return Err(self.error("variable declaration, command, or `endmodule`"));
            }
        }
        Ok(RawModule { name, vars, commands })
    }

    fn action_label(&mut self) -> Result<Option<String>, LangError> {
        self.expect(Tok::LBracket)?;
        let label = if *self.peek() == Tok::RBracket { None } else { Some(self.ident()?) };
        self.expect(Tok::RBracket)?;
        Ok(label)
    }

    fn command(&mut self) -> Result<RawCommand, LangError> {
        let pos = self.pos();
        let action = self.action_label()?;
        let guard = self.expr()?;
        self.expect(Tok::Arrow)?;
        let mut updates = vec![self.update()?];
        while self.eat(&Tok::Plus) {
            updates.push(self.update()?);
        }
        self.expect(Tok::Semi)?;
        Ok(RawCommand { action, guard, updates, pos })
    }

    fn starts_assignment(&self) -> bool {
        *self.peek() == Tok::LParen
            && matches!(self.peek_at(1), Tok::Ident(_))
            && *self.peek_at(2) == Tok::Prime
    }

    fn update(&mut self) -> Result<RawUpdate, LangError> {
        let prob = if self.starts_assignment()
            || (self.is_keyword("true") && matches!(self.peek_at(1), Tok::Semi | Tok::Plus))
        {
            None
        } else {
            let p = self.expr()?;
            self.expect(Tok::Colon)?;
            Some(p)
        };
        let mut assignments = Vec::new();
        if !self.eat_keyword("true") {
            loop {
                let apos = self.pos();
                self.expect(Tok::LParen)?;
                let var = self.ident()?;
                self.expect(Tok::Prime)?;
                self.expect(Tok::Eq)?;
                let e = self.expr()?;
                self.expect(Tok::RParen)?;
                assignments.push((var, e, apos));
                if !self.eat(&Tok::And) {
                    break;
                }
            }
        }
        Ok(RawUpdate { prob, assignments })
    }

    fn rewards(&mut self) -> Result<RawRewards, LangError> {
        let name = if matches!(self.peek(), Tok::Str(_)) { self.string()? } else { String::new() };
        let mut items = Vec::new();
        while !self.eat_keyword("endrewards") {
            let ipos = self.pos();
            let scope = if *self.peek() == Tok::LBracket { Some(self.action_label()?) } else { None };
            let guard = self.expr()?;
            self.expect(Tok::Colon)?;
            let value = self.expr()?;
            self.expect(Tok::Semi)?;
            items.push(RawRewardItem { scope, guard, value, pos: ipos });
        }
        Ok(RawRewards { name, items })
    }

    /// Parses one expression (lowest precedence: `? :`).
    pub fn expr(&mut self) -> Result<Expr, LangError> {
        let cond = self.implies()?;
        if self.eat(&Tok::Question) {
            let a = self.expr()?;
            self.expect(Tok::Colon)?;
            let b = self.expr()?;
            return Ok(Expr::Ite(Box::new(cond), Box::new(a), Box::new(b)));
        }
        Ok(cond)
    }

    fn implies(&mut self) -> Result<Expr, LangError> {
        let lhs = self.or()?;
        if self.eat(&Tok::Implies) {
            let rhs = self.implies()?;
            return Ok(Expr::binary(BinOp::Implies, lhs, rhs));
        }
        Ok(lhs)
    }

    fn or(&mut self) -> Result<Expr, LangError> {
        let mut lhs = self.and()?;
        while self.eat(&Tok::Or) {
            lhs = Expr::binary(BinOp::Or, lhs, self.and()?);
        }
        Ok(lhs)
    }

    fn and(&mut self) -> Result<Expr, LangError> {
        let mut lhs = self.not()?;
        while self.eat(&Tok::And) {
            lhs = Expr::binary(BinOp::And, lhs, self.not()?);
        }
        Ok(lhs)
    }

    fn not(&mut self) -> Result<Expr, LangError> {
        if self.eat(&Tok::Not) {
            return Ok(Expr::Unary(UnOp::Not, Box::new(self.not()?)));
        }
        self.relational()
    }

    fn relational(&mut self) -> Result<Expr, LangError> {
        let lhs = self.additive()?;
        let op = match self.peek() {
            Tok::Eq => BinOp::Eq,
            Tok::Neq => BinOp::Ne,
            Tok::Lt => BinOp::Lt,
            Tok::Le => BinOp::Le,
            Tok::Gt => BinOp::Gt,
            Tok::Ge => BinOp::Ge,
            _ => return Ok(lhs),
        };
        self.advance();
        let rhs = self.additive()?;
        Ok(Expr::binary(op, lhs, rhs))
    }

    fn additive(&mut self) -> Result<Expr, LangError> {
        let mut lhs = self.multiplicative()?;
        loop {
            let op = match self.peek() {
                Tok::Plus => BinOp::Add,
                Tok::Minus => BinOp::Sub,
                _ => return Ok(lhs),
            };
            self.advance();
            lhs = Expr::binary(op, lhs, self.multiplicative()?);
        }
    }

    fn multiplicative(&mut self) -> Result<Expr, LangError> {
        let mut lhs = self.unary()?;
        loop {
            let op = match self.peek() {
                Tok::Star => BinOp::Mul,
                Tok::Slash => BinOp::Div,
                _ => return Ok(lhs),
            };
            self.advance();
            lhs = Expr::binary(op, lhs, self.unary()?);
        }
    }

    fn unary(&mut self) -> Result<Expr, LangError> {
        if self.eat(&Tok::Minus) {
            return Ok(Expr::Unary(UnOp::Neg, Box::new(self.unary()?)));
        }
        self.primary()
    }

    fn primary(&mut self) -> Result<Expr, LangError> {
        match self.peek().clone() {
            Tok::Int(i) => {
                self.advance();
                Ok(Expr::Lit(Value::Int(i)))
            }
            Tok::Real(r) => {
                self.advance();
                Ok(Expr::Lit(Value::Real(r)))
            }
            Tok::LParen => {
                self.advance();
                let e = self.expr()?;
                self.expect(Tok::RParen)?;
                Ok(e)
            }
            Tok::Ident(name) => {
                if name == "true" || name == "false" {
                    self.advance();
                    return Ok(Expr::Lit(Value::Bool(name == "true")));
                }
                if let Some(func) = Func::from_name(&name) {
                    self.advance();
                    self.expect(Tok::LParen)?;
                    let mut args = vec![self.expr()?];
                    while self.eat(&Tok::Comma) {
                        args.push(self.expr()?);
                    }
                    self.expect(Tok::RParen)?;
                    return Ok(Expr::Call(func, args));
                }
                let name = self.ident()?;
                Ok(Expr::Ident(name))
            }
            _ => Err(self.error("expression")),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse_expr(s: &str) -> Expr {
        let mut p = Parser::new(s).unwrap();
        let e = p.expr().unwrap();
        p.expect_eof().unwrap();
        e
    }

    #[test]
    fn precedence() {
        let e = parse_expr("!a & b | c => d");
        let expected = Expr::binary(
            BinOp::Implies,
            Expr::binary(
                BinOp::Or,
                Expr::binary(
                    BinOp::And,
                    Expr::Unary(UnOp::Not, Box::new(Expr::Ident("a".into()))),
                    Expr::Ident("b".into()),
                ),
                Expr::Ident("c".into()),
            ),
            Expr::Ident("d".into()),
        );
        assert_eq!(e, expected);
        assert_eq!(
            parse_expr("1 + 2 * 3"),
            Expr::binary(BinOp::Add, Expr::int(1), Expr::binary(BinOp::Mul, Expr::int(2), Expr::int(3)))
        );
    }

    #[test]
    fn updates_split_on_plus() {
        let mut p = Parser::new("[a] x<2 -> 0.5 : (x'=x+1) + 1-0.5 : true;").unwrap();
        let c = p.command().unwrap();
        assert_eq!(c.updates.len(), 2);
        assert_eq!(c.updates[0].assignments.len(), 1);
        assert!(c.updates[1].assignments.is_empty());
        assert!(c.updates[1].prob.is_some());
    }

    #[test]
    fn ternary_probability() {
        let mut p = Parser::new("[] true -> x>1 ? 0.5 : 0.25 : (x'=0) + (x>1 ? 0.5 : 0.75) : true;").unwrap();
        let c = p.command().unwrap();
        assert_eq!(c.updates.len(), 2);
        assert!(matches!(c.updates[0].prob, Some(Expr::Ite(..))));
    }

    #[test]
    fn implicit_probability_one() {
        let mut p = Parser::new("[go] true -> (x'=1) & (y'=2);").unwrap();
        let c = p.command().unwrap();
        assert!(c.updates[0].prob.is_none());
        assert_eq!(c.updates[0].assignments.len(), 2);
    }
}
