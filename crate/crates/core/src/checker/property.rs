use std::fmt;

use bitvec::vec::BitVec;

use crate::lang::SymbolicModel;
use crate::model::ExplicitMdp;

use super::CheckError;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Quantifier {
    P,
    Pmin,
    Pmax,
    T,
    Tmin,
    Tmax,
    R,
    Rmin,
    Rmax,
}

/// Optimization direction of a quantifier; `None` for the chain variants.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Opt {
    Min,
    Max,
}

impl Quantifier {
    pub fn opt(self) -> Option<Opt> {
        match self {
            Quantifier::Pmin | Quantifier::Tmin | Quantifier::Rmin => Some(Opt::Min),
            Quantifier::Pmax | Quantifier::Tmax | Quantifier::Rmax => Some(Opt::Max),
            _ => None,
        }
    }

    pub fn is_probability(self) -> bool {
        matches!(self, Quantifier::P | Quantifier::Pmin | Quantifier::Pmax)
    }

    pub fn is_time(self) -> bool {
        matches!(self, Quantifier::T | Quantifier::Tmin | Quantifier::Tmax)
    }

    fn name(self) -> &'static str {
        match self {
            Quantifier::P => "P",
            Quantifier::Pmin => "Pmin",
            Quantifier::Pmax => "Pmax",
            Quantifier::T => "T",
            Quantifier::Tmin => "Tmin",
            Quantifier::Tmax => "Tmax",
            Quantifier::R => "R",
            Quantifier::Rmin => "Rmin",
            Quantifier::Rmax => "Rmax",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Target {
    Label(String),
    /// Boolean expression source, resolved against the model at check time.
    Expr(String),
}

/// A parsed query `Q=? [ F target ]` or `Q=? [ F<=k target ]`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Property {
    pub quantifier: Quantifier,
    pub reward: Option<String>,
    pub bound: Option<u64>,
    pub target: Target,
}

impl fmt::Display for Property {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.quantifier.name())?;
        if let Some(r) = &self.reward {
            write!(f, "{{\"{r}\"}}")?;
        }
        f.write_str("=? [ F")?;
        if let Some(k) = self.bound {
            write!(f, "<={k}")?;
        }
        match &self.target {
            Target::Label(l) => write!(f, " \"{l}\" ]"),
            Target::Expr(e) => write!(f, " ({e}) ]"),
        }
    }
}

struct Cursor<'a> {
    text: &'a str,
    at: usize,
}

impl<'a> Cursor<'a> {
    fn rest(&self) -> &'a str {
        &self.text[self.at..]
    }

    fn skip_ws(&mut self) {
        let trimmed = self.rest().trim_start();
        self.at = self.text.len() - trimmed.len();
    }

    fn eat(&mut self, token: &str) -> bool {
        self.skip_ws();
        if self.rest().starts_with(token) {
            self.at += token.len();
            true
        } else {
            false
        }
    }

    fn expect(&mut self, token: &str) -> Result<(), CheckError> {
        if self.eat(token) {
            Ok(())
        } else {
            Err(self.error(&format!("expected `{token}`")))
        }
    }

    fn error(&self, message: &str) -> CheckError {
        CheckError::Syntax(format!("{message} at offset {} in `{}`", self.at, self.text))
    }

    fn word(&mut self) -> &'a str {
        self.skip_ws();
        let rest = self.rest();
        let len = rest.find(|c: char| !(c.is_ascii_alphanumeric() || c == '_')).unwrap_or(rest.len());
        self.at += len;
        &rest[..len]
    }

    fn quoted(&mut self) -> Result<String, CheckError> {
        self.expect("\"")?;
        let rest = self.rest();
        let end = rest.find('"').ok_or_else(|| self.error("unterminated string"))?;
        self.at += end + 1;
        Ok(rest[..end].to_string())
    }
}

/// Parses a property string. Label and reward names are checked later,
/// against a concrete model.
pub fn parse_property(text: &str) -> Result<Property, CheckError> {
    let mut c = Cursor { text, at: 0 };
    let quantifier = match c.word() {
        "P" => Quantifier::P,
        "Pmin" => Quantifier::Pmin,
        "Pmax" => Quantifier::Pmax,
        "T" => Quantifier::T,
        "Tmin" => Quantifier::Tmin,
        "Tmax" => Quantifier::Tmax,
        "R" => Quantifier::R,
        "Rmin" => Quantifier::Rmin,
        "Rmax" => Quantifier::Rmax,
        other => return Err(c.error(&format!("unknown quantifier `{other}`"))),
    };
    let reward = if matches!(quantifier, Quantifier::R | Quantifier::Rmin | Quantifier::Rmax) {
        c.expect("{")?;
        c.skip_ws();
        let name = if c.rest().starts_with('"') { c.quoted()? } else { c.word().to_string() };
        if name.is_empty() {
            return Err(c.error("expected reward structure name"));
        }
        c.expect("}")?;
        Some(name)
    } else {
        None
    };
    c.expect("=?")?;
    c.expect("[")?;
    c.expect("F")?;
    let bound = if c.eat("<=") {
        c.skip_ws();
        let digits = c.word();
        let k = digits.parse::<u64>().map_err(|_| c.error("expected a non-negative step bound"))?;
        Some(k)
    } else {
        None
    };
    c.skip_ws();
    let target = if c.rest().starts_with('"') {
        Target::Label(c.quoted()?)
    } else if c.rest().starts_with('(') {
        let rest = c.rest();
        let mut depth = 0usize;
        let mut end = None;
        for (i, ch) in rest.char_indices() {
            match ch {
                '(' => depth += 1,
                ')' => {
                    depth -= 1;
                    if depth == 0 {
                        end = Some(i);
                        break;
                    }
                }
                _ => {}
            }
        }
        let end = end.ok_or_else(|| c.error("unbalanced parenthesis in target"))?;
        let inner = rest[1..end].trim().to_string();
        if inner.is_empty() {
            return Err(c.error("empty target expression"));
        }
        c.at += end + 1;
        Target::Expr(inner)
    } else {
        return Err(c.error("expected a quoted label or a parenthesized expression"));
    };
    c.expect("]")?;
    c.skip_ws();
    if !c.rest().is_empty() {
        return Err(c.error("trailing input"));
    }
    Ok(Property { quantifier, reward, bound, target })
}

impl Property {
    /// Checks that labels, reward structures and the target expression exist
    /// in `model`.
    pub fn validate(&self, model: &SymbolicModel) -> Result<(), CheckError> {
        match &self.target {
            Target::Label(l) => {
                model.label(l)?;
            }
            Target::Expr(e) => {
                model.parse_condition(e)?;
            }
        }
        if let Some(r) = &self.reward {
            if model.reward_index(r).is_none() {
                return Err(CheckError::UnknownReward(r.clone()));
            }
        }
        if self.bound.is_some() && !self.quantifier.is_probability() {
            return Err(CheckError::Unsupported(format!("step bounds apply to probability queries only: {self}")));
        }
        Ok(())
    }

    /// Target states of an explicit model built from `model`.
    pub fn target_states(&self, model: &SymbolicModel, mdp: &ExplicitMdp) -> Result<BitVec, CheckError> {
        match &self.target {
            Target::Label(l) => mdp
                .label(l)
                .cloned()
                .ok_or_else(|| CheckError::Lang(crate::lang::LangError::UnknownLabel(l.clone()))),
            Target::Expr(e) => {
                let expr = model.parse_condition(e)?;
                mdp.states_satisfying(&expr).map_err(|e| CheckError::Unsupported(format!("target: {e}")))
            }
        }
    }
}
