//! Relation expressions over hole variables.
//!
//! The grammar is a small infix language:
//!
//! ```text
//! expr  := and ('or' and)*
//! and   := cmp ('and' cmp)*
//! cmp   := sum (('==' | '!=' | '<' | '<=' | '>' | '>=') sum)?
//! sum   := prod (('+' | '-') prod)*
//! prod  := unary (('*' | '/') unary)*
//! unary := '-' unary | atom
//! atom  := INT | STRING | 'true' | 'false' | IDENT ('[' '-'? INT ']')? | '(' expr ')'
//! ```
//!
//! `/` is floor division on integers. Evaluation is partial: arithmetic
//! overflow, division by zero, type confusion and out-of-range selection all
//! yield `None`, which a constraint treats as unsatisfied.

use std::collections::BTreeSet;
use std::fmt;

use crate::literal::Literal;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum BinOp {
    Add,
    Sub,
    Mul,
    Div,
    Eq,
    Ne,
    Lt,
    Le,
    Gt,
    Ge,
    And,
    Or,
}

impl BinOp {
    fn symbol(self) -> &'static str {
        match self {
            BinOp::Add => "+",
            BinOp::Sub => "-",
            BinOp::Mul => "*",
            BinOp::Div => "/",
            BinOp::Eq => "==",
            BinOp::Ne => "!=",
            BinOp::Lt => "<",
            BinOp::Le => "<=",
            BinOp::Gt => ">",
            BinOp::Ge => ">=",
            BinOp::And => "and",
            BinOp::Or => "or",
        }
    }

    fn precedence(self) -> u8 {
        match self {
            BinOp::Or => 1,
            BinOp::And => 2,
            BinOp::Eq | BinOp::Ne | BinOp::Lt | BinOp::Le | BinOp::Gt | BinOp::Ge => 3,
            BinOp::Add | BinOp::Sub => 4,
            BinOp::Mul | BinOp::Div => 5,
        }
    }

    pub fn is_comparison(self) -> bool {
        self.precedence() == 3
    }
}

/// Expression tree, generic over its variable type.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum Expr<V> {
    Const(Literal),
    Var(V),
    /// Element of a constant vector chosen by an integer expression; negative
    /// indices count from the end.
    Select(Vec<i64>, Box<Expr<V>>),
    Neg(Box<Expr<V>>),
    Bin(BinOp, Box<Expr<V>>, Box<Expr<V>>),
}

/// A symbolic variable as written in documentation relations: a name with an
/// optional component index, e.g. `kernel_size[0]` or `in_shape[-1]`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct SymVar {
    pub name: String,
    pub index: Option<i64>,
}

impl fmt::Display for SymVar {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.index {
            Some(i) => write!(f, "{}[{}]", self.name, i),
            None => f.write_str(&self.name),
        }
    }
}

impl<V> Expr<V> {
    pub fn int(v: i64) -> Self {
        Expr::Const(Literal::Int(v))
    }

    pub fn var(v: V) -> Self {
        Expr::Var(v)
    }

    pub fn bin(op: BinOp, lhs: Expr<V>, rhs: Expr<V>) -> Self {
        Expr::Bin(op, Box::new(lhs), Box::new(rhs))
    }

    pub fn and(self, rhs: Expr<V>) -> Self {
        Expr::bin(BinOp::And, self, rhs)
    }

    pub fn or(self, rhs: Expr<V>) -> Self {
        Expr::bin(BinOp::Or, self, rhs)
    }

    /// Rewrites every variable, possibly into a whole subexpression.
    pub fn try_map_vars<W, E>(
        &self,
        f: &mut impl FnMut(&V) -> Result<Expr<W>, E>,
    ) -> Result<Expr<W>, E> {
        Ok(match self {
            Expr::Const(c) => Expr::Const(c.clone()),
            Expr::Var(v) => f(v)?,
            Expr::Select(vs, idx) => Expr::Select(vs.clone(), Box::new(idx.try_map_vars(f)?)),
            Expr::Neg(e) => Expr::Neg(Box::new(e.try_map_vars(f)?)),
            Expr::Bin(op, a, b) => {
                Expr::Bin(*op, Box::new(a.try_map_vars(f)?), Box::new(b.try_map_vars(f)?))
            }
        })
    }

    pub fn visit_vars<'a>(&'a self, f: &mut impl FnMut(&'a V)) {
        match self {
            Expr::Const(_) => {}
            Expr::Var(v) => f(v),
            Expr::Select(_, idx) => idx.visit_vars(f),
            Expr::Neg(e) => e.visit_vars(f),
            Expr::Bin(_, a, b) => {
                a.visit_vars(f);
                b.visit_vars(f);
            }
        }
    }

    /// Evaluates with `lookup` supplying variable values.
    pub fn eval(&self, lookup: &impl Fn(&V) -> Option<Literal>) -> Option<Literal> {
        match self {
            Expr::Const(c) => Some(c.clone()),
            Expr::Var(v) => lookup(v),
            Expr::Select(vs, idx) => {
                let i = idx.eval(lookup)?.as_int()?;
                let len = vs.len() as i64;
                let pos = if i < 0 { i + len } else { i };
                if (0..len).contains(&pos) {
                    Some(Literal::Int(vs[pos as usize]))
                } else {
                    None
                }
            }
            Expr::Neg(e) => match e.eval(lookup)? {
                Literal::Int(v) => v.checked_neg().map(Literal::Int),
                Literal::Float(v) => Some(Literal::Float(-v)),
                _ => None,
            },
            Expr::Bin(op, a, b) => {
                let a = a.eval(lookup)?;
                let b = b.eval(lookup)?;
                apply(*op, &a, &b)
            }
        }
    }

    /// Evaluates as a truth value; anything undefined or non-boolean is false.
    pub fn holds(&self, lookup: &impl Fn(&V) -> Option<Literal>) -> bool {
        matches!(self.eval(lookup), Some(Literal::Bool(true)))
    }

    /// Renders with a caller-supplied variable printer.
    pub fn render(&self, name: &impl Fn(&V) -> String) -> String {
        self.render_prec(name, 0)
    }

    fn render_prec(&self, name: &impl Fn(&V) -> String, parent: u8) -> String {
        match self {
            Expr::Const(c) => c.to_string(),
            Expr::Var(v) => name(v),
            Expr::Select(vs, idx) => {
                let items: Vec<String> = vs.iter().map(|v| v.to_string()).collect();
                format!("[{}][{}]", items.join(", "), idx.render_prec(name, 0))
            }
            Expr::Neg(e) => format!("-{}", e.render_prec(name, 6)),
            Expr::Bin(op, a, b) => {
                let p = op.precedence();
                let text = format!(
                    "{} {} {}",
                    a.render_prec(name, p),
                    op.symbol(),
                    // right operand binds tighter so that `a - (b - c)` keeps its parens
                    b.render_prec(name, p + 1)
                );
                if p < parent {
                    format!("({text})")
                } else {
                    text
                }
            }
        }
    }
}

impl<V: Ord + Clone> Expr<V> {
    pub fn variables(&self) -> BTreeSet<V> {
        let mut out = BTreeSet::new();
        self.visit_vars(&mut |v| {
            out.insert(v.clone());
        });
        out
    }
}

fn as_f64(lit: &Literal) -> Option<f64> {
    match lit {
        Literal::Int(v) => Some(*v as f64),
        Literal::Float(v) => Some(*v),
        _ => None,
    }
}

fn apply(op: BinOp, a: &Literal, b: &Literal) -> Option<Literal> {
    use Literal::*;
    match op {
        BinOp::And | BinOp::Or => match (a, b) {
            (Bool(x), Bool(y)) => Some(Bool(if op == BinOp::And { *x && *y } else { *x || *y })),
            _ => None,
        },
        BinOp::Add | BinOp::Sub | BinOp::Mul | BinOp::Div => match (a, b) {
            (Int(x), Int(y)) => match op {
                BinOp::Add => x.checked_add(*y).map(Int),
                BinOp::Sub => x.checked_sub(*y).map(Int),
                BinOp::Mul => x.checked_mul(*y).map(Int),
                _ => {
                    if *y == 0 {
                        None
                    } else {
                        // checked_div guards i64::MIN / -1
                        let q = x.checked_div(*y)?;
                        let q = if (x % y != 0) && ((*x < 0) != (*y < 0)) { q - 1 } else { q };
                        Some(Int(q))
                    }
                }
            },
            _ => {
                let (x, y) = (as_f64(a)?, as_f64(b)?);
                let r = match op {
                    BinOp::Add => x + y,
                    BinOp::Sub => x - y,
                    BinOp::Mul => x * y,
                    _ => {
                        if y == 0.0 {
                            return None;
                        }
                        x / y
                    }
                };
                Some(Float(r))
            }
        },
        _ => {
            let ord = match (a, b) {
                (Int(x), Int(y)) => x.cmp(y),
                (Str(x), Str(y)) => x.cmp(y),
                (Bool(x), Bool(y)) => x.cmp(y),
                _ => as_f64(a)?.partial_cmp(&as_f64(b)?)?,
            };
            let result = match op {
                BinOp::Eq => ord.is_eq(),
                BinOp::Ne => ord.is_ne(),
                BinOp::Lt => ord.is_lt(),
                BinOp::Le => ord.is_le(),
                BinOp::Gt => ord.is_gt(),
                _ => ord.is_ge(),
            };
            Some(Bool(result))
        }
    }
}

impl fmt::Display for Expr<SymVar> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.render(&|v| v.to_string()))
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
#[error("relation syntax error at offset {offset}: {message}")]
pub struct ParseError {
    pub offset: usize,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Int(i64),
    Str(String),
    Ident(String),
    Op(&'static str),
    LParen,
    RParen,
    LBracket,
    RBracket,
}

fn lex(src: &str) -> Result<Vec<(usize, Tok)>, ParseError> {
    let bytes = src.as_bytes();
    let mut out = Vec::new();
    let mut i = 0;
    while i < bytes.len() {
        let c = bytes[i] as char;
        if c.is_ascii_whitespace() {
            i += 1;
            continue;
        }
        let start = i;
        if c.is_ascii_digit() {
            while i < bytes.len() && bytes[i].is_ascii_digit() {
                i += 1;
            }
            let v = src[start..i].parse::<i64>().map_err(|e| ParseError {
                offset: start,
                message: e.to_string(),
            })?;
            out.push((start, Tok::Int(v)));
            continue;
        }
        if c.is_ascii_alphabetic() || c == '_' {
            while i < bytes.len() && (bytes[i].is_ascii_alphanumeric() || bytes[i] == b'_') {
                i += 1;
            }
            out.push((start, Tok::Ident(src[start..i].to_string())));
            continue;
        }
        if c == '"' || c == '\'' {
            i += 1;
            let body_start = i;
            while i < bytes.len() && bytes[i] as char != c {
                i += 1;
            }
            if i >= bytes.len() {
                return Err(ParseError { offset: start, message: "unterminated string".into() });
            }
            out.push((start, Tok::Str(src[body_start..i].to_string())));
            i += 1;
            continue;
        }
        let two = src.get(i..i + 2).unwrap_or("");
        let op = match two {
            "==" => Some("=="),
            "!=" => Some("!="),
            "<=" => Some("<="),
            ">=" => Some(">="),
            "&&" => Some("and"),
            "||" => Some("or"),
            _ => None,
        };
        if let Some(op) = op {
            out.push((start, Tok::Op(op)));
            i += 2;
            continue;
        }
        let tok = match c {
            '+' => Tok::Op("+"),
            '-' => Tok::Op("-"),
            '*' => Tok::Op("*"),
            '/' => Tok::Op("/"),
            '<' => Tok::Op("<"),
            '>' => Tok::Op(">"),
            '(' => Tok::LParen,
            ')' => Tok::RParen,
            '[' => Tok::LBracket,
            ']' => Tok::RBracket,
            other => {
                return Err(ParseError {
                    offset: start,
                    message: format!("unexpected character `{other}`"),
                })
            }
        };
        out.push((start, tok));
        i += 1;
    }
    Ok(out)
}

struct Parser {
    toks: Vec<(usize, Tok)>,
    pos: usize,
    len: usize,
}

impl Parser {
    fn peek(&self) -> Option<&Tok> {
        self.toks.get(self.pos).map(|(_, t)| t)
    }

    fn offset(&self) -> usize {
        self.toks.get(self.pos).map(|(o, _)| *o).unwrap_or(self.len)
    }

    fn err<T>(&self, message: impl Into<String>) -> Result<T, ParseError> {
        Err(ParseError { offset: self.offset(), message: message.into() })
    }

    fn eat_op(&mut self, ops: &[&'static str]) -> Option<&'static str> {
        let found = match self.peek() {
            Some(Tok::Op(op)) if ops.contains(op) => Some(*op),
            Some(Tok::Ident(word)) if (word == "and" || word == "or") && ops.contains(&word.as_str()) => {
                Some(if word == "and" { "and" } else { "or" })
            }
            _ => None,
        };
        if found.is_some() {
            self.pos += 1;
        }
        found
    }

    fn binary(
        &mut self,
        ops: &[&'static str],
        next: fn(&mut Self) -> Result<Expr<SymVar>, ParseError>,
    ) -> Result<Expr<SymVar>, ParseError> {
        let mut lhs = next(self)?;
        while let Some(op) = self.eat_op(ops) {
            let rhs = next(self)?;
            lhs = Expr::bin(op_of(op), lhs, rhs);
        }
        Ok(lhs)
    }

    fn or(&mut self) -> Result<Expr<SymVar>, ParseError> {
        self.binary(&["or"], Self::and)
    }

    fn and(&mut self) -> Result<Expr<SymVar>, ParseError> {
        self.binary(&["and"], Self::cmp)
    }

    fn cmp(&mut self) -> Result<Expr<SymVar>, ParseError> {
        let lhs = self.sum()?;
        if let Some(op) = self.eat_op(&["==", "!=", "<=", ">=", "<", ">"]) {
            let rhs = self.sum()?;
            return Ok(Expr::bin(op_of(op), lhs, rhs));
        }
        Ok(lhs)
    }

    fn sum(&mut self) -> Result<Expr<SymVar>, ParseError> {
        self.binary(&["+", "-"], Self::prod)
    }

    fn prod(&mut self) -> Result<Expr<SymVar>, ParseError> {
        self.binary(&["*", "/"], Self::unary)
    }

    fn unary(&mut self) -> Result<Expr<SymVar>, ParseError> {
        if self.eat_op(&["-"]).is_some() {
            return match self.unary()? {
                Expr::Const(Literal::Int(v)) => Ok(Expr::int(-v)),
                e => Ok(Expr::Neg(Box::new(e))),
            };
        }
        self.atom()
    }

    fn atom(&mut self) -> Result<Expr<SymVar>, ParseError> {
        let Some(tok) = self.peek().cloned() else {
            return self.err("unexpected end of expression");
        };
        self.pos += 1;
        match tok {
            Tok::Int(v) => Ok(Expr::int(v)),
            Tok::Str(s) => Ok(Expr::Const(Literal::Str(s))),
            Tok::Ident(name) if name == "true" || name == "True" => Ok(Expr::Const(Literal::Bool(true))),
            Tok::Ident(name) if name == "false" || name == "False" => {
                Ok(Expr::Const(Literal::Bool(false)))
            }
            Tok::Ident(name) if name == "and" || name == "or" => {
                self.pos -= 1;
                self.err(format!("unexpected `{name}`"))
            }
            Tok::Ident(name) => {
                let mut index = None;
                if self.peek() == Some(&Tok::LBracket) {
                    self.pos += 1;
                    let neg = self.eat_op(&["-"]).is_some();
                    let Some(Tok::Int(v)) = self.peek().cloned() else {
                        return self.err("expected integer index");
                    };
                    self.pos += 1;
                    if self.peek() != Some(&Tok::RBracket) {
                        return self.err("expected `]`");
                    }
                    self.pos += 1;
                    index = Some(if neg { -v } else { v });
                }
                Ok(Expr::Var(SymVar { name, index }))
            }
            Tok::LParen => {
                let inner = self.or()?;
                if self.peek() != Some(&Tok::RParen) {
                    return self.err("expected `)`");
                }
                self.pos += 1;
                Ok(inner)
            }
            other => {
                self.pos -= 1;
                self.err(format!("unexpected token {other:?}"))
            }
        }
    }
}

fn op_of(op: &str) -> BinOp {
    match op {
        "+" => BinOp::Add,
        "-" => BinOp::Sub,
        "*" => BinOp::Mul,
        "/" => BinOp::Div,
        "==" => BinOp::Eq,
        "!=" => BinOp::Ne,
        "<" => BinOp::Lt,
        "<=" => BinOp::Le,
        ">" => BinOp::Gt,
        ">=" => BinOp::Ge,
        "and" => BinOp::And,
        _ => BinOp::Or,
    }
}

/// Parses a relation written in the infix grammar above.
pub fn parse_relation(src: &str) -> Result<Expr<SymVar>, ParseError> {
    let toks = lex(src)?;
    let mut p = Parser { toks, pos: 0, len: src.len() };
    let e = p.or()?;
    if p.pos != p.toks.len() {
        return p.err("trailing input");
    }
    Ok(e)
}
