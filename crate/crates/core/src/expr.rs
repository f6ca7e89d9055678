//! Expression language hosted by red boxes, bar positions, loop guards and
//! loop variant functions.
//!
//! The grammar covers integer literals, identifiers, `+ - * / %` (also `mod`),
//! comparisons (`< <= > >= == !=`, with `=` accepted for equality), logical
//! `&& || !` (also `and`, `or`, `not`), the constants `true`/`false` and
//! parentheses. Precedence from tightest to loosest: unary, multiplicative,
//! additive, comparison (non-associative), `&&`, `||`.
//!
//! Empty or whitespace-only text denotes [`Expr::Blank`], the value of a box
//! the student left empty.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;

use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

use crate::Coded;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum UnOp {
    Neg,
    Not,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum BinOp {
    Add,
    Sub,
    Mul,
    Div,
    Mod,
    Lt,
    Le,
    Gt,
    Ge,
    Eq,
    Ne,
    And,
    Or,
}

impl BinOp {
    fn precedence(self) -> u8 {
        match self {
            BinOp::Or => 1,
            BinOp::And => 2,
            BinOp::Lt | BinOp::Le | BinOp::Gt | BinOp::Ge | BinOp::Eq | BinOp::Ne => 3,
            BinOp::Add | BinOp::Sub => 4,
            BinOp::Mul | BinOp::Div | BinOp::Mod => 5,
        }
    }

    pub fn is_comparison(self) -> bool {
        self.precedence() == 3
    }

    pub fn is_logical(self) -> bool {
        matches!(self, BinOp::And | BinOp::Or)
    }

    pub fn symbol(self) -> &'static str {
        match self {
            BinOp::Add => "+",
            BinOp::Sub => "-",
            BinOp::Mul => "*",
            BinOp::Div => "/",
            BinOp::Mod => "%",
            BinOp::Lt => "<",
            BinOp::Le => "<=",
            BinOp::Gt => ">",
            BinOp::Ge => ">=",
            BinOp::Eq => "==",
            BinOp::Ne => "!=",
            BinOp::And => "&&",
            BinOp::Or => "||",
        }
    }
}

/// Abstract syntax of a box or guard expression.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum Expr {
    /// A box left empty. Only ever appears as a whole expression.
    Blank,
    Int(i64),
    Bool(bool),
    Var(String),
    Unary(UnOp, Box<Expr>),
    Binary(BinOp, Box<Expr>, Box<Expr>),
}

/// Result of evaluating an expression.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Value {
    Int(i64),
    Bool(bool),
}

impl fmt::Display for Value {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Value::Int(v) => write!(f, "{v}"),
            Value::Bool(b) => write!(f, "{b}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("syntax error at offset {offset}: {message}")]
pub struct SyntaxError {
    /// Character offset into the source text.
    pub offset: usize,
    pub message: String,
}

impl Coded for SyntaxError {
    fn code(&self) -> &'static str {
        "SYNTAX_ERROR"
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum EvalError {
    #[error("unbound variable `{0}`")]
    UnboundVariable(String),
    #[error("division by zero")]
    DivByZero,
    #[error("type mismatch: expected {expected}")]
    TypeMismatch { expected: &'static str },
    #[error("blank expression cannot be evaluated")]
    BlankEval,
    #[error("integer overflow")]
    Overflow,
}

impl Coded for EvalError {
    fn code(&self) -> &'static str {
        match self {
            EvalError::UnboundVariable(_) => "UNBOUND_VARIABLE",
            EvalError::DivByZero => "DIV_BY_ZERO",
            EvalError::TypeMismatch { .. } => "TYPE_MISMATCH",
            EvalError::BlankEval => "BLANK_EVAL",
            EvalError::Overflow => "OVERFLOW",
        }
    }
}

/// Variable lookup used by [`Expr::eval`].
pub trait Env {
    fn lookup(&self, name: &str) -> Option<i64>;
}

impl Env for BTreeMap<String, i64> {
    fn lookup(&self, name: &str) -> Option<i64> {
        self.get(name).copied()
    }
}

impl Env for HashMap<String, i64> {
    fn lookup(&self, name: &str) -> Option<i64> {
        self.get(name).copied()
    }
}

impl Env for [(&str, i64)] {
    fn lookup(&self, name: &str) -> Option<i64> {
        self.iter().find(|(n, _)| *n == name).map(|(_, v)| *v)
    }
}

impl<const N: usize> Env for [(&str, i64); N] {
    fn lookup(&self, name: &str) -> Option<i64> {
        self.as_slice().lookup(name)
    }
}

pub fn parse_expression(text: &str) -> Result<Expr, SyntaxError> {
    let tokens = lex(text)?;
    if tokens.is_empty() {
        return Ok(Expr::Blank);
    }
    let mut parser = Parser {
        tokens,
        pos: 0,
        end: text.chars().count(),
    };
    let expr = parser.or()?;
    if let Some(tok) = parser.peek() {
        return Err(SyntaxError {
            offset: tok.offset,
            message: format!("unexpected {}", tok.kind.describe()),
        });
    }
    Ok(expr)
}

impl Expr {
    pub fn var(name: impl Into<String>) -> Self {
        Expr::Var(name.into())
    }

    pub fn binary(op: BinOp, lhs: Expr, rhs: Expr) -> Self {
        Expr::Binary(op, Box::new(lhs), Box::new(rhs))
    }

    #[allow(clippy::should_implement_trait)]
    pub fn not(e: Expr) -> Self {
        Expr::Unary(UnOp::Not, Box::new(e))
    }

    pub fn is_blank(&self) -> bool {
        matches!(self, Expr::Blank)
    }

    /// Identifiers occurring in the expression.
    pub fn variables(&self) -> BTreeSet<String> {
        let mut out = BTreeSet::new();
        self.collect_vars(&mut out);
        out
    }

    fn collect_vars(&self, out: &mut BTreeSet<String>) {
        match self {
            Expr::Var(v) => {
                out.insert(v.clone());
            }
            Expr::Unary(_, e) => e.collect_vars(out),
            Expr::Binary(_, l, r) => {
                l.collect_vars(out);
                r.collect_vars(out);
            }
            Expr::Blank | Expr::Int(_) | Expr::Bool(_) => {}
        }
    }

    /// True when the expression mentions no variable and is not blank.
    pub fn is_constant(&self) -> bool {
        !self.is_blank() && self.variables().is_empty()
    }

    /// Value of a variable-free expression, if it evaluates without error.
    pub fn constant_value(&self) -> Option<Value> {
        if !self.is_constant() {
            return None;
        }
        let empty: [(&str, i64); 0] = [];
        self.eval(&empty).ok()
    }

    pub fn eval<E: Env + ?Sized>(&self, env: &E) -> Result<Value, EvalError> {
        match self {
            Expr::Blank => Err(EvalError::BlankEval),
            Expr::Int(v) => Ok(Value::Int(*v)),
            Expr::Bool(b) => Ok(Value::Bool(*b)),
            Expr::Var(name) => env
                .lookup(name)
                .map(Value::Int)
                .ok_or_else(|| EvalError::UnboundVariable(name.clone())),
            Expr::Unary(UnOp::Neg, e) => {
                let v = e.eval_int(env)?;
                v.checked_neg().map(Value::Int).ok_or(EvalError::Overflow)
            }
            Expr::Unary(UnOp::Not, e) => Ok(Value::Bool(!e.eval_bool(env)?)),
            Expr::Binary(BinOp::And, l, r) => Ok(Value::Bool(l.eval_bool(env)? && r.eval_bool(env)?)),
            Expr::Binary(BinOp::Or, l, r) => Ok(Value::Bool(l.eval_bool(env)? || r.eval_bool(env)?)),
            Expr::Binary(op, l, r) if op.is_comparison() => {
                let (a, b) = (l.eval(env)?, r.eval(env)?);
                match (op, a, b) {
                    (BinOp::Eq, Value::Bool(x), Value::Bool(y)) => Ok(Value::Bool(x == y)),
                    (BinOp::Ne, Value::Bool(x), Value::Bool(y)) => Ok(Value::Bool(x != y)),
                    (_, Value::Int(x), Value::Int(y)) => Ok(Value::Bool(compare(*op, x, y))),
                    _ => Err(EvalError::TypeMismatch { expected: "integer" }),
                }
            }
            Expr::Binary(op, l, r) => {
                let (a, b) = (l.eval_int(env)?, r.eval_int(env)?);
                arith(*op, a, b).map(Value::Int)
            }
        }
    }

    pub fn eval_int<E: Env + ?Sized>(&self, env: &E) -> Result<i64, EvalError> {
        match self.eval(env)? {
            Value::Int(v) => Ok(v),
            Value::Bool(_) => Err(EvalError::TypeMismatch { expected: "integer" }),
        }
    }

    pub fn eval_bool<E: Env + ?Sized>(&self, env: &E) -> Result<bool, EvalError> {
        match self.eval(env)? {
            Value::Bool(b) => Ok(b),
            Value::Int(_) => Err(EvalError::TypeMismatch { expected: "boolean" }),
        }
    }

    /// Folds constant subterms, removes double negations and trivially true
    /// conjuncts such as `x == x`.
    pub fn normalize(&self) -> Expr {
        let folded = match self {
            Expr::Unary(op, e) => {
                let inner = e.normalize();
                match (op, inner) {
                    (UnOp::Not, Expr::Unary(UnOp::Not, x)) => *x,
                    (UnOp::Not, Expr::Bool(b)) => Expr::Bool(!b),
                    (op, inner) => Expr::Unary(*op, Box::new(inner)),
                }
            }
            Expr::Binary(op, l, r) => {
                let (l, r) = (l.normalize(), r.normalize());
                match (op, &l, &r) {
                    (BinOp::And, Expr::Bool(true), _) => r,
                    (BinOp::And, _, Expr::Bool(true)) => l,
                    (BinOp::Or, Expr::Bool(false), _) => r,
                    (BinOp::Or, _, Expr::Bool(false)) => l,
                    (BinOp::Eq | BinOp::Le | BinOp::Ge, a, b) if a == b => Expr::Bool(true),
                    (BinOp::Ne | BinOp::Lt | BinOp::Gt, a, b) if a == b => Expr::Bool(false),
                    _ => Expr::binary(*op, l, r),
                }
            }
            other => other.clone(),
        };
        match folded.constant_value() {
            Some(Value::Int(v)) => Expr::Int(v),
            Some(Value::Bool(b)) => Expr::Bool(b),
            None => folded,
        }
    }

    /// Conjunction of `parts`; the empty conjunction is `true`.
    pub fn conjunction(parts: impl IntoIterator<Item = Expr>) -> Expr {
        parts
            .into_iter()
            .reduce(|acc, e| Expr::binary(BinOp::And, acc, e))
            .unwrap_or(Expr::Bool(true))
    }

    fn precedence(&self) -> u8 {
        match self {
            Expr::Binary(op, ..) => op.precedence(),
            Expr::Unary(..) => 6,
            _ => 7,
        }
    }
}

fn compare(op: BinOp, a: i64, b: i64) -> bool {
    match op {
        BinOp::Lt => a < b,
        BinOp::Le => a <= b,
        BinOp::Gt => a > b,
        BinOp::Ge => a >= b,
        BinOp::Eq => a == b,
        BinOp::Ne => a != b,
        _ => unreachable!("not a comparison"),
    }
}

/// Checked integer arithmetic shared with the C-subset interpreter.
/// Division truncates toward zero.
pub(crate) fn arith(op: BinOp, a: i64, b: i64) -> Result<i64, EvalError> {
    let out = match op {
        BinOp::Add => a.checked_add(b),
        BinOp::Sub => a.checked_sub(b),
        BinOp::Mul => a.checked_mul(b),
        BinOp::Div | BinOp::Mod if b == 0 => return Err(EvalError::DivByZero),
        BinOp::Div => a.checked_div(b),
        BinOp::Mod => a.checked_rem(b),
        _ => unreachable!("not an arithmetic operator"),
    };
    out.ok_or(EvalError::Overflow)
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Expr::Blank => Ok(()),
            Expr::Int(v) => write!(f, "{v}"),
            Expr::Bool(b) => write!(f, "{b}"),
            Expr::Var(v) => f.write_str(v),
            Expr::Unary(op, e) => {
                f.write_str(match op {
                    UnOp::Neg => "-",
                    UnOp::Not => "!",
                })?;
                // `-8` would re-parse as a literal, so a negated literal keeps its parens.
                let wrap = e.precedence() < 6 || matches!(**e, Expr::Int(_));
                if wrap {
                    write!(f, "({e})")
                } else {
                    write!(f, "{e}")
                }
            }
            Expr::Binary(op, l, r) => {
                let p = op.precedence();
                let wrap_l = l.precedence() < p || (op.is_comparison() && l.precedence() == p);
                let wrap_r = r.precedence() <= p;
                if wrap_l {
                    write!(f, "({l})")?;
                } else {
                    write!(f, "{l}")?;
                }
                write!(f, " {} ", op.symbol())?;
                if wrap_r {
                    write!(f, "({r})")
                } else {
                    write!(f, "{r}")
                }
            }
        }
    }
}

impl Serialize for Expr {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for Expr {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let text = String::deserialize(deserializer)?;
        parse_expression(&text).map_err(serde::de::Error::custom)
    }
}

impl std::str::FromStr for Expr {
    type Err = SyntaxError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        parse_expression(s)
    }
}

#[derive(Debug, Clone, PartialEq)]
enum TokKind {
    Int(u64),
    Ident(String),
    True,
    False,
    Op(BinOp),
    Minus,
    Not,
    LParen,
    RParen,
}

impl TokKind {
    fn describe(&self) -> String {
        match self {
            TokKind::Int(v) => format!("literal `{v}`"),
            TokKind::Ident(s) => format!("identifier `{s}`"),
            TokKind::True => "`true`".into(),
            TokKind::False => "`false`".into(),
            TokKind::Op(op) => format!("operator `{}`", op.symbol()),
            TokKind::Minus => "operator `-`".into(),
            TokKind::Not => "operator `!`".into(),
            TokKind::LParen => "`(`".into(),
            TokKind::RParen => "`)`".into(),
        }
    }
}

#[derive(Debug, Clone)]
struct Token {
    kind: TokKind,
    offset: usize,
}

fn lex(text: &str) -> Result<Vec<Token>, SyntaxError> {
    let chars: Vec<char> = text.chars().collect();
    let mut out = Vec::new();
    let mut i = 0;
    while i < chars.len() {
        let c = chars[i];
        let start = i;
        let next = chars.get(i + 1).copied();
        let err = |message: String| SyntaxError { offset: start, message };
        let (kind, len) = match c {
            c if c.is_whitespace() => {
                i += 1;
                continue;
            }
            '0'..='9' => {
                let mut j = i;
                while j < chars.len() && chars[j].is_ascii_digit() {
                    j += 1;
                }
                let digits: String = chars[i..j].iter().collect();
                let v = digits
                    .parse::<u64>()
                    .map_err(|_| err(format!("integer literal `{digits}` out of range")))?;
                (TokKind::Int(v), j - i)
            }
            c if c.is_alphabetic() || c == '_' => {
                let mut j = i;
                while j < chars.len() && (chars[j].is_alphanumeric() || chars[j] == '_') {
                    j += 1;
                }
                let word: String = chars[i..j].iter().collect();
                let kind = match word.as_str() {
                    "true" => TokKind::True,
                    "false" => TokKind::False,
                    "and" => TokKind::Op(BinOp::And),
                    "or" => TokKind::Op(BinOp::Or),
                    "not" => TokKind::Not,
                    "mod" => TokKind::Op(BinOp::Mod),
                    _ => TokKind::Ident(word),
                };
                (kind, j - i)
            }
            '+' => (TokKind::Op(BinOp::Add), 1),
            '-' | '−' => (TokKind::Minus, 1),
            '*' if next == Some('*') => return Err(err("unsupported operator `**`".into())),
            '*' | '×' => (TokKind::Op(BinOp::Mul), 1),
            '/' | '÷' => (TokKind::Op(BinOp::Div), 1),
            '%' => (TokKind::Op(BinOp::Mod), 1),
            '<' if next == Some('=') => (TokKind::Op(BinOp::Le), 2),
            '<' if next == Some('>') => (TokKind::Op(BinOp::Ne), 2),
            '<' => (TokKind::Op(BinOp::Lt), 1),
            '>' if next == Some('=') => (TokKind::Op(BinOp::Ge), 2),
            '>' => (TokKind::Op(BinOp::Gt), 1),
            '≤' => (TokKind::Op(BinOp::Le), 1),
            '≥' => (TokKind::Op(BinOp::Ge), 1),
            '≠' => (TokKind::Op(BinOp::Ne), 1),
            '=' if next == Some('=') => (TokKind::Op(BinOp::Eq), 2),
            '=' => (TokKind::Op(BinOp::Eq), 1),
            '!' if next == Some('=') => (TokKind::Op(BinOp::Ne), 2),
            '!' | '¬' => (TokKind::Not, 1),
            '&' if next == Some('&') => (TokKind::Op(BinOp::And), 2),
            '|' if next == Some('|') => (TokKind::Op(BinOp::Or), 2),
            '∧' => (TokKind::Op(BinOp::And), 1),
            '∨' => (TokKind::Op(BinOp::Or), 1),
            '(' => (TokKind::LParen, 1),
            ')' => (TokKind::RParen, 1),
            other => return Err(err(format!("unexpected character `{other}`"))),
        };
        out.push(Token { kind, offset: start });
        i += len;
    }
    Ok(out)
}

struct Parser {
    tokens: Vec<Token>,
    pos: usize,
    end: usize,
}

impl Parser {
    fn peek(&self) -> Option<&Token> {
        self.tokens.get(self.pos)
    }

    fn peek_op(&self) -> Option<BinOp> {
        match self.peek()?.kind {
            TokKind::Op(op) => Some(op),
            TokKind::Minus => Some(BinOp::Sub),
            _ => None,
        }
    }

    fn offset(&self) -> usize {
        self.peek().map_or(self.end, |t| t.offset)
    }

    fn error(&self, message: impl Into<String>) -> SyntaxError {
        SyntaxError {
            offset: self.offset(),
            message: message.into(),
        }
    }

    fn binary_level(
        &mut self,
        ops: &[BinOp],
        next: fn(&mut Self) -> Result<Expr, SyntaxError>,
    ) -> Result<Expr, SyntaxError> {
        let mut lhs = next(self)?;
        while let Some(op) = self.peek_op().filter(|op| ops.contains(op)) {
            self.pos += 1;
            let rhs = next(self)?;
            lhs = Expr::binary(op, lhs, rhs);
        }
        Ok(lhs)
    }

    fn or(&mut self) -> Result<Expr, SyntaxError> {
        self.binary_level(&[BinOp::Or], Self::and)
    }

    fn and(&mut self) -> Result<Expr, SyntaxError> {
        self.binary_level(&[BinOp::And], Self::comparison)
    }

    fn comparison(&mut self) -> Result<Expr, SyntaxError> {
        let lhs = self.additive()?;
        match self.peek_op() {
            Some(op) if op.is_comparison() => {
                self.pos += 1;
                let rhs = self.additive()?;
                if matches!(self.peek_op(), Some(op) if op.is_comparison()) {
                    return Err(self.error("comparisons cannot be chained"));
                }
                Ok(Expr::binary(op, lhs, rhs))
            }
            _ => Ok(lhs),
        }
    }

    fn additive(&mut self) -> Result<Expr, SyntaxError> {
        self.binary_level(&[BinOp::Add, BinOp::Sub], Self::multiplicative)
    }

    fn multiplicative(&mut self) -> Result<Expr, SyntaxError> {
        self.binary_level(&[BinOp::Mul, BinOp::Div, BinOp::Mod], Self::unary)
    }

    fn unary(&mut self) -> Result<Expr, SyntaxError> {
        match self.peek().map(|t| &t.kind) {
            Some(TokKind::Not) => {
                self.pos += 1;
                Ok(Expr::Unary(UnOp::Not, Box::new(self.unary()?)))
            }
            Some(TokKind::Minus) => {
                self.pos += 1;
                if let Some(TokKind::Int(v)) = self.peek().map(|t| &t.kind) {
                    let v = *v;
                    let lit = i64::try_from(-(v as i128)).map_err(|_| self.error("integer literal out of range"))?;
                    self.pos += 1;
                    return Ok(Expr::Int(lit));
                }
                Ok(Expr::Unary(UnOp::Neg, Box::new(self.unary()?)))
            }
            _ => self.atom(),
        }
    }

    fn atom(&mut self) -> Result<Expr, SyntaxError> {
        let Some(tok) = self.peek().cloned() else {
            return Err(self.error("unexpected end of expression"));
        };
        self.pos += 1;
        match tok.kind {
            TokKind::Int(v) => i64::try_from(v).map(Expr::Int).map_err(|_| SyntaxError {
                offset: tok.offset,
                message: "integer literal out of range".into(),
            }),
            TokKind::Ident(name) => Ok(Expr::Var(name)),
            TokKind::True => Ok(Expr::Bool(true)),
            TokKind::False => Ok(Expr::Bool(false)),
            TokKind::LParen => {
                let inner = self.or()?;
                match self.peek() {
                    Some(Token {
                        kind: TokKind::RParen, ..
                    }) => {
                        self.pos += 1;
                        Ok(inner)
                    }
                    _ => Err(self.error("expected `)`")),
                }
            }
            other => Err(SyntaxError {
                offset: tok.offset,
                message: format!("unexpected {}", other.describe()),
            }),
        }
    }
}
