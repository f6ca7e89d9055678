use std::collections::{BTreeMap, HashMap};
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::ast::*;
use crate::expr::{arith, BinOp, EvalError, UnOp};
use crate::gli::LoopTrace;
use crate::Coded;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExecutionResult {
    pub stdout: String,
    pub exit_code: i64,
    pub steps: u64,
    /// Trace of the first activation of each loop that ran at least once.
    pub traces: BTreeMap<u32, LoopTrace>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RuntimeErrorKind {
    DivByZero,
    ArrayOutOfBounds,
    ScanfExhausted,
    ScanfInvalid,
    Overflow,
}

impl fmt::Display for RuntimeErrorKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            RuntimeErrorKind::DivByZero => "div-by-zero",
            RuntimeErrorKind::ArrayOutOfBounds => "array-out-of-bounds",
            RuntimeErrorKind::ScanfExhausted => "scanf-exhausted",
            RuntimeErrorKind::ScanfInvalid => "scanf-invalid",
            RuntimeErrorKind::Overflow => "overflow",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ExecError {
    #[error("step budget of {budget} exceeded (probable non-termination)")]
    StepBudgetExceeded { budget: u64 },
    #[error("runtime error at line {line}: {kind}")]
    Runtime { kind: RuntimeErrorKind, line: u32 },
}

impl Coded for ExecError {
    fn code(&self) -> &'static str {
        match self {
            ExecError::StepBudgetExceeded { .. } => "STEP_BUDGET_EXCEEDED",
            ExecError::Runtime { .. } => "RUNTIME_ERROR",
        }
    }
}

enum Slot {
    Scalar(i64),
    Array(Vec<i64>),
}

enum Flow {
    Next,
    Return(i64),
}

struct Machine<'a> {
    scopes: Vec<HashMap<&'a str, Slot>>,
    input: std::str::SplitWhitespace<'a>,
    stdout: String,
    steps: u64,
    budget: u64,
    traces: BTreeMap<u32, LoopTrace>,
}

/// Runs `main`. Every guard test, assignment and I/O call costs one step;
/// the run fails once `budget` steps would be exceeded.
pub fn interpret(program: &Program, stdin: &str, budget: u64) -> Result<ExecutionResult, ExecError> {
    let mut m = Machine {
        scopes: vec![HashMap::new()],
        input: stdin.split_whitespace(),
        stdout: String::new(),
        steps: 0,
        budget,
        traces: BTreeMap::new(),
    };
    let exit_code = match m.block(&program.body)? {
        Flow::Return(v) => v,
        Flow::Next => 0,
    };
    Ok(ExecutionResult {
        stdout: m.stdout,
        exit_code,
        steps: m.steps,
        traces: m.traces,
    })
}

fn runtime(kind: RuntimeErrorKind, pos: Pos) -> ExecError {
    ExecError::Runtime { kind, line: pos.line }
}

fn lift(e: EvalError, pos: Pos) -> ExecError {
    let kind = match e {
        EvalError::DivByZero => RuntimeErrorKind::DivByZero,
        _ => RuntimeErrorKind::Overflow,
    };
    runtime(kind, pos)
}

impl<'a> Machine<'a> {
    fn tick(&mut self) -> Result<(), ExecError> {
        if self.steps >= self.budget {
            return Err(ExecError::StepBudgetExceeded { budget: self.budget });
        }
        self.steps += 1;
        Ok(())
    }

    fn scoped<T>(&mut self, f: impl FnOnce(&mut Self) -> Result<T, ExecError>) -> Result<T, ExecError> {
        self.scopes.push(HashMap::new());
        let out = f(self);
        self.scopes.pop();
        out
    }

    fn slot(&mut self, name: &str) -> &mut Slot {
        self.scopes
            .iter_mut()
            .rev()
            .find_map(|s| s.get_mut(name))
            .expect("parser guarantees declaration before use")
    }

    fn snapshot(&self) -> BTreeMap<String, i64> {
        let mut out = BTreeMap::new();
        for scope in &self.scopes {
            for (name, slot) in scope {
                match slot {
                    Slot::Scalar(v) => {
                        out.insert(name.to_string(), *v);
                    }
                    // an inner array may shadow an outer scalar
                    Slot::Array(_) => {
                        out.remove(*name);
                    }
                }
            }
        }
        out
    }

    fn block(&mut self, stmts: &'a [Stmt]) -> Result<Flow, ExecError> {
        self.scoped(|m| {
            for s in stmts {
                if let Flow::Return(v) = m.stmt(s)? {
                    return Ok(Flow::Return(v));
                }
            }
            Ok(Flow::Next)
        })
    }

    fn nested(&mut self, s: &'a Stmt) -> Result<Flow, ExecError> {
        self.scoped(|m| m.stmt(s))
    }

    fn stmt(&mut self, s: &'a Stmt) -> Result<Flow, ExecError> {
        match &s.kind {
            StmtKind::Declare(decls) => {
                for d in decls {
                    match d {
                        Declarator::Scalar { name, init } => {
                            let v = match init {
                                Some(e) => {
                                    self.tick()?;
                                    self.eval(e)?
                                }
                                None => 0,
                            };
                            self.scopes.last_mut().unwrap().insert(name, Slot::Scalar(v));
                        }
                        Declarator::Array { name, len } => {
                            self.scopes.last_mut().unwrap().insert(name, Slot::Array(vec![0; *len]));
                        }
                    }
                }
            }
            StmtKind::Assign { target, op, value } => {
                self.tick()?;
                let rhs = self.eval(value)?;
                let new = match op {
                    None => rhs,
                    Some(op) => {
                        let old = self.read_place(target)?;
                        arith(*op, old, rhs).map_err(|e| lift(e, value.pos))?
                    }
                };
                self.write_place(target, new, s.pos)?;
            }
            StmtKind::If {
                cond,
                then_branch,
                else_branch,
            } => {
                self.tick()?;
                if self.eval(cond)? != 0 {
                    return self.nested(then_branch);
                } else if let Some(e) = else_branch {
                    return self.nested(e);
                }
            }
            StmtKind::While { id, cond, body } => {
                let record = !self.traces.contains_key(id);
                let mut snaps = Vec::new();
                let flow = loop {
                    if record {
                        snaps.push(self.snapshot());
                    }
                    self.tick()?;
                    if self.eval(cond)? == 0 {
                        break Flow::Next;
                    }
                    if let Flow::Return(v) = self.nested(body)? {
                        break Flow::Return(v);
                    }
                };
                if record {
                    self.traces.insert(*id, LoopTrace::new(snaps));
                }
                return Ok(flow);
            }
            StmtKind::For {
                id,
                init,
                cond,
                step,
                body,
            } => {
                return self.scoped(|m| {
                    if let Some(init) = init {
                        m.stmt(init)?;
                    }
                    let record = !m.traces.contains_key(id);
                    let mut snaps = Vec::new();
                    let flow = loop {
                        if record {
                            snaps.push(m.snapshot());
                        }
                        m.tick()?;
                        if let Some(c) = cond {
                            if m.eval(c)? == 0 {
                                break Flow::Next;
                            }
                        }
                        if let Flow::Return(v) = m.nested(body)? {
                            break Flow::Return(v);
                        }
                        if let Some(step) = step {
                            m.stmt(step)?;
                        }
                    };
                    if record {
                        m.traces.insert(*id, LoopTrace::new(snaps));
                    }
                    Ok(flow)
                });
            }
            StmtKind::Block(b) => return self.block(b),
            StmtKind::Printf { format, args } => {
                self.tick()?;
                let mut values = Vec::with_capacity(args.len());
                for a in args {
                    values.push(self.eval(a)?);
                }
                let mut values = values.into_iter();
                for piece in format {
                    match piece {
                        FormatPiece::Text(t) => self.stdout.push_str(t),
                        FormatPiece::Int => {
                            let v = values.next().expect("arity checked by the parser");
                            self.stdout.push_str(&v.to_string());
                        }
                    }
                }
            }
            StmtKind::Scanf { targets } => {
                self.tick()?;
                for t in targets {
                    let word = self
                        .input
                        .next()
                        .ok_or_else(|| runtime(RuntimeErrorKind::ScanfExhausted, s.pos))?;
                    let v = word
                        .parse::<i64>()
                        .map_err(|_| runtime(RuntimeErrorKind::ScanfInvalid, s.pos))?;
                    self.write_place(t, v, s.pos)?;
                }
            }
            StmtKind::Return(value) => {
                self.tick()?;
                let v = match value {
                    Some(e) => self.eval(e)?,
                    None => 0,
                };
                return Ok(Flow::Return(v));
            }
            StmtKind::Empty => {}
        }
        Ok(Flow::Next)
    }

    fn index(&mut self, name: &str, index: &CExpr) -> Result<usize, ExecError> {
        let i = self.eval(index)?;
        let Slot::Array(a) = self.slot(name) else {
            unreachable!("parser checks array usage")
        };
        usize::try_from(i)
            .ok()
            .filter(|&i| i < a.len())
            .ok_or_else(|| runtime(RuntimeErrorKind::ArrayOutOfBounds, index.pos))
    }

    fn read_place(&mut self, place: &Place) -> Result<i64, ExecError> {
        match place {
            Place::Var(name) => match self.slot(name) {
                Slot::Scalar(v) => Ok(*v),
                Slot::Array(_) => unreachable!("parser checks scalar usage"),
            },
            Place::Elem(name, index) => {
                let i = self.index(name, index)?;
                match self.slot(name) {
                    Slot::Array(a) => Ok(a[i]),
                    Slot::Scalar(_) => unreachable!(),
                }
            }
        }
    }

    fn write_place(&mut self, place: &Place, v: i64, _pos: Pos) -> Result<(), ExecError> {
        match place {
            Place::Var(name) => match self.slot(name) {
                Slot::Scalar(x) => *x = v,
                Slot::Array(_) => unreachable!("parser checks scalar usage"),
            },
            Place::Elem(name, index) => {
                let i = self.index(name, index)?;
                match self.slot(name) {
                    Slot::Array(a) => a[i] = v,
                    Slot::Scalar(_) => unreachable!(),
                }
            }
        }
        Ok(())
    }

    fn eval(&mut self, e: &CExpr) -> Result<i64, ExecError> {
        match &e.kind {
            CExprKind::Int(v) => Ok(*v),
            CExprKind::Var(name) => match self.slot(name) {
                Slot::Scalar(v) => Ok(*v),
                Slot::Array(_) => unreachable!("parser checks scalar usage"),
            },
            CExprKind::Index(name, index) => {
                let i = self.index(name, index)?;
                match self.slot(name) {
                    Slot::Array(a) => Ok(a[i]),
                    Slot::Scalar(_) => unreachable!(),
                }
            }
            CExprKind::Unary(UnOp::Neg, inner) => {
                let v = self.eval(inner)?;
                v.checked_neg()
                    .ok_or_else(|| runtime(RuntimeErrorKind::Overflow, e.pos))
            }
            CExprKind::Unary(UnOp::Not, inner) => Ok((self.eval(inner)? == 0) as i64),
            CExprKind::Binary(BinOp::And, l, r) => Ok((self.eval(l)? != 0 && self.eval(r)? != 0) as i64),
            CExprKind::Binary(BinOp::Or, l, r) => Ok((self.eval(l)? != 0 || self.eval(r)? != 0) as i64),
            CExprKind::Binary(op, l, r) => {
                let (a, b) = (self.eval(l)?, self.eval(r)?);
                let out = match op {
                    BinOp::Eq => a == b,
                    BinOp::Ne => a != b,
                    BinOp::Lt => a < b,
                    BinOp::Le => a <= b,
                    BinOp::Gt => a > b,
                    BinOp::Ge => a >= b,
                    _ => return arith(*op, a, b).map_err(|err| lift(err, e.pos)),
                };
                Ok(out as i64)
            }
        }
    }
}
