use std::collections::BTreeSet;

use crate::expr::{BinOp, Expr, UnOp};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Pos {
    pub line: u32,
    pub col: u32,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Program {
    pub body: Vec<Stmt>,
    /// Loops are numbered 1..=loop_count in textual order.
    pub loop_count: u32,
    /// Every variable name declared anywhere in `main`.
    pub declarations: BTreeSet<String>,
}

impl Program {
    /// Guard of loop `id`, if that loop exists. A `for` without condition
    /// yields `None` inside `Some`.
    pub fn loop_guard(&self, id: u32) -> Option<Option<&CExpr>> {
        fn walk(stmts: &[Stmt], id: u32) -> Option<Option<&CExpr>> {
            stmts.iter().find_map(|s| find(s, id))
        }
        fn find(s: &Stmt, id: u32) -> Option<Option<&CExpr>> {
            match &s.kind {
                StmtKind::While { id: lid, cond, body } => {
                    if *lid == id {
                        Some(Some(cond))
                    } else {
                        find(body, id)
                    }
                }
                StmtKind::For {
                    id: lid,
                    cond,
                    init,
                    step,
                    body,
                } => {
                    if *lid == id {
                        Some(cond.as_ref())
                    } else {
                        init.as_deref()
                            .and_then(|s| find(s, id))
                            .or_else(|| step.as_deref().and_then(|s| find(s, id)))
                            .or_else(|| find(body, id))
                    }
                }
                StmtKind::If {
                    then_branch,
                    else_branch,
                    ..
                } => find(then_branch, id).or_else(|| else_branch.as_deref().and_then(|e| find(e, id))),
                StmtKind::Block(b) => walk(b, id),
                _ => None,
            }
        }
        walk(&self.body, id)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Stmt {
    pub pos: Pos,
    pub kind: StmtKind,
}

#[derive(Debug, Clone, PartialEq)]
pub enum StmtKind {
    Declare(Vec<Declarator>),
    /// `target op= value`; a plain `=` has no operator. `x++` is `x += 1`.
    Assign {
        target: Place,
        op: Option<BinOp>,
        value: CExpr,
    },
    If {
        cond: CExpr,
        then_branch: Box<Stmt>,
        else_branch: Option<Box<Stmt>>,
    },
    While {
        id: u32,
        cond: CExpr,
        body: Box<Stmt>,
    },
    For {
        id: u32,
        init: Option<Box<Stmt>>,
        cond: Option<CExpr>,
        step: Option<Box<Stmt>>,
        body: Box<Stmt>,
    },
    Block(Vec<Stmt>),
    Printf {
        format: Vec<FormatPiece>,
        args: Vec<CExpr>,
    },
    Scanf {
        targets: Vec<Place>,
    },
    Return(Option<CExpr>),
    Empty,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Declarator {
    Scalar { name: String, init: Option<CExpr> },
    Array { name: String, len: usize },
}

#[derive(Debug, Clone, PartialEq)]
pub enum Place {
    Var(String),
    Elem(String, Box<CExpr>),
}

#[derive(Debug, Clone, PartialEq)]
pub enum FormatPiece {
    Text(String),
    Int,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CExpr {
    pub pos: Pos,
    pub kind: CExprKind,
}

#[derive(Debug, Clone, PartialEq)]
pub enum CExprKind {
    Int(i64),
    Var(String),
    Index(String, Box<CExpr>),
    Unary(UnOp, Box<CExpr>),
    Binary(BinOp, Box<CExpr>, Box<CExpr>),
}

impl CExpr {
    /// Translates a C condition into the box expression language, making
    /// C's integer truthiness explicit (`n` becomes `n != 0`).
    pub fn to_condition(&self) -> Result<Expr, String> {
        match &self.kind {
            CExprKind::Binary(op, l, r) if op.is_comparison() => {
                Ok(Expr::binary(*op, l.to_integer()?, r.to_integer()?))
            }
            CExprKind::Binary(op, l, r) if op.is_logical() => {
                Ok(Expr::binary(*op, l.to_condition()?, r.to_condition()?))
            }
            CExprKind::Unary(UnOp::Not, e) => Ok(Expr::not(e.to_condition()?)),
            _ => Ok(Expr::binary(BinOp::Ne, self.to_integer()?, Expr::Int(0))),
        }
    }

    fn to_integer(&self) -> Result<Expr, String> {
        match &self.kind {
            CExprKind::Int(v) => Ok(Expr::Int(*v)),
            CExprKind::Var(v) => Ok(Expr::Var(v.clone())),
            CExprKind::Index(a, _) => Err(format!("array access `{a}[..]` in a guard")),
            CExprKind::Unary(UnOp::Neg, e) => Ok(Expr::Unary(UnOp::Neg, Box::new(e.to_integer()?))),
            CExprKind::Binary(op, l, r) if !op.is_comparison() && !op.is_logical() => {
                Ok(Expr::binary(*op, l.to_integer()?, r.to_integer()?))
            }
            _ => Err("boolean value used as an integer".to_string()),
        }
    }
}
