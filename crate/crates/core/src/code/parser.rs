use std::collections::{BTreeSet, HashMap};

use super::ast::*;
use super::lexer::{tokenize, Tok, Token};
use super::ParseError;
use crate::expr::{BinOp, UnOp};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum VarKind {
    Scalar,
    Array,
}

const KEYWORDS: [&str; 10] = [
    "int", "void", "if", "else", "while", "for", "return", "printf", "scanf", "main",
];

/// Parses and checks a C-subset program. Variables must be declared before
/// use and arrays are only accessed through an index.
pub fn parse_program(source: &str) -> Result<Program, ParseError> {
    let tokens = tokenize(source)?;
    let mut p = Parser {
        tokens,
        pos: 0,
        scopes: vec![HashMap::new()],
        loops: 0,
        declarations: BTreeSet::new(),
    };
    p.expect_ident("int")?;
    p.expect_ident("main")?;
    p.expect("(")?;
    if p.peek_ident() == Some("void") {
        p.pos += 1;
    }
    p.expect(")")?;
    let body = p.block()?;
    if let Some(t) = p.peek() {
        return Err(ParseError::syntax(t.line, t.col, "end of input"));
    }
    Ok(Program {
        body,
        loop_count: p.loops,
        declarations: p.declarations,
    })
}

struct Parser {
    tokens: Vec<Token>,
    pos: usize,
    scopes: Vec<HashMap<String, VarKind>>,
    loops: u32,
    declarations: BTreeSet<String>,
}

impl Parser {
    fn peek(&self) -> Option<&Token> {
        self.tokens.get(self.pos)
    }

    fn peek_ident(&self) -> Option<&str> {
        match self.peek() {
            Some(Token { tok: Tok::Ident(s), .. }) => Some(s),
            _ => None,
        }
    }

    fn peek_punct(&self) -> Option<&'static str> {
        match self.peek() {
            Some(Token { tok: Tok::Punct(p), .. }) => Some(p),
            _ => None,
        }
    }

    fn here(&self) -> Pos {
        match self.peek().or_else(|| self.tokens.last()) {
            Some(t) => Pos {
                line: t.line,
                col: t.col,
            },
            None => Pos { line: 1, col: 1 },
        }
    }

    fn fail<T>(&self, expected: impl Into<String>) -> Result<T, ParseError> {
        let pos = self.here();
        let mut expected = expected.into();
        match self.peek() {
            Some(t) => expected.push_str(&format!(", found {}", t.tok.describe())),
            None => expected.push_str(", found end of input"),
        }
        Err(ParseError::syntax(pos.line, pos.col, expected))
    }

    fn eat(&mut self, punct: &str) -> bool {
        if self.peek_punct() == Some(punct) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn expect(&mut self, punct: &str) -> Result<(), ParseError> {
        if self.eat(punct) {
            Ok(())
        } else {
            self.fail(format!("`{punct}`"))
        }
    }

    fn expect_ident(&mut self, word: &str) -> Result<(), ParseError> {
        if self.peek_ident() == Some(word) {
            self.pos += 1;
            Ok(())
        } else {
            self.fail(format!("`{word}`"))
        }
    }

    fn name(&mut self) -> Result<String, ParseError> {
        match self.peek_ident() {
            Some(s) if !KEYWORDS.contains(&s) => {
                let s = s.to_string();
                self.pos += 1;
                Ok(s)
            }
            _ => self.fail("identifier"),
        }
    }

    fn lookup(&self, name: &str) -> Option<VarKind> {
        self.scopes.iter().rev().find_map(|s| s.get(name).copied())
    }

    fn use_var(&self, name: &str, kind: VarKind, pos: Pos) -> Result<(), ParseError> {
        match self.lookup(name) {
            None => Err(ParseError::UndeclaredVariable {
                name: name.to_string(),
                line: pos.line,
            }),
            Some(k) if k == kind => Ok(()),
            Some(VarKind::Array) => Err(ParseError::Type {
                line: pos.line,
                message: format!("array `{name}` used without an index"),
            }),
            Some(VarKind::Scalar) => Err(ParseError::Type {
                line: pos.line,
                message: format!("`{name}` is not an array"),
            }),
        }
    }

    fn declare(&mut self, name: &str, kind: VarKind, pos: Pos) -> Result<(), ParseError> {
        let scope = self.scopes.last_mut().expect("scope stack is never empty");
        if scope.insert(name.to_string(), kind).is_some() {
            return Err(ParseError::Type {
                line: pos.line,
                message: format!("`{name}` redeclared in the same scope"),
            });
        }
        self.declarations.insert(name.to_string());
        Ok(())
    }

    fn scoped<T>(&mut self, f: impl FnOnce(&mut Self) -> Result<T, ParseError>) -> Result<T, ParseError> {
        self.scopes.push(HashMap::new());
        let out = f(self);
        self.scopes.pop();
        out
    }

    fn block(&mut self) -> Result<Vec<Stmt>, ParseError> {
        self.expect("{")?;
        self.scoped(|p| {
            let mut stmts = Vec::new();
            while !p.eat("}") {
                if p.peek().is_none() {
                    return p.fail("`}`");
                }
                stmts.push(p.statement()?);
            }
            Ok(stmts)
        })
    }

    fn statement(&mut self) -> Result<Stmt, ParseError> {
        let pos = self.here();
        let kind = match (self.peek_ident(), self.peek_punct()) {
            (_, Some("{")) => StmtKind::Block(self.block()?),
            (_, Some(";")) => {
                self.pos += 1;
                StmtKind::Empty
            }
            (Some("int"), _) => {
                let d = self.declaration()?;
                self.expect(";")?;
                d
            }
            (Some("if"), _) => {
                self.pos += 1;
                self.expect("(")?;
                let cond = self.expr()?;
                self.expect(")")?;
                let then_branch = Box::new(self.scoped(Self::statement)?);
                let else_branch = if self.peek_ident() == Some("else") {
                    self.pos += 1;
                    Some(Box::new(self.scoped(Self::statement)?))
                } else {
                    None
                };
                StmtKind::If {
                    cond,
                    then_branch,
                    else_branch,
                }
            }
            (Some("while"), _) => {
                self.pos += 1;
                self.loops += 1;
                let id = self.loops;
                self.expect("(")?;
                let cond = self.expr()?;
                self.expect(")")?;
                let body = Box::new(self.scoped(Self::statement)?);
                StmtKind::While { id, cond, body }
            }
            (Some("for"), _) => {
                self.pos += 1;
                self.loops += 1;
                let id = self.loops;
                self.scoped(|p| p.for_loop(id))?
            }
            (Some("return"), _) => {
                self.pos += 1;
                let value = if self.peek_punct() == Some(";") {
                    None
                } else {
                    Some(self.expr()?)
                };
                self.expect(";")?;
                StmtKind::Return(value)
            }
            (Some("printf"), _) => {
                let s = self.printf()?;
                self.expect(";")?;
                s
            }
            (Some("scanf"), _) => {
                let s = self.scanf()?;
                self.expect(";")?;
                s
            }
            (Some(w), _) if KEYWORDS.contains(&w) => return self.fail("statement"),
            (Some(_), _) | (_, Some("++" | "--")) => {
                let s = self.assignment()?;
                self.expect(";")?;
                s
            }
            _ => return self.fail("statement"),
        };
        Ok(Stmt { pos, kind })
    }

    fn for_loop(&mut self, id: u32) -> Result<StmtKind, ParseError> {
        self.expect("(")?;
        let init = if self.eat(";") {
            None
        } else {
            let pos = self.here();
            let kind = if self.peek_ident() == Some("int") {
                self.declaration()?
            } else {
                self.assignment()?
            };
            self.expect(";")?;
            Some(Box::new(Stmt { pos, kind }))
        };
        let cond = if self.peek_punct() == Some(";") {
            None
        } else {
            Some(self.expr()?)
        };
        self.expect(";")?;
        let step = if self.peek_punct() == Some(")") {
            None
        } else {
            let pos = self.here();
            Some(Box::new(Stmt {
                pos,
                kind: self.assignment()?,
            }))
        };
        self.expect(")")?;
        let body = Box::new(self.scoped(Self::statement)?);
        Ok(StmtKind::For {
            id,
            init,
            cond,
            step,
            body,
        })
    }

    fn declaration(&mut self) -> Result<StmtKind, ParseError> {
        self.expect_ident("int")?;
        let mut out = Vec::new();
        loop {
            let pos = self.here();
            let name = self.name()?;
            if self.eat("[") {
                let len = match self.peek() {
                    Some(Token { tok: Tok::Int(n), .. }) if *n > 0 && *n <= 1_000_000 => *n as usize,
                    _ => return self.fail("positive array size"),
                };
                self.pos += 1;
                self.expect("]")?;
                self.declare(&name, VarKind::Array, pos)?;
                out.push(Declarator::Array { name, len });
            } else {
                let init = if self.eat("=") { Some(self.expr()?) } else { None };
                self.declare(&name, VarKind::Scalar, pos)?;
                out.push(Declarator::Scalar { name, init });
            }
            if !self.eat(",") {
                break;
            }
        }
        Ok(StmtKind::Declare(out))
    }

    fn place(&mut self) -> Result<Place, ParseError> {
        let pos = self.here();
        let name = self.name()?;
        if self.eat("[") {
            let index = self.expr()?;
            self.expect("]")?;
            self.use_var(&name, VarKind::Array, pos)?;
            Ok(Place::Elem(name, Box::new(index)))
        } else {
            self.use_var(&name, VarKind::Scalar, pos)?;
            Ok(Place::Var(name))
        }
    }

    fn assignment(&mut self) -> Result<StmtKind, ParseError> {
        let one = |pos| CExpr {
            pos,
            kind: CExprKind::Int(1),
        };
        let pos = self.here();
        for (punct, op) in [("++", BinOp::Add), ("--", BinOp::Sub)] {
            if self.eat(punct) {
                let target = self.place()?;
                return Ok(StmtKind::Assign {
                    target,
                    op: Some(op),
                    value: one(pos),
                });
            }
        }
        let target = self.place()?;
        let op = match self.peek_punct() {
            Some("=") => None,
            Some("+=") => Some(BinOp::Add),
            Some("-=") => Some(BinOp::Sub),
            Some("*=") => Some(BinOp::Mul),
            Some("/=") => Some(BinOp::Div),
            Some("%=") => Some(BinOp::Mod),
            Some(p @ ("++" | "--")) => {
                self.pos += 1;
                let op = if p == "++" { BinOp::Add } else { BinOp::Sub };
                return Ok(StmtKind::Assign {
                    target,
                    op: Some(op),
                    value: one(pos),
                });
            }
            _ => return self.fail("assignment operator"),
        };
        self.pos += 1;
        let value = self.expr()?;
        Ok(StmtKind::Assign { target, op, value })
    }

    fn format_string(&mut self) -> Result<(String, Pos), ParseError> {
        let pos = self.here();
        match self.peek() {
            Some(Token { tok: Tok::Str(s), .. }) => {
                let s = s.clone();
                self.pos += 1;
                Ok((s, pos))
            }
            _ => self.fail("format string"),
        }
    }

    fn printf(&mut self) -> Result<StmtKind, ParseError> {
        self.expect_ident("printf")?;
        self.expect("(")?;
        let (fmt, pos) = self.format_string()?;
        let mut format = Vec::new();
        let mut text = String::new();
        let mut chars = fmt.chars();
        while let Some(c) = chars.next() {
            if c != '%' {
                text.push(c);
                continue;
            }
            match chars.next() {
                Some('%') => text.push('%'),
                Some('d') => {
                    if !text.is_empty() {
                        format.push(FormatPiece::Text(std::mem::take(&mut text)));
                    }
                    format.push(FormatPiece::Int);
                }
                _ => return Err(ParseError::syntax(pos.line, pos.col, "`%d` or `%%` conversion")),
            }
        }
        if !text.is_empty() {
            format.push(FormatPiece::Text(text));
        }
        let mut args = Vec::new();
        while self.eat(",") {
            args.push(self.expr()?);
        }
        self.expect(")")?;
        let wanted = format.iter().filter(|p| **p == FormatPiece::Int).count();
        if wanted != args.len() {
            return Err(ParseError::Type {
                line: pos.line,
                message: format!("printf format expects {wanted} argument(s), got {}", args.len()),
            });
        }
        Ok(StmtKind::Printf { format, args })
    }

    fn scanf(&mut self) -> Result<StmtKind, ParseError> {
        self.expect_ident("scanf")?;
        self.expect("(")?;
        let (fmt, pos) = self.format_string()?;
        let stripped: String = fmt.split_whitespace().collect();
        if stripped.is_empty() || !stripped.replace("%d", "").is_empty() {
            return Err(ParseError::syntax(pos.line, pos.col, "format made of `%d` conversions"));
        }
        let wanted = stripped.len() / 2;
        let mut targets = Vec::new();
        while self.eat(",") {
            self.expect("&")?;
            targets.push(self.place()?);
        }
        self.expect(")")?;
        if wanted != targets.len() {
            return Err(ParseError::Type {
                line: pos.line,
                message: format!("scanf format expects {wanted} target(s), got {}", targets.len()),
            });
        }
        Ok(StmtKind::Scanf { targets })
    }

    fn expr(&mut self) -> Result<CExpr, ParseError> {
        self.binary(0)
    }

    fn binary(&mut self, level: usize) -> Result<CExpr, ParseError> {
        const LEVELS: [&[(&str, BinOp)]; 6] = [
            &[("||", BinOp::Or)],
            &[("&&", BinOp::And)],
            &[("==", BinOp::Eq), ("!=", BinOp::Ne)],
            &[("<", BinOp::Lt), ("<=", BinOp::Le), (">", BinOp::Gt), (">=", BinOp::Ge)],
            &[("+", BinOp::Add), ("-", BinOp::Sub)],
            &[("*", BinOp::Mul), ("/", BinOp::Div), ("%", BinOp::Mod)],
        ];
        if level == LEVELS.len() {
            return self.unary();
        }
        let mut lhs = self.binary(level + 1)?;
        loop {
            let pos = self.here();
            let Some(op) = self
                .peek_punct()
                .and_then(|p| LEVELS[level].iter().find(|(s, _)| *s == p))
                .map(|(_, op)| *op)
            else {
                return Ok(lhs);
            };
            self.pos += 1;
            let rhs = self.binary(level + 1)?;
            lhs = CExpr {
                pos,
                kind: CExprKind::Binary(op, Box::new(lhs), Box::new(rhs)),
            };
        }
    }

    fn unary(&mut self) -> Result<CExpr, ParseError> {
        let pos = self.here();
        let op = match self.peek_punct() {
            Some("-") => Some(UnOp::Neg),
            Some("!") => Some(UnOp::Not),
            Some("+") => {
                self.pos += 1;
                return self.unary();
            }
            _ => None,
        };
        if let Some(op) = op {
            self.pos += 1;
            let inner = self.unary()?;
            return Ok(CExpr {
                pos,
                kind: CExprKind::Unary(op, Box::new(inner)),
            });
        }
        self.primary()
    }

    fn primary(&mut self) -> Result<CExpr, ParseError> {
        let pos = self.here();
        let kind = match self.peek().map(|t| t.tok.clone()) {
            Some(Tok::Int(v)) => {
                self.pos += 1;
                let v = i64::try_from(v).map_err(|_| ParseError::syntax(pos.line, pos.col, "integer within range"))?;
                CExprKind::Int(v)
            }
            Some(Tok::Punct("(")) => {
                self.pos += 1;
                let e = self.expr()?;
                self.expect(")")?;
                return Ok(e);
            }
            Some(Tok::Ident(_)) => {
                let name = self.name()?;
                if self.eat("[") {
                    let index = self.expr()?;
                    self.expect("]")?;
                    self.use_var(&name, VarKind::Array, pos)?;
                    CExprKind::Index(name, Box::new(index))
                } else {
                    self.use_var(&name, VarKind::Scalar, pos)?;
                    CExprKind::Var(name)
                }
            }
            _ => return self.fail("expression"),
        };
        Ok(CExpr { pos, kind })
    }
}
