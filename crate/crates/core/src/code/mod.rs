//! A restricted C subset: one `int main` function with `int` scalars and
//! fixed-size 1-D `int` arrays, `if`/`else`, `while`, `for`, `printf` with
//! `%d`, `scanf` of ints and `return`.
//!
//! Programs are interpreted rather than compiled so grading stays hermetic
//! and deterministic. Each loop guard evaluation records a snapshot of the
//! visible scalars, which feeds the invariant/code consistency checks.

pub mod ast;
pub mod interp;
mod lexer;
mod parser;
pub mod runner;
pub mod template;

use thiserror::Error;

use crate::Coded;

pub use ast::Program;
pub use interp::{interpret, ExecError, ExecutionResult, RuntimeErrorKind};
pub use parser::parse_program;
pub use runner::{run_tests, CaseOutcome};
pub use template::{check_template_respect, TemplateError};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ParseError {
    #[error("syntax error at {line}:{col}: expected {expected}")]
    Syntax { line: u32, col: u32, expected: String },
    #[error("undeclared variable `{name}` at line {line}")]
    UndeclaredVariable { name: String, line: u32 },
    #[error("type error at line {line}: {message}")]
    Type { line: u32, message: String },
}

impl ParseError {
    pub(crate) fn syntax(line: u32, col: u32, expected: impl Into<String>) -> Self {
        ParseError::Syntax {
            line,
            col,
            expected: expected.into(),
        }
    }
}

impl Coded for ParseError {
    fn code(&self) -> &'static str {
        match self {
            ParseError::Syntax { .. } => "SYNTAX_ERROR",
            ParseError::UndeclaredVariable { .. } => "UNDECLARED_VARIABLE",
            ParseError::Type { .. } => "TYPE_ERROR",
        }
    }
}
