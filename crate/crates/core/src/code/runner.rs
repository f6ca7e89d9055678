use serde::{Deserialize, Serialize};

use super::ast::Program;
use super::interp::interpret;
use crate::model::TestCase;
use crate::Coded;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "outcome", rename_all = "snake_case")]
pub enum CaseOutcome {
    Pass,
    Fail { expected: String, actual: String },
    Error { code: String, message: String },
}

impl CaseOutcome {
    pub fn passed(&self) -> bool {
        matches!(self, CaseOutcome::Pass)
    }
}

/// Trailing whitespace is dropped from every line, then trailing empty lines.
pub fn normalize_output(s: &str) -> String {
    let mut lines: Vec<&str> = s.lines().map(str::trim_end).collect();
    while lines.last() == Some(&"") {
        lines.pop();
    }
    lines.join("\n")
}

/// Runs every case, even after a failure.
pub fn run_tests(program: &Program, cases: &[TestCase], budget: u64) -> Vec<CaseOutcome> {
    cases
        .iter()
        .map(|case| match interpret(program, &case.stdin, budget) {
            Ok(r) => {
                let (expected, actual) = (normalize_output(&case.expected_stdout), normalize_output(&r.stdout));
                if expected == actual {
                    CaseOutcome::Pass
                } else {
                    CaseOutcome::Fail { expected, actual }
                }
            }
            Err(e) => CaseOutcome::Error {
                code: e.code().to_string(),
                message: e.to_string(),
            },
        })
        .collect()
}
