//! Grading engine for multi-production programming exercises built around
//! graphical loop invariants.
//!
//! A statement bundles a resolution flow (ordered productions split into an
//! abstraction and a concrete phase), a blank loop-invariant drawing, a code
//! template with test cases and a misconception rubric. Student submissions
//! are checked production by production; every detected misconception costs
//! its gravity in points and yields a comment with optional course reference.

pub mod activity;
pub mod analytics;
pub mod code;
pub mod correction;
pub mod expr;
pub mod flow;
pub mod gli;
pub mod library;
pub mod model;

pub use correction::{correct_submission, FeedbackReport};
pub use expr::{parse_expression, Expr, Value};
pub use library::{load_library, Library};
pub use model::{Statement, Submission};

/// Errors and findings that carry a stable machine-readable code.
pub trait Coded {
    fn code(&self) -> &'static str;
}

/// Default interpreter step budget per program run.
pub const DEFAULT_STEP_BUDGET: u64 = 1_000_000;
