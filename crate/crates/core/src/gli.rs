//! Checks on filled graphical loop invariants: syntactic validation, concrete
//! states obtained by moving bars, stop conditions and loop variant checks.
//!
//! Nothing here judges whether the drawing is a *meaningful* invariant; that
//! is the rubric's job.

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::expr::{parse_expression, BinOp, EvalError, Expr, SyntaxError, Value};
use crate::model::{BlankGliDescriptor, BoxColor, FilledGli, LabelOption};
use crate::Coded;

/// Variable snapshots taken at each guard evaluation of one loop. Snapshot 0
/// precedes the first guard test; the last one is the state at loop exit.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LoopTrace {
    pub iterations: Vec<BTreeMap<String, i64>>,
}

impl LoopTrace {
    pub fn new(iterations: Vec<BTreeMap<String, i64>>) -> Self {
        LoopTrace { iterations }
    }

    pub fn first(&self) -> Option<&BTreeMap<String, i64>> {
        self.iterations.first()
    }

    /// Number of completed body executions.
    pub fn iteration_count(&self) -> usize {
        self.iterations.len().saturating_sub(1)
    }

    pub fn reversed(&self) -> LoopTrace {
        LoopTrace {
            iterations: self.iterations.iter().rev().cloned().collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConcreteState {
    pub binding: BTreeMap<String, i64>,
    pub bar_values: BTreeMap<String, i64>,
    pub boxes_evaluated: BTreeMap<u32, Value>,
}

/// Syntactic mistakes found in a filled drawing.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum GliFinding {
    RedUnparsed { number: u32, offset: usize },
    RedBlankRequired { number: u32 },
    GreenMissing { number: u32 },
    BoundsOrder { lower: String, upper: String },
    AchievedMissing { number: u32 },
}

impl GliFinding {
    pub fn box_number(&self) -> Option<u32> {
        match self {
            GliFinding::RedUnparsed { number, .. }
            | GliFinding::RedBlankRequired { number }
            | GliFinding::GreenMissing { number }
            | GliFinding::AchievedMissing { number } => Some(*number),
            GliFinding::BoundsOrder { .. } => None,
        }
    }
}

impl Coded for GliFinding {
    fn code(&self) -> &'static str {
        match self {
            GliFinding::RedUnparsed { .. } => "GLI_RED_UNPARSED",
            GliFinding::RedBlankRequired { .. } => "GLI_RED_BLANK_REQUIRED",
            GliFinding::GreenMissing { .. } => "GLI_GREEN_MISSING",
            GliFinding::BoundsOrder { .. } => "GLI_BOUNDS_ORDER",
            GliFinding::AchievedMissing { .. } => "GLI_ACHIEVED_MISSING",
        }
    }
}

impl fmt::Display for GliFinding {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            GliFinding::RedUnparsed { number, offset } => {
                write!(f, "box {number}: unreadable expression at offset {offset}")
            }
            GliFinding::RedBlankRequired { number } => write!(f, "box {number} is blank"),
            GliFinding::GreenMissing { number } => write!(f, "box {number} has no label"),
            GliFinding::BoundsOrder { lower, upper } => {
                write!(f, "bar {lower} lies beyond bar {upper}")
            }
            GliFinding::AchievedMissing { number } => {
                write!(f, "box {number}: achieved-so-far description missing")
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum GliError {
    #[error("descriptor mismatch: {0}")]
    DescriptorMismatch(String),
    #[error("{slot}: {source}")]
    Parse { slot: String, source: SyntaxError },
    #[error("{slot}: {source}")]
    Eval { slot: String, source: EvalError },
}

impl Coded for GliError {
    fn code(&self) -> &'static str {
        match self {
            GliError::DescriptorMismatch(_) => "DESCRIPTOR_MISMATCH",
            GliError::Parse { source, .. } => source.code(),
            GliError::Eval { source, .. } => source.code(),
        }
    }
}

/// Checks that the filled drawing only uses boxes, bars and labels the
/// descriptor declares.
fn check_shape(g: &FilledGli, d: &BlankGliDescriptor, options: &[LabelOption]) -> Result<(), GliError> {
    for (number, color) in g
        .red_assignments
        .keys()
        .map(|n| (n, BoxColor::Red))
        .chain(g.green_assignments.keys().map(|n| (n, BoxColor::Green)))
    {
        match d.find_box(*number) {
            Some(b) if b.color == color => {}
            Some(_) => {
                return Err(GliError::DescriptorMismatch(format!(
                    "box {number} is not a {color:?} box"
                )))
            }
            None => return Err(GliError::DescriptorMismatch(format!("box {number} does not exist"))),
        }
    }
    for (number, option) in &g.green_assignments {
        if !options.iter().any(|o| &o.id == option) {
            return Err(GliError::DescriptorMismatch(format!(
                "box {number}: unknown label option {option}"
            )));
        }
    }
    for bar in g.bar_positions.keys() {
        if d.find_bar(bar).is_none() {
            return Err(GliError::DescriptorMismatch(format!("bar {bar} does not exist")));
        }
    }
    Ok(())
}

/// Text currently giving the position of `bar`.
fn bar_text<'a>(g: &'a FilledGli, d: &BlankGliDescriptor, bar: &str) -> Result<&'a str, GliError> {
    let decl = d
        .find_bar(bar)
        .ok_or_else(|| GliError::DescriptorMismatch(format!("bar {bar} does not exist")))?;
    if let Some(text) = g.bar_positions.get(bar) {
        return Ok(text);
    }
    Ok(decl
        .slot
        .and_then(|slot| g.red_assignments.get(&slot))
        .map_or("", String::as_str))
}

/// Parsed symbolic position of `bar` in the filled drawing.
pub fn bar_expression(g: &FilledGli, d: &BlankGliDescriptor, bar: &str) -> Result<Expr, GliError> {
    let text = bar_text(g, d, bar)?;
    parse_expression(text).map_err(|source| GliError::Parse {
        slot: format!("bar {bar}"),
        source,
    })
}

/// Syntactic validation of a filled drawing. Semantics is never judged: any
/// parseable expression is as good as another, except for constant bounds
/// in the wrong order.
pub fn validate_gli_syntax(
    g: &FilledGli,
    d: &BlankGliDescriptor,
    options: &[LabelOption],
) -> Result<Vec<GliFinding>, GliError> {
    check_shape(g, d, options)?;
    let mut out = Vec::new();
    let mut boxes: Vec<_> = d.boxes.iter().collect();
    boxes.sort_by_key(|b| b.number);
    for b in boxes {
        match b.color {
            BoxColor::Red => {
                let text = g.red_assignments.get(&b.number).map_or("", String::as_str);
                match parse_expression(text) {
                    Err(e) => out.push(GliFinding::RedUnparsed {
                        number: b.number,
                        offset: e.offset,
                    }),
                    Ok(Expr::Blank) if b.required => out.push(GliFinding::RedBlankRequired { number: b.number }),
                    Ok(_) => {}
                }
            }
            BoxColor::Green if !g.green_assignments.contains_key(&b.number) => {
                out.push(if b.achieved {
                    GliFinding::AchievedMissing { number: b.number }
                } else {
                    GliFinding::GreenMissing { number: b.number }
                });
            }
            BoxColor::Green => {}
        }
    }
    for pair in &d.bounds {
        let constant = |bar: &str| {
            bar_expression(g, d, bar)
                .ok()
                .and_then(|e| e.constant_value())
                .and_then(|v| match v {
                    Value::Int(i) => Some(i),
                    Value::Bool(_) => None,
                })
        };
        if let (Some(lo), Some(hi)) = (constant(&pair.lower), constant(&pair.upper)) {
            if lo > hi {
                out.push(GliFinding::BoundsOrder {
                    lower: pair.lower.clone(),
                    upper: pair.upper.clone(),
                });
            }
        }
    }
    Ok(out)
}

/// Evaluates every bar and non-blank red box under `binding`.
pub fn derive_state(
    g: &FilledGli,
    d: &BlankGliDescriptor,
    binding: &BTreeMap<String, i64>,
) -> Result<ConcreteState, GliError> {
    let mut bar_values = BTreeMap::new();
    for bar in &d.bars {
        let e = bar_expression(g, d, &bar.id)?;
        let v = e.eval_int(binding).map_err(|source| GliError::Eval {
            slot: format!("bar {}", bar.id),
            source,
        })?;
        bar_values.insert(bar.id.clone(), v);
    }
    let mut boxes_evaluated = BTreeMap::new();
    for (number, text) in &g.red_assignments {
        let slot = format!("box {number}");
        let e = parse_expression(text).map_err(|source| GliError::Parse {
            slot: slot.clone(),
            source,
        })?;
        if e.is_blank() {
            continue;
        }
        let v = e.eval(binding).map_err(|source| GliError::Eval { slot, source })?;
        boxes_evaluated.insert(*number, v);
    }
    Ok(ConcreteState {
        binding: binding.clone(),
        bar_values,
        boxes_evaluated,
    })
}

/// Builds the loop's stop condition: each listed bar sits at its final
/// position. Bars are taken in descriptor order.
pub fn derive_stop_condition(
    g: &FilledGli,
    d: &BlankGliDescriptor,
    final_positions: &BTreeMap<String, Expr>,
) -> Result<Expr, GliError> {
    if let Some(unknown) = final_positions.keys().find(|b| d.find_bar(b).is_none()) {
        return Err(GliError::DescriptorMismatch(format!("bar {unknown} does not exist")));
    }
    let mut parts = Vec::new();
    for bar in &d.bars {
        if let Some(target) = final_positions.get(&bar.id) {
            let current = bar_expression(g, d, &bar.id)?;
            parts.push(Expr::binary(BinOp::Eq, current, target.clone()));
        }
    }
    Ok(Expr::conjunction(parts).normalize())
}

/// Parses a bar-position payload (initial or final representation).
pub fn parse_bar_positions(bars: &BTreeMap<String, String>) -> Result<BTreeMap<String, Expr>, GliError> {
    bars.iter()
        .map(|(bar, text)| {
            parse_expression(text)
                .map(|e| (bar.clone(), e))
                .map_err(|source| GliError::Parse {
                    slot: format!("bar {bar}"),
                    source,
                })
        })
        .collect()
}

/// Conjunction of the descriptor's bar relations instantiated with the
/// drawing's bar expressions: the states the invariant admits.
pub fn structural_assumption(g: &FilledGli, d: &BlankGliDescriptor) -> Result<Expr, GliError> {
    let mut parts = Vec::new();
    for rel in &d.constraints {
        let lower = bar_expression(g, d, &rel.lower)?;
        let upper = bar_expression(g, d, &rel.upper)?;
        let rhs = if rel.offset == 0 {
            upper
        } else {
            Expr::binary(BinOp::Add, upper, Expr::Int(rel.offset))
        };
        parts.push(Expr::binary(BinOp::Le, lower, rhs));
    }
    Ok(Expr::conjunction(parts))
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum VariantFinding {
    /// The variant did not decrease on entering snapshot `iteration`.
    NotDecreasing(usize),
    /// The variant is negative at snapshot `iteration` before loop exit.
    Negative(usize),
    /// The variant's value at loop exit.
    NonzeroAtExit(i64),
    EvalError {
        iteration: usize,
        error: EvalError,
    },
}

impl Coded for VariantFinding {
    fn code(&self) -> &'static str {
        match self {
            VariantFinding::NotDecreasing(_) => "VARIANT_NOT_DECREASING",
            VariantFinding::Negative(_) => "VARIANT_NEGATIVE",
            VariantFinding::NonzeroAtExit(_) => "VARIANT_NONZERO_AT_EXIT",
            VariantFinding::EvalError { .. } => "VARIANT_EVAL_ERROR",
        }
    }
}

impl fmt::Display for VariantFinding {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            VariantFinding::NotDecreasing(i) => write!(f, "does not decrease during iteration {i}"),
            VariantFinding::Negative(i) => write!(f, "negative before iteration {}", i + 1),
            VariantFinding::NonzeroAtExit(v) => write!(f, "equals {v} at loop exit"),
            VariantFinding::EvalError { iteration, error } => {
                write!(f, "cannot be evaluated at guard test {}: {error}", iteration + 1)
            }
        }
    }
}

/// Checks a loop variant against an execution trace. Each kind of violation
/// is reported once, at its first occurrence.
pub fn check_variant(v: &Expr, trace: &LoopTrace) -> Vec<VariantFinding> {
    let mut values = Vec::with_capacity(trace.iterations.len());
    for (iteration, snapshot) in trace.iterations.iter().enumerate() {
        match v.eval_int(snapshot) {
            Ok(x) => values.push(x),
            Err(error) => return vec![VariantFinding::EvalError { iteration, error }],
        }
    }
    let mut out = Vec::new();
    if let Some(i) = values.windows(2).position(|w| w[1] >= w[0]) {
        out.push(VariantFinding::NotDecreasing(i + 1));
    }
    let before_exit = values.len().saturating_sub(1);
    if let Some(i) = values[..before_exit].iter().position(|&x| x < 0) {
        out.push(VariantFinding::Negative(i));
    }
    if let Some(&last) = values.last() {
        if last != 0 {
            out.push(VariantFinding::NonzeroAtExit(last));
        }
    }
    out
}
