//! Checks that the drawing and the program describe the same loop.

use std::collections::BTreeMap;

use crate::code::{ExecutionResult, Program};
use crate::expr::{parse_expression, Expr};
use crate::gli::{
    bar_expression, check_variant, derive_stop_condition, parse_bar_positions, structural_assumption, VariantFinding,
};
use crate::library::{InitExpectation, Outcome, VariantViolation, E_UNCHECKABLE};
use crate::model::{BlankGliDescriptor, FilledGli};

use super::context::SubmissionContext;
use super::guard::{guard_equivalent, guard_equivalent_under, shared_vars, Equivalence, DEFAULT_DOMAIN};

fn show_binding(b: &BTreeMap<String, i64>) -> String {
    b.iter()
        .map(|(k, v)| format!("{k} = {v}"))
        .collect::<Vec<_>>()
        .join(", ")
}

/// Every identifier used in a red box or a bar position must be declared
/// by the program.
pub fn var_declared(ctx: &SubmissionContext) -> Outcome {
    let (g, d) = match ctx.drawing() {
        Ok(x) => x,
        Err(e) => return Outcome::Uncheckable(e),
    };
    let program = match ctx.parsed_program() {
        Ok(p) => p,
        Err(e) => return Outcome::Uncheckable(e),
    };
    let mut used = std::collections::BTreeSet::new();
    for text in g.red_assignments.values() {
        if let Ok(e) = parse_expression(text) {
            used.extend(e.variables());
        }
    }
    for bar in &d.bars {
        if let Ok(e) = bar_expression(g, d, &bar.id) {
            used.extend(e.variables());
        }
    }
    let missing: Vec<_> = used.difference(&program.declarations).cloned().collect();
    if missing.is_empty() {
        Outcome::NotDetected
    } else {
        Outcome::Detected(Some(missing.join(", ")))
    }
}

/// Compares the values at the first guard test of `loop_id` with the
/// expected initial values.
pub fn init_matches(ctx: &SubmissionContext, loop_id: u32, expectation: &InitExpectation) -> Outcome {
    let trace = match ctx.trace(loop_id) {
        Ok(t) => t,
        Err(e) => return Outcome::Uncheckable(e),
    };
    let Some(start) = trace.first() else {
        return Outcome::Uncheckable(format!("loop {loop_id} has an empty trace"));
    };
    let expectations: Vec<(String, Expr, String)> = match expectation {
        InitExpectation::Expr { var, expected } => vec![(var.clone(), expected.clone(), var.clone())],
        InitExpectation::FromInitialRepresentation => {
            let (g, d) = match ctx.drawing() {
                Ok(x) => x,
                Err(e) => return Outcome::Uncheckable(e),
            };
            let initial = match ctx.initial_bars.as_ref().map(parse_bar_positions).transpose() {
                Ok(i) => i.unwrap_or_default(),
                Err(e) => return Outcome::Uncheckable(e.to_string()),
            };
            let mut out = Vec::new();
            for bar in &d.bars {
                let Some(target) = initial.get(&bar.id) else {
                    continue;
                };
                match bar_expression(g, d, &bar.id) {
                    Ok(Expr::Var(v)) => out.push((v, target.clone(), format!("bar {}", bar.id))),
                    Ok(_) => {}
                    Err(e) => return Outcome::Uncheckable(e.to_string()),
                }
            }
            out
        }
    };
    for (var, expected, what) in expectations {
        let Some(&actual) = start.get(&var) else {
            return Outcome::Uncheckable(format!("`{var}` is not a variable of the program"));
        };
        match expected.eval_int(start) {
            Ok(want) if want == actual => {}
            Ok(want) => {
                return Outcome::Detected(Some(format!(
                    "{what}: `{var}` starts at {actual}, expected `{expected}` = {want}"
                )))
            }
            Err(e) => return Outcome::Uncheckable(format!("`{expected}`: {e}")),
        }
    }
    Outcome::NotDetected
}

fn guard_of(program: &Program, loop_id: u32) -> Result<Expr, String> {
    match program.loop_guard(loop_id) {
        None => Err(format!("the program has no loop {loop_id}")),
        Some(None) => Ok(Expr::Bool(true)),
        Some(Some(c)) => c.to_condition(),
    }
}

/// Stop condition derived from the drawing and the final representation.
pub fn stop_condition(ctx: &SubmissionContext) -> Result<Expr, String> {
    let (g, d) = ctx.drawing()?;
    let bars = ctx
        .final_bars
        .as_ref()
        .ok_or_else(|| "there is no final representation".to_string())?;
    let finals = parse_bar_positions(bars).map_err(|e| e.to_string())?;
    derive_stop_condition(g, d, &finals).map_err(|e| e.to_string())
}

/// The loop guard must be the negation of the stop condition, on the states
/// the drawing admits. With an explicit reference, plain equivalence with it
/// is required instead.
pub fn guard_matches(ctx: &SubmissionContext, loop_id: u32, reference: Option<&Expr>) -> Outcome {
    let guard = match ctx.parsed_program().and_then(|p| guard_of(p, loop_id)) {
        Ok(g) => g,
        Err(e) => return Outcome::Uncheckable(e),
    };
    let verdict = match reference {
        Some(r) => guard_equivalent(&guard, r, &shared_vars(&[&guard, r]), DEFAULT_DOMAIN),
        None => {
            let expected = match stop_condition(ctx) {
                Ok(stop) => Expr::not(stop),
                Err(e) => return Outcome::Uncheckable(e),
            };
            if let Ok((g, d)) = ctx.drawing() {
                for bar in d.constraints.iter().flat_map(|r| [&r.lower, &r.upper]) {
                    if bar_expression(g, d, bar).is_ok_and(|e| e.is_blank()) {
                        return Outcome::Uncheckable(format!("bar {bar} has no position"));
                    }
                }
            }
            let assume = match ctx
                .drawing()
                .and_then(|(g, d)| structural_assumption(g, d).map_err(|e| e.to_string()))
            {
                Ok(a) => a,
                Err(e) => return Outcome::Uncheckable(e),
            };
            let vars = shared_vars(&[&guard, &expected, &assume]);
            guard_equivalent_under(&guard, &expected, &assume, &vars, DEFAULT_DOMAIN)
        }
    };
    match verdict {
        Equivalence::Equivalent => Outcome::NotDetected,
        Equivalence::Witness(b) => Outcome::Detected(Some(format!(
            "guard `{guard}` disagrees with the drawing when {}",
            show_binding(&b)
        ))),
        Equivalence::Error { binding, error } => Outcome::Detected(Some(format!(
            "guard `{guard}` cannot be evaluated when {}: {error}",
            show_binding(&binding)
        ))),
    }
}

fn violation_of(f: &VariantFinding) -> Option<VariantViolation> {
    match f {
        VariantFinding::NotDecreasing(_) => Some(VariantViolation::NotDecreasing),
        VariantFinding::Negative(_) => Some(VariantViolation::Negative),
        VariantFinding::NonzeroAtExit(_) => Some(VariantViolation::NonzeroAtExit),
        VariantFinding::EvalError { .. } => None,
    }
}

/// Evaluates the variant along the traced loop. With `violation` set only
/// that kind of violation counts.
pub fn variant_valid(ctx: &SubmissionContext, loop_id: u32, violation: Option<VariantViolation>) -> Outcome {
    let Some(text) = &ctx.variant else {
        return Outcome::Uncheckable("there is no variant".to_string());
    };
    let v = match parse_expression(text) {
        Ok(Expr::Blank) => return Outcome::EvalError("the variant is blank".to_string()),
        Ok(v) => v,
        Err(e) => return Outcome::EvalError(format!("variant `{text}`: {e}")),
    };
    let trace = match ctx.trace(loop_id) {
        Ok(t) => t,
        Err(e) => return Outcome::Uncheckable(e),
    };
    for f in check_variant(&v, trace) {
        match violation_of(&f) {
            None => return Outcome::EvalError(f.to_string()),
            Some(kind) if violation.is_none_or(|want| want == kind) => return Outcome::Detected(Some(f.to_string())),
            Some(_) => {}
        }
    }
    Outcome::NotDetected
}

/// Standalone consistency check with fixed codes: `E-VAR-UNDECLARED`,
/// `E-INIT-MISMATCH`, `E-GUARD-MISMATCH` and the variant codes of
/// [`VariantFinding`]. Missing inputs yield `E-CONSISTENCY-UNCHECKABLE`.
pub fn check_gli_code_consistency(
    g: &FilledGli,
    d: &BlankGliDescriptor,
    initial_bars: &BTreeMap<String, String>,
    final_bars: &BTreeMap<String, String>,
    variant: &str,
    program: &Program,
    exec: &ExecutionResult,
) -> Vec<(String, Option<String>)> {
    let ctx = SubmissionContext {
        descriptor: Some(d.clone()),
        gli: Some(g.clone()),
        initial_bars: Some(initial_bars.clone()),
        final_bars: Some(final_bars.clone()),
        variant: Some(variant.to_string()),
        program: Some(Ok(program.clone())),
        execution: Some(Ok(exec.clone())),
        ..Default::default()
    };
    let mut out = Vec::new();
    let mut push = |code: &str, outcome: Outcome| match outcome {
        Outcome::NotDetected => {}
        Outcome::Detected(detail) => out.push((code.to_string(), detail)),
        Outcome::Uncheckable(why) | Outcome::EvalError(why) => {
            let entry = (E_UNCHECKABLE.to_string(), Some(why));
            if !out.iter().any(|(c, _)| c == E_UNCHECKABLE) {
                out.push(entry);
            }
        }
    };
    push("E-VAR-UNDECLARED", var_declared(&ctx));
    push(
        "E-INIT-MISMATCH",
        init_matches(&ctx, 1, &InitExpectation::FromInitialRepresentation),
    );
    push("E-GUARD-MISMATCH", guard_matches(&ctx, 1, None));
    match parse_expression(variant) {
        Ok(v) if !v.is_blank() => match ctx.trace(1) {
            Ok(trace) => {
                for f in check_variant(&v, trace) {
                    let code = match violation_of(&f) {
                        Some(VariantViolation::NotDecreasing) => "E-VARIANT-NOT-DECREASING",
                        Some(VariantViolation::Negative) => "E-VARIANT-NEGATIVE",
                        Some(VariantViolation::NonzeroAtExit) => "E-VARIANT-NONZERO-EXIT",
                        None => {
                            push("", Outcome::EvalError(f.to_string()));
                            continue;
                        }
                    };
                    push(code, Outcome::Detected(Some(f.to_string())));
                }
            }
            Err(e) => push("", Outcome::Uncheckable(e)),
        },
        Ok(_) => push("", Outcome::Uncheckable("the variant is blank".to_string())),
        Err(e) => push("", Outcome::Uncheckable(format!("variant `{variant}`: {e}"))),
    }
    out
}
