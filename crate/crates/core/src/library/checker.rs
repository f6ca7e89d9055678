use crate::code::check_template_respect;
use crate::code::CaseOutcome;
use crate::correction::consistency::{guard_matches, init_matches, stop_condition, var_declared, variant_valid};
use crate::correction::guard::{guard_equivalent, shared_vars, Equivalence, DEFAULT_DOMAIN};
use crate::correction::SubmissionContext;
use crate::expr::{parse_expression, Expr};
use crate::gli::{bar_expression, GliFinding};
use crate::model::ProductionKind;

use super::{LibError, Library, Rule, RuleInstance, Target};

/// Result of running one rule over a submission.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Outcome {
    NotDetected,
    Detected(Option<String>),
    /// An input the rule needs is unavailable.
    Uncheckable(String),
    /// The rule's own inputs could not be evaluated.
    EvalError(String),
}

/// A rule bound to its misconception record.
#[derive(Debug, Clone)]
pub struct Checker {
    pub code: String,
    pub production: ProductionKind,
    rule: Rule,
}

pub fn instantiate_checker(r: &RuleInstance, lib: &Library) -> Result<Checker, LibError> {
    let record = lib.lookup(&r.code)?;
    Ok(Checker {
        code: r.code.clone(),
        production: record.production,
        rule: r.rule.clone(),
    })
}

impl Checker {
    pub fn rule(&self) -> &Rule {
        &self.rule
    }

    pub fn check(&self, ctx: &SubmissionContext) -> Outcome {
        match &self.rule {
            Rule::BoxEquals { target, expected } => self.box_equals(ctx, target, expected),
            Rule::BoxParses { number } => finding(ctx, |f| match f {
                GliFinding::RedUnparsed { number: n, offset } if number.is_none_or(|want| want == *n) => {
                    Some(format!("box {n}, at offset {offset}"))
                }
                _ => None,
            }),
            Rule::BoxBlank { number } => finding(ctx, |f| match f {
                GliFinding::RedBlankRequired { number: n } if number.is_none_or(|want| want == *n) => {
                    Some(format!("box {n}"))
                }
                _ => None,
            }),
            Rule::LabelIs { number, expected } => {
                let Some(g) = &ctx.gli else {
                    return Outcome::Uncheckable("there is no loop-invariant drawing".to_string());
                };
                match (g.green_assignments.get(number), expected) {
                    (None, _) => Outcome::Detected(Some(format!("box {number} has no label"))),
                    (Some(got), Some(want)) if got != want => Outcome::Detected(Some(format!("box {number}"))),
                    _ => Outcome::NotDetected,
                }
            }
            Rule::BoundsOrdered => finding(ctx, |f| match f {
                GliFinding::BoundsOrder { lower, upper } => Some(format!("bar {lower} lies beyond bar {upper}")),
                _ => None,
            }),
            Rule::GuardEquivalent { loop_id, reference } => guard_matches(ctx, *loop_id, reference.as_ref()),
            Rule::StopConditionMatches { expected } => match stop_condition(ctx) {
                Err(e) => Outcome::Uncheckable(e),
                Ok(stop) if stop.normalize() == expected.normalize() => Outcome::NotDetected,
                Ok(stop) => match guard_equivalent(&stop, expected, &shared_vars(&[&stop, expected]), DEFAULT_DOMAIN) {
                    Equivalence::Equivalent => Outcome::NotDetected,
                    _ => Outcome::Detected(Some(format!("the loop stops when `{stop}`"))),
                },
            },
            Rule::VarDeclared => var_declared(ctx),
            Rule::VarInitializedTo { loop_id, expectation } => init_matches(ctx, *loop_id, expectation),
            Rule::VariantValid { loop_id, violation } => variant_valid(ctx, *loop_id, *violation),
            Rule::OutputMatchesTests { cases } => output_matches(ctx, cases.as_deref()),
            Rule::TemplateRespected => {
                let (Some(src), Some(template)) = (&ctx.source, &ctx.template) else {
                    return Outcome::Uncheckable("there is no code".to_string());
                };
                match check_template_respect(src, template) {
                    Err(e) => Outcome::EvalError(e.to_string()),
                    Ok(errs) if errs.is_empty() => Outcome::NotDetected,
                    Ok(errs) => Outcome::Detected(Some(
                        errs.iter().map(ToString::to_string).collect::<Vec<_>>().join("; "),
                    )),
                }
            }
        }
    }

    fn box_equals(&self, ctx: &SubmissionContext, target: &Target, expected: &Expr) -> Outcome {
        let (g, d) = match ctx.drawing() {
            Ok(x) => x,
            Err(e) => return Outcome::Uncheckable(e),
        };
        let (got, what) = match target {
            Target::Box(n) => {
                let text = g.red_assignments.get(n).map_or("", String::as_str);
                match parse_expression(text) {
                    // blank or unparsed boxes belong to other rules
                    Ok(Expr::Blank) | Err(_) => return Outcome::NotDetected,
                    Ok(e) => (e, format!("box {n}")),
                }
            }
            Target::Bar(bar) => {
                let listed = match self.production {
                    ProductionKind::InitialRepresentation => ctx.initial_bars.as_ref(),
                    ProductionKind::FinalRepresentation => ctx.final_bars.as_ref(),
                    _ => None,
                }
                .and_then(|bars| bars.get(bar));
                let parsed = match listed {
                    Some(text) => parse_expression(text).map_err(|e| format!("bar {bar}: {e}")),
                    None => bar_expression(g, d, bar).map_err(|e| e.to_string()),
                };
                match parsed {
                    Ok(Expr::Blank) if self.production == ProductionKind::Gli => return Outcome::NotDetected,
                    Ok(e) => (e, format!("bar {bar}")),
                    Err(_) if self.production == ProductionKind::Gli => return Outcome::NotDetected,
                    Err(e) => return Outcome::EvalError(e),
                }
            }
        };
        if &got == expected {
            Outcome::NotDetected
        } else {
            Outcome::Detected(Some(what))
        }
    }
}

fn finding(ctx: &SubmissionContext, pick: impl Fn(&GliFinding) -> Option<String>) -> Outcome {
    if ctx.gli.is_none() {
        return Outcome::Uncheckable("there is no loop-invariant drawing".to_string());
    }
    match ctx.gli_findings.iter().find_map(pick) {
        Some(detail) => Outcome::Detected(Some(detail)),
        None => Outcome::NotDetected,
    }
}

fn output_matches(ctx: &SubmissionContext, cases: Option<&[usize]>) -> Outcome {
    if let Err(e) = ctx.parsed_program() {
        return match ctx.program {
            None => Outcome::Uncheckable(e),
            Some(_) => Outcome::Detected(Some(e)),
        };
    }
    let selected = ctx
        .test_outcomes
        .iter()
        .enumerate()
        .filter(|(i, _)| cases.is_none_or(|c| c.contains(i)));
    for (i, outcome) in selected {
        let n = i + 1;
        match outcome {
            CaseOutcome::Pass => {}
            CaseOutcome::Fail { expected, actual } => {
                return Outcome::Detected(Some(format!("test {n}: expected `{expected}`, got `{actual}`")))
            }
            CaseOutcome::Error { message, .. } => return Outcome::Detected(Some(format!("test {n}: {message}"))),
        }
    }
    Outcome::NotDetected
}
