use std::collections::BTreeMap;

use crate::code::{interpret, parse_program, run_tests, CaseOutcome, ExecError, ExecutionResult, ParseError, Program};
use crate::gli::{validate_gli_syntax, GliFinding, LoopTrace};
use crate::model::{
    BlankGliDescriptor, FilledGli, LabelOption, Payload, ProductionKind, Statement, Submission, TestCase,
};

use super::CorrectionError;

/// Everything the checkers may look at, computed once per submission.
/// Fields are `None` when the statement has no production of that kind.
#[derive(Debug, Clone, Default)]
pub struct SubmissionContext {
    pub descriptor: Option<BlankGliDescriptor>,
    pub label_options: Vec<LabelOption>,
    pub gli: Option<FilledGli>,
    pub gli_findings: Vec<GliFinding>,
    pub initial_bars: Option<BTreeMap<String, String>>,
    pub final_bars: Option<BTreeMap<String, String>>,
    pub variant: Option<String>,
    pub source: Option<String>,
    pub template: Option<String>,
    pub test_cases: Vec<TestCase>,
    pub program: Option<Result<Program, ParseError>>,
    pub test_outcomes: Vec<CaseOutcome>,
    /// Run of the program on the first test case, source of loop traces.
    pub execution: Option<Result<ExecutionResult, ExecError>>,
}

impl SubmissionContext {
    /// Checks payloads against the flow, then runs the syntax checks, the
    /// parser, the test cases and one traced execution.
    pub fn build(st: &Statement, sub: &Submission, budget: u64) -> Result<Self, CorrectionError> {
        check_payloads(st, sub)?;
        let mut ctx = SubmissionContext {
            descriptor: Some(st.gli.clone()),
            label_options: st.label_options.clone(),
            template: Some(st.code_template.clone()),
            test_cases: st.test_cases.clone(),
            ..Default::default()
        };
        let payload = |kind| {
            st.flow
                .first_of_kind(kind)
                .and_then(|p| sub.payloads.get(&p.id).map(|payload| (p.id.clone(), payload)))
        };
        if let Some((id, Payload::Gli(g))) = payload(ProductionKind::Gli) {
            ctx.gli_findings =
                validate_gli_syntax(g, &st.gli, &st.label_options).map_err(|e| CorrectionError::PayloadMismatch {
                    production: id,
                    message: e.to_string(),
                })?;
            ctx.gli = Some(g.clone());
        }
        if let Some((_, Payload::Bars(b))) = payload(ProductionKind::InitialRepresentation) {
            ctx.initial_bars = Some(b.clone());
        }
        if let Some((_, Payload::Bars(b))) = payload(ProductionKind::FinalRepresentation) {
            ctx.final_bars = Some(b.clone());
        }
        if let Some((_, Payload::Expression(v))) = payload(ProductionKind::VariantFunction) {
            ctx.variant = Some(v.clone());
        }
        if let Some((_, Payload::Source(src))) = payload(ProductionKind::Code) {
            ctx.source = Some(src.clone());
            let program = parse_program(src);
            if let Ok(p) = &program {
                ctx.test_outcomes = run_tests(p, &st.test_cases, budget);
                let stdin = st.test_cases.first().map_or("", |c| c.stdin.as_str());
                ctx.execution = Some(interpret(p, stdin, budget));
            }
            ctx.program = Some(program);
        }
        Ok(ctx)
    }

    pub fn trace(&self, loop_id: u32) -> Result<&LoopTrace, String> {
        match &self.execution {
            None => Err("the program was not executed".to_string()),
            Some(Err(e)) => Err(format!("the program did not run to completion: {e}")),
            Some(Ok(r)) => r
                .traces
                .get(&loop_id)
                .ok_or_else(|| format!("loop {loop_id} was never reached")),
        }
    }

    pub fn parsed_program(&self) -> Result<&Program, String> {
        match &self.program {
            None => Err("there is no program".to_string()),
            Some(Err(e)) => Err(format!("the program does not compile: {e}")),
            Some(Ok(p)) => Ok(p),
        }
    }

    pub fn drawing(&self) -> Result<(&FilledGli, &BlankGliDescriptor), String> {
        match (&self.gli, &self.descriptor) {
            (Some(g), Some(d)) => Ok((g, d)),
            _ => Err("there is no loop-invariant drawing".to_string()),
        }
    }
}

fn check_payloads(st: &Statement, sub: &Submission) -> Result<(), CorrectionError> {
    for p in &st.flow.productions {
        match sub.payloads.get(&p.id) {
            None => {
                return Err(CorrectionError::PayloadMismatch {
                    production: p.id.clone(),
                    message: "missing payload".to_string(),
                })
            }
            Some(payload) if !payload.fits(p.kind) => {
                return Err(CorrectionError::PayloadMismatch {
                    production: p.id.clone(),
                    message: format!(
                        "a {} payload does not fit a {:?} production",
                        payload.kind_name(),
                        p.kind
                    ),
                })
            }
            Some(_) => {}
        }
    }
    if let Some(extra) = sub.payloads.keys().find(|k| st.flow.production(k).is_none()) {
        return Err(CorrectionError::PayloadMismatch {
            production: extra.clone(),
            message: "no such production".to_string(),
        });
    }
    Ok(())
}
