//! Each predicate kind fires on a submission carrying its fault and stays
//! silent on the correct one.

mod common;

use cafe_core::correction::SubmissionContext;
use cafe_core::library::{instantiate_checker, Outcome};
use cafe_core::{load_library, DEFAULT_STEP_BUDGET};

fn outcome(code: &str, fixture: &str) -> Outcome {
    let st = common::statement();
    let lib = load_library(&st.rubric_bindings).unwrap();
    let rule = lib.rules.iter().find(|r| r.code == code).unwrap();
    let checker = instantiate_checker(rule, &lib).unwrap();
    let ctx = SubmissionContext::build(&st, &common::submission(fixture), DEFAULT_STEP_BUDGET).unwrap();
    checker.check(&ctx)
}

// (predicate kind, rubric code, faulty fixture)
const CASES: [(&str, &str, &str); 17] = [
    ("BoxEquals", "E-GLI-CURSOR", "06-cursor-not-in-code"),
    ("BoxEquals", "E-INIT-CURSOR", "08-initial-cursor-shifted"),
    ("BoxParses", "E-GLI-UNPARSED", "02-unparsed-cursor"),
    ("BoxBlank", "E-GLI-BLANK", "03-blank-upper"),
    ("LabelIs", "E-GLI-ACHIEVED", "04-wrong-achieved-label"),
    ("LabelIs", "E-GLI-REMAINING", "05-missing-remaining-label"),
    ("BoundsOrdered", "E-GLI-BOUNDS", "01-swapped-bounds"),
    ("GuardEquivalent", "E-GUARD-MISMATCH", "12-guard-strict"),
    ("StopConditionMatches", "E-FINAL-STOP", "07-final-cursor-on-upper"),
    ("VarDeclared", "E-VAR-UNDECLARED", "06-cursor-not-in-code"),
    ("VarInitializedTo", "E-INIT-MISMATCH", "14-cursor-init-shifted"),
    ("VarInitializedTo", "E-ACC-INIT", "13-accumulator-zero"),
    ("VariantValid", "E-VARIANT-NOT-DECREASING", "09-variant-increasing"),
    ("VariantValid", "E-VARIANT-NEGATIVE", "11-variant-negative-inside"),
    ("VariantValid", "E-VARIANT-NONZERO-EXIT", "10-variant-negative-at-exit"),
    ("OutputMatchesTests", "E-OUTPUT", "13-accumulator-zero"),
    ("TemplateRespected", "E-TEMPLATE", "15-template-edited"),
];

#[test]
fn every_predicate_kind_is_exercised() {
    let st = common::statement();
    let mut kinds: Vec<_> = st
        .rubric_bindings
        .rules
        .iter()
        .map(|r| format!("{:?}", r.predicate))
        .collect();
    kinds.sort();
    kinds.dedup();
    let mut covered: Vec<_> = CASES.iter().map(|(k, _, _)| k.to_string()).collect();
    covered.sort();
    covered.dedup();
    assert_eq!(kinds, covered);
    assert_eq!(kinds.len(), 12);
}

#[test]
fn silent_on_the_golden_submission() {
    for (_, code, _) in CASES {
        assert_eq!(outcome(code, "00-golden"), Outcome::NotDetected, "{code}");
    }
}

#[test]
fn fires_on_its_fault() {
    for (_, code, fixture) in CASES {
        assert!(
            matches!(outcome(code, fixture), Outcome::Detected(_)),
            "{code} on {fixture}"
        );
    }
}

#[test]
fn stop_condition_accepts_an_equivalent_spelling() {
    let st = common::statement();
    let mut sub = common::submission("00-golden");
    sub.payloads.insert(
        "final".into(),
        cafe_core::model::Payload::Bars([("cursor".to_string(), "1 + hi".to_string())].into()),
    );
    let lib = load_library(&st.rubric_bindings).unwrap();
    let rule = lib.rules.iter().find(|r| r.code == "E-FINAL-STOP").unwrap();
    let ctx = SubmissionContext::build(&st, &sub, DEFAULT_STEP_BUDGET).unwrap();
    assert_eq!(
        instantiate_checker(rule, &lib).unwrap().check(&ctx),
        Outcome::NotDetected
    );
}
