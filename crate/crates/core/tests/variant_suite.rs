mod common;

use cafe_core::code::interpret;
use cafe_core::gli::{check_variant, LoopTrace, VariantFinding};
use cafe_core::{parse_expression, Coded, DEFAULT_STEP_BUDGET};

fn trace(lo: i64, hi: i64) -> LoopTrace {
    let run = interpret(&common::golden_program(), &format!("{lo} {hi}"), DEFAULT_STEP_BUDGET).unwrap();
    run.traces[&1].clone()
}

#[test]
fn remaining_count_is_a_valid_variant_for_every_range() {
    let v = parse_expression("hi - i + 1").unwrap();
    for lo in 1..=8 {
        for hi in lo..=8 {
            assert_eq!(check_variant(&v, &trace(lo, hi)), vec![], "lo={lo} hi={hi}");
        }
    }
}

#[test]
fn cursor_alone_is_not_decreasing() {
    let v = parse_expression("i").unwrap();
    for lo in 1..=8 {
        for hi in lo..=8 {
            let findings = check_variant(&v, &trace(lo, hi));
            assert_eq!(findings[0], VariantFinding::NotDecreasing(1));
            assert_eq!(findings[0].code(), "VARIANT_NOT_DECREASING");
        }
    }
}

#[test]
fn zero_iteration_loop_accepts_zero() {
    let t = trace(5, 4);
    assert_eq!(t.iterations.len(), 1);
    assert_eq!(check_variant(&parse_expression("0").unwrap(), &t), vec![]);
    assert_eq!(check_variant(&parse_expression("hi - i + 1").unwrap(), &t), vec![]);
}

#[test]
fn off_by_one_variants_miss_zero_at_exit() {
    let t = trace(2, 6);
    let at_exit = |text: &str| {
        check_variant(&parse_expression(text).unwrap(), &t)
            .into_iter()
            .find(|f| matches!(f, VariantFinding::NonzeroAtExit(_)))
    };
    assert_eq!(at_exit("hi - i"), Some(VariantFinding::NonzeroAtExit(-1)));
    assert_eq!(at_exit("hi - i + 2"), Some(VariantFinding::NonzeroAtExit(1)));
    assert_eq!(at_exit("hi - i + 1"), None);
}

#[test]
fn variant_going_negative_inside_the_loop_is_reported_once() {
    let findings = check_variant(&parse_expression("hi - i - 1").unwrap(), &trace(1, 4));
    let negatives: Vec<_> = findings
        .iter()
        .filter(|f| matches!(f, VariantFinding::Negative(_)))
        .collect();
    // values 2, 1, 0, -1 then -2 at exit
    assert_eq!(negatives, vec![&VariantFinding::Negative(3)]);
}

#[test]
fn unbound_variable_is_an_evaluation_error() {
    let findings = check_variant(&parse_expression("n - i").unwrap(), &trace(1, 3));
    assert!(matches!(
        findings.as_slice(),
        [VariantFinding::EvalError { iteration: 0, .. }]
    ));
}
