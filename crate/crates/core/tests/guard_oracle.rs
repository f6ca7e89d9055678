//! Guard equivalence against an evaluator written from scratch here:
//! random expression trees are rendered to text, parsed by the engine and
//! compared point by point with this file's own interpreter.

use std::collections::BTreeMap;

use cafe_core::correction::guard::{guard_equivalent, shared_vars, DEFAULT_DOMAIN};
use cafe_core::correction::Equivalence;
use cafe_core::parse_expression;
use proptest::prelude::*;
use proptest::strategy::ValueTree;
use proptest::test_runner::{Config, RngAlgorithm, TestRng, TestRunner};

const VARS: [&str; 3] = ["hi", "i", "lo"];

#[derive(Debug, Clone)]
enum Int {
    Lit(i64),
    Var(&'static str),
    Neg(Box<Int>),
    Op(char, Box<Int>, Box<Int>),
}

#[derive(Debug, Clone)]
enum Cond {
    Cmp(&'static str, Int, Int),
    Not(Box<Cond>),
    And(Box<Cond>, Box<Cond>),
    Or(Box<Cond>, Box<Cond>),
}

impl Int {
    fn text(&self) -> String {
        match self {
            Int::Lit(v) => v.to_string(),
            Int::Var(v) => v.to_string(),
            Int::Neg(e) => format!("-({})", e.text()),
            Int::Op(op, a, b) => format!("({} {op} {})", a.text(), b.text()),
        }
    }

    fn eval(&self, env: &BTreeMap<&str, i64>) -> Option<i64> {
        match self {
            Int::Lit(v) => Some(*v),
            Int::Var(v) => Some(env[v]),
            Int::Neg(e) => e.eval(env)?.checked_neg(),
            Int::Op(op, a, b) => {
                let (x, y) = (a.eval(env)?, b.eval(env)?);
                match op {
                    '+' => x.checked_add(y),
                    '-' => x.checked_sub(y),
                    '*' => x.checked_mul(y),
                    // C semantics: truncate toward zero, remainder takes the dividend's sign
                    '/' => (y != 0).then(|| x / y),
                    '%' => (y != 0).then(|| x % y),
                    _ => unreachable!(),
                }
            }
        }
    }

    fn vars(&self, out: &mut Vec<&'static str>) {
        match self {
            Int::Lit(_) => {}
            Int::Var(v) => out.push(v),
            Int::Neg(e) => e.vars(out),
            Int::Op(_, a, b) => {
                a.vars(out);
                b.vars(out);
            }
        }
    }
}

impl Cond {
    fn text(&self) -> String {
        match self {
            Cond::Cmp(op, a, b) => format!("({} {op} {})", a.text(), b.text()),
            Cond::Not(c) => format!("!({})", c.text()),
            Cond::And(a, b) => format!("({} && {})", a.text(), b.text()),
            Cond::Or(a, b) => format!("({} || {})", a.text(), b.text()),
        }
    }

    fn eval(&self, env: &BTreeMap<&str, i64>) -> Option<bool> {
        match self {
            Cond::Cmp(op, a, b) => {
                let (x, y) = (a.eval(env)?, b.eval(env)?);
                Some(match *op {
                    "<" => x < y,
                    "<=" => x <= y,
                    ">" => x > y,
                    ">=" => x >= y,
                    "==" => x == y,
                    "!=" => x != y,
                    _ => unreachable!(),
                })
            }
            Cond::Not(c) => Some(!c.eval(env)?),
            Cond::And(a, b) => Some(a.eval(env)? && b.eval(env)?),
            Cond::Or(a, b) => Some(a.eval(env)? || b.eval(env)?),
        }
    }

    fn vars(&self, out: &mut Vec<&'static str>) {
        match self {
            Cond::Cmp(_, a, b) => {
                a.vars(out);
                b.vars(out);
            }
            Cond::Not(c) => c.vars(out),
            Cond::And(a, b) | Cond::Or(a, b) => {
                a.vars(out);
                b.vars(out);
            }
        }
    }

    /// Same truth table, different text.
    fn rewrite(&self) -> Cond {
        match self {
            // x op y  ==  !(y flip(negate(op)) x)
            Cond::Cmp(op, a, b) => Cond::Not(Box::new(Cond::Cmp(flip(negate(op)), b.clone(), a.clone()))),
            Cond::Not(c) => Cond::Not(Box::new(c.rewrite())),
            Cond::And(a, b) => Cond::Not(Box::new(Cond::Or(
                Box::new(Cond::Not(Box::new(a.rewrite()))),
                Box::new(Cond::Not(Box::new(b.rewrite()))),
            ))),
            Cond::Or(a, b) => Cond::Not(Box::new(Cond::And(
                Box::new(Cond::Not(Box::new(a.rewrite()))),
                Box::new(Cond::Not(Box::new(b.rewrite()))),
            ))),
        }
    }
}

fn negate(op: &str) -> &'static str {
    match op {
        "<" => ">=",
        "<=" => ">",
        ">" => "<=",
        ">=" => "<",
        "==" => "!=",
        _ => "==",
    }
}

fn flip(op: &str) -> &'static str {
    match op {
        "<" => ">",
        "<=" => ">=",
        ">" => "<",
        ">=" => "<=",
        "==" => "==",
        _ => "!=",
    }
}

fn int_tree() -> impl Strategy<Value = Int> {
    let leaf = prop_oneof![
        (-3i64..=3).prop_map(Int::Lit),
        prop::sample::select(VARS.to_vec()).prop_map(Int::Var),
    ];
    leaf.prop_recursive(3, 8, 2, |inner| {
        prop_oneof![
            4 => (prop::sample::select(vec!['+', '-', '*', '/', '%']), inner.clone(), inner.clone())
                .prop_map(|(op, a, b)| Int::Op(op, Box::new(a), Box::new(b))),
            1 => inner.prop_map(|e| Int::Neg(Box::new(e))),
        ]
    })
}

fn cond_tree() -> impl Strategy<Value = Cond> {
    let cmp = (
        prop::sample::select(vec!["<", "<=", ">", ">=", "==", "!="]),
        int_tree(),
        int_tree(),
    )
        .prop_map(|(op, a, b)| Cond::Cmp(op, a, b));
    cmp.prop_recursive(2, 6, 2, |inner| {
        prop_oneof![
            inner.clone().prop_map(|c| Cond::Not(Box::new(c))),
            (inner.clone(), inner.clone()).prop_map(|(a, b)| Cond::And(Box::new(a), Box::new(b))),
            (inner.clone(), inner).prop_map(|(a, b)| Cond::Or(Box::new(a), Box::new(b))),
        ]
    })
}

#[derive(Debug, PartialEq)]
enum Verdict {
    Same,
    Differ(BTreeMap<String, i64>),
    Fails(BTreeMap<String, i64>),
}

/// First disagreement in lexicographic order of the sorted variable names,
/// the last variable moving fastest.
fn oracle(a: &Cond, b: &Cond) -> Verdict {
    let mut names = Vec::new();
    a.vars(&mut names);
    b.vars(&mut names);
    names.sort();
    names.dedup();
    let size = (DEFAULT_DOMAIN.end() - DEFAULT_DOMAIN.start() + 1) as usize;
    let total = size.pow(names.len() as u32);
    for n in 0..total {
        let mut rest = n;
        let mut env = BTreeMap::new();
        for name in names.iter().rev() {
            env.insert(*name, DEFAULT_DOMAIN.start() + (rest % size) as i64);
            rest /= size;
        }
        let point = env.iter().map(|(k, v)| (k.to_string(), *v)).collect();
        match (a.eval(&env), b.eval(&env)) {
            (Some(x), Some(y)) if x == y => {}
            (Some(_), Some(_)) => return Verdict::Differ(point),
            _ => return Verdict::Fails(point),
        }
    }
    Verdict::Same
}

fn engine(a: &Cond, b: &Cond) -> Verdict {
    let ea = parse_expression(&a.text()).unwrap();
    let eb = parse_expression(&b.text()).unwrap();
    match guard_equivalent(&ea, &eb, &shared_vars(&[&ea, &eb]), DEFAULT_DOMAIN) {
        Equivalence::Equivalent => Verdict::Same,
        Equivalence::Witness(w) => Verdict::Differ(w),
        Equivalence::Error { binding, .. } => Verdict::Fails(binding),
    }
}

#[test]
fn le_is_the_negation_of_gt() {
    let a = parse_expression("i <= hi").unwrap();
    let b = parse_expression("!(i > hi)").unwrap();
    assert_eq!(
        guard_equivalent(&a, &b, &shared_vars(&[&a, &b]), DEFAULT_DOMAIN),
        Equivalence::Equivalent
    );
}

#[test]
fn lt_and_le_are_told_apart_with_a_witness() {
    let a = parse_expression("i < hi").unwrap();
    let b = parse_expression("i <= hi").unwrap();
    let Equivalence::Witness(w) = guard_equivalent(&a, &b, &shared_vars(&[&a, &b]), DEFAULT_DOMAIN) else {
        panic!("expected a witness");
    };
    assert_eq!(w, BTreeMap::from([("hi".to_string(), -8), ("i".to_string(), -8)]));
    assert_ne!(a.eval_bool(&w).unwrap(), b.eval_bool(&w).unwrap());
}

#[test]
fn two_hundred_random_pairs_agree_with_the_oracle() {
    let mut runner = TestRunner::new_with_rng(Config::default(), TestRng::deterministic_rng(RngAlgorithm::ChaCha));
    let pair = (cond_tree(), cond_tree(), 0u8..3);
    let mut tally = [0usize; 3];
    for _ in 0..200 {
        let (a, other, how) = pair.new_tree(&mut runner).unwrap().current();
        // a third of the pairs are rewrites, which must come out equivalent
        let b = if how == 0 { a.rewrite() } else { other };
        let expected = oracle(&a, &b);
        assert_eq!(engine(&a, &b), expected, "{} vs {}", a.text(), b.text());
        if how == 0 {
            assert!(
                !matches!(expected, Verdict::Differ(_)),
                "rewrite of {} changed its meaning",
                a.text()
            );
        }
        tally[match expected {
            Verdict::Same => 0,
            Verdict::Differ(_) => 1,
            Verdict::Fails(_) => 2,
        }] += 1;
    }
    assert!(tally.iter().all(|&n| n > 0), "{tally:?}");
}
