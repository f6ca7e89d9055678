//! One PASS/FAIL line per acceptance criterion. Each check carries its own
//! oracle; limits are pinned below.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Instant;

use cafe_core::activity::{
    accept_submission, challenge_mark, course_pca_mark, play_trump, Acceptance, ChallengeLedger, ChallengeMark, Mode,
};
use cafe_core::analytics::{participation_patterns, EventLog};
use cafe_core::code::{interpret, parse_program, Program};
use cafe_core::correction::guard::{guard_equivalent, shared_vars, DEFAULT_DOMAIN};
use cafe_core::correction::Equivalence;
use cafe_core::gli::{check_variant, VariantFinding};
use cafe_core::model::Payload;
use cafe_core::{
    correct_submission, load_library, parse_expression, Coded, Statement, Submission, DEFAULT_STEP_BUDGET,
};
use cafe_service::store::SNAPSHOT_FILE;
use cafe_service::{replay, Config, ManualClock, Principal, Service};
use chrono::{DateTime, Duration, TimeZone, Utc};
use proptest::prelude::*;
use proptest::strategy::ValueTree;
use proptest::test_runner::{Config as RunnerConfig, RngAlgorithm, TestRng, TestRunner};

const CORPUS_LIMIT_S: f64 = 5.0;
const DIFFERENTIAL_LIMIT_S: f64 = 1.0;
const RANDOM_GUARD_PAIRS: usize = 200;
const LIFECYCLE_SCHEDULES: u32 = 1000;
const PERCENT_TOL: f64 = 1e-9;

type Check = Result<String, String>;
type Criterion = (&'static str, fn() -> Check);

fn ensure(ok: bool, why: impl FnOnce() -> String) -> Result<(), String> {
    if ok {
        Ok(())
    } else {
        Err(why())
    }
}

fn fixtures() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../core/fixtures")
}

fn statement() -> Statement {
    serde_json::from_str(&fs::read_to_string(fixtures().join("product_range/statement.json")).unwrap()).unwrap()
}

fn submission(name: &str) -> Submission {
    let path = fixtures()
        .join("product_range/submissions")
        .join(format!("{name}.json"));
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

fn golden_program() -> Program {
    let Payload::Source(src) = &submission("00-golden").payloads["code"] else {
        panic!("golden code payload is not source");
    };
    parse_program(src).unwrap()
}

// Points out of 20, hand-computed from the rubric gravities.
const HAND_TOTALS: [(&str, u32); 18] = [
    ("00-golden", 20),
    ("01-swapped-bounds", 18),
    ("02-unparsed-cursor", 18),
    ("03-blank-upper", 18),
    ("04-wrong-achieved-label", 19),
    ("05-missing-remaining-label", 19),
    ("06-cursor-not-in-code", 9),
    ("07-final-cursor-on-upper", 14),
    ("08-initial-cursor-shifted", 15),
    ("09-variant-increasing", 18),
    ("10-variant-negative-at-exit", 19),
    ("11-variant-negative-inside", 18),
    ("12-guard-strict", 11),
    ("13-accumulator-zero", 14),
    ("14-cursor-init-shifted", 13),
    ("15-template-edited", 17),
    ("16-code-syntax-error", 16),
    ("17-variant-unparsed", 20),
];

fn golden_corpus() -> Check {
    let started = Instant::now();
    let st = statement();
    let lib = load_library(&st.rubric_bindings).map_err(|e| e.to_string())?;
    let authored = st.rubric_bindings.records.len();
    ensure(authored >= 12, || format!("{authored} misconception records"))?;
    let mut kinds: Vec<String> = st
        .rubric_bindings
        .rules
        .iter()
        .map(|r| format!("{:?}", r.predicate))
        .collect();
    kinds.sort();
    kinds.dedup();
    ensure(kinds.len() == 12, || format!("{} predicate kinds covered", kinds.len()))?;
    let files = fs::read_dir(fixtures().join("product_range/submissions"))
        .unwrap()
        .count();
    ensure(files >= 15 && files == HAND_TOTALS.len(), || {
        format!("{files} submissions")
    })?;
    for (name, earned) in HAND_TOTALS {
        let report = correct_submission(&submission(name), &st, &lib).map_err(|e| format!("{name}: {e}"))?;
        let expected = fs::read_to_string(fixtures().join("product_range/reports").join(format!("{name}.json")))
            .map_err(|e| format!("{name}: {e}"))?;
        ensure(report.to_canonical_json() == expected, || {
            format!("{name}: report differs from the checked-in JSON")
        })?;
        ensure(report.total_earned == earned && report.total_possible == 20, || {
            format!(
                "{name}: {}/{} instead of {earned}/20",
                report.total_earned, report.total_possible
            )
        })?;
    }
    let secs = started.elapsed().as_secs_f64();
    ensure(secs < CORPUS_LIMIT_S, || format!("took {secs:.2} s"))?;
    Ok(format!(
        "{files} submissions byte-identical, {authored} records, 12 predicate kinds, {secs:.2} s < {CORPUS_LIMIT_S} s"
    ))
}

fn interpreter_differential() -> Check {
    let program = golden_program();
    let started = Instant::now();
    let mut pairs = 0;
    for lo in 1..=8i64 {
        for hi in lo..=8 {
            let expected: i64 = (lo..=hi).product();
            let run = interpret(&program, &format!("{lo} {hi}"), DEFAULT_STEP_BUDGET).map_err(|e| e.to_string())?;
            ensure(run.stdout == format!("{expected}\n"), || {
                format!("lo={lo} hi={hi}: {:?}", run.stdout)
            })?;
            pairs += 1;
        }
    }
    let secs = started.elapsed().as_secs_f64();
    ensure(pairs == 36, || format!("{pairs} pairs"))?;
    ensure(secs < DIFFERENTIAL_LIMIT_S, || format!("took {secs:.3} s"))?;
    let one_to_four = interpret(&program, "1 4", DEFAULT_STEP_BUDGET)
        .map_err(|e| e.to_string())?
        .stdout;
    ensure(one_to_four == "24\n", || format!("1 4 printed {one_to_four:?}"))?;
    Ok(format!(
        "36/36 pairs match the product oracle, {secs:.3} s < {DIFFERENTIAL_LIMIT_S} s"
    ))
}

#[derive(Debug, Clone)]
enum Term {
    Lit(i64),
    Var(&'static str),
    Op(char, Box<Term>, Box<Term>),
    Cmp(&'static str, Box<Term>, Box<Term>),
    Not(Box<Term>),
    Both(Box<Term>, Box<Term>),
}

impl Term {
    fn text(&self) -> String {
        match self {
            Term::Lit(v) => format!("({v})"),
            Term::Var(v) => v.to_string(),
            Term::Op(op, a, b) => format!("({} {op} {})", a.text(), b.text()),
            Term::Cmp(op, a, b) => format!("({} {op} {})", a.text(), b.text()),
            Term::Not(a) => format!("!{}", a.text()),
            Term::Both(a, b) => format!("({} && {})", a.text(), b.text()),
        }
    }

    fn int(&self, env: &BTreeMap<&str, i64>) -> Option<i64> {
        match self {
            Term::Lit(v) => Some(*v),
            Term::Var(v) => Some(env[v]),
            Term::Op('+', a, b) => a.int(env)?.checked_add(b.int(env)?),
            Term::Op('-', a, b) => a.int(env)?.checked_sub(b.int(env)?),
            Term::Op('*', a, b) => a.int(env)?.checked_mul(b.int(env)?),
            Term::Op(_, a, b) => {
                let (x, y) = (a.int(env)?, b.int(env)?);
                (y != 0).then(|| x / y)
            }
            _ => None,
        }
    }

    fn truth(&self, env: &BTreeMap<&str, i64>) -> Option<bool> {
        match self {
            Term::Cmp(op, a, b) => {
                let (x, y) = (a.int(env)?, b.int(env)?);
                Some(match *op {
                    "<" => x < y,
                    "<=" => x <= y,
                    "==" => x == y,
                    _ => x != y,
                })
            }
            Term::Not(a) => Some(!a.truth(env)?),
            Term::Both(a, b) => Some(a.truth(env)? && b.truth(env)?),
            _ => None,
        }
    }
}

fn term() -> impl Strategy<Value = Term> {
    let leaf = prop_oneof![
        (-2i64..=2).prop_map(Term::Lit),
        prop::sample::select(vec!["i", "hi"]).prop_map(Term::Var)
    ];
    let int = leaf.prop_recursive(2, 6, 2, |t| {
        (prop::sample::select(vec!['+', '-', '*', '/']), t.clone(), t)
            .prop_map(|(op, a, b)| Term::Op(op, Box::new(a), Box::new(b)))
    });
    let cmp = (prop::sample::select(vec!["<", "<=", "==", "!="]), int.clone(), int)
        .prop_map(|(op, a, b)| Term::Cmp(op, Box::new(a), Box::new(b)));
    cmp.prop_recursive(2, 4, 2, |c| {
        prop_oneof![
            c.clone().prop_map(|a| Term::Not(Box::new(a))),
            (c.clone(), c).prop_map(|(a, b)| Term::Both(Box::new(a), Box::new(b))),
        ]
    })
}

/// 0 equivalent, 1 differs, 2 evaluation fails; first point in (hi, i)
/// lexicographic order.
fn brute_force(a: &Term, b: &Term) -> (u8, Option<(i64, i64)>) {
    for hi in DEFAULT_DOMAIN {
        for i in DEFAULT_DOMAIN {
            let env = BTreeMap::from([("hi", hi), ("i", i)]);
            match (a.truth(&env), b.truth(&env)) {
                (Some(x), Some(y)) if x == y => {}
                (Some(_), Some(_)) => return (1, Some((hi, i))),
                _ => return (2, Some((hi, i))),
            }
        }
    }
    (0, None)
}

fn guard_oracle() -> Check {
    let e = |s: &str| parse_expression(s).unwrap();
    let (le, not_gt, lt) = (e("i <= hi"), e("!(i > hi)"), e("i < hi"));
    let v = shared_vars(&[&le, &not_gt]);
    ensure(
        guard_equivalent(&le, &not_gt, &v, DEFAULT_DOMAIN) == Equivalence::Equivalent,
        || "i <= hi and !(i > hi) differ".into(),
    )?;
    let Equivalence::Witness(w) = guard_equivalent(&lt, &le, &v, DEFAULT_DOMAIN) else {
        return Err("i < hi and i <= hi not told apart".into());
    };
    ensure(lt.eval_bool(&w).ok() != le.eval_bool(&w).ok(), || {
        format!("witness {w:?} does not separate them")
    })?;

    let mut runner = TestRunner::new_with_rng(
        RunnerConfig {
            failure_persistence: None,
            ..RunnerConfig::default()
        },
        TestRng::deterministic_rng(RngAlgorithm::ChaCha),
    );
    let mut verdicts = [0usize; 3];
    for _ in 0..RANDOM_GUARD_PAIRS {
        let (a, b, same) = (term(), term(), any::<bool>()).new_tree(&mut runner).unwrap().current();
        // half the pairs compare a condition with a rewriting of itself
        let b = if same {
            Term::Not(Box::new(Term::Not(Box::new(Term::Both(
                Box::new(a.clone()),
                Box::new(a.clone()),
            )))))
        } else {
            b
        };
        let (ea, eb) = (e(&a.text()), e(&b.text()));
        let names: Vec<String> = vec!["hi".into(), "i".into()];
        // both variables are enumerated even when a side does not mention one
        let got = match guard_equivalent(&ea, &eb, &names, DEFAULT_DOMAIN) {
            Equivalence::Equivalent => (0, None),
            Equivalence::Witness(w) => (1, Some((w["hi"], w["i"]))),
            Equivalence::Error { binding, .. } => (2, Some((binding["hi"], binding["i"]))),
        };
        let want = brute_force(&a, &b);
        ensure(got == want, || {
            format!("{} vs {}: engine {got:?}, oracle {want:?}", a.text(), b.text())
        })?;
        verdicts[want.0 as usize] += 1;
    }
    Ok(format!(
        "witness {w:?}; {RANDOM_GUARD_PAIRS} random pairs agree ({} equivalent, {} differing, {} failing)",
        verdicts[0], verdicts[1], verdicts[2]
    ))
}

fn variant_suite() -> Check {
    let program = golden_program();
    let v = parse_expression("hi - i + 1").unwrap();
    let cursor = parse_expression("i").unwrap();
    for lo in 1..=8 {
        for hi in lo..=8 {
            let run = interpret(&program, &format!("{lo} {hi}"), DEFAULT_STEP_BUDGET).map_err(|e| e.to_string())?;
            let trace = &run.traces[&1];
            let findings = check_variant(&v, trace);
            ensure(findings.is_empty(), || format!("lo={lo} hi={hi}: {findings:?}"))?;
            let bad = check_variant(&cursor, trace);
            ensure(bad.first().map(|f| f.code()) == Some("VARIANT_NOT_DECREASING"), || {
                format!("V = i on lo={lo} hi={hi}: {bad:?}")
            })?;
        }
    }
    let empty = interpret(&program, "5 4", DEFAULT_STEP_BUDGET).map_err(|e| e.to_string())?;
    let trace = &empty.traces[&1];
    ensure(trace.iterations.len() == 1, || {
        "zero-iteration loop traced wrongly".into()
    })?;
    let zero = check_variant(&parse_expression("0").unwrap(), trace);
    ensure(zero.is_empty(), || format!("V = 0 on an empty loop: {zero:?}"))?;
    ensure(
        !matches!(
            check_variant(&cursor, trace).as_slice(),
            [VariantFinding::NotDecreasing(_), ..]
        ),
        || "a single snapshot cannot fail to decrease".into(),
    )?;
    Ok(
        "V = hi - i + 1 valid on 36/36 traces; V = i gives VARIANT_NOT_DECREASING; V = 0 passes on zero iterations"
            .into(),
    )
}

fn semester() -> Vec<Statement> {
    let base = statement();
    (0..7)
        .map(|k| {
            let mut st = base.clone();
            st.id = format!("C{k}");
            st.window.opens_at += Duration::weeks(2 * k);
            st.window.closes_at += Duration::weeks(2 * k);
            st.formative_only = k == 0;
            st
        })
        .collect()
}

fn lifecycle() -> Check {
    let sem = semester();
    // (challenge, minutes after opening, grade out of 10, play trump instead)
    let schedule = prop::collection::vec((0..7usize, -120i64..3500, 0..=10u32, prop::bool::weighted(0.1)), 0..30);
    let mut runner = TestRunner::new_with_rng(
        RunnerConfig {
            cases: LIFECYCLE_SCHEDULES,
            failure_persistence: None,
            ..RunnerConfig::default()
        },
        TestRng::deterministic_rng(RngAlgorithm::ChaCha),
    );
    let runs = std::cell::Cell::new(0u32);
    let result = runner.run(&schedule, |mut ops| {
        runs.set(runs.get() + 1);
        ops.sort_by_key(|(c, m, _, _)| sem[*c].window.opens_at + Duration::minutes(*m));
        let mut ledger = ChallengeLedger::new("s");
        let mut accepted: Vec<(usize, DateTime<Utc>, f64, Mode)> = Vec::new();
        let mut trumps = 0;
        for (c, minute, grade, trump) in ops {
            let st = &sem[c];
            if trump {
                if play_trump(&mut ledger, st).is_ok() {
                    trumps += 1;
                }
                continue;
            }
            let now = st.window.opens_at + Duration::minutes(minute);
            if let Acceptance::Accepted(mode) = accept_submission(&ledger, st, now) {
                let g = f64::from(grade) / 10.0;
                ledger.record(&st.id, now, g, mode);
                accepted.push((c, now, g, mode));
            }
        }
        prop_assert!(trumps <= 1);
        for (c, st) in sem.iter().enumerate() {
            let cert: Vec<_> = accepted
                .iter()
                .filter(|a| a.0 == c && a.3 == Mode::Certificative)
                .collect();
            prop_assert!(cert.len() <= 3);
            prop_assert!(cert
                .iter()
                .all(|a| a.1 >= st.window.opens_at && a.1 < st.window.closes_at));
            let expected = if ledger.trump.as_deref() == Some(st.id.as_str()) {
                ChallengeMark::Skipped
            } else {
                cert.last()
                    .map_or(ChallengeMark::NoAttempt, |a| ChallengeMark::Graded(a.2))
            };
            prop_assert_eq!(challenge_mark(&ledger, st), expected);
        }
        let pca = course_pca_mark(&ledger, &sem);
        prop_assert!(pca.earned_percent <= pca.attainable_percent + PERCENT_TOL);
        Ok(())
    });
    result.map_err(|e| e.to_string())?;
    let runs = runs.get();
    ensure(runs >= LIFECYCLE_SCHEDULES, || format!("only {runs} schedules ran"))?;

    let perfect = |trump: Option<usize>| {
        let mut ledger = ChallengeLedger::new("s");
        for st in &sem {
            let now = st.window.opens_at + Duration::hours(1);
            if let Acceptance::Accepted(mode) = accept_submission(&ledger, st, now) {
                ledger.record(&st.id, now, 1.0, mode);
            }
        }
        if let Some(c) = trump {
            play_trump(&mut ledger, &sem[c]).unwrap();
        }
        course_pca_mark(&ledger, &sem)
    };
    let full = perfect(None);
    ensure(full.earned_percent == 12.0 && full.attainable_percent == 12.0, || {
        format!("no trump: {full:?}")
    })?;
    let trumped = perfect(Some(4));
    ensure(
        (trumped.earned_percent - 10.0).abs() < PERCENT_TOL && (trumped.attainable_percent - 10.0).abs() < PERCENT_TOL,
        || format!("one trump: {trumped:?}"),
    )?;
    Ok(format!(
        "{runs} schedules: quota <= 3, latest counts, trump at most once; 12% of 12%, trumped 10% of 10%"
    ))
}

fn analytics_fixture() -> Check {
    let text = fs::read_to_string(fixtures().join("analytics/pca_2022.jsonl")).map_err(|e| e.to_string())?;
    let log = EventLog::from_json_lines(&text).map_err(|e| e.to_string())?;
    let m = participation_patterns(&log);
    let registered = log.registered().len();
    let connected = log.connected().len();
    let c1 = m.challenge_totals.get("C1").copied().unwrap_or(0);
    let six: Vec<String> = (1..=6).map(|c| format!("C{c}")).collect();
    let all_six = m.patterns.iter().find(|p| p.challenges == six).map_or(0, |p| p.count);
    ensure((registered, connected, c1, all_six) == (97, 80, 80, 23), || {
        format!("registered {registered}, connected {connected}, C1 {c1}, all six {all_six}")
    })?;
    let share = 100.0 * c1 as f64 / registered as f64;
    Ok(format!(
        "97 registered, 80 connected, C1 = 80 ({share:.1}% of registered), all six = 23"
    ))
}

fn journal_replay() -> Check {
    let dir = tempfile::TempDir::new().map_err(|e| e.to_string())?;
    let data = dir.path().join("data");
    let config = Config::parse(&format!(
        "data_dir = \"{}\"\nsnapshot_every = 0\n[tokens]\nt1 = {{ id = \"s001\", role = \"student\" }}\nt2 = {{ id = \"s002\", role = \"student\" }}\n",
        data.display()
    ))
    .map_err(|e| e.to_string())?;
    let clock = Arc::new(ManualClock::new(Utc.with_ymd_and_hms(2023, 10, 5, 9, 0, 0).unwrap()));
    let svc = Service::open(config, Box::new(clock.clone())).map_err(|e| e.to_string())?;
    let prof = Principal::supervisor("prof");
    let (s1, s2) = (Principal::student("s001"), Principal::student("s002"));
    let body = |name: &str| {
        serde_json::json!({ "payloads": submission(name).payloads })
            .to_string()
            .into_bytes()
    };
    let statement_text = fs::read(fixtures().join("product_range/statement.json")).map_err(|e| e.to_string())?;
    svc.encode_statement(&prof, &statement_text)
        .map_err(|e| e.to_string())?;
    for (k, name) in ["01-swapped-bounds", "12-guard-strict", "00-golden"]
        .into_iter()
        .enumerate()
    {
        clock.set(Utc.with_ymd_and_hms(2023, 10, 5, 9 + k as u32, 0, 0).unwrap());
        svc.submit(&s1, "product-range", &body(name))
            .map_err(|e| e.to_string())?;
    }
    svc.submit(&s2, "product-range", &body("07-final-cursor-on-upper"))
        .map_err(|e| e.to_string())?;
    svc.trump(&s2, "product-range").map_err(|e| e.to_string())?;
    clock.set(Utc.with_ymd_and_hms(2023, 10, 10, 14, 0, 0).unwrap());
    for (who, name) in [(&s1, "13-accumulator-zero"), (&s2, "00-golden"), (&s1, "00-golden")] {
        let out = svc
            .submit(who, "product-range", &body(name))
            .map_err(|e| e.to_string())?;
        ensure(out.mode == Mode::Formative, || format!("{name} was not formative"))?;
    }
    svc.snapshot().map_err(|e| e.to_string())?;
    let snapshot = fs::read_to_string(data.join(SNAPSHOT_FILE)).map_err(|e| e.to_string())?;
    let replayed = replay(&data).map_err(|e| e.to_string())?;
    ensure(replayed.to_canonical_json() == snapshot, || {
        "replayed state differs from the snapshot".into()
    })?;
    ensure(replayed == svc.state(), || {
        "replayed state differs from the live state".into()
    })?;
    Ok(format!(
        "{} journal entries replayed to a byte-identical snapshot ({} bytes)",
        replayed.applied,
        snapshot.len()
    ))
}

#[test]
fn acceptance() {
    let criteria: [Criterion; 7] = [
        ("golden grading corpus", golden_corpus),
        ("interpreter differential", interpreter_differential),
        ("guard-equivalence oracle", guard_oracle),
        ("variant suite", variant_suite),
        ("lifecycle properties", lifecycle),
        ("analytics fixture", analytics_fixture),
        ("journal replay", journal_replay),
    ];
    let mut failed = Vec::new();
    for (name, check) in criteria {
        match check() {
            Ok(detail) => println!("PASS {name}: {detail}"),
            Err(why) => {
                println!("FAIL {name}: {why}");
                failed.push(name);
            }
        }
    }
    assert!(failed.is_empty(), "failed: {failed:?}");
}
