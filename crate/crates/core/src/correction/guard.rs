use std::collections::BTreeMap;
use std::ops::RangeInclusive;

use crate::expr::{EvalError, Expr};

pub const DEFAULT_DOMAIN: RangeInclusive<i64> = -8..=8;

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Equivalence {
    Equivalent,
    /// First point (in lexicographic order of the sorted variable names)
    /// where the two conditions disagree.
    Witness(BTreeMap<String, i64>),
    /// Evaluation failed at `binding`; counts as non-equivalence.
    Error {
        binding: BTreeMap<String, i64>,
        error: EvalError,
    },
}

impl Equivalence {
    pub fn is_equivalent(&self) -> bool {
        matches!(self, Equivalence::Equivalent)
    }
}

/// Exhaustive comparison of two boolean conditions over `domain` for every
/// variable in `vars`.
pub fn guard_equivalent(a: &Expr, b: &Expr, vars: &[String], domain: RangeInclusive<i64>) -> Equivalence {
    guard_equivalent_under(a, b, &Expr::Bool(true), vars, domain)
}

/// Same as [`guard_equivalent`], restricted to the points where `assume`
/// holds. The assumption itself must evaluate without error everywhere.
pub fn guard_equivalent_under(
    a: &Expr,
    b: &Expr,
    assume: &Expr,
    vars: &[String],
    domain: RangeInclusive<i64>,
) -> Equivalence {
    let mut names: Vec<String> = vars.to_vec();
    names.sort();
    names.dedup();
    let (lo, hi) = (*domain.start(), *domain.end());
    if lo > hi {
        return Equivalence::Equivalent;
    }
    let mut point = vec![lo; names.len()];
    loop {
        let binding: BTreeMap<String, i64> = names.iter().cloned().zip(point.iter().copied()).collect();
        let verdict = assume.eval_bool(&binding).and_then(|holds| {
            if !holds {
                return Ok(true);
            }
            Ok(a.eval_bool(&binding)? == b.eval_bool(&binding)?)
        });
        match verdict {
            Ok(true) => {}
            Ok(false) => return Equivalence::Witness(binding),
            Err(error) => return Equivalence::Error { binding, error },
        }
        // odometer: the last variable moves fastest
        let mut k = names.len();
        loop {
            if k == 0 {
                return Equivalence::Equivalent;
            }
            k -= 1;
            if point[k] < hi {
                point[k] += 1;
                break;
            }
            point[k] = lo;
        }
    }
}

/// Variables of both expressions, sorted.
pub fn shared_vars(exprs: &[&Expr]) -> Vec<String> {
    let mut set = std::collections::BTreeSet::new();
    for e in exprs {
        set.extend(e.variables());
    }
    set.into_iter().collect()
}
