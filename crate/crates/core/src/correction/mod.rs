//! Runs the rubric over a submission and turns detections into a graded,
//! per-production feedback report.

pub mod consistency;
mod context;
pub mod guard;

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::library::{instantiate_checker, LibError, Library, Nature, Outcome, E_EVAL, E_UNCHECKABLE};
use crate::model::{Statement, Submission};
use crate::{Coded, DEFAULT_STEP_BUDGET};

pub use consistency::check_gli_code_consistency;
pub use context::SubmissionContext;
pub use guard::{guard_equivalent, guard_equivalent_under, Equivalence};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum CorrectionError {
    #[error("payload mismatch on production {production}: {message}")]
    PayloadMismatch { production: String, message: String },
    #[error(transparent)]
    Library(#[from] LibError),
}

impl Coded for CorrectionError {
    fn code(&self) -> &'static str {
        match self {
            CorrectionError::PayloadMismatch { .. } => "PAYLOAD_MISMATCH",
            CorrectionError::Library(e) => e.code(),
        }
    }
}

/// A misconception found on one production.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Detection {
    pub code: String,
    pub production_id: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub detail: Option<String>,
}

impl Detection {
    pub fn new(code: &str, production_id: &str) -> Self {
        Detection {
            code: code.to_string(),
            production_id: production_id.to_string(),
            detail: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Comment {
    pub code: String,
    pub nature: Nature,
    pub message: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub feedforward: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub detail: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProductionFeedback {
    pub production_id: String,
    pub comments: Vec<Comment>,
    pub points_earned: u32,
    pub points_possible: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeedbackReport {
    pub per_production: Vec<ProductionFeedback>,
    pub total_earned: u32,
    pub total_possible: u32,
    pub grade_fraction: f64,
}

impl FeedbackReport {
    /// Byte-stable JSON: fixed field order, two-space indentation, trailing
    /// newline.
    pub fn to_canonical_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report serializes");
        s.push('\n');
        s
    }

    pub fn codes(&self) -> Vec<(&str, &str)> {
        self.per_production
            .iter()
            .flat_map(|p| p.comments.iter().map(|c| (p.production_id.as_str(), c.code.as_str())))
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProductionGrade {
    pub production_id: String,
    pub points_earned: u32,
    pub points_possible: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Grade {
    pub per_production: Vec<ProductionGrade>,
    pub total_earned: u32,
    pub total_possible: u32,
    pub grade_fraction: f64,
}

pub fn correct_submission(s: &Submission, st: &Statement, lib: &Library) -> Result<FeedbackReport, CorrectionError> {
    correct_submission_with_budget(s, st, lib, DEFAULT_STEP_BUDGET)
}

pub fn correct_submission_with_budget(
    s: &Submission,
    st: &Statement,
    lib: &Library,
    budget: u64,
) -> Result<FeedbackReport, CorrectionError> {
    let detections = detect(s, st, lib, budget)?;
    let grade = compute_grade(&detections, st, lib)?;
    let comments = assemble_feedback(&detections, st, lib)?;
    let per_production = grade
        .per_production
        .into_iter()
        .map(|g| ProductionFeedback {
            comments: comments.get(&g.production_id).cloned().unwrap_or_default(),
            production_id: g.production_id,
            points_earned: g.points_earned,
            points_possible: g.points_possible,
        })
        .collect();
    Ok(FeedbackReport {
        per_production,
        total_earned: grade.total_earned,
        total_possible: grade.total_possible,
        grade_fraction: grade.grade_fraction,
    })
}

/// Runs every rule on the first production of its record's kind. The
/// result is ordered by production, then by rule declaration, and holds
/// each (code, production) pair once.
pub fn detect(s: &Submission, st: &Statement, lib: &Library, budget: u64) -> Result<Vec<Detection>, CorrectionError> {
    let ctx = SubmissionContext::build(st, s, budget)?;
    let mut checkers = Vec::new();
    for r in &lib.rules {
        checkers.push(instantiate_checker(r, lib)?);
    }
    let mut out: Vec<Detection> = Vec::new();
    for production in st.flow.ordered() {
        let bound = checkers.iter().filter(|c| {
            st.flow
                .first_of_kind(c.production)
                .is_some_and(|p| p.id == production.id)
        });
        for checker in bound {
            let (code, detail) = match checker.check(&ctx) {
                Outcome::NotDetected => continue,
                Outcome::Detected(detail) => (checker.code.as_str(), detail),
                Outcome::Uncheckable(why) => (E_UNCHECKABLE, Some(why)),
                Outcome::EvalError(why) => (E_EVAL, Some(why)),
            };
            if !out.iter().any(|d| d.code == code && d.production_id == production.id) {
                out.push(Detection {
                    code: code.to_string(),
                    production_id: production.id.clone(),
                    detail,
                });
            }
        }
    }
    Ok(out)
}

/// Per production, `max(0, weight - sum of gravities)` where each code
/// counts once. Detections on unknown productions are ignored.
pub fn compute_grade(detected: &[Detection], st: &Statement, lib: &Library) -> Result<Grade, LibError> {
    let mut codes: BTreeMap<&str, BTreeSet<&str>> = BTreeMap::new();
    for d in detected {
        lib.lookup(&d.code)?;
        codes
            .entry(d.production_id.as_str())
            .or_default()
            .insert(d.code.as_str());
    }
    let mut per_production = Vec::new();
    for p in st.flow.ordered() {
        let mut deducted: i64 = 0;
        for code in codes.get(p.id.as_str()).into_iter().flatten() {
            deducted = deducted.saturating_add(lib.lookup(code)?.gravity);
        }
        let earned = (i64::from(p.weight) - deducted).max(0) as u32;
        per_production.push(ProductionGrade {
            production_id: p.id.clone(),
            points_earned: earned,
            points_possible: p.weight,
        });
    }
    let total_earned = per_production.iter().map(|g| g.points_earned).sum();
    let total_possible = per_production.iter().map(|g| g.points_possible).sum();
    Ok(Grade {
        per_production,
        total_earned,
        total_possible,
        grade_fraction: fraction(total_earned, total_possible),
    })
}

fn fraction(earned: u32, possible: u32) -> f64 {
    if possible == 0 {
        1.0
    } else {
        f64::from(earned) / f64::from(possible)
    }
}

/// Comments per production id, in detection order, with message and
/// feedforward copied from the records.
pub fn assemble_feedback(
    detections: &[Detection],
    st: &Statement,
    lib: &Library,
) -> Result<BTreeMap<String, Vec<Comment>>, LibError> {
    let mut out: BTreeMap<String, Vec<Comment>> = BTreeMap::new();
    let order: BTreeMap<&str, u32> = st.flow.productions.iter().map(|p| (p.id.as_str(), p.order)).collect();
    let mut sorted: Vec<(usize, &Detection)> = detections.iter().enumerate().collect();
    sorted.sort_by_key(|(i, d)| (order.get(d.production_id.as_str()).copied().unwrap_or(u32::MAX), *i));
    let mut seen = BTreeSet::new();
    for (_, d) in sorted {
        let record = lib.lookup(&d.code)?;
        if !seen.insert((d.code.as_str(), d.production_id.as_str())) {
            continue;
        }
        out.entry(d.production_id.clone()).or_default().push(Comment {
            code: d.code.clone(),
            nature: record.nature,
            message: record.message.clone(),
            feedforward: record.feedforward.clone(),
            detail: d.detail.clone(),
        });
    }
    Ok(out)
}
