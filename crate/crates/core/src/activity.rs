//! Challenge lifecycle: certificative windows, submission quotas,
//! latest-counts marking, trump cards and the course mark.

use std::collections::BTreeMap;

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::Statement;
use crate::Coded;

/// Certificative submissions allowed per statement.
pub const CERTIFICATIVE_QUOTA: usize = 3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Mode {
    Certificative,
    Formative,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum WindowState {
    BeforeOpen,
    Certificative,
    Formative,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubmissionRecord {
    pub seq: u32,
    pub at: DateTime<Utc>,
    pub grade_fraction: f64,
    pub mode: Mode,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ChallengeLedger {
    pub student_id: String,
    pub per_statement: BTreeMap<String, Vec<SubmissionRecord>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub trump: Option<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Rejection {
    NotOpen,
    QuotaExceeded,
}

impl Coded for Rejection {
    fn code(&self) -> &'static str {
        match self {
            Rejection::NotOpen => "NOT_OPEN",
            Rejection::QuotaExceeded => "QUOTA_EXCEEDED",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Acceptance {
    Accepted(Mode),
    Rejected(Rejection),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "grade", rename_all = "snake_case")]
pub enum ChallengeMark {
    Graded(f64),
    Skipped,
    NoAttempt,
}

impl ChallengeMark {
    /// Mark used for aggregation; `None` when the challenge does not count.
    pub fn value(self) -> Option<f64> {
        match self {
            ChallengeMark::Graded(g) => Some(g),
            ChallengeMark::NoAttempt => Some(0.0),
            ChallengeMark::Skipped => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ActivityError {
    #[error("the trump card has already been played on {0}")]
    TrumpAlreadyPlayed(String),
    #[error("{0} does not count towards the mark")]
    TrumpOnFormative(String),
}

impl Coded for ActivityError {
    fn code(&self) -> &'static str {
        match self {
            ActivityError::TrumpAlreadyPlayed(_) => "TRUMP_ALREADY_PLAYED",
            ActivityError::TrumpOnFormative(_) => "TRUMP_ON_FORMATIVE",
        }
    }
}

/// Percentages of the final course mark.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PcaMark {
    pub earned_percent: f64,
    pub attainable_percent: f64,
}

/// The window is half-open: `opens_at` is certificative, `closes_at` is not.
pub fn window_state(st: &Statement, now: DateTime<Utc>) -> WindowState {
    if now < st.window.opens_at {
        WindowState::BeforeOpen
    } else if now < st.window.closes_at {
        WindowState::Certificative
    } else {
        WindowState::Formative
    }
}

impl ChallengeLedger {
    pub fn new(student_id: impl Into<String>) -> Self {
        ChallengeLedger {
            student_id: student_id.into(),
            ..Default::default()
        }
    }

    pub fn records(&self, statement_id: &str) -> &[SubmissionRecord] {
        self.per_statement.get(statement_id).map_or(&[], Vec::as_slice)
    }

    pub fn certificative_count(&self, statement_id: &str) -> usize {
        self.records(statement_id)
            .iter()
            .filter(|r| r.mode == Mode::Certificative)
            .count()
    }

    /// Next submission number for the statement; numbering is gapless and
    /// shared by both modes.
    pub fn next_seq(&self, statement_id: &str) -> u32 {
        self.records(statement_id).len() as u32 + 1
    }

    /// Appends a graded submission and returns its sequence number.
    pub fn record(&mut self, statement_id: &str, at: DateTime<Utc>, grade_fraction: f64, mode: Mode) -> u32 {
        let seq = self.next_seq(statement_id);
        self.per_statement
            .entry(statement_id.to_string())
            .or_default()
            .push(SubmissionRecord {
                seq,
                at,
                grade_fraction,
                mode,
            });
        seq
    }
}

/// Decides whether a submission at `now` is taken, and in which mode. A
/// statement that never counts (Challenge 0) only ever takes formative
/// submissions.
pub fn accept_submission(ledger: &ChallengeLedger, st: &Statement, now: DateTime<Utc>) -> Acceptance {
    match window_state(st, now) {
        WindowState::BeforeOpen => Acceptance::Rejected(Rejection::NotOpen),
        WindowState::Formative => Acceptance::Accepted(Mode::Formative),
        WindowState::Certificative if st.formative_only => Acceptance::Accepted(Mode::Formative),
        WindowState::Certificative => {
            if ledger.certificative_count(&st.id) >= CERTIFICATIVE_QUOTA {
                Acceptance::Rejected(Rejection::QuotaExceeded)
            } else {
                Acceptance::Accepted(Mode::Certificative)
            }
        }
    }
}

/// The latest certificative submission sets the mark, not the best one.
pub fn challenge_mark(ledger: &ChallengeLedger, st: &Statement) -> ChallengeMark {
    if ledger.trump.as_deref() == Some(st.id.as_str()) {
        return ChallengeMark::Skipped;
    }
    ledger
        .records(&st.id)
        .iter()
        .filter(|r| r.mode == Mode::Certificative)
        .max_by_key(|r| r.seq)
        .map_or(ChallengeMark::NoAttempt, |r| ChallengeMark::Graded(r.grade_fraction))
}

/// Irrevocably excludes one challenge from the mark. Playing it after the
/// window has closed is allowed.
pub fn play_trump(ledger: &mut ChallengeLedger, st: &Statement) -> Result<(), ActivityError> {
    if st.formative_only {
        return Err(ActivityError::TrumpOnFormative(st.id.clone()));
    }
    if let Some(played) = &ledger.trump {
        return Err(ActivityError::TrumpAlreadyPlayed(played.clone()));
    }
    ledger.trump = Some(st.id.clone());
    Ok(())
}

/// Weighted sum of challenge marks. A trumped challenge leaves both the
/// earned and the attainable totals.
pub fn course_pca_mark(ledger: &ChallengeLedger, statements: &[Statement]) -> PcaMark {
    let mut mark = PcaMark {
        earned_percent: 0.0,
        attainable_percent: 0.0,
    };
    for st in statements.iter().filter(|s| !s.formative_only) {
        if let Some(v) = challenge_mark(ledger, st).value() {
            mark.earned_percent += st.weight_percent * v;
            mark.attainable_percent += st.weight_percent;
        }
    }
    mark
}
