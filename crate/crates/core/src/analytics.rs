//! Learning analytics over an append-only event log: daily session counts,
//! exact-subset participation patterns and per-student progress.

use std::collections::{BTreeMap, BTreeSet};
use std::io;

use chrono::{DateTime, Duration, NaiveDate, Utc};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::activity::{challenge_mark, ChallengeLedger, ChallengeMark};
use crate::correction::FeedbackReport;
use crate::model::Statement;
use crate::Coded;

/// Inactivity gap after which an interaction opens a new session.
pub const SESSION_GAP_MINUTES: i64 = 30;

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum AnalyticsEvent {
    Registered {
        student_id: String,
    },
    Session {
        student_id: String,
        started_at: DateTime<Utc>,
    },
    /// A certificative submission.
    Participation {
        student_id: String,
        statement_id: String,
        at: DateTime<Utc>,
    },
}

impl AnalyticsEvent {
    pub fn student_id(&self) -> &str {
        match self {
            AnalyticsEvent::Registered { student_id }
            | AnalyticsEvent::Session { student_id, .. }
            | AnalyticsEvent::Participation { student_id, .. } => student_id,
        }
    }
}

#[derive(Debug, Error)]
pub enum AnalyticsError {
    #[error("malformed event: {0}")]
    Parse(#[from] serde_json::Error),
    #[error("unknown student {0}")]
    UnknownStudent(String),
    #[error("empty date range {from}..={to}")]
    EmptyRange { from: NaiveDate, to: NaiveDate },
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Io(#[from] io::Error),
}

impl Coded for AnalyticsError {
    fn code(&self) -> &'static str {
        match self {
            AnalyticsError::Parse(_) => "PARSE_ERROR",
            AnalyticsError::UnknownStudent(_) => "UNKNOWN_STUDENT",
            AnalyticsError::EmptyRange { .. } => "EMPTY_RANGE",
            AnalyticsError::Csv(_) | AnalyticsError::Io(_) => "STORE_IO",
        }
    }
}

/// Deduplicating event store. Identical events are kept once.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct EventLog {
    events: BTreeSet<AnalyticsEvent>,
}

impl EventLog {
    pub fn new() -> Self {
        Self::default()
    }

    /// Returns false when the event was already present.
    pub fn ingest(&mut self, e: AnalyticsEvent) -> bool {
        self.events.insert(e)
    }

    pub fn ingest_json(&mut self, line: &str) -> Result<bool, AnalyticsError> {
        Ok(self.ingest(serde_json::from_str(line)?))
    }

    /// One JSON event per non-empty line.
    pub fn from_json_lines(text: &str) -> Result<Self, AnalyticsError> {
        let mut log = EventLog::new();
        for line in text.lines().filter(|l| !l.trim().is_empty()) {
            log.ingest_json(line)?;
        }
        Ok(log)
    }

    pub fn events(&self) -> impl Iterator<Item = &AnalyticsEvent> {
        self.events.iter()
    }

    pub fn len(&self) -> usize {
        self.events.len()
    }

    pub fn is_empty(&self) -> bool {
        self.events.is_empty()
    }

    pub fn registered(&self) -> BTreeSet<&str> {
        self.events
            .iter()
            .filter_map(|e| match e {
                AnalyticsEvent::Registered { student_id } => Some(student_id.as_str()),
                _ => None,
            })
            .collect()
    }

    /// Students with at least one session.
    pub fn connected(&self) -> BTreeSet<&str> {
        self.events
            .iter()
            .filter_map(|e| match e {
                AnalyticsEvent::Session { student_id, .. } => Some(student_id.as_str()),
                _ => None,
            })
            .collect()
    }

    pub fn knows(&self, student: &str) -> bool {
        self.events.iter().any(|e| e.student_id() == student)
    }
}

/// Tracks the last interaction per student and decides when a new session
/// starts.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Sessionizer {
    last_seen: BTreeMap<String, DateTime<Utc>>,
}

impl Sessionizer {
    /// Registers an interaction; returns the session event it opens, if any.
    pub fn touch(&mut self, student: &str, at: DateTime<Utc>) -> Option<AnalyticsEvent> {
        let opens = match self.last_seen.get(student) {
            None => true,
            Some(prev) => at - *prev >= Duration::minutes(SESSION_GAP_MINUTES),
        };
        let last = self.last_seen.entry(student.to_string()).or_insert(at);
        if at > *last {
            *last = at;
        }
        opens.then(|| AnalyticsEvent::Session {
            student_id: student.to_string(),
            started_at: at,
        })
    }
}

/// Groups `(student, instant)` interactions into session starts. Input order
/// does not matter.
pub fn sessionize(interactions: &[(String, DateTime<Utc>)]) -> Vec<AnalyticsEvent> {
    let mut sorted: Vec<_> = interactions.to_vec();
    sorted.sort_by(|a, b| (a.1, &a.0).cmp(&(b.1, &b.0)));
    let mut s = Sessionizer::default();
    sorted.iter().filter_map(|(who, at)| s.touch(who, *at)).collect()
}

/// Distinct students starting a session on each UTC day of `from..=to`.
pub fn daily_sessions(
    log: &EventLog,
    from: NaiveDate,
    to: NaiveDate,
) -> Result<BTreeMap<NaiveDate, usize>, AnalyticsError> {
    if from > to {
        return Err(AnalyticsError::EmptyRange { from, to });
    }
    let mut per_day: BTreeMap<NaiveDate, BTreeSet<&str>> = from
        .iter_days()
        .take_while(|d| *d <= to)
        .map(|d| (d, BTreeSet::new()))
        .collect();
    for e in log.events() {
        if let AnalyticsEvent::Session { student_id, started_at } = e {
            if let Some(set) = per_day.get_mut(&started_at.date_naive()) {
                set.insert(student_id);
            }
        }
    }
    Ok(per_day.into_iter().map(|(d, s)| (d, s.len())).collect())
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PatternCount {
    /// Sorted challenge ids.
    pub challenges: Vec<String>,
    pub count: usize,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ParticipationMatrix {
    /// Exact participation sets, by descending count then pattern.
    pub patterns: Vec<PatternCount>,
    pub challenge_totals: BTreeMap<String, usize>,
    /// Number of students per count of challenges taken.
    pub degree_counts: BTreeMap<usize, usize>,
}

/// Upset-plot data: each student counts in exactly one pattern, the set of
/// challenges they took.
pub fn participation_patterns(log: &EventLog) -> ParticipationMatrix {
    let mut taken: BTreeMap<&str, BTreeSet<&str>> = BTreeMap::new();
    for e in log.events() {
        if let AnalyticsEvent::Participation {
            student_id,
            statement_id,
            ..
        } = e
        {
            taken.entry(student_id).or_default().insert(statement_id);
        }
    }
    let mut counts: BTreeMap<Vec<String>, usize> = BTreeMap::new();
    let mut m = ParticipationMatrix::default();
    for set in taken.values() {
        *counts.entry(set.iter().map(|s| s.to_string()).collect()).or_default() += 1;
        *m.degree_counts.entry(set.len()).or_default() += 1;
        for c in set {
            *m.challenge_totals.entry(c.to_string()).or_default() += 1;
        }
    }
    m.patterns = counts
        .into_iter()
        .map(|(challenges, count)| PatternCount { challenges, count })
        .collect();
    m.patterns
        .sort_by(|a, b| b.count.cmp(&a.count).then_with(|| a.challenges.cmp(&b.challenges)));
    m
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProgressSummary {
    pub student_id: String,
    pub latest_grades: BTreeMap<String, ChallengeMark>,
    /// By descending frequency, then code.
    pub error_frequencies: Vec<(String, usize)>,
    pub sessions: usize,
}

/// Progress of one student. `reports` are that student's feedback reports.
pub fn progress_summary(
    student: &str,
    log: &EventLog,
    ledger: Option<&ChallengeLedger>,
    statements: &[Statement],
    reports: &[FeedbackReport],
) -> Result<ProgressSummary, AnalyticsError> {
    if !log.knows(student) && ledger.is_none() && reports.is_empty() {
        return Err(AnalyticsError::UnknownStudent(student.to_string()));
    }
    let empty = ChallengeLedger::new(student);
    let ledger = ledger.unwrap_or(&empty);
    let latest_grades = statements
        .iter()
        .filter(|st| {
            let touched = !ledger.records(&st.id).is_empty() || ledger.trump.as_deref() == Some(st.id.as_str());
            !st.formative_only && touched
        })
        .map(|st| (st.id.clone(), challenge_mark(ledger, st)))
        .collect();
    let mut freq: BTreeMap<&str, usize> = BTreeMap::new();
    for r in reports {
        for (_, code) in r.codes() {
            *freq.entry(code).or_default() += 1;
        }
    }
    let mut error_frequencies: Vec<(String, usize)> = freq.into_iter().map(|(c, n)| (c.to_string(), n)).collect();
    error_frequencies.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
    let sessions = log
        .events()
        .filter(|e| matches!(e, AnalyticsEvent::Session { student_id, .. } if student_id == student))
        .count();
    Ok(ProgressSummary {
        student_id: student.to_string(),
        latest_grades,
        error_frequencies,
        sessions,
    })
}

/// `date,count` with a header row.
pub fn write_daily_sessions_csv<W: io::Write>(days: &BTreeMap<NaiveDate, usize>, out: W) -> Result<(), AnalyticsError> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["date", "count"])?;
    for (d, n) in days {
        w.write_record([d.format("%Y-%m-%d").to_string(), n.to_string()])?;
    }
    w.flush()?;
    Ok(())
}

/// `pattern;count` with a header row; a pattern lists its challenge ids
/// separated by commas.
pub fn write_participation_csv<W: io::Write>(m: &ParticipationMatrix, out: W) -> Result<(), AnalyticsError> {
    let mut w = csv::WriterBuilder::new().delimiter(b';').from_writer(out);
    w.write_record(["pattern", "count"])?;
    for p in &m.patterns {
        w.write_record([p.challenges.join(","), p.count.to_string()])?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use chrono::TimeZone;

    fn at(day: u32, hour: u32, min: u32) -> DateTime<Utc> {
        Utc.with_ymd_and_hms(2023, 10, day, hour, min, 0).unwrap()
    }

    fn session(s: &str, t: DateTime<Utc>) -> AnalyticsEvent {
        AnalyticsEvent::Session {
            student_id: s.into(),
            started_at: t,
        }
    }

    fn took(s: &str, c: &str) -> AnalyticsEvent {
        AnalyticsEvent::Participation {
            student_id: s.into(),
            statement_id: c.into(),
            at: at(4, 19, 0),
        }
    }

    fn day(d: u32) -> NaiveDate {
        NaiveDate::from_ymd_opt(2023, 10, d).unwrap()
    }

    #[test]
    fn idempotent_ingestion() {
        let mut log = EventLog::new();
        assert!(log.ingest(session("s1", at(4, 9, 0))));
        assert!(!log.ingest(session("s1", at(4, 9, 0))));
        assert_eq!(log.len(), 1);
    }

    #[test]
    fn malformed_instant_is_rejected() {
        let mut log = EventLog::new();
        let err = log
            .ingest_json(r#"{"kind":"session","student_id":"s1","started_at":"yesterday"}"#)
            .unwrap_err();
        assert_eq!(err.code(), "PARSE_ERROR");
        assert!(log
            .ingest_json(r#"{"kind":"session","student_id":"s1","started_at":"2023-10-04T09:00:00Z"}"#)
            .unwrap());
    }

    #[test]
    fn daily_counts_are_distinct_students() {
        let mut log = EventLog::new();
        for h in [8, 12, 20] {
            log.ingest(session("s1", at(5, h, 0)));
        }
        log.ingest(session("s2", at(6, 23, 59)));
        let days = daily_sessions(&log, day(4), day(7)).unwrap();
        assert_eq!(
            days.into_iter().collect::<Vec<_>>(),
            vec![(day(4), 0), (day(5), 1), (day(6), 1), (day(7), 0)]
        );
        let empty = daily_sessions(&EventLog::new(), day(4), day(5)).unwrap();
        assert!(empty.values().all(|&n| n == 0));
        assert_eq!(empty.len(), 2);
        assert!(daily_sessions(&log, day(5), day(4)).is_err());
    }

    #[test]
    fn exact_subset_patterns() {
        let mut log = EventLog::new();
        for c in 1..=6 {
            log.ingest(took("s1", &format!("C{c}")));
        }
        log.ingest(took("s2", "C1"));
        log.ingest(took("s3", "C1"));
        let m = participation_patterns(&log);
        assert_eq!(m.patterns.len(), 2);
        assert_eq!(
            m.patterns[0],
            PatternCount {
                challenges: vec!["C1".into()],
                count: 2
            }
        );
        assert_eq!(m.patterns[1].challenges.len(), 6);
        assert_eq!(m.patterns[1].count, 1);
        assert_eq!(m.challenge_totals["C1"], 3);
        assert_eq!(m.degree_counts, BTreeMap::from([(1, 2), (6, 1)]));
        assert_eq!(participation_patterns(&EventLog::new()), ParticipationMatrix::default());
    }

    #[test]
    fn sessionization_threshold() {
        let s = |m: u32| ("s1".to_string(), at(4, 10, m));
        let starts = sessionize(&[s(0), s(10), s(39), s(40), s(59)]);
        // the gap is measured from the previous interaction
        assert_eq!(starts, vec![session("s1", at(4, 10, 0))]);
        let starts = sessionize(&[s(0), s(30), s(31), ("s1".into(), at(4, 11, 1))]);
        assert_eq!(
            starts,
            vec![
                session("s1", at(4, 10, 0)),
                session("s1", at(4, 10, 30)),
                session("s1", at(4, 11, 1))
            ]
        );
    }

    #[test]
    fn csv_exports() {
        let mut log = EventLog::new();
        log.ingest(session("s1", at(4, 9, 0)));
        log.ingest(took("s1", "C1"));
        log.ingest(took("s1", "C2"));
        let mut buf = Vec::new();
        write_daily_sessions_csv(&daily_sessions(&log, day(4), day(5)).unwrap(), &mut buf).unwrap();
        assert_eq!(
            String::from_utf8(buf).unwrap(),
            "date,count\n2023-10-04,1\n2023-10-05,0\n"
        );
        let mut buf = Vec::new();
        write_participation_csv(&participation_patterns(&log), &mut buf).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap(), "pattern;count\nC1,C2;1\n");
    }

    #[test]
    fn unknown_student() {
        let err = progress_summary("ghost", &EventLog::new(), None, &[], &[]).unwrap_err();
        assert_eq!(err.code(), "UNKNOWN_STUDENT");
    }
}
