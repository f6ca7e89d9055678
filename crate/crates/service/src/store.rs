//! Append-only journal with periodic snapshots. Every state change is one
//! journal line; the in-memory state is a pure fold over those lines.

use std::collections::BTreeMap;
use std::fs::{self, File, OpenOptions};
use std::io::{self, BufRead, BufReader, Write};
use std::path::{Path, PathBuf};

use cafe_core::activity::{ChallengeLedger, Mode};
use cafe_core::analytics::{AnalyticsEvent, EventLog};
use cafe_core::{FeedbackReport, Statement, Submission};
use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub const JOURNAL_FILE: &str = "journal.jsonl";
pub const SNAPSHOT_FILE: &str = "snapshot.json";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[allow(clippy::large_enum_variant)]
// internal tagging would lose the integer box keys of filled drawings
#[serde(rename_all = "snake_case")]
pub enum Event {
    StatementPublished {
        statement: Statement,
        version: u32,
        by: String,
    },
    /// A graded submission together with its ledger record; participation
    /// analytics derive from it on apply.
    SubmissionAccepted {
        submission_id: String,
        submission: Submission,
        version: u32,
        mode: Mode,
        report: FeedbackReport,
    },
    TrumpPlayed {
        student_id: String,
        statement_id: String,
        at: DateTime<Utc>,
    },
    Analytics {
        event: AnalyticsEvent,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Entry {
    pub seq: u64,
    pub event: Event,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StoredSubmission {
    pub submission: Submission,
    pub version: u32,
    pub mode: Mode,
    pub report: FeedbackReport,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct State {
    /// Sequence number of the last applied entry.
    pub applied: u64,
    /// All published versions per statement id, oldest first.
    pub statements: BTreeMap<String, Vec<Statement>>,
    pub submissions: BTreeMap<String, StoredSubmission>,
    pub ledgers: BTreeMap<String, ChallengeLedger>,
    pub analytics: EventLog,
}

#[derive(Debug, Error)]
pub enum StoreError {
    #[error("store I/O: {0}")]
    Io(#[from] io::Error),
    #[error("corrupt journal line {line}: {message}")]
    Corrupt { line: usize, message: String },
    #[error("corrupt snapshot: {0}")]
    Snapshot(String),
    #[error("entry {seq} does not apply: {message}")]
    Inconsistent { seq: u64, message: String },
}

impl State {
    pub fn latest(&self, statement_id: &str) -> Option<(u32, &Statement)> {
        let versions = self.statements.get(statement_id)?;
        versions.last().map(|s| (versions.len() as u32, s))
    }

    pub fn latest_statements(&self) -> Vec<Statement> {
        self.statements.values().filter_map(|v| v.last().cloned()).collect()
    }

    pub fn ledger(&self, student_id: &str) -> ChallengeLedger {
        self.ledgers
            .get(student_id)
            .cloned()
            .unwrap_or_else(|| ChallengeLedger::new(student_id))
    }

    pub fn reports_of(&self, student_id: &str) -> Vec<FeedbackReport> {
        self.submissions
            .values()
            .filter(|s| s.submission.student_id == student_id)
            .map(|s| s.report.clone())
            .collect()
    }

    /// Checks that `entry` can be applied; `apply` cannot fail afterwards.
    pub fn check(&self, entry: &Entry) -> Result<(), StoreError> {
        let fail = |message: String| {
            Err(StoreError::Inconsistent {
                seq: entry.seq,
                message,
            })
        };
        if entry.seq != self.applied + 1 {
            return fail(format!("expected sequence number {}", self.applied + 1));
        }
        match &entry.event {
            Event::StatementPublished { statement, version, .. } => {
                let have = self.statements.get(&statement.id).map_or(0, Vec::len) as u32;
                if *version != have + 1 {
                    return fail(format!("{} is at version {have}", statement.id));
                }
            }
            Event::SubmissionAccepted {
                submission_id,
                submission,
                version,
                ..
            } => {
                if self.submissions.contains_key(submission_id) {
                    return fail(format!("duplicate submission {submission_id}"));
                }
                let have = self.statements.get(&submission.statement_id).map_or(0, Vec::len) as u32;
                if *version == 0 || *version > have {
                    return fail(format!("unknown statement {} v{version}", submission.statement_id));
                }
                let next = self.ledger(&submission.student_id).next_seq(&submission.statement_id);
                if submission.seq != next {
                    return fail(format!("submission seq {} but ledger expects {next}", submission.seq));
                }
            }
            Event::TrumpPlayed {
                student_id,
                statement_id,
                ..
            } => {
                if let Some(played) = self.ledgers.get(student_id).and_then(|l| l.trump.as_ref()) {
                    return fail(format!("{student_id} already played the trump card on {played}"));
                }
                if !self.statements.contains_key(statement_id) {
                    return fail(format!("unknown statement {statement_id}"));
                }
            }
            Event::Analytics { .. } => {}
        }
        Ok(())
    }

    pub fn apply(&mut self, entry: &Entry) -> Result<(), StoreError> {
        self.check(entry)?;
        self.applied = entry.seq;
        match &entry.event {
            Event::StatementPublished { statement, .. } => {
                self.statements
                    .entry(statement.id.clone())
                    .or_default()
                    .push(statement.clone());
            }
            Event::SubmissionAccepted {
                submission_id,
                submission,
                version,
                mode,
                report,
            } => {
                let student = &submission.student_id;
                self.ledgers
                    .entry(student.clone())
                    .or_insert_with(|| ChallengeLedger::new(student.as_str()))
                    .record(&submission.statement_id, submission.at, report.grade_fraction, *mode);
                if *mode == Mode::Certificative {
                    self.analytics.ingest(AnalyticsEvent::Participation {
                        student_id: student.clone(),
                        statement_id: submission.statement_id.clone(),
                        at: submission.at,
                    });
                }
                self.submissions.insert(
                    submission_id.clone(),
                    StoredSubmission {
                        submission: submission.clone(),
                        version: *version,
                        mode: *mode,
                        report: report.clone(),
                    },
                );
            }
            Event::TrumpPlayed {
                student_id,
                statement_id,
                ..
            } => {
                self.ledgers
                    .entry(student_id.clone())
                    .or_insert_with(|| ChallengeLedger::new(student_id.as_str()))
                    .trump = Some(statement_id.clone());
            }
            Event::Analytics { event } => {
                self.analytics.ingest(event.clone());
            }
        }
        Ok(())
    }

    /// Canonical JSON used for snapshots and replay comparisons.
    pub fn to_canonical_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("state serializes");
        s.push('\n');
        s
    }
}

/// Reads every complete journal entry. A torn final line (no newline and
/// not parseable) is the trace of an interrupted append and is ignored.
pub fn read_journal(path: &Path) -> Result<Vec<Entry>, StoreError> {
    scan(path).map(|(entries, _, _)| entries)
}

/// Entries, the byte length of the lines holding them and whether the last
/// of those lines lacks its newline.
fn scan(path: &Path) -> Result<(Vec<Entry>, u64, bool), StoreError> {
    let file = match File::open(path) {
        Ok(f) => f,
        Err(e) if e.kind() == io::ErrorKind::NotFound => return Ok((Vec::new(), 0, false)),
        Err(e) => return Err(e.into()),
    };
    let mut reader = BufReader::new(file);
    let mut out = Vec::new();
    let mut line = String::new();
    let mut n = 0;
    let mut len = 0u64;
    let mut unterminated = false;
    loop {
        line.clear();
        let read = reader.read_line(&mut line)?;
        if read == 0 {
            break;
        }
        n += 1;
        let complete = line.ends_with('\n');
        match serde_json::from_str::<Entry>(line.trim_end()) {
            Ok(e) => {
                out.push(e);
                len += read as u64;
                unterminated = !complete;
            }
            Err(_) if !complete => break,
            Err(e) => {
                return Err(StoreError::Corrupt {
                    line: n,
                    message: e.to_string(),
                })
            }
        }
    }
    Ok((out, len, unterminated))
}

/// State obtained by applying the whole journal to an empty state.
pub fn replay(dir: &Path) -> Result<State, StoreError> {
    let mut state = State::default();
    for entry in read_journal(&dir.join(JOURNAL_FILE))? {
        state.apply(&entry)?;
    }
    Ok(state)
}

pub struct Store {
    dir: PathBuf,
    journal: File,
    state: State,
    snapshot_every: u64,
    since_snapshot: u64,
}

impl Store {
    /// Loads the snapshot, if any, then applies the journal entries that
    /// follow it.
    pub fn open(dir: &Path, snapshot_every: u64) -> Result<Store, StoreError> {
        fs::create_dir_all(dir)?;
        let mut state = match fs::read_to_string(dir.join(SNAPSHOT_FILE)) {
            Ok(text) => serde_json::from_str(&text).map_err(|e| StoreError::Snapshot(e.to_string()))?,
            Err(e) if e.kind() == io::ErrorKind::NotFound => State::default(),
            Err(e) => return Err(e.into()),
        };
        let path = dir.join(JOURNAL_FILE);
        let (entries, valid_len, unterminated) = scan(&path)?;
        let start = state.applied;
        let end = entries.last().map_or(0, |e| e.seq);
        if end < start {
            return Err(StoreError::Snapshot(format!(
                "snapshot is at entry {start} but the journal ends at {end}"
            )));
        }
        for entry in entries.iter().filter(|e| e.seq > start) {
            state.apply(entry)?;
        }
        let mut journal = OpenOptions::new().create(true).append(true).open(&path)?;
        // drop a torn tail so the next append starts on a fresh line
        if journal.metadata()?.len() > valid_len {
            journal.set_len(valid_len)?;
        }
        if unterminated {
            journal.write_all(b"\n")?;
        }
        Ok(Store {
            dir: dir.to_path_buf(),
            journal,
            state,
            snapshot_every,
            since_snapshot: 0,
        })
    }

    pub fn state(&self) -> &State {
        &self.state
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    /// Writes the entry to the journal, then applies it. Nothing changes if
    /// the entry is inconsistent or the write fails.
    pub fn append(&mut self, event: Event) -> Result<u64, StoreError> {
        let entry = Entry {
            seq: self.state.applied + 1,
            event,
        };
        self.state.check(&entry)?;
        let mut line = serde_json::to_string(&entry).expect("entry serializes");
        line.push('\n');
        self.journal.write_all(line.as_bytes())?;
        self.journal.sync_data()?;
        self.state.apply(&entry)?;
        self.since_snapshot += 1;
        if self.snapshot_every > 0 && self.since_snapshot >= self.snapshot_every {
            self.snapshot()?;
        }
        Ok(entry.seq)
    }

    /// Atomically replaces the snapshot with the current state.
    pub fn snapshot(&mut self) -> Result<(), StoreError> {
        let tmp = self.dir.join(format!("{SNAPSHOT_FILE}.tmp"));
        fs::write(&tmp, self.state.to_canonical_json())?;
        fs::rename(&tmp, self.dir.join(SNAPSHOT_FILE))?;
        self.since_snapshot = 0;
        Ok(())
    }
}
