//! Service operations behind the HTTP routes and the CLI. Each operation
//! checks the caller's role first, then reads or appends to the store.

use std::collections::BTreeMap;
use std::sync::{Mutex, MutexGuard};

use cafe_core::activity::{
    accept_submission, course_pca_mark, play_trump, window_state, Acceptance, ActivityError, ChallengeLedger, Mode,
    PcaMark, Rejection, WindowState,
};
use cafe_core::analytics::{
    daily_sessions, participation_patterns, progress_summary, AnalyticsError, AnalyticsEvent, ParticipationMatrix,
    ProgressSummary, Sessionizer,
};
use cafe_core::code::{interpret, parse_program, ExecutionResult};
use cafe_core::correction::{correct_submission_with_budget, CorrectionError};
use cafe_core::flow::{validate_statement, Violation};
use cafe_core::model::{LabelOption, Payload, ResolutionFlow, TestCase, Window};
use cafe_core::{load_library, Coded, FeedbackReport, Statement, Submission};
use chrono::{DateTime, NaiveDate, NaiveDateTime, TimeZone, Utc};
use serde::{Deserialize, Serialize};
use serde_json::Value;
use thiserror::Error;

use crate::config::{Config, Principal, Role};
use crate::store::{Event, State, Store, StoreError, StoredSubmission};

pub trait Clock: Send + Sync {
    fn now(&self) -> DateTime<Utc>;
}

impl<C: Clock + ?Sized> Clock for std::sync::Arc<C> {
    fn now(&self) -> DateTime<Utc> {
        (**self).now()
    }
}

pub struct SystemClock;

impl Clock for SystemClock {
    fn now(&self) -> DateTime<Utc> {
        Utc::now()
    }
}

/// A clock that only moves when told to.
pub struct ManualClock(Mutex<DateTime<Utc>>);

impl ManualClock {
    pub fn new(at: DateTime<Utc>) -> Self {
        ManualClock(Mutex::new(at))
    }

    pub fn set(&self, at: DateTime<Utc>) {
        *self.0.lock().unwrap() = at;
    }
}

impl Clock for ManualClock {
    fn now(&self) -> DateTime<Utc> {
        *self.0.lock().unwrap()
    }
}

#[derive(Debug, Error)]
pub enum ApiError {
    #[error("missing or unknown bearer token")]
    Unauthorized,
    #[error("{0}")]
    Forbidden(String),
    #[error("unknown statement {0}")]
    UnknownStatement(String),
    #[error("unknown submission {0}")]
    UnknownSubmission(String),
    #[error("malformed request: {0}")]
    Parse(String),
    #[error("statement rejected: {}", .0.iter().map(|v| format!("{} ({})", v.code, v.detail)).collect::<Vec<_>>().join(", "))]
    Invalid(Vec<Violation>),
    #[error("submission rejected: {}", rejection_message(.0))]
    Rejected(Rejection),
    #[error(transparent)]
    Correction(#[from] CorrectionError),
    #[error(transparent)]
    Activity(#[from] ActivityError),
    #[error("the window of {0} has closed")]
    TrumpWindowClosed(String),
    #[error("{message}")]
    Program { code: &'static str, message: String },
    #[error(transparent)]
    Analytics(#[from] AnalyticsError),
    #[error(transparent)]
    Store(#[from] StoreError),
}

fn rejection_message(r: &Rejection) -> &'static str {
    match r {
        Rejection::NotOpen => "the challenge is not open yet",
        Rejection::QuotaExceeded => "the three certificative submissions have been used",
    }
}

impl ApiError {
    pub fn code(&self) -> &str {
        match self {
            ApiError::Unauthorized => "UNAUTHORIZED",
            ApiError::Forbidden(_) => "FORBIDDEN",
            ApiError::UnknownStatement(_) => "UNKNOWN_STATEMENT",
            ApiError::UnknownSubmission(_) => "UNKNOWN_SUBMISSION",
            ApiError::Parse(_) => "PARSE_ERROR",
            ApiError::Invalid(v) => v.first().map_or("INVALID_STATEMENT", |v| v.code.as_str()),
            ApiError::Rejected(r) => r.code(),
            ApiError::Correction(e) => e.code(),
            ApiError::Activity(e) => e.code(),
            ApiError::TrumpWindowClosed(_) => "TRUMP_WINDOW_CLOSED",
            ApiError::Program { code, .. } => code,
            ApiError::Analytics(e) => e.code(),
            ApiError::Store(_) => "STORE_IO",
        }
    }

    /// Structured detail for the error body.
    pub fn detail(&self) -> Option<Value> {
        match self {
            ApiError::Invalid(v) => serde_json::to_value(v).ok(),
            _ => None,
        }
    }
}

fn require(p: &Principal, role: Role) -> Result<(), ApiError> {
    if p.role == role {
        Ok(())
    } else {
        Err(ApiError::Forbidden(
            format!("{} may not do this as a {:?}", p.id, p.role).to_lowercase(),
        ))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Published {
    pub id: String,
    pub version: u32,
}

/// What a student sees of a statement: no rubric.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StudentStatement {
    pub id: String,
    pub version: u32,
    pub title: String,
    pub prose: String,
    pub flow: ResolutionFlow,
    pub gli: cafe_core::model::BlankGliDescriptor,
    pub label_options: Vec<LabelOption>,
    pub code_template: String,
    pub test_cases: Vec<TestCase>,
    pub window: Window,
    pub weight_percent: f64,
    pub formative_only: bool,
    pub window_state: WindowState,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubmitRequest {
    pub payloads: BTreeMap<String, Payload>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubmitResponse {
    pub submission_id: String,
    pub seq: u32,
    pub mode: Mode,
    /// Certificative submissions left in the window after this one.
    pub remaining_certificative: usize,
    pub report: FeedbackReport,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlaygroundRequest {
    pub source: String,
    #[serde(default)]
    pub stdin: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeedbackView {
    pub submission_id: String,
    pub student_id: String,
    pub statement_id: String,
    pub version: u32,
    pub seq: u32,
    pub at: DateTime<Utc>,
    pub mode: Mode,
    pub report: FeedbackReport,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrumpResponse {
    pub student_id: String,
    pub trump: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Progress {
    pub summary: ProgressSummary,
    pub ledger: ChallengeLedger,
    pub pca: PcaMark,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DayCount {
    pub date: NaiveDate,
    pub count: usize,
}

pub struct Service {
    config: Config,
    store: Mutex<Store>,
    sessions: Mutex<Sessionizer>,
    clock: Box<dyn Clock>,
}

impl Service {
    /// Opens the store in `config.data_dir` and registers every configured
    /// student not yet known to the analytics log.
    pub fn open(config: Config, clock: Box<dyn Clock>) -> Result<Self, ApiError> {
        let mut store = Store::open(&config.data_dir, config.snapshot_every)?;
        let known: Vec<String> = store
            .state()
            .analytics
            .registered()
            .into_iter()
            .map(String::from)
            .collect();
        let missing: Vec<String> = config
            .students()
            .filter(|s| !known.iter().any(|k| k == s))
            .map(String::from)
            .collect();
        for student_id in missing {
            store.append(Event::Analytics {
                event: AnalyticsEvent::Registered { student_id },
            })?;
        }
        Ok(Service {
            config,
            store: Mutex::new(store),
            sessions: Mutex::new(Sessionizer::default()),
            clock,
        })
    }

    pub fn config(&self) -> &Config {
        &self.config
    }

    pub fn now(&self) -> DateTime<Utc> {
        self.clock.now()
    }

    fn store(&self) -> MutexGuard<'_, Store> {
        self.store.lock().unwrap_or_else(|e| e.into_inner())
    }

    pub fn state(&self) -> State {
        self.store().state().clone()
    }

    pub fn snapshot(&self) -> Result<(), ApiError> {
        Ok(self.store().snapshot()?)
    }

    pub fn authenticate(&self, token: Option<&str>) -> Result<Principal, ApiError> {
        token
            .and_then(|t| self.config.principal(t))
            .cloned()
            .ok_or(ApiError::Unauthorized)
    }

    /// Records an interaction and journals the session it opens, if any.
    fn touch(&self, p: &Principal) -> Result<(), ApiError> {
        if p.role != Role::Student {
            return Ok(());
        }
        let event = self
            .sessions
            .lock()
            .unwrap_or_else(|e| e.into_inner())
            .touch(&p.id, self.now());
        if let Some(event) = event {
            self.store().append(Event::Analytics { event })?;
        }
        Ok(())
    }

    pub fn encode_statement(&self, p: &Principal, body: &[u8]) -> Result<Published, ApiError> {
        require(p, Role::Supervisor)?;
        let mut raw: Value = serde_json::from_slice(body).map_err(|e| ApiError::Parse(e.to_string()))?;
        localize_window(&mut raw, &self.config.timezone);
        let st: Statement = serde_json::from_value(raw).map_err(|e| ApiError::Parse(e.to_string()))?;
        let violations = validate_statement(&st);
        if !violations.is_empty() {
            return Err(ApiError::Invalid(violations));
        }
        let mut store = self.store();
        if let Some((version, current)) = store.state().latest(&st.id) {
            if *current == st {
                return Ok(Published { id: st.id, version });
            }
        }
        let version = store.state().statements.get(&st.id).map_or(0, Vec::len) as u32 + 1;
        let id = st.id.clone();
        store.append(Event::StatementPublished {
            statement: st,
            version,
            by: p.id.clone(),
        })?;
        Ok(Published { id, version })
    }

    pub fn statement(&self, p: &Principal, id: &str) -> Result<Value, ApiError> {
        let (version, st) = {
            let store = self.store();
            let (v, st) = store
                .state()
                .latest(id)
                .ok_or_else(|| ApiError::UnknownStatement(id.into()))?;
            (v, st.clone())
        };
        let view = match p.role {
            Role::Supervisor => serde_json::json!({ "version": version, "statement": st }),
            Role::Student => {
                self.touch(p)?;
                serde_json::to_value(StudentStatement {
                    window_state: window_state(&st, self.now()),
                    id: st.id,
                    version,
                    title: st.title,
                    prose: st.prose,
                    flow: st.flow,
                    gli: st.gli,
                    label_options: st.label_options,
                    code_template: st.code_template,
                    test_cases: st.test_cases,
                    window: st.window,
                    weight_percent: st.weight_percent,
                    formative_only: st.formative_only,
                })
                .expect("statement view serializes")
            }
        };
        Ok(view)
    }

    /// Grades outside the store lock, then commits only if the ledger has
    /// not moved in between; otherwise the decision is taken again.
    pub fn submit(&self, p: &Principal, statement_id: &str, body: &[u8]) -> Result<SubmitResponse, ApiError> {
        require(p, Role::Student)?;
        let req: SubmitRequest = serde_json::from_slice(body).map_err(|e| ApiError::Parse(e.to_string()))?;
        loop {
            let now = self.now();
            let (version, st, seq, mode) = {
                let store = self.store();
                let state = store.state();
                let (version, st) = state
                    .latest(statement_id)
                    .ok_or_else(|| ApiError::UnknownStatement(statement_id.into()))?;
                let ledger = state.ledger(&p.id);
                let mode = match accept_submission(&ledger, st, now) {
                    Acceptance::Accepted(mode) => mode,
                    Acceptance::Rejected(r) => return Err(ApiError::Rejected(r)),
                };
                (version, st.clone(), ledger.next_seq(statement_id), mode)
            };
            let submission = Submission {
                student_id: p.id.clone(),
                statement_id: statement_id.to_string(),
                at: now,
                payloads: req.payloads.clone(),
                seq,
            };
            let lib = load_library(&st.rubric_bindings).map_err(CorrectionError::from)?;
            let report = correct_submission_with_budget(&submission, &st, &lib, self.config.step_budget)?;

            let mut store = self.store();
            let state = store.state();
            let ledger = state.ledger(&p.id);
            let unchanged = state.latest(statement_id).map(|(v, _)| v) == Some(version)
                && ledger.next_seq(statement_id) == seq
                && accept_submission(&ledger, &st, now) == Acceptance::Accepted(mode);
            if !unchanged {
                continue;
            }
            let submission_id = format!("sub-{:06}", state.submissions.len() + 1);
            let used = ledger.certificative_count(statement_id) + usize::from(mode == Mode::Certificative);
            store.append(Event::SubmissionAccepted {
                submission_id: submission_id.clone(),
                submission,
                version,
                mode,
                report: report.clone(),
            })?;
            drop(store);
            self.touch(p)?;
            let remaining_certificative = match (mode, st.formative_only) {
                (Mode::Certificative, _) => cafe_core::activity::CERTIFICATIVE_QUOTA.saturating_sub(used),
                _ => 0,
            };
            return Ok(SubmitResponse {
                submission_id,
                seq,
                mode,
                remaining_certificative,
                report,
            });
        }
    }

    pub fn feedback(&self, p: &Principal, submission_id: &str) -> Result<FeedbackView, ApiError> {
        let stored: StoredSubmission = self
            .store()
            .state()
            .submissions
            .get(submission_id)
            .cloned()
            .ok_or_else(|| ApiError::UnknownSubmission(submission_id.into()))?;
        if p.role == Role::Student && stored.submission.student_id != p.id {
            return Err(ApiError::Forbidden(format!(
                "{submission_id} belongs to another student"
            )));
        }
        self.touch(p)?;
        Ok(FeedbackView {
            submission_id: submission_id.to_string(),
            student_id: stored.submission.student_id,
            statement_id: stored.submission.statement_id,
            version: stored.version,
            seq: stored.submission.seq,
            at: stored.submission.at,
            mode: stored.mode,
            report: stored.report,
        })
    }

    /// Compiles and runs a program without grading it or touching the ledger.
    pub fn playground(&self, p: &Principal, statement_id: &str, body: &[u8]) -> Result<ExecutionResult, ApiError> {
        require(p, Role::Student)?;
        let req: PlaygroundRequest = serde_json::from_slice(body).map_err(|e| ApiError::Parse(e.to_string()))?;
        if self.store().state().latest(statement_id).is_none() {
            return Err(ApiError::UnknownStatement(statement_id.into()));
        }
        self.touch(p)?;
        let program = parse_program(&req.source).map_err(|e| ApiError::Program {
            code: e.code(),
            message: e.to_string(),
        })?;
        interpret(&program, &req.stdin, self.config.step_budget).map_err(|e| ApiError::Program {
            code: e.code(),
            message: e.to_string(),
        })
    }

    pub fn trump(&self, p: &Principal, statement_id: &str) -> Result<TrumpResponse, ApiError> {
        require(p, Role::Student)?;
        let now = self.now();
        let mut store = self.store();
        let state = store.state();
        let (_, st) = state
            .latest(statement_id)
            .ok_or_else(|| ApiError::UnknownStatement(statement_id.into()))?;
        if !self.config.retroactive_trump && window_state(st, now) == WindowState::Formative {
            return Err(ApiError::TrumpWindowClosed(statement_id.into()));
        }
        let mut ledger = state.ledger(&p.id);
        play_trump(&mut ledger, st)?;
        store.append(Event::TrumpPlayed {
            student_id: p.id.clone(),
            statement_id: statement_id.to_string(),
            at: now,
        })?;
        drop(store);
        self.touch(p)?;
        Ok(TrumpResponse {
            student_id: p.id.clone(),
            trump: statement_id.to_string(),
        })
    }

    pub fn progress_me(&self, p: &Principal) -> Result<Progress, ApiError> {
        require(p, Role::Student)?;
        self.touch(p)?;
        Ok(progress_of(self.store().state(), &p.id)?)
    }

    pub fn daily_sessions(
        &self,
        p: &Principal,
        from: Option<NaiveDate>,
        to: Option<NaiveDate>,
    ) -> Result<Vec<DayCount>, ApiError> {
        require(p, Role::Supervisor)?;
        let state = self.state();
        let today = self.now().date_naive();
        Ok(daily_counts(&state, from, to, today)?)
    }

    pub fn participation(&self, p: &Principal) -> Result<ParticipationMatrix, ApiError> {
        require(p, Role::Supervisor)?;
        Ok(participation_patterns(&self.store().state().analytics))
    }
}

pub fn progress_of(state: &State, student: &str) -> Result<Progress, AnalyticsError> {
    let statements = state.latest_statements();
    let ledger = state.ledger(student);
    let reports = state.reports_of(student);
    let known = state.ledgers.get(student);
    let summary = progress_summary(student, &state.analytics, known, &statements, &reports)?;
    Ok(Progress {
        summary,
        pca: course_pca_mark(&ledger, &statements),
        ledger,
    })
}

/// Without bounds the range spans the session days of the log, or `today`
/// when there are none.
pub fn daily_counts(
    state: &State,
    from: Option<NaiveDate>,
    to: Option<NaiveDate>,
    today: NaiveDate,
) -> Result<Vec<DayCount>, AnalyticsError> {
    let days: Vec<NaiveDate> = state
        .analytics
        .events()
        .filter_map(|e| match e {
            AnalyticsEvent::Session { started_at, .. } => Some(started_at.date_naive()),
            _ => None,
        })
        .collect();
    let from = from.or_else(|| days.iter().min().copied()).unwrap_or(today);
    let to = to.or_else(|| days.iter().max().copied()).unwrap_or(today);
    Ok(daily_sessions(&state.analytics, from, to)?
        .into_iter()
        .map(|(date, count)| DayCount { date, count })
        .collect())
}

/// Window instants written without an offset are read in `tz`.
fn localize_window(raw: &mut Value, tz: &chrono::FixedOffset) {
    let Some(window) = raw.get_mut("window").and_then(Value::as_object_mut) else {
        return;
    };
    for key in ["opens_at", "closes_at"] {
        let Some(Value::String(text)) = window.get(key) else {
            continue;
        };
        if DateTime::parse_from_rfc3339(text).is_ok() {
            continue;
        }
        let local = ["%Y-%m-%dT%H:%M:%S", "%Y-%m-%dT%H:%M", "%Y-%m-%d %H:%M"]
            .iter()
            .find_map(|f| NaiveDateTime::parse_from_str(text, f).ok());
        if let Some(utc) = local.and_then(|l| tz.from_local_datetime(&l).single()) {
            window.insert(key.into(), Value::String(utc.with_timezone(&Utc).to_rfc3339()));
        }
    }
}
