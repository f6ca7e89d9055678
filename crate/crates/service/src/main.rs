use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;

use cafe_core::activity::challenge_mark;
use cafe_core::analytics::{participation_patterns, write_daily_sessions_csv, write_participation_csv, EventLog};
use cafe_core::correction::{correct_submission_with_budget, CorrectionError};
use cafe_core::flow::validate_statement;
use cafe_core::{load_library, Statement, Submission};
use cafe_service::service::{daily_counts, progress_of};
use cafe_service::store::Event;
use cafe_service::{http, ApiError, Config, Principal, Service, Store, SystemClock};
use chrono::{NaiveDate, Utc};
use clap::{Parser, Subcommand};

#[derive(Parser)]
#[command(
    name = "cafe",
    version,
    about = "Grading service for loop-invariant programming challenges"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the HTTP service.
    Serve {
        #[arg(long)]
        config: PathBuf,
    },
    /// Publish every `*/statement.json` under a fixture directory and ingest
    /// its `analytics/*.jsonl` logs.
    Seed {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        fixtures: PathBuf,
    },
    /// Grade one submission file offline and print the feedback report.
    Grade {
        #[arg(long)]
        statement: PathBuf,
        #[arg(long = "submission-file")]
        submission_file: PathBuf,
        #[arg(long, default_value_t = cafe_core::DEFAULT_STEP_BUDGET)]
        budget: u64,
    },
    /// Write daily_sessions.csv, participation_patterns.csv and one
    /// progress_<student>.json per student.
    ExportAnalytics {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        from: Option<NaiveDate>,
        #[arg(long)]
        to: Option<NaiveDate>,
    },
    /// Print a student's mark for one challenge.
    Mark {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        student: String,
        #[arg(long)]
        challenge: String,
    },
    /// Print a student's course mark over all challenges.
    PcaMark {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        student: String,
    },
    /// Write a snapshot of the current state next to the journal.
    Snapshot {
        #[arg(long)]
        config: PathBuf,
    },
}

/// Exit status per failure class.
#[derive(Debug)]
enum Failure {
    Io(String),
    Input(String),
    Invalid(String),
    Grading(String),
    Unknown(String),
}

impl Failure {
    fn status(&self) -> u8 {
        match self {
            Failure::Io(_) => 1,
            Failure::Input(_) => 2,
            Failure::Invalid(_) => 3,
            Failure::Grading(_) => 4,
            Failure::Unknown(_) => 5,
        }
    }

    fn message(&self) -> &str {
        match self {
            Failure::Io(m) | Failure::Input(m) | Failure::Invalid(m) | Failure::Grading(m) | Failure::Unknown(m) => m,
        }
    }
}

impl From<ApiError> for Failure {
    fn from(e: ApiError) -> Self {
        let message = format!("{}: {e}", e.code());
        match e {
            ApiError::Parse(_) => Failure::Input(message),
            ApiError::Invalid(_) => Failure::Invalid(message),
            ApiError::UnknownStatement(_) | ApiError::UnknownSubmission(_) => Failure::Unknown(message),
            ApiError::Correction(_) => Failure::Grading(message),
            _ => Failure::Io(message),
        }
    }
}

fn read(path: &Path) -> Result<String, Failure> {
    fs::read_to_string(path).map_err(|e| Failure::Io(format!("{}: {e}", path.display())))
}

fn parse_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T, Failure> {
    serde_json::from_str(&read(path)?).map_err(|e| Failure::Input(format!("{}: {e}", path.display())))
}

fn config(path: &Path) -> Result<Config, Failure> {
    Config::load(path).map_err(|e| Failure::Input(e.to_string()))
}

fn open_store(config: &Config) -> Result<Store, Failure> {
    Store::open(&config.data_dir, config.snapshot_every).map_err(|e| Failure::Io(e.to_string()))
}

fn print_json<T: serde::Serialize>(value: &T) {
    println!("{}", serde_json::to_string_pretty(value).expect("value serializes"));
}

fn grade(statement: &Path, submission: &Path, budget: u64) -> Result<(), Failure> {
    let st: Statement = parse_json(statement)?;
    let sub: Submission = parse_json(submission)?;
    let violations = validate_statement(&st);
    if let Some(v) = violations.first() {
        return Err(Failure::Invalid(format!("{}: {}", v.code, v.detail)));
    }
    let lib = load_library(&st.rubric_bindings).map_err(|e| Failure::Invalid(e.to_string()))?;
    let report = correct_submission_with_budget(&sub, &st, &lib, budget).map_err(|e| match e {
        CorrectionError::PayloadMismatch { .. } => Failure::Grading(e.to_string()),
        CorrectionError::Library(_) => Failure::Invalid(e.to_string()),
    })?;
    print!("{}", report.to_canonical_json());
    Ok(())
}

fn seed(config_path: &Path, fixtures: &Path) -> Result<(), Failure> {
    let config = config(config_path)?;
    let svc = Service::open(config, Box::new(SystemClock))?;
    let seeder = Principal::supervisor("seed");
    let mut dirs: Vec<PathBuf> = fs::read_dir(fixtures)
        .map_err(|e| Failure::Io(format!("{}: {e}", fixtures.display())))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .collect();
    dirs.sort();
    for dir in &dirs {
        let path = dir.join("statement.json");
        if path.is_file() {
            let published = svc.encode_statement(&seeder, read(&path)?.as_bytes())?;
            println!("statement {} v{}", published.id, published.version);
        }
    }
    drop(svc);
    let analytics = fixtures.join("analytics");
    if analytics.is_dir() {
        let config = self::config(config_path)?;
        let mut store = open_store(&config)?;
        let mut files: Vec<PathBuf> = fs::read_dir(&analytics)
            .map_err(|e| Failure::Io(e.to_string()))?
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| p.extension().is_some_and(|x| x == "jsonl"))
            .collect();
        files.sort();
        for file in files {
            let log = EventLog::from_json_lines(&read(&file)?).map_err(|e| Failure::Input(e.to_string()))?;
            let mut added = 0;
            for event in log.events() {
                if !store.state().analytics.events().any(|e| e == event) {
                    store
                        .append(Event::Analytics { event: event.clone() })
                        .map_err(|e| Failure::Io(e.to_string()))?;
                    added += 1;
                }
            }
            println!("{}: {added} events", file.display());
        }
        store.snapshot().map_err(|e| Failure::Io(e.to_string()))?;
    }
    Ok(())
}

fn export(config_path: &Path, out: &Path, from: Option<NaiveDate>, to: Option<NaiveDate>) -> Result<(), Failure> {
    let store = open_store(&config(config_path)?)?;
    let state = store.state();
    fs::create_dir_all(out).map_err(|e| Failure::Io(e.to_string()))?;
    let create = |name: &str| fs::File::create(out.join(name)).map_err(|e| Failure::Io(format!("{name}: {e}")));
    let days = daily_counts(state, from, to, Utc::now().date_naive()).map_err(|e| Failure::Input(e.to_string()))?;
    let days = days.into_iter().map(|d| (d.date, d.count)).collect();
    write_daily_sessions_csv(&days, create("daily_sessions.csv")?).map_err(|e| Failure::Io(e.to_string()))?;
    write_participation_csv(
        &participation_patterns(&state.analytics),
        create("participation_patterns.csv")?,
    )
    .map_err(|e| Failure::Io(e.to_string()))?;
    let mut students: Vec<&str> = state.analytics.registered().into_iter().collect();
    students.extend(state.ledgers.keys().map(String::as_str));
    students.sort();
    students.dedup();
    for student in students {
        let progress = progress_of(state, student).map_err(|e| Failure::Unknown(e.to_string()))?;
        let text = serde_json::to_string_pretty(&progress).expect("progress serializes");
        fs::write(out.join(format!("progress_{student}.json")), text + "\n").map_err(|e| Failure::Io(e.to_string()))?;
    }
    Ok(())
}

fn mark(config_path: &Path, student: &str, challenge: &str) -> Result<(), Failure> {
    let store = open_store(&config(config_path)?)?;
    let state = store.state();
    let (_, st) = state
        .latest(challenge)
        .ok_or_else(|| Failure::Unknown(format!("unknown statement {challenge}")))?;
    print_json(&challenge_mark(&state.ledger(student), st));
    Ok(())
}

fn pca_mark(config_path: &Path, student: &str) -> Result<(), Failure> {
    let store = open_store(&config(config_path)?)?;
    let progress = progress_of(store.state(), student).map_err(|e| Failure::Unknown(e.to_string()))?;
    print_json(&progress.pca);
    Ok(())
}

fn serve(config_path: &Path) -> Result<(), Failure> {
    let config = config(config_path)?;
    let listen = config.listen.clone();
    let svc = Arc::new(Service::open(config, Box::new(SystemClock))?);
    let runtime = tokio::runtime::Runtime::new().map_err(|e| Failure::Io(e.to_string()))?;
    runtime.block_on(async {
        let listener = tokio::net::TcpListener::bind(&listen)
            .await
            .map_err(|e| Failure::Io(format!("{listen}: {e}")))?;
        eprintln!(
            "listening on {}",
            listener.local_addr().map_err(|e| Failure::Io(e.to_string()))?
        );
        axum::serve(listener, http::router(svc.clone()))
            .with_graceful_shutdown(async {
                let _ = tokio::signal::ctrl_c().await;
            })
            .await
            .map_err(|e| Failure::Io(e.to_string()))
    })?;
    svc.snapshot()?;
    Ok(())
}

fn run(cli: Cli) -> Result<(), Failure> {
    match cli.command {
        Command::Serve { config } => serve(&config),
        Command::Seed { config, fixtures } => seed(&config, &fixtures),
        Command::Grade {
            statement,
            submission_file,
            budget,
        } => grade(&statement, &submission_file, budget),
        Command::ExportAnalytics { config, out, from, to } => export(&config, &out, from, to),
        Command::Mark {
            config,
            student,
            challenge,
        } => mark(&config, &student, &challenge),
        Command::PcaMark { config, student } => pca_mark(&config, &student),
        Command::Snapshot { config } => {
            let mut store = open_store(&self::config(&config)?)?;
            store.snapshot().map_err(|e| Failure::Io(e.to_string()))
        }
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message());
            ExitCode::from(f.status())
        }
    }
}
