use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use chrono::FixedOffset;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Role {
    Student,
    Supervisor,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Principal {
    pub id: String,
    pub role: Role,
}

impl Principal {
    pub fn student(id: &str) -> Self {
        Principal {
            id: id.into(),
            role: Role::Student,
        }
    }

    pub fn supervisor(id: &str) -> Self {
        Principal {
            id: id.into(),
            role: Role::Supervisor,
        }
    }
}

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("invalid configuration: {0}")]
    Toml(#[from] toml::de::Error),
    #[error("invalid timezone offset `{0}`, expected e.g. +02:00")]
    Timezone(String),
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    #[serde(default = "default_listen")]
    listen: String,
    #[serde(default = "default_data_dir")]
    data_dir: PathBuf,
    #[serde(default = "default_timezone")]
    timezone: String,
    #[serde(default = "default_step_budget")]
    step_budget: u64,
    #[serde(default = "default_snapshot_every")]
    snapshot_every: u64,
    #[serde(default = "default_true")]
    retroactive_trump: bool,
    #[serde(default)]
    tokens: BTreeMap<String, Principal>,
}

fn default_listen() -> String {
    "127.0.0.1:8080".into()
}

fn default_data_dir() -> PathBuf {
    PathBuf::from("data")
}

fn default_timezone() -> String {
    "+00:00".into()
}

fn default_step_budget() -> u64 {
    cafe_core::DEFAULT_STEP_BUDGET
}

fn default_snapshot_every() -> u64 {
    100
}

fn default_true() -> bool {
    true
}

/// Service settings. `tokens` maps bearer tokens to principals.
#[derive(Debug, Clone)]
pub struct Config {
    pub listen: String,
    pub data_dir: PathBuf,
    /// Offset applied to statement windows written without one.
    pub timezone: FixedOffset,
    pub step_budget: u64,
    /// Journal entries between two snapshots; 0 disables automatic snapshots.
    pub snapshot_every: u64,
    /// Whether a trump card may still be played once a window has closed.
    pub retroactive_trump: bool,
    pub tokens: BTreeMap<String, Principal>,
}

impl Config {
    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        let raw: RawConfig = toml::from_str(text)?;
        let timezone = parse_offset(&raw.timezone).ok_or(ConfigError::Timezone(raw.timezone))?;
        Ok(Config {
            listen: raw.listen,
            data_dir: raw.data_dir,
            timezone,
            step_budget: raw.step_budget,
            snapshot_every: raw.snapshot_every,
            retroactive_trump: raw.retroactive_trump,
            tokens: raw.tokens,
        })
    }

    /// Reads a TOML file; a relative `data_dir` is resolved against the
    /// file's directory.
    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        let mut config = Config::parse(&text)?;
        if config.data_dir.is_relative() {
            let base = path.parent().unwrap_or(Path::new("."));
            config.data_dir = base.join(&config.data_dir);
        }
        Ok(config)
    }

    pub fn principal(&self, token: &str) -> Option<&Principal> {
        self.tokens.get(token)
    }

    pub fn students(&self) -> impl Iterator<Item = &str> {
        self.tokens
            .values()
            .filter(|p| p.role == Role::Student)
            .map(|p| p.id.as_str())
    }
}

/// `Z`, `+HH:MM` or `-HH:MM`.
pub fn parse_offset(text: &str) -> Option<FixedOffset> {
    if text == "Z" {
        return FixedOffset::east_opt(0);
    }
    let (sign, rest) = match text.as_bytes().first()? {
        b'+' => (1, &text[1..]),
        b'-' => (-1, &text[1..]),
        _ => return None,
    };
    let (h, m) = rest.split_once(':')?;
    if h.len() != 2 || m.len() != 2 {
        return None;
    }
    let (h, m): (i32, i32) = (h.parse().ok()?, m.parse().ok()?);
    if h > 23 || m > 59 {
        return None;
    }
    FixedOffset::east_opt(sign * (h * 3600 + m * 60))
}
