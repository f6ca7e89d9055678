#![allow(dead_code)]

use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use axum::body::{to_bytes, Body};
use axum::http::{Method, Request, StatusCode};
use axum::Router;
use cafe_service::{http, Config, ManualClock, Service};
use chrono::{DateTime, TimeZone, Utc};
use serde_json::Value;
use tempfile::TempDir;
use tower::ServiceExt;

pub const PROF: &str = "tok-prof";
pub const STUDENTS: [(&str, &str); 3] = [("tok-s001", "s001"), ("tok-s002", "s002"), ("tok-s003", "s003")];

pub fn fixtures() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../core/fixtures")
}

pub fn statement_text() -> String {
    fs::read_to_string(fixtures().join("product_range/statement.json")).unwrap()
}

pub fn statement_json() -> Value {
    serde_json::from_str(&statement_text()).unwrap()
}

/// The `payloads` object of a fixture submission, wrapped as a request body.
pub fn submit_body(fixture: &str) -> Value {
    let path = fixtures()
        .join("product_range/submissions")
        .join(format!("{fixture}.json"));
    let sub: Value = serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap();
    serde_json::json!({ "payloads": sub["payloads"] })
}

pub fn golden_source() -> String {
    submit_body("00-golden")["payloads"]["code"]["source"]
        .as_str()
        .unwrap()
        .to_string()
}

pub fn config_text(data_dir: &Path) -> String {
    let mut text = format!(
        "listen = \"127.0.0.1:0\"\ndata_dir = \"{}\"\ntimezone = \"+02:00\"\nsnapshot_every = 0\n[tokens]\n{PROF} = {{ id = \"prof\", role = \"supervisor\" }}\n",
        data_dir.display()
    );
    for (token, id) in STUDENTS {
        text.push_str(&format!("{token} = {{ id = \"{id}\", role = \"student\" }}\n"));
    }
    text
}

pub fn config(dir: &Path) -> Config {
    Config::parse(&config_text(&dir.join("data"))).unwrap()
}

/// Inside the certificative window of the product statement.
pub fn in_window() -> DateTime<Utc> {
    Utc.with_ymd_and_hms(2023, 10, 5, 10, 0, 0).unwrap()
}

pub fn after_window() -> DateTime<Utc> {
    Utc.with_ymd_and_hms(2023, 10, 9, 9, 0, 0).unwrap()
}

pub struct Harness {
    pub dir: TempDir,
    pub svc: Arc<Service>,
    pub clock: Arc<ManualClock>,
    pub app: Router,
}

impl Harness {
    pub fn new() -> Self {
        let dir = TempDir::new().unwrap();
        Self::in_dir(dir)
    }

    pub fn in_dir(dir: TempDir) -> Self {
        let clock = Arc::new(ManualClock::new(in_window()));
        let svc = Arc::new(Service::open(config(dir.path()), Box::new(clock.clone())).unwrap());
        let app = http::router(svc.clone());
        Harness { dir, svc, clock, app }
    }

    pub fn data_dir(&self) -> PathBuf {
        self.dir.path().join("data")
    }

    pub async fn call(
        &self,
        method: Method,
        uri: &str,
        token: Option<&str>,
        body: Option<&Value>,
    ) -> (StatusCode, Value) {
        let (status, bytes) = self.raw(method, uri, token, body.map(|b| b.to_string())).await;
        let value =
            serde_json::from_slice(&bytes).unwrap_or_else(|_| Value::String(String::from_utf8_lossy(&bytes).into()));
        (status, value)
    }

    pub async fn raw(
        &self,
        method: Method,
        uri: &str,
        token: Option<&str>,
        body: Option<String>,
    ) -> (StatusCode, Vec<u8>) {
        let mut req = Request::builder().method(method).uri(uri);
        if let Some(t) = token {
            req = req.header("authorization", format!("Bearer {t}"));
        }
        let req = req.body(body.map_or_else(Body::empty, Body::from)).unwrap();
        let resp = self.app.clone().oneshot(req).await.unwrap();
        let status = resp.status();
        let bytes = to_bytes(resp.into_body(), usize::MAX).await.unwrap();
        (status, bytes.to_vec())
    }

    pub async fn publish_golden(&self) {
        let (status, body) = self
            .call(Method::POST, "/api/statements", Some(PROF), Some(&statement_json()))
            .await;
        assert_eq!(status, StatusCode::CREATED, "{body}");
    }

    pub async fn submit(&self, token: &str, fixture: &str) -> (StatusCode, Value) {
        self.call(
            Method::POST,
            "/api/statements/product-range/submissions",
            Some(token),
            Some(&submit_body(fixture)),
        )
        .await
    }

    pub fn journal_len(&self) -> usize {
        fs::read_to_string(self.data_dir().join("journal.jsonl")).map_or(0, |t| t.lines().count())
    }
}
