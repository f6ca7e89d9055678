//! JSON routes over [`Service`]. Errors are `{code, message, detail?}`.

use std::collections::BTreeMap;
use std::sync::Arc;

use axum::body::Bytes;
use axum::extract::{Path, Query, State};
use axum::http::{header, HeaderMap, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use cafe_core::analytics::{write_daily_sessions_csv, write_participation_csv, AnalyticsError};
use cafe_core::correction::CorrectionError;
use chrono::NaiveDate;
use serde::Serialize;
use serde_json::Value;

use crate::config::Principal;
use crate::service::{ApiError, Service};

type Shared = Arc<Service>;

#[derive(Serialize)]
struct ErrorBody<'a> {
    code: &'a str,
    message: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    detail: Option<Value>,
}

pub fn status_of(e: &ApiError) -> StatusCode {
    match e {
        ApiError::Unauthorized => StatusCode::UNAUTHORIZED,
        ApiError::Forbidden(_) => StatusCode::FORBIDDEN,
        ApiError::UnknownStatement(_) | ApiError::UnknownSubmission(_) => StatusCode::NOT_FOUND,
        ApiError::Parse(_) => StatusCode::BAD_REQUEST,
        ApiError::Invalid(_) | ApiError::Program { .. } => StatusCode::UNPROCESSABLE_ENTITY,
        ApiError::Correction(CorrectionError::PayloadMismatch { .. }) => StatusCode::UNPROCESSABLE_ENTITY,
        ApiError::Correction(CorrectionError::Library(_)) => StatusCode::UNPROCESSABLE_ENTITY,
        ApiError::Rejected(_) | ApiError::Activity(_) | ApiError::TrumpWindowClosed(_) => StatusCode::CONFLICT,
        ApiError::Analytics(AnalyticsError::UnknownStudent(_)) => StatusCode::NOT_FOUND,
        ApiError::Analytics(AnalyticsError::EmptyRange { .. } | AnalyticsError::Parse(_)) => StatusCode::BAD_REQUEST,
        ApiError::Analytics(_) | ApiError::Store(_) => StatusCode::INTERNAL_SERVER_ERROR,
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let body = ErrorBody {
            code: self.code(),
            message: self.to_string(),
            detail: self.detail(),
        };
        (status_of(&self), Json(&body)).into_response()
    }
}

pub fn router(svc: Shared) -> Router {
    Router::new()
        .route("/health", get(health))
        .route("/api/statements", post(create_statement))
        .route("/api/statements/{id}", get(get_statement))
        .route("/api/statements/{id}/submissions", post(submit))
        .route("/api/submissions/{id}/feedback", get(feedback))
        .route("/api/playground/{id}", post(playground))
        .route("/api/trump/{id}", post(trump))
        .route("/api/progress/me", get(progress))
        .route("/api/analytics/daily-sessions", get(daily_sessions))
        .route("/api/analytics/participation", get(participation))
        .with_state(svc)
}

fn principal(svc: &Service, headers: &HeaderMap) -> Result<Principal, ApiError> {
    let token = headers
        .get(header::AUTHORIZATION)
        .and_then(|v| v.to_str().ok())
        .and_then(|v| v.strip_prefix("Bearer "))
        .map(str::trim);
    svc.authenticate(token)
}

/// Runs a grading or execution call off the async workers.
async fn blocking<T: Send + 'static>(
    svc: Shared,
    f: impl FnOnce(&Service) -> Result<T, ApiError> + Send + 'static,
) -> Result<T, ApiError> {
    tokio::task::spawn_blocking(move || f(&svc))
        .await
        .expect("service call panicked")
}

async fn health() -> Json<Value> {
    Json(serde_json::json!({ "status": "ok" }))
}

async fn create_statement(State(svc): State<Shared>, headers: HeaderMap, body: Bytes) -> Result<Response, ApiError> {
    let p = principal(&svc, &headers)?;
    let published = svc.encode_statement(&p, &body)?;
    Ok((StatusCode::CREATED, Json(published)).into_response())
}

async fn get_statement(
    State(svc): State<Shared>,
    headers: HeaderMap,
    Path(id): Path<String>,
) -> Result<Json<Value>, ApiError> {
    let p = principal(&svc, &headers)?;
    Ok(Json(svc.statement(&p, &id)?))
}

async fn submit(
    State(svc): State<Shared>,
    headers: HeaderMap,
    Path(id): Path<String>,
    body: Bytes,
) -> Result<Response, ApiError> {
    let p = principal(&svc, &headers)?;
    let out = blocking(svc, move |s| s.submit(&p, &id, &body)).await?;
    Ok((StatusCode::CREATED, Json(out)).into_response())
}

async fn feedback(State(svc): State<Shared>, headers: HeaderMap, Path(id): Path<String>) -> Result<Response, ApiError> {
    let p = principal(&svc, &headers)?;
    Ok(Json(svc.feedback(&p, &id)?).into_response())
}

async fn playground(
    State(svc): State<Shared>,
    headers: HeaderMap,
    Path(id): Path<String>,
    body: Bytes,
) -> Result<Response, ApiError> {
    let p = principal(&svc, &headers)?;
    let out = blocking(svc, move |s| s.playground(&p, &id, &body)).await?;
    Ok(Json(out).into_response())
}

async fn trump(State(svc): State<Shared>, headers: HeaderMap, Path(id): Path<String>) -> Result<Response, ApiError> {
    let p = principal(&svc, &headers)?;
    Ok(Json(svc.trump(&p, &id)?).into_response())
}

async fn progress(State(svc): State<Shared>, headers: HeaderMap) -> Result<Response, ApiError> {
    let p = principal(&svc, &headers)?;
    Ok(Json(svc.progress_me(&p)?).into_response())
}

fn date_param(q: &BTreeMap<String, String>, key: &str) -> Result<Option<NaiveDate>, ApiError> {
    q.get(key)
        .map(|v| NaiveDate::parse_from_str(v, "%Y-%m-%d").map_err(|e| ApiError::Parse(format!("{key}: {e}"))))
        .transpose()
}

fn wants_csv(q: &BTreeMap<String, String>) -> bool {
    q.get("format").is_some_and(|f| f == "csv")
}

fn csv_response(bytes: Vec<u8>) -> Response {
    ([(header::CONTENT_TYPE, "text/csv; charset=utf-8")], bytes).into_response()
}

async fn daily_sessions(
    State(svc): State<Shared>,
    headers: HeaderMap,
    Query(q): Query<BTreeMap<String, String>>,
) -> Result<Response, ApiError> {
    let p = principal(&svc, &headers)?;
    let days = svc.daily_sessions(&p, date_param(&q, "from")?, date_param(&q, "to")?)?;
    if wants_csv(&q) {
        let map = days.iter().map(|d| (d.date, d.count)).collect();
        let mut out = Vec::new();
        write_daily_sessions_csv(&map, &mut out)?;
        return Ok(csv_response(out));
    }
    Ok(Json(days).into_response())
}

async fn participation(
    State(svc): State<Shared>,
    headers: HeaderMap,
    Query(q): Query<BTreeMap<String, String>>,
) -> Result<Response, ApiError> {
    let p = principal(&svc, &headers)?;
    let m = svc.participation(&p)?;
    if wants_csv(&q) {
        let mut out = Vec::new();
        write_participation_csv(&m, &mut out)?;
        return Ok(csv_response(out));
    }
    Ok(Json(m).into_response())
}
