//! HTTP front end. Handlers resolve the bearer token and hand off to
//! [`Contest`]; blocking work runs on the blocking pool.

use std::sync::Arc;

use axum::body::Bytes;
use axum::extract::{Path, Query, State};
use axum::http::{header, HeaderMap, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use bibifi_scoring::{FixId, ReportId, TeamId};
use serde::{Deserialize, Serialize};

use crate::auth::{ApiError, Caller};
use crate::config::Phase;
use crate::contest::{BreakRequest, Contest, FixDecisionRequest, FixRequest, RegisterRequest};

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let status = StatusCode::from_u16(self.status).unwrap_or(StatusCode::INTERNAL_SERVER_ERROR);
        (status, Json(serde_json::json!({ "error": self.message }))).into_response()
    }
}

type Shared = Arc<Contest>;
type ApiResult<T> = Result<T, ApiError>;

fn bearer(headers: &HeaderMap) -> Option<&str> {
    headers.get(header::AUTHORIZATION)?.to_str().ok()?.strip_prefix("Bearer ").map(str::trim)
}

/// Resolves the caller and runs `f` off the async executor.
async fn with_caller<T: Send + 'static>(
    c: Shared,
    headers: &HeaderMap,
    f: impl FnOnce(&Shared, &Caller) -> ApiResult<T> + Send + 'static,
) -> ApiResult<T> {
    let token = bearer(headers).map(str::to_owned);
    tokio::task::spawn_blocking(move || {
        let caller = c.caller(token.as_deref())?;
        f(&c, &caller)
    })
    .await
    .map_err(|e| ApiError::internal(e.to_string()))?
}

#[derive(Deserialize)]
struct SubmitQuery {
    language: Option<String>,
}

#[derive(Deserialize)]
struct Since {
    #[serde(default)]
    since: u64,
}

#[derive(Serialize, Deserialize)]
pub struct PhaseRequest {
    pub phase: Phase,
}

async fn register(State(c): State<Shared>, headers: HeaderMap, Json(req): Json<RegisterRequest>) -> ApiResult<impl IntoResponse> {
    let r = with_caller(c, &headers, move |c, who| c.register(who, req)).await?;
    Ok((StatusCode::CREATED, Json(r)))
}

async fn submit(State(c): State<Shared>, headers: HeaderMap, Query(q): Query<SubmitQuery>, body: Bytes) -> ApiResult<impl IntoResponse> {
    let r = with_caller(c, &headers, move |c, who| c.submit(who, q.language, body.to_vec())).await?;
    Ok((StatusCode::ACCEPTED, Json(r)))
}

async fn submission(State(c): State<Shared>, headers: HeaderMap, Path(id): Path<u64>) -> ApiResult<impl IntoResponse> {
    Ok(Json(with_caller(c, &headers, move |c, who| c.submission(who, id)).await?))
}

async fn targets(State(c): State<Shared>, headers: HeaderMap) -> ApiResult<impl IntoResponse> {
    Ok(Json(with_caller(c, &headers, |c, who| c.targets(who)).await?))
}

async fn challenges(State(c): State<Shared>, headers: HeaderMap, Path(team): Path<String>) -> ApiResult<impl IntoResponse> {
    Ok(Json(with_caller(c, &headers, move |c, who| c.challenges(who, &TeamId(team))).await?))
}

async fn submit_break(State(c): State<Shared>, headers: HeaderMap, Json(req): Json<BreakRequest>) -> ApiResult<impl IntoResponse> {
    let r = with_caller(c, &headers, move |c, who| c.submit_break(who, req)).await?;
    Ok((StatusCode::ACCEPTED, Json(r)))
}

async fn break_info(State(c): State<Shared>, headers: HeaderMap, Path(id): Path<u64>) -> ApiResult<impl IntoResponse> {
    Ok(Json(with_caller(c, &headers, move |c, who| c.break_info(who, ReportId(id))).await?))
}

async fn reports(State(c): State<Shared>, headers: HeaderMap) -> ApiResult<impl IntoResponse> {
    Ok(Json(with_caller(c, &headers, |c, who| c.reports(who)).await?))
}

async fn submit_fix(State(c): State<Shared>, headers: HeaderMap, Json(req): Json<FixRequest>) -> ApiResult<impl IntoResponse> {
    let r = with_caller(c, &headers, move |c, who| c.submit_fix(who, req)).await?;
    Ok((StatusCode::ACCEPTED, Json(r)))
}

async fn fix_info(State(c): State<Shared>, headers: HeaderMap, Path(id): Path<u64>) -> ApiResult<impl IntoResponse> {
    Ok(Json(with_caller(c, &headers, move |c, who| c.fix_info(who, FixId(id))).await?))
}

async fn scoreboard(State(c): State<Shared>, headers: HeaderMap) -> ApiResult<Response> {
    let board = with_caller(c, &headers, |c, who| c.scoreboard(who)).await?;
    let body = serde_json::to_vec(&*board).expect("board serializes");
    Ok(([(header::CONTENT_TYPE, "application/json")], body).into_response())
}

async fn scoreboard_csv(State(c): State<Shared>, headers: HeaderMap) -> ApiResult<impl IntoResponse> {
    let csv = with_caller(c, &headers, |c, who| c.scoreboard_csv(who)).await?;
    Ok(([(header::CONTENT_TYPE, "text/csv")], csv))
}

async fn events(State(c): State<Shared>, headers: HeaderMap, Query(q): Query<Since>) -> ApiResult<impl IntoResponse> {
    Ok(Json(with_caller(c, &headers, move |c, who| c.events(who, q.since)).await?))
}

async fn set_phase(State(c): State<Shared>, headers: HeaderMap, Json(req): Json<PhaseRequest>) -> ApiResult<impl IntoResponse> {
    let phase = with_caller(c, &headers, move |c, who| c.set_phase(who, req.phase)).await?;
    Ok(Json(PhaseRequest { phase }))
}

async fn review_queue(State(c): State<Shared>, headers: HeaderMap) -> ApiResult<impl IntoResponse> {
    Ok(Json(with_caller(c, &headers, |c, who| c.review_queue(who)).await?))
}

async fn decide_fix(State(c): State<Shared>, headers: HeaderMap, Json(req): Json<FixDecisionRequest>) -> ApiResult<impl IntoResponse> {
    Ok(Json(with_caller(c, &headers, move |c, who| c.decide_fix(who, req)).await?))
}

async fn oracle_bugs(State(c): State<Shared>, headers: HeaderMap) -> ApiResult<impl IntoResponse> {
    Ok(Json(with_caller(c, &headers, |c, who| c.oracle_bugs(who)).await?))
}

pub fn router(contest: Shared) -> Router {
    Router::new()
        .route("/teams", post(register))
        .route("/submissions", post(submit))
        .route("/submissions/{id}", get(submission))
        .route("/targets", get(targets))
        .route("/targets/{team}/challenges", get(challenges))
        .route("/breaks", post(submit_break))
        .route("/breaks/{id}", get(break_info))
        .route("/reports", get(reports))
        .route("/fixes", post(submit_fix))
        .route("/fixes/{id}", get(fix_info))
        .route("/scoreboard", get(scoreboard))
        .route("/scoreboard.csv", get(scoreboard_csv))
        .route("/events", get(events))
        .route("/admin/phase", post(set_phase))
        .route("/admin/fixes", get(review_queue))
        .route("/admin/fix-decision", post(decide_fix))
        .route("/admin/oracle-bugs", get(oracle_bugs))
        .layer(axum::extract::DefaultBodyLimit::max(bibifi_runner::archive::MAX_ARCHIVE_BYTES * 2))
        .with_state(contest)
}

/// Serves until the listener fails.
pub async fn serve(listener: tokio::net::TcpListener, contest: Shared) -> std::io::Result<()> {
    axum::serve(listener, router(contest)).await
}
