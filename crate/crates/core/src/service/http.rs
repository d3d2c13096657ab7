//! JSON API under `/v1`. Errors are `{code, message}`.

use std::sync::Arc;

use axum::body::Bytes;
use axum::extract::{Path, Query, State};
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post, put};
use axum::{Json, Router};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use super::engine::{Engine, EngineError, NewEntry, Preferences};
use super::ema::EmaSubmission;
use super::store::{PendingItem, Thumbs};
use crate::ingest::BatchId;
use crate::profile::UserId;
use crate::prompt::{PromptSource, Strategy};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ApiError {
    pub code: String,
    pub message: String,
    #[serde(skip)]
    status: StatusCode,
}

impl ApiError {
    fn new(status: StatusCode, code: &str, message: impl Into<String>) -> Self {
        Self { code: code.to_string(), message: message.into(), status }
    }

    fn invalid(message: impl Into<String>) -> Self {
        Self::new(StatusCode::BAD_REQUEST, "invalid_request", message)
    }
}

impl From<EngineError> for ApiError {
    fn from(e: EngineError) -> Self {
        let msg = e.to_string();
        match e {
            EngineError::UnknownUser(_) => Self::new(StatusCode::NOT_FOUND, "unknown_user", msg),
            EngineError::NotFound(_) => Self::new(StatusCode::NOT_FOUND, "not_found", msg),
            EngineError::Conflict(_) => Self::new(StatusCode::CONFLICT, "conflict", msg),
            EngineError::Invalid(_) | EngineError::Ema(_) | EngineError::Ingest(_) => {
                Self::new(StatusCode::UNPROCESSABLE_ENTITY, "invalid_request", msg)
            }
            _ => {
                tracing::error!(error = %msg, "request failed");
                Self::new(StatusCode::INTERNAL_SERVER_ERROR, "internal", msg)
            }
        }
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        (self.status, Json(self)).into_response()
    }
}

type ApiResult<T> = Result<T, ApiError>;

fn user(id: &str) -> ApiResult<UserId> {
    UserId::new(id).map_err(|e| ApiError::invalid(e.to_string()))
}

fn body<T: DeserializeOwned>(bytes: &[u8]) -> ApiResult<T> {
    serde_json::from_slice(bytes).map_err(|e| ApiError::invalid(format!("invalid body: {e}")))
}

async fn blocking<T: Send + 'static>(
    engine: Arc<Engine>,
    f: impl FnOnce(&Engine) -> Result<T, EngineError> + Send + 'static,
) -> ApiResult<T> {
    tokio::task::spawn_blocking(move || f(&engine))
        .await
        .map_err(|e| ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, "internal", e.to_string()))?
        .map_err(ApiError::from)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MoodBody {
    pub score: u8,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PromptBody {
    pub prompt_id: String,
    pub text: String,
    pub strategy: Strategy,
    pub source: PromptSource,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PendingBody {
    pub items: Vec<PendingItem>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CheckinBody {
    pub response: Thumbs,
}

#[derive(Debug, Deserialize)]
struct IngestQuery {
    batch_id: Option<String>,
}

async fn put_preferences(State(e): State<Arc<Engine>>, Path(id): Path<String>, b: Bytes) -> ApiResult<StatusCode> {
    let (u, prefs): (_, Preferences) = (user(&id)?, body(&b)?);
    blocking(e, move |e| e.set_preferences(&u, prefs)).await?;
    Ok(StatusCode::NO_CONTENT)
}

async fn post_mood(State(e): State<Arc<Engine>>, Path(id): Path<String>, b: Bytes) -> ApiResult<Json<PromptBody>> {
    let (u, m): (_, MoodBody) = (user(&id)?, body(&b)?);
    let p = blocking(e, move |e| e.report_mood(&u, m.score)).await?;
    Ok(Json(PromptBody { prompt_id: p.prompt_id, text: p.text, strategy: p.strategy, source: p.source }))
}

async fn get_pending(State(e): State<Arc<Engine>>, Path(id): Path<String>) -> ApiResult<Json<PendingBody>> {
    let u = user(&id)?;
    let items = blocking(e, move |e| e.pending(&u)).await?;
    Ok(Json(PendingBody { items }))
}

async fn post_entry(State(e): State<Arc<Engine>>, Path(id): Path<String>, b: Bytes) -> ApiResult<impl IntoResponse> {
    let (u, entry): (_, NewEntry) = (user(&id)?, body(&b)?);
    let stored = blocking(e, move |e| e.submit_entry(&u, entry)).await?;
    Ok((StatusCode::CREATED, Json(stored)))
}

async fn post_checkin(
    State(e): State<Arc<Engine>>,
    Path((id, prompt_id)): Path<(String, String)>,
    b: Bytes,
) -> ApiResult<impl IntoResponse> {
    let (u, c): (_, CheckinBody) = (user(&id)?, body(&b)?);
    let stored = blocking(e, move |e| e.respond_checkin(&u, &prompt_id, c.response)).await?;
    Ok((StatusCode::CREATED, Json(stored)))
}

async fn post_ema(State(e): State<Arc<Engine>>, Path(id): Path<String>, b: Bytes) -> ApiResult<impl IntoResponse> {
    let (u, s): (_, EmaSubmission) = (user(&id)?, body(&b)?);
    let score = blocking(e, move |e| e.submit_ema(&u, s)).await?;
    Ok((StatusCode::CREATED, Json(score)))
}

async fn post_ingest(
    State(e): State<Arc<Engine>>,
    Path(id): Path<String>,
    Query(q): Query<IngestQuery>,
    b: Bytes,
) -> ApiResult<impl IntoResponse> {
    let u = user(&id)?;
    let summary = blocking(e, move |e| e.ingest(&u, &b, q.batch_id.map(BatchId))).await?;
    Ok(Json(summary))
}

pub fn router(engine: Arc<Engine>) -> Router {
    Router::new()
        .route("/v1/users/{id}/preferences", put(put_preferences))
        .route("/v1/users/{id}/mood", post(post_mood))
        .route("/v1/users/{id}/pending", get(get_pending))
        .route("/v1/users/{id}/entries", post(post_entry))
        .route("/v1/users/{id}/checkins/{prompt_id}", post(post_checkin))
        .route("/v1/users/{id}/ema", post(post_ema))
        .route("/v1/ingest/{id}", post(post_ingest))
        .with_state(engine)
}

/// Requires `Authorization: Bearer <token>` on every route of `router`.
pub fn require_bearer(router: Router, token: impl Into<String>) -> Router {
    let expected: Arc<str> = format!("Bearer {}", token.into()).into();
    router.layer(axum::middleware::from_fn(move |req: axum::extract::Request, next: axum::middleware::Next| {
        let expected = expected.clone();
        async move {
            let ok = req
                .headers()
                .get(axum::http::header::AUTHORIZATION)
                .and_then(|v| v.to_str().ok())
                .is_some_and(|v| v == &*expected);
            if ok {
                next.run(req).await
            } else {
                ApiError::new(StatusCode::UNAUTHORIZED, "unauthorized", "missing or wrong bearer token").into_response()
            }
        }
    }))
}
