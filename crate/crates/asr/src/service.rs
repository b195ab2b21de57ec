//! Read-only HTTP policy service over one solved cube.
//!
//! `GET /meta`, `POST /policy` (a [`PolicyQuery`]) and `POST /preview` (a
//! [`PreviewRequest`]). Bodies that do not parse get 400; states the cube
//! cannot answer for (outside the grids, orders outside the participation
//! bounds) get 422.

use std::sync::Arc;

use axum::body::Bytes;
use axum::extract::State;
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde::de::DeserializeOwned;
use serde::Serialize;

use asr_core::policy::CubeSummary;
use asr_core::{AsrError, PolicyAnswer, PolicyEngine, PolicyQuery, PreviewAnswer, PreviewRequest};

#[derive(Debug, Serialize)]
pub struct ErrorBody {
    pub error: String,
    pub kind: &'static str,
    /// The request was refused because the state is outside the grids.
    pub extrapolated: bool,
}

pub struct ApiError(StatusCode, ErrorBody);

impl ApiError {
    fn bad_request(msg: String) -> Self {
        Self(StatusCode::BAD_REQUEST, ErrorBody { error: msg, kind: "malformed", extrapolated: false })
    }
}

impl From<AsrError> for ApiError {
    fn from(e: AsrError) -> Self {
        let (status, kind, extrapolated) = match &e {
            AsrError::OutOfGrid(_) => (StatusCode::UNPROCESSABLE_ENTITY, "out_of_grid", true),
            AsrError::Constraint(_) => (StatusCode::UNPROCESSABLE_ENTITY, "constraint", false),
            AsrError::InvalidParameter(_) | AsrError::Domain(_) => (StatusCode::BAD_REQUEST, "invalid", false),
            _ => (StatusCode::INTERNAL_SERVER_ERROR, "internal", false),
        };
        Self(status, ErrorBody { error: e.to_string(), kind, extrapolated })
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        (self.0, Json(self.1)).into_response()
    }
}

fn parse<T: DeserializeOwned>(body: &Bytes) -> Result<T, ApiError> {
    serde_json::from_slice(body).map_err(|e| ApiError::bad_request(format!("malformed request: {e}")))
}

async fn meta(State(engine): State<Arc<PolicyEngine>>) -> Result<Json<CubeSummary>, ApiError> {
    Ok(Json(engine.summary()?))
}

async fn policy(State(engine): State<Arc<PolicyEngine>>, body: Bytes) -> Result<Json<PolicyAnswer>, ApiError> {
    let query: PolicyQuery = parse(&body)?;
    Ok(Json(engine.answer(&query)?))
}

async fn preview(State(engine): State<Arc<PolicyEngine>>, body: Bytes) -> Result<Json<PreviewAnswer>, ApiError> {
    let req: PreviewRequest = parse(&body)?;
    Ok(Json(engine.preview(&req)?))
}

pub fn router(engine: Arc<PolicyEngine>) -> Router {
    Router::new()
        .route("/meta", get(meta))
        .route("/policy", post(policy))
        .route("/preview", post(preview))
        .with_state(engine)
}

/// Serve until the process is stopped.
pub async fn serve(engine: Arc<PolicyEngine>, bind: &str) -> std::io::Result<()> {
    let listener = tokio::net::TcpListener::bind(bind).await?;
    log::info!("serving on {}", listener.local_addr()?);
    axum::serve(listener, router(engine)).await
}
