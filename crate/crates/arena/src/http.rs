use std::net::SocketAddr;
use std::sync::Arc;

use axum::extract::{Path, State};
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde::Deserialize;
use serde_json::json;

use crate::battle::Choice;
use crate::service::{Arena, ArenaError};

impl IntoResponse for ArenaError {
    fn into_response(self) -> Response {
        let status = match &self {
            ArenaError::UnknownPipeline(_) | ArenaError::EmptyTopic => StatusCode::BAD_REQUEST,
            ArenaError::UnknownBattle(_) | ArenaError::UnknownSegment(_) => StatusCode::NOT_FOUND,
            ArenaError::InvalidState { .. } | ArenaError::AlreadyVoted => StatusCode::CONFLICT,
            ArenaError::BothFailed { .. } | ArenaError::Pipeline(_) => StatusCode::BAD_GATEWAY,
            ArenaError::Log(_) => StatusCode::INTERNAL_SERVER_ERROR,
        };
        (status, Json(json!({ "error": self.to_string() }))).into_response()
    }
}

type Shared = Arc<Arena>;

async fn blocking<T: Send + 'static>(
    f: impl FnOnce() -> Result<T, ArenaError> + Send + 'static,
) -> Result<T, ArenaError> {
    tokio::task::spawn_blocking(f)
        .await
        .unwrap_or_else(|e| Err(ArenaError::Log(format!("worker panicked: {e}"))))
}

#[derive(Deserialize)]
struct RagBody {
    topic: String,
    #[serde(default)]
    topic_id: Option<String>,
    #[serde(default)]
    pipeline: Option<String>,
}

async fn rag(State(arena): State<Shared>, Json(body): Json<RagBody>) -> Result<Response, ArenaError> {
    let resp = blocking(move || {
        let topic_id = body.topic_id.unwrap_or_else(|| "adhoc".into());
        arena.rag(&topic_id, &body.topic, body.pipeline.as_deref())
    })
    .await?;
    Ok(Json(resp).into_response())
}

async fn pipelines(State(arena): State<Shared>) -> Response {
    Json(arena.pipelines()).into_response()
}

#[derive(Deserialize)]
struct BattleBody {
    topic: String,
    left: String,
    right: String,
    #[serde(default = "yes")]
    blinded: bool,
}

fn yes() -> bool {
    true
}

async fn create_battle(State(arena): State<Shared>, Json(body): Json<BattleBody>) -> Result<Response, ArenaError> {
    let created = arena.create_battle(&body.topic, &body.left, &body.right, body.blinded)?;
    let id = created.battle_id.clone();
    let a = arena.clone();
    match blocking(move || a.run_battle(&id)).await {
        Ok(view) => Ok((StatusCode::CREATED, Json(view)).into_response()),
        // the per-side causes could name backends, so only the redacted
        // battle goes back to the client
        Err(ArenaError::BothFailed { .. }) => {
            let view = arena.battle(&created.battle_id)?;
            Ok((StatusCode::BAD_GATEWAY, Json(json!({ "error": "both systems failed", "battle": view }))).into_response())
        }
        Err(e) => Err(e),
    }
}

async fn get_battle(State(arena): State<Shared>, Path(id): Path<String>) -> Result<Response, ArenaError> {
    Ok(Json(arena.battle(&id)?).into_response())
}

#[derive(Deserialize)]
struct VoteBody {
    choice: Choice,
    #[serde(default)]
    voter: Option<String>,
}

async fn vote(State(arena): State<Shared>, Path(id): Path<String>, Json(body): Json<VoteBody>) -> Result<Response, ArenaError> {
    let voter = body.voter.unwrap_or_else(|| "anonymous".into());
    Ok(Json(arena.vote(&id, body.choice, &voter)?).into_response())
}

async fn leaderboard(State(arena): State<Shared>) -> Response {
    Json(arena.leaderboard().ranked()).into_response()
}

async fn segment(State(arena): State<Shared>, Path(id): Path<String>) -> Result<Response, ArenaError> {
    Ok(Json(arena.segment(&id)?).into_response())
}

pub fn router(arena: Arc<Arena>) -> Router {
    Router::new()
        .route("/api/rag", post(rag))
        .route("/api/pipelines", get(pipelines))
        .route("/api/arena/battles", post(create_battle))
        .route("/api/arena/battles/{id}", get(get_battle))
        .route("/api/arena/battles/{id}/vote", post(vote))
        .route("/api/arena/leaderboard", get(leaderboard))
        .route("/api/segments/{id}", get(segment))
        .with_state(arena)
}

pub async fn serve(arena: Arc<Arena>, addr: SocketAddr) -> std::io::Result<()> {
    let listener = tokio::net::TcpListener::bind(addr).await?;
    log::info!("listening on {}", listener.local_addr()?);
    axum::serve(listener, router(arena)).await
}
