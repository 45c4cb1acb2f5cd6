//! HTTP JSON game service. The engine always plays the first player with the
//! scripted strategy; clients play the second player.
//!
//! - `POST /api/games` `{"t":3}` creates a game (the engine opens) and
//!   returns `{gameId, state}`.
//! - `GET /api/games/{id}` returns the state.
//! - `POST /api/games/{id}/moves` `{"u":3,"v":"fresh"}` plays a move and
//!   returns `{accepted, engineMove, state, threats, outcome}`.
//! - `DELETE /api/games/{id}` drops the game.
//!
//! Errors carry `{"error": reason}`: 400 for an illegal move, 404 for an
//! unknown game, 409 when it is not the client's turn or the game is over.

use std::collections::HashMap;
use std::io::Write;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::{Arc, Mutex};

use axum::extract::{Path, State};
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde::{Deserialize, Serialize};
use strong_ramsey::game::{Edge, EdgeRecord, Endpoint, GameOutcome, MoveSpec, Player, Position, VertexId};
use strong_ramsey::strategy::{self, StrategyState};
use strong_ramsey::verifier;

use crate::commands::{Error, Res};
use crate::Opts;

/// Only the target with a scripted strategy is served.
pub const SERVED_T: u32 = 3;

struct Game {
    position: Position,
    strategy: StrategyState,
}

#[derive(Default)]
pub struct AppState {
    games: Mutex<HashMap<u64, Arc<tokio::sync::Mutex<Game>>>>,
    next_id: AtomicU64,
}

#[derive(Serialize, Deserialize, Debug, Clone, PartialEq, Eq)]
pub struct StateView {
    pub vertices: usize,
    pub edges: Vec<EdgeRecord>,
    pub turn: Player,
    pub phase: String,
    pub outcome: GameOutcome,
}

#[derive(Serialize, Deserialize, Debug, Clone, PartialEq, Eq)]
pub struct Threats {
    pub p1: Vec<Edge>,
    pub p2: Vec<Edge>,
}

#[derive(Serialize, Deserialize, Debug, Clone, PartialEq, Eq)]
#[serde(rename_all = "camelCase")]
pub struct Created {
    pub game_id: String,
    pub state: StateView,
}

/// The engine's reply as the edge it coloured, plus the transcript form.
#[derive(Serialize, Deserialize, Debug, Clone, PartialEq, Eq)]
pub struct EngineMove {
    pub u: VertexId,
    pub v: VertexId,
    pub text: String,
}

#[derive(Serialize, Deserialize, Debug, Clone, PartialEq, Eq)]
#[serde(rename_all = "camelCase")]
pub struct MoveReply {
    pub accepted: bool,
    pub engine_move: Option<EngineMove>,
    pub state: StateView,
    pub threats: Threats,
    pub outcome: GameOutcome,
}

#[derive(Deserialize)]
struct NewGame {
    t: u32,
}

/// A vertex id, or `"fresh"` / `"new"` for an untouched vertex.
#[derive(Deserialize)]
#[serde(untagged)]
enum End {
    Id(VertexId),
    Word(String),
}

#[derive(Deserialize)]
struct MoveBody {
    u: End,
    v: End,
}

struct ApiError(StatusCode, String);

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        (self.0, Json(serde_json::json!({ "error": self.1 }))).into_response()
    }
}

type ApiResult<T> = Result<T, ApiError>;

fn view(g: &Game) -> StateView {
    let file = g.position.to_file();
    StateView {
        vertices: g.position.vertex_count(),
        edges: file.edges,
        turn: g.position.turn(),
        phase: g.strategy.phase.label().to_string(),
        outcome: g.position.outcome().unwrap_or(GameOutcome::Ongoing),
    }
}

fn threats(p: &Position) -> Threats {
    Threats { p1: p.threats(Player::P1), p2: p.threats(Player::P2) }
}

fn endpoint(e: &End) -> ApiResult<Endpoint> {
    match e {
        End::Id(v) => Ok(Endpoint::Existing(*v)),
        End::Word(w) if w == "fresh" || w == "new" => Ok(Endpoint::Fresh),
        End::Word(w) => Err(ApiError(StatusCode::BAD_REQUEST, format!("bad endpoint '{w}'"))),
    }
}

/// Lets the engine move if it is on turn, off the async workers.
async fn engine_turn(g: &mut Game) -> ApiResult<Option<EngineMove>> {
    if g.position.turn() != Player::P1 || g.position.is_terminal() {
        return Ok(None);
    }
    let (p, s) = (g.position.clone(), g.strategy.clone());
    let (m, next) = tokio::task::spawn_blocking(move || strategy::next_move(&p, &s))
        .await
        .map_err(|e| ApiError(StatusCode::INTERNAL_SERVER_ERROR, e.to_string()))?
        .map_err(|e| ApiError(StatusCode::INTERNAL_SERVER_ERROR, e.to_string()))?;
    let n = g.position.vertex_count();
    let edge = m.resolve(n).expect("strategy moves are legal");
    g.position = g.position.apply(&m).map_err(|e| ApiError(StatusCode::INTERNAL_SERVER_ERROR, e.to_string()))?;
    g.strategy = next;
    Ok(Some(EngineMove { u: edge.u, v: edge.v, text: m.to_string() }))
}

fn game(state: &AppState, id: &str) -> ApiResult<Arc<tokio::sync::Mutex<Game>>> {
    let key: u64 = id.parse().map_err(|_| ApiError(StatusCode::NOT_FOUND, format!("no game '{id}'")))?;
    let games = state.games.lock().expect("game table lock");
    games.get(&key).cloned().ok_or_else(|| ApiError(StatusCode::NOT_FOUND, format!("no game '{id}'")))
}

async fn create(
    State(state): State<Arc<AppState>>,
    Json(body): Json<NewGame>,
) -> ApiResult<(StatusCode, Json<Created>)> {
    if body.t != SERVED_T {
        return Err(ApiError(StatusCode::BAD_REQUEST, format!("only t = {SERVED_T} is served (got {})", body.t)));
    }
    let position = Position::new_game(body.t).map_err(|e| ApiError(StatusCode::BAD_REQUEST, e.to_string()))?;
    let mut g = Game { position, strategy: StrategyState::new() };
    engine_turn(&mut g).await?;
    let id = state.next_id.fetch_add(1, Ordering::Relaxed) + 1;
    let created = Created { game_id: id.to_string(), state: view(&g) };
    state.games.lock().expect("game table lock").insert(id, Arc::new(tokio::sync::Mutex::new(g)));
    Ok((StatusCode::CREATED, Json(created)))
}

async fn show(State(state): State<Arc<AppState>>, Path(id): Path<String>) -> ApiResult<Json<StateView>> {
    let g = game(&state, &id)?;
    let g = g.lock().await;
    Ok(Json(view(&g)))
}

async fn play(
    State(state): State<Arc<AppState>>,
    Path(id): Path<String>,
    Json(body): Json<MoveBody>,
) -> ApiResult<Json<MoveReply>> {
    let g = game(&state, &id)?;
    let mut g = g.lock().await;
    if g.position.is_terminal() {
        return Err(ApiError(StatusCode::CONFLICT, "the game is over".into()));
    }
    if g.position.turn() != Player::P2 {
        return Err(ApiError(StatusCode::CONFLICT, "it is not your turn".into()));
    }
    let m = MoveSpec::new(endpoint(&body.u)?, endpoint(&body.v)?, Player::P2);
    g.position = g.position.apply(&m).map_err(|e| ApiError(StatusCode::BAD_REQUEST, e.to_string()))?;
    let engine_move = engine_turn(&mut g).await?;
    let state = view(&g);
    Ok(Json(MoveReply { accepted: true, engine_move, outcome: state.outcome, threats: threats(&g.position), state }))
}

async fn remove(State(state): State<Arc<AppState>>, Path(id): Path<String>) -> ApiResult<StatusCode> {
    let key: u64 = id.parse().map_err(|_| ApiError(StatusCode::NOT_FOUND, format!("no game '{id}'")))?;
    match state.games.lock().expect("game table lock").remove(&key) {
        Some(_) => Ok(StatusCode::NO_CONTENT),
        None => Err(ApiError(StatusCode::NOT_FOUND, format!("no game '{id}'"))),
    }
}

pub fn router() -> Router {
    Router::new()
        .route("/api/games", post(create))
        .route("/api/games/{id}", get(show).delete(remove))
        .route("/api/games/{id}/moves", post(play))
        .with_state(Arc::new(AppState::default()))
}

pub(crate) fn serve(o: &Opts, out: &mut dyn Write) -> Res {
    let rt =
        tokio::runtime::Builder::new_multi_thread().enable_all().build().map_err(|e| Error::Usage(e.to_string()))?;
    rt.block_on(async {
        // the opening table is built once; do it before taking requests
        tokio::task::spawn_blocking(verifier::opening_classification)
            .await
            .map_err(|e| Error::Failed(e.to_string()))?;
        let addr = std::net::SocketAddr::from(([127, 0, 0, 1], o.port));
        let listener = tokio::net::TcpListener::bind(addr).await.map_err(|e| Error::Usage(format!("{addr}: {e}")))?;
        writeln!(out, "listening on http://{addr}")?;
        out.flush()?;
        axum::serve(listener, router()).await.map_err(|e| Error::Failed(e.to_string()))
    })
}
