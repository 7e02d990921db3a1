//! Live games against the engine over HTTP and websockets.
//!
//! Endpoints (all JSON unless noted):
//!
//! | method | path | |
//! |---|---|---|
//! | POST | `/api/games` | create a game (`CreateGame` body) |
//! | GET | `/api/games/{id}` | current state |
//! | POST | `/api/games/{id}/move` | `{"move": "e2e4"}`; `?wait=true` returns after the engine reply |
//! | POST | `/api/games/{id}/resign` | human resigns |
//! | GET | `/api/games/{id}/pgn` | PGN text |
//! | GET | `/api/games/{id}/diagnostics` | engine decisions per move |
//! | GET | `/api/games/{id}/ws` | live stream of `state`, `move`, `gameOver` messages |
//! | GET | `/api/vocab` | token vocabulary |
//!
//! Anything else is served from the static directory when one is set.

mod error;
mod session;
mod store;

use std::collections::HashMap;
use std::net::SocketAddr;
use std::path::PathBuf;
use std::sync::Arc;
use std::time::Instant;

use axum::extract::ws::{Message, WebSocket, WebSocketUpgrade};
use axum::extract::{Path, Query, State};
use axum::http::{header, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use ponder::chess::Color;
use ponder::engine::ponder_delay;
use ponder::model::Evaluator;
use serde::Deserialize;
use serde_json::{json, Value};
use tokio::sync::{broadcast, Mutex, RwLock};

pub use error::ServiceError;
pub use session::{ColorChoice, CreateGame, EngineDefaults, GameEvent, GameSession, MoveEntry, Status};
pub use store::EventLog;

#[derive(Clone, Debug)]
pub struct ServiceConfig {
    pub port: u16,
    pub max_sessions: usize,
    /// Event logs live here; `None` keeps sessions in memory only.
    pub data_dir: Option<PathBuf>,
    pub static_dir: Option<PathBuf>,
    pub engine: EngineDefaults,
}

impl Default for ServiceConfig {
    fn default() -> Self {
        ServiceConfig {
            port: 8080,
            max_sessions: 64,
            data_dir: None,
            static_dir: None,
            engine: EngineDefaults::default(),
        }
    }
}

pub struct SessionHandle<E: Evaluator> {
    pub game: Mutex<GameSession<E::Session>>,
    pub updates: broadcast::Sender<String>,
}

pub struct AppState<E: Evaluator> {
    pub evaluator: Arc<E>,
    pub config: ServiceConfig,
    sessions: RwLock<HashMap<String, Arc<SessionHandle<E>>>>,
    log: Option<EventLog>,
}

type Shared<E> = Arc<AppState<E>>;

impl<E> AppState<E>
where
    E: Evaluator + 'static,
    E::Session: 'static,
{
    /// Build the state, restoring sessions from the event log if any.
    pub fn new(evaluator: Arc<E>, config: ServiceConfig) -> Result<Shared<E>, ServiceError> {
        let log = config.data_dir.as_ref().map(EventLog::open).transpose()?;
        let state = Arc::new(AppState {
            evaluator,
            config,
            sessions: RwLock::new(HashMap::new()),
            log,
        });
        state.restore()?;
        Ok(state)
    }

    fn restore(&self) -> Result<(), ServiceError> {
        let Some(log) = &self.log else { return Ok(()) };
        let now = Instant::now();
        let mut sessions = self.sessions.try_write().expect("no contention during startup");
        for (id, events) in log.load_all()? {
            let Some(GameEvent::Created { request, human_color, seed, .. }) = events.first().cloned() else {
                log::warn!("session {id}: log does not start with a creation event");
                continue;
            };
            let mut game = GameSession::new(&*self.evaluator, id.clone(), request, human_color, seed, &self.config.engine, now)?;
            for e in &events[1..] {
                if let Err(err) = game.replay(e, now) {
                    log::warn!("session {id}: stopping replay at bad event: {err}");
                    break;
                }
            }
            let (tx, _) = broadcast::channel(64);
            sessions.insert(id, Arc::new(SessionHandle { game: Mutex::new(game), updates: tx }));
        }
        Ok(())
    }

    pub async fn session(&self, id: &str) -> Result<Arc<SessionHandle<E>>, ServiceError> {
        self.sessions.read().await.get(id).cloned().ok_or_else(|| ServiceError::NotFound(id.to_string()))
    }

    pub async fn session_count(&self) -> usize {
        self.sessions.read().await.len()
    }

    fn persist(&self, id: &str, events: &[GameEvent]) -> Result<(), ServiceError> {
        match &self.log {
            Some(log) => log.append(id, events),
            None => Ok(()),
        }
    }

    /// Persist events, then push them and the new state to subscribers.
    fn publish(&self, handle: &SessionHandle<E>, game: &GameSession<E::Session>, events: &[GameEvent]) -> Result<(), ServiceError> {
        self.persist(&game.id, events)?;
        let state = game.state(Instant::now());
        for e in events {
            let msg = match e {
                GameEvent::Created { .. } => json!({ "type": "state", "state": state }),
                GameEvent::Move(m) => json!({ "type": "move", "move": m, "state": state }),
                GameEvent::Finished { termination, outcome } => {
                    json!({ "type": "gameOver", "termination": termination, "outcome": outcome, "state": state })
                }
            };
            // No subscribers is fine.
            let _ = handle.updates.send(msg.to_string());
        }
        Ok(())
    }

    pub async fn create(self: &Arc<Self>, req: CreateGame) -> Result<Value, ServiceError> {
        req.validate()?;
        let id = uuid::Uuid::new_v4().simple().to_string();
        let seed = req.seed.unwrap_or_else(|| u64::from_le_bytes(uuid::Uuid::new_v4().as_bytes()[..8].try_into().unwrap()));
        let human_color = match req.color {
            ColorChoice::White => Color::White,
            ColorChoice::Black => Color::Black,
            ColorChoice::Random => {
                if seed & 1 == 0 {
                    Color::White
                } else {
                    Color::Black
                }
            }
        };
        let game = GameSession::new(&*self.evaluator, id.clone(), req.clone(), human_color, seed, &self.config.engine, Instant::now())?;
        let (tx, _) = broadcast::channel(64);
        let handle = Arc::new(SessionHandle { game: Mutex::new(game), updates: tx });
        {
            let mut sessions = self.sessions.write().await;
            if sessions.len() >= self.config.max_sessions {
                return Err(ServiceError::TooManySessions(self.config.max_sessions));
            }
            sessions.insert(id.clone(), handle.clone());
        }
        let state = {
            let game = handle.game.lock().await;
            let created = GameEvent::Created {
                id: id.clone(),
                request: req,
                human_color,
                seed,
            };
            self.publish(&handle, &game, &[created])?;
            game.state(Instant::now())
        };
        self.spawn_engine_turn(handle);
        Ok(state)
    }

    /// Let the engine move if it is its turn. The reply is computed on a
    /// blocking thread, delayed by the ponder policy and committed only if
    /// the game has not changed meanwhile.
    pub fn spawn_engine_turn(self: &Arc<Self>, handle: Arc<SessionHandle<E>>) -> tokio::task::JoinHandle<()> {
        let state = self.clone();
        tokio::spawn(async move {
            if let Err(e) = state.engine_turn(handle).await {
                log::error!("engine turn failed: {e}");
            }
        })
    }

    async fn engine_turn(self: Arc<Self>, handle: Arc<SessionHandle<E>>) -> Result<(), ServiceError> {
        let h = handle.clone();
        let decided = tokio::task::spawn_blocking(move || {
            let mut game = h.game.blocking_lock();
            if !game.engine_to_move() {
                return Ok(None);
            }
            let now = Instant::now();
            let remaining = game.remaining(now);
            let ply = game.moves.len();
            let realism = game.engine_config().ponder_realism;
            game.engine_decide(now).map(|d| Some((d, ply, remaining, realism)))
        })
        .await
        .map_err(|e| ServiceError::Engine(e.to_string()))??;
        let Some((decision, ply, remaining, realism)) = decided else {
            return Ok(());
        };
        if realism {
            tokio::time::sleep(ponder_delay(&decision, Some(remaining))).await;
        }
        let mut game = handle.game.lock().await;
        if game.moves.len() != ply || !game.engine_to_move() {
            return Ok(());
        }
        let events = game.engine_commit(decision, Instant::now())?;
        self.publish(&handle, &game, &events)
    }

    pub async fn submit_move(self: &Arc<Self>, id: &str, uci: &str, client_time_ms: Option<u64>, wait: bool) -> Result<Value, ServiceError> {
        let handle = self.session(id).await?;
        {
            let mut game = handle.game.lock().await;
            let events = game.human_move(uci, client_time_ms, Instant::now())?;
            self.publish(&handle, &game, &events)?;
        }
        let task = self.spawn_engine_turn(handle.clone());
        if wait {
            task.await.map_err(|e| ServiceError::Engine(e.to_string()))?;
        }
        let game = handle.game.lock().await;
        Ok(game.state(Instant::now()))
    }

    pub async fn resign(&self, id: &str) -> Result<Value, ServiceError> {
        let handle = self.session(id).await?;
        let mut game = handle.game.lock().await;
        let events = game.human_resign()?;
        self.publish(&handle, &game, &events)?;
        Ok(game.state(Instant::now()))
    }

    /// Current state, ending the game first if a flag has fallen.
    pub async fn get_state(&self, id: &str) -> Result<Value, ServiceError> {
        let handle = self.session(id).await?;
        let mut game = handle.game.lock().await;
        if let Some(e) = game.check_flag(Instant::now()) {
            self.publish(&handle, &game, &[e])?;
        }
        Ok(game.state(Instant::now()))
    }
}

#[derive(Deserialize)]
struct MoveBody {
    #[serde(rename = "move")]
    mv: String,
    #[serde(default)]
    client_time_ms: Option<u64>,
}

#[derive(Deserialize, Default)]
struct WaitQuery {
    #[serde(default)]
    wait: bool,
}

async fn create_handler<E>(State(s): State<Shared<E>>, Json(req): Json<CreateGame>) -> Result<Response, ServiceError>
where
    E: Evaluator + 'static,
    E::Session: 'static,
{
    let state = s.create(req).await?;
    Ok((StatusCode::CREATED, Json(state)).into_response())
}

async fn state_handler<E>(State(s): State<Shared<E>>, Path(id): Path<String>) -> Result<Json<Value>, ServiceError>
where
    E: Evaluator + 'static,
    E::Session: 'static,
{
    Ok(Json(s.get_state(&id).await?))
}

async fn move_handler<E>(
    State(s): State<Shared<E>>,
    Path(id): Path<String>,
    Query(q): Query<WaitQuery>,
    Json(body): Json<MoveBody>,
) -> Result<Json<Value>, ServiceError>
where
    E: Evaluator + 'static,
    E::Session: 'static,
{
    Ok(Json(s.submit_move(&id, &body.mv, body.client_time_ms, q.wait).await?))
}

async fn resign_handler<E>(State(s): State<Shared<E>>, Path(id): Path<String>) -> Result<Json<Value>, ServiceError>
where
    E: Evaluator + 'static,
    E::Session: 'static,
{
    Ok(Json(s.resign(&id).await?))
}

async fn pgn_handler<E>(State(s): State<Shared<E>>, Path(id): Path<String>) -> Result<Response, ServiceError>
where
    E: Evaluator + 'static,
    E::Session: 'static,
{
    let handle = s.session(&id).await?;
    let pgn = handle.game.lock().await.pgn();
    Ok(([(header::CONTENT_TYPE, "application/x-chess-pgn")], pgn).into_response())
}

async fn diagnostics_handler<E>(State(s): State<Shared<E>>, Path(id): Path<String>) -> Result<Json<Value>, ServiceError>
where
    E: Evaluator + 'static,
    E::Session: 'static,
{
    let handle = s.session(&id).await?;
    let d = handle.game.lock().await.diagnostics();
    Ok(Json(d))
}

async fn ws_handler<E>(State(s): State<Shared<E>>, Path(id): Path<String>, ws: WebSocketUpgrade) -> Result<Response, ServiceError>
where
    E: Evaluator + 'static,
    E::Session: 'static,
{
    let handle = s.session(&id).await?;
    Ok(ws.on_upgrade(move |socket| stream_updates(socket, s, handle)))
}

/// Send the current state, then every update. Incoming text messages of
/// the form `{"type": "move", "move": "e2e4"}` are played as human moves.
async fn stream_updates<E>(mut socket: WebSocket, s: Shared<E>, handle: Arc<SessionHandle<E>>)
where
    E: Evaluator + 'static,
    E::Session: 'static,
{
    let mut rx = handle.updates.subscribe();
    let (id, first) = {
        let game = handle.game.lock().await;
        (game.id.clone(), json!({ "type": "state", "state": game.state(Instant::now()) }))
    };
    if socket.send(Message::Text(first.to_string().into())).await.is_err() {
        return;
    }
    loop {
        tokio::select! {
            update = rx.recv() => match update {
                Ok(text) => {
                    if socket.send(Message::Text(text.into())).await.is_err() {
                        break;
                    }
                }
                Err(broadcast::error::RecvError::Lagged(_)) => continue,
                Err(broadcast::error::RecvError::Closed) => break,
            },
            incoming = socket.recv() => match incoming {
                Some(Ok(Message::Text(text))) => {
                    let reply = match serde_json::from_str::<Value>(&text) {
                        Ok(v) if v["type"] == "move" => {
                            let uci = v["move"].as_str().unwrap_or_default().to_string();
                            s.submit_move(&id, &uci, v["client_time_ms"].as_u64(), false).await.err()
                        }
                        Ok(v) if v["type"] == "resign" => s.resign(&id).await.err(),
                        _ => Some(ServiceError::BadConfig("unrecognized message".into())),
                    };
                    if let Some(e) = reply {
                        let msg = json!({ "type": "error", "error": e.code(), "message": e.to_string() });
                        if socket.send(Message::Text(msg.to_string().into())).await.is_err() {
                            break;
                        }
                    }
                }
                Some(Ok(Message::Close(_))) | None | Some(Err(_)) => break,
                Some(Ok(_)) => {}
            },
        }
    }
}

async fn vocab_handler() -> Json<Value> {
    Json(ponder::tokens::Vocab::get().to_json())
}

async fn health_handler<E>(State(s): State<Shared<E>>) -> Json<Value>
where
    E: Evaluator + 'static,
    E::Session: 'static,
{
    Json(json!({ "ok": true, "sessions": s.session_count().await, "max_sessions": s.config.max_sessions }))
}

pub fn router<E>(state: Shared<E>) -> Router
where
    E: Evaluator + 'static,
    E::Session: 'static,
{
    let static_dir = state.config.static_dir.clone();
    let api = Router::new()
        .route("/api/health", get(health_handler::<E>))
        .route("/api/vocab", get(vocab_handler))
        .route("/api/games", post(create_handler::<E>))
        .route("/api/games/{id}", get(state_handler::<E>))
        .route("/api/games/{id}/move", post(move_handler::<E>))
        .route("/api/games/{id}/resign", post(resign_handler::<E>))
        .route("/api/games/{id}/pgn", get(pgn_handler::<E>))
        .route("/api/games/{id}/diagnostics", get(diagnostics_handler::<E>))
        .route("/api/games/{id}/ws", get(ws_handler::<E>))
        .with_state(state);
    match static_dir {
        Some(dir) => api.fallback_service(tower_http::services::ServeDir::new(dir)),
        None => api,
    }
}

/// Bind and serve until the process is stopped.
pub async fn serve<E>(state: Shared<E>) -> Result<(), ServiceError>
where
    E: Evaluator + 'static,
    E::Session: 'static,
{
    let addr = SocketAddr::from(([0, 0, 0, 0], state.config.port));
    let listener = tokio::net::TcpListener::bind(addr).await?;
    log::info!("listening on http://{}", listener.local_addr()?);
    axum::serve(listener, router(state)).await?;
    Ok(())
}
