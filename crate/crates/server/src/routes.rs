use std::collections::HashMap;
use std::sync::Arc;

use axum::extract::ws::{Message, WebSocket, WebSocketUpgrade};
use axum::extract::{Path, Query, State};
use axum::http::{header, HeaderMap, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde::Serialize;
use tokio::sync::broadcast::error::RecvError;
use tokio::time::MissedTickBehavior;

use crate::error::ApiError;
use crate::framing;
use crate::scene::Scene;
use crate::session::{CloseSummary, CreateSession, Frame, Input, SessionRecord, Tick};
use crate::AppState;

type App = State<Arc<AppState>>;

pub fn router(state: Arc<AppState>) -> Router {
    Router::new()
        .route("/scenes", get(list_scenes))
        .route("/scenes/{id}/mesh", get(scene_mesh))
        .route("/scenes/{id}/path", get(scene_path))
        .route("/scenes/{id}/markers", get(scene_markers))
        .route("/sessions", get(list_sessions).post(create_session))
        .route("/sessions/{id}", get(session_record))
        .route("/sessions/{id}/input", post(session_input))
        .route("/sessions/{id}/stream", get(session_stream))
        .route("/sessions/{id}/close", post(close_session))
        .route("/sessions/{id}/log", get(session_log))
        .with_state(state)
}

/// Server → client message on the pose stream. Clients may send
/// [`Input`] JSON on the same socket; each is answered with a `tick` or an
/// `error`.
#[derive(Debug, Clone, Serialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum StreamMessage {
    Frame(Frame),
    Tick(Tick),
    Error { error: String },
}

fn scene<'a>(app: &'a AppState, id: &str) -> Result<&'a Scene, ApiError> {
    app.scenes
        .get(id)
        .ok_or_else(|| ApiError::NotFound(format!("scene {id}")))
}

impl AppState {
    pub fn apply(&self, id: &str, input: &Input) -> Result<Tick, ApiError> {
        let mut sessions = self.sessions.lock().unwrap();
        let scene = scene(self, &sessions.scene_of(id)?)?;
        sessions.apply(id, input, scene, self.clock.as_ref())
    }

    pub fn create(&self, req: &CreateSession) -> Result<SessionRecord, ApiError> {
        let scene = scene(self, &req.scene)?;
        self.sessions
            .lock()
            .unwrap()
            .create(req, scene, self.clock.as_ref())
    }

    /// Publishes one frame per tick until the session closes.
    pub fn spawn_ticker(self: &Arc<Self>, id: String) {
        let app = Arc::clone(self);
        tokio::spawn(async move {
            let mut interval = tokio::time::interval(app.tick_period());
            interval.set_missed_tick_behavior(MissedTickBehavior::Skip);
            loop {
                interval.tick().await;
                let mut sessions = app.sessions.lock().unwrap();
                let Ok(scene_id) = sessions.scene_of(&id) else {
                    break;
                };
                let Some(scene) = app.scenes.get(&scene_id) else {
                    break;
                };
                if !sessions.publish(&id, scene, app.clock.as_ref()) {
                    break;
                }
            }
        });
    }
}

async fn list_scenes(State(app): App) -> impl IntoResponse {
    Json(app.scenes.summaries())
}

#[derive(Serialize)]
struct MeshJson {
    vertices: Vec<[f64; 3]>,
    faces: Vec<[usize; 3]>,
}

async fn scene_mesh(
    State(app): App,
    Path(id): Path<String>,
    Query(query): Query<HashMap<String, String>>,
    headers: HeaderMap,
) -> Result<Response, ApiError> {
    let scene = scene(&app, &id)?;
    let accept_binary = headers
        .get(header::ACCEPT)
        .and_then(|v| v.to_str().ok())
        .is_some_and(|v| v.contains(framing::CONTENT_TYPE));
    let binary = match query.get("format").map(String::as_str) {
        Some("binary") => true,
        Some("json") => false,
        Some(other) => return Err(ApiError::BadRequest(format!("unknown format {other}"))),
        None => accept_binary,
    };
    if binary {
        let body = framing::encode_mesh(&scene.mesh);
        return Ok(([(header::CONTENT_TYPE, framing::CONTENT_TYPE)], body).into_response());
    }
    let mesh = MeshJson {
        vertices: scene
            .mesh
            .vertices()
            .iter()
            .map(|p| [p.x, p.y, p.z])
            .collect(),
        faces: scene.mesh.faces().to_vec(),
    };
    Ok(Json(mesh).into_response())
}

async fn scene_path(State(app): App, Path(id): Path<String>) -> Result<Response, ApiError> {
    let scene = scene(&app, &id)?;
    Ok((
        [(header::CONTENT_TYPE, "application/json")],
        scene.path.to_json(),
    )
        .into_response())
}

async fn scene_markers(State(app): App, Path(id): Path<String>) -> Result<Response, ApiError> {
    Ok(Json(&scene(&app, &id)?.markers).into_response())
}

async fn list_sessions(State(app): App) -> impl IntoResponse {
    Json(app.sessions.lock().unwrap().records())
}

async fn create_session(
    State(app): App,
    Json(req): Json<CreateSession>,
) -> Result<Response, ApiError> {
    let record = app.create(&req)?;
    app.spawn_ticker(record.id.clone());
    Ok((StatusCode::CREATED, Json(record)).into_response())
}

async fn session_record(
    State(app): App,
    Path(id): Path<String>,
) -> Result<Json<SessionRecord>, ApiError> {
    Ok(Json(app.sessions.lock().unwrap().record(&id)?))
}

async fn session_input(
    State(app): App,
    Path(id): Path<String>,
    Json(input): Json<Input>,
) -> Result<Json<Tick>, ApiError> {
    Ok(Json(app.apply(&id, &input)?))
}

async fn close_session(
    State(app): App,
    Path(id): Path<String>,
) -> Result<Json<CloseSummary>, ApiError> {
    Ok(Json(
        app.sessions
            .lock()
            .unwrap()
            .close(&id, app.clock.as_ref())?,
    ))
}

async fn session_log(State(app): App, Path(id): Path<String>) -> Result<Response, ApiError> {
    let text = app.sessions.lock().unwrap().log_text(&id)?;
    Ok(([(header::CONTENT_TYPE, "application/x-ndjson")], text).into_response())
}

async fn session_stream(
    ws: WebSocketUpgrade,
    State(app): App,
    Path(id): Path<String>,
) -> Result<Response, ApiError> {
    let frames = app.sessions.lock().unwrap().subscribe(&id)?;
    Ok(ws.on_upgrade(move |socket| run_stream(socket, frames, app, id)))
}

async fn send(socket: &mut WebSocket, msg: &StreamMessage) -> bool {
    let text = serde_json::to_string(msg).expect("stream message serializes");
    socket.send(Message::Text(text.into())).await.is_ok()
}

async fn run_stream(
    mut socket: WebSocket,
    mut frames: tokio::sync::broadcast::Receiver<Frame>,
    app: Arc<AppState>,
    id: String,
) {
    loop {
        tokio::select! {
            frame = frames.recv() => match frame {
                Ok(frame) => {
                    if !send(&mut socket, &StreamMessage::Frame(frame)).await {
                        break;
                    }
                }
                // A stalled client loses its oldest frames; the log is unaffected.
                Err(RecvError::Lagged(_)) => continue,
                Err(RecvError::Closed) => {
                    let _ = socket.send(Message::Close(None)).await;
                    break;
                }
            },
            incoming = socket.recv() => match incoming {
                Some(Ok(Message::Text(text))) => {
                    let reply = match serde_json::from_str::<Input>(&text) {
                        Ok(input) => match app.apply(&id, &input) {
                            Ok(tick) => StreamMessage::Tick(tick),
                            Err(e) => StreamMessage::Error { error: e.to_string() },
                        },
                        Err(e) => StreamMessage::Error { error: format!("bad input: {e}") },
                    };
                    if !send(&mut socket, &reply).await {
                        break;
                    }
                }
                Some(Ok(Message::Close(_))) | Some(Err(_)) | None => break,
                Some(Ok(_)) => {}
            },
        }
    }
}
