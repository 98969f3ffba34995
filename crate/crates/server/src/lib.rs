//! HTTP and WebSocket session service for the lumen viewer.
//!
//! Clients send intents (move, head, offset, tag, policy), never poses. The
//! server owns each session's [`lumen_core::travel::TravelState`], appends
//! every applied intent to the session log, and streams the authoritative
//! pose at a fixed tick.
//!
//! | verb | path                     | body / response                                  |
//! |------|--------------------------|--------------------------------------------------|
//! | GET  | `/scenes`                | scene summaries                                  |
//! | GET  | `/scenes/{id}/mesh`      | `{vertices, faces}` JSON, or [`framing`] binary with `?format=binary` or `Accept: application/octet-stream` |
//! | GET  | `/scenes/{id}/path`      | path file JSON                                   |
//! | GET  | `/scenes/{id}/markers`   | marker set JSON                                  |
//! | GET  | `/sessions`              | session records                                  |
//! | POST | `/sessions`              | [`session::CreateSession`] → [`session::SessionRecord`] |
//! | GET  | `/sessions/{id}`         | session record                                   |
//! | POST | `/sessions/{id}/input`   | [`session::Input`] → [`session::Tick`]           |
//! | GET  | `/sessions/{id}/stream`  | WebSocket, see [`routes::StreamMessage`]         |
//! | POST | `/sessions/{id}/close`   | [`session::CloseSummary`]                        |
//! | GET  | `/sessions/{id}/log`     | line-delimited JSON session log                  |

pub mod error;
pub mod framing;
pub mod routes;
pub mod scene;
pub mod session;

use std::net::SocketAddr;
use std::path::PathBuf;
use std::sync::{Arc, Mutex};
use std::time::Duration;

pub use error::ApiError;
pub use routes::router;
pub use scene::{Scene, SceneError, SceneStore};
pub use session::{Clock, ManualClock, Sessions, SystemClock};

pub const DEFAULT_TICK_HZ: f64 = 60.0;

pub struct AppState {
    pub scenes: SceneStore,
    pub sessions: Mutex<Sessions>,
    pub clock: Arc<dyn Clock>,
    pub tick_hz: f64,
}

impl AppState {
    pub fn new(scenes: SceneStore, logs: Option<PathBuf>, clock: Arc<dyn Clock>) -> Self {
        Self {
            scenes,
            sessions: Mutex::new(Sessions::new(logs)),
            clock,
            tick_hz: DEFAULT_TICK_HZ,
        }
    }

    pub fn tick_period(&self) -> Duration {
        Duration::from_secs_f64(1.0 / self.tick_hz)
    }
}

#[derive(Debug, Clone)]
pub struct Config {
    pub addr: SocketAddr,
    pub scenes: PathBuf,
    pub logs: PathBuf,
    pub tick_hz: f64,
}

#[derive(Debug, thiserror::Error)]
pub enum ServeError {
    #[error(transparent)]
    Scene(#[from] SceneError),
    #[error("{0}")]
    Io(#[from] std::io::Error),
    #[error("tick rate must be positive")]
    TickRate,
}

/// Loads the scenes and serves until Ctrl-C.
pub async fn serve(config: Config) -> Result<(), ServeError> {
    if !(config.tick_hz > 0.0 && config.tick_hz.is_finite()) {
        return Err(ServeError::TickRate);
    }
    let scenes = SceneStore::load_dir(&config.scenes)?;
    std::fs::create_dir_all(&config.logs)?;
    let mut state = AppState::new(
        scenes,
        Some(config.logs.clone()),
        Arc::new(SystemClock::default()),
    );
    state.tick_hz = config.tick_hz;
    let listener = tokio::net::TcpListener::bind(config.addr).await?;
    tracing::info!(addr = %listener.local_addr()?, "serving");
    axum::serve(listener, router(Arc::new(state)))
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await?;
    Ok(())
}
