//! Authoritative per-session travel state and append-only event logs.

use std::collections::{BTreeMap, BTreeSet};
use std::fs::File;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::Mutex;
use std::time::Instant;

use lumen_core::analytics::latin_square;
use lumen_core::travel::{
    clamp_offset, guidance_arrows, pose, step, tag, CameraPose, Direction, EventKind,
    GuidanceArrows, MoveInput, SessionEvent, SessionStart, TagEvent, Technique, TravelPolicy,
    TravelState, ARROW_LOOKAHEAD,
};
use nalgebra::{Quaternion, UnitQuaternion, Vector2};
use serde::{Deserialize, Serialize};
use tokio::sync::broadcast;

use crate::error::ApiError;
use crate::scene::Scene;

/// Frames buffered per stream subscriber before the oldest are dropped.
pub const STREAM_BUFFER: usize = 256;

/// Seconds on a monotone clock. Session timestamps are offsets from the
/// session's creation time on this clock.
pub trait Clock: Send + Sync {
    fn now(&self) -> f64;
}

pub struct SystemClock(Instant);

impl Default for SystemClock {
    fn default() -> Self {
        Self(Instant::now())
    }
}

impl Clock for SystemClock {
    fn now(&self) -> f64 {
        self.0.elapsed().as_secs_f64()
    }
}

/// Clock that only moves when told to; used for reproducible sessions.
#[derive(Default)]
pub struct ManualClock(Mutex<f64>);

impl ManualClock {
    pub fn set(&self, t: f64) {
        *self.0.lock().unwrap() = t;
    }

    pub fn advance(&self, dt: f64) {
        *self.0.lock().unwrap() += dt;
    }
}

impl Clock for ManualClock {
    fn now(&self) -> f64 {
        *self.0.lock().unwrap()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Status {
    Active,
    Closed,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SessionRecord {
    pub id: String,
    pub subject: String,
    pub technique: Technique,
    pub scene: String,
    pub marker_set: String,
    /// Clock reading at creation (s).
    pub created_at: f64,
    pub log_path: Option<PathBuf>,
    pub status: Status,
}

#[derive(Debug, Clone, Deserialize)]
pub struct CreateSession {
    pub subject: String,
    /// Omitted: the subject's next technique in its balanced latin-square row.
    #[serde(default)]
    pub technique: Option<String>,
    pub scene: String,
    #[serde(default)]
    pub direction: Option<Direction>,
    #[serde(default)]
    pub speed: Option<f64>,
    #[serde(default)]
    pub fov_deg: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Deserialize, Serialize)]
pub struct MoveIntent {
    pub input: MoveInput,
    /// s
    pub dt: f64,
}

/// Client intent. Present parts are applied in field order: policy, head,
/// move, offset, tag.
#[derive(Debug, Clone, Default, PartialEq, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct Input {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub policy: Option<TravelPolicy>,
    /// Quaternion `[i, j, k, w]`; normalized on receipt.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub head: Option<[f64; 4]>,
    #[serde(default, rename = "move", skip_serializing_if = "Option::is_none")]
    pub movement: Option<MoveIntent>,
    /// Requested lateral offset in the frame's (normal, binormal) plane (m).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub offset: Option<[f64; 2]>,
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub tag: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Tick {
    pub t: f64,
    pub s: f64,
    pub offset: [f64; 2],
    pub pose: CameraPose,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub tag: Option<TagEvent>,
}

/// One pose-stream message.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Frame {
    pub t: f64,
    pub s: f64,
    pub pose: CameraPose,
    pub arrows: GuidanceArrows,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CloseSummary {
    pub id: String,
    /// s
    pub duration: f64,
    pub tags: usize,
    pub distinct_markers: usize,
    pub s: f64,
}

struct Session {
    record: SessionRecord,
    state: TravelState,
    last_t: f64,
    events: Vec<SessionEvent>,
    log: Option<File>,
    frames: Option<broadcast::Sender<Frame>>,
}

impl Session {
    fn append(&mut self, kind: EventKind) -> Result<(), ApiError> {
        let event = SessionEvent {
            t: self.last_t,
            kind,
        };
        if let Some(file) = &mut self.log {
            file.write_all(event.to_line().as_bytes())
                .and_then(|_| file.write_all(b"\n"))
                .and_then(|_| file.flush())
                .map_err(|e| ApiError::Internal(format!("log write: {e}")))?;
        }
        self.events.push(event);
        Ok(())
    }

    /// Session time, never earlier than the previous event.
    fn stamp(&mut self, clock: &dyn Clock) -> f64 {
        self.last_t = (clock.now() - self.record.created_at).max(self.last_t);
        self.last_t
    }
}

/// All sessions of one server. Callers serialize access through a mutex, so
/// each session's state has exactly one writer.
#[derive(Default)]
pub struct Sessions {
    sessions: BTreeMap<String, Session>,
    next_id: u64,
    /// Subjects in order of first appearance, for latin-square rows.
    subjects: Vec<String>,
    logs: Option<PathBuf>,
}

impl Sessions {
    pub fn new(logs: Option<PathBuf>) -> Self {
        Self {
            logs,
            ..Self::default()
        }
    }

    fn session(&self, id: &str) -> Result<&Session, ApiError> {
        self.sessions
            .get(id)
            .ok_or_else(|| ApiError::NotFound(format!("session {id}")))
    }

    fn active(&mut self, id: &str) -> Result<&mut Session, ApiError> {
        let s = self
            .sessions
            .get_mut(id)
            .ok_or_else(|| ApiError::NotFound(format!("session {id}")))?;
        if s.record.status == Status::Closed {
            return Err(ApiError::Conflict(format!("session {id} is closed")));
        }
        Ok(s)
    }

    /// Technique for a subject's next session following its latin-square row.
    fn next_technique(&mut self, subject: &str) -> Result<Technique, ApiError> {
        let row = match self.subjects.iter().position(|s| s == subject) {
            Some(i) => i,
            None => {
                self.subjects.push(subject.to_string());
                self.subjects.len() - 1
            }
        };
        let square = latin_square(Technique::ALL.len()).expect("three techniques");
        let order = &square[row % square.len()];
        let done = self
            .sessions
            .values()
            .filter(|s| s.record.subject == subject)
            .count();
        order.get(done).map(|&i| Technique::ALL[i]).ok_or_else(|| {
            ApiError::Conflict(format!("subject {subject} has used every technique"))
        })
    }

    pub fn create(
        &mut self,
        req: &CreateSession,
        scene: &Scene,
        clock: &dyn Clock,
    ) -> Result<SessionRecord, ApiError> {
        let technique = match &req.technique {
            Some(name) => name
                .parse::<Technique>()
                .map_err(|e| ApiError::BadRequest(e.to_string()))?,
            None => self.next_technique(&req.subject)?,
        };
        if !self.subjects.contains(&req.subject) {
            self.subjects.push(req.subject.clone());
        }
        if self.sessions.values().any(|s| {
            s.record.status == Status::Active
                && s.record.subject == req.subject
                && s.record.technique == technique
        }) {
            return Err(ApiError::Conflict(format!(
                "{} already has an active {technique} session",
                req.subject
            )));
        }
        let direction = req.direction.unwrap_or(Direction::Antegrade);
        let mut state = TravelState::at_start(&scene.path, technique.policy(), direction);
        if let Some(v) = req.speed {
            state.speed = v;
        }
        if let Some(v) = req.fov_deg {
            state.fov_deg = v;
        }
        state
            .validate(scene.path.length())
            .map_err(|e| ApiError::BadRequest(e.to_string()))?;

        self.next_id += 1;
        let id = format!("s{:04}", self.next_id);
        let (log, log_path) = match &self.logs {
            Some(dir) => {
                let p = dir.join(format!("{id}.log"));
                let f = File::create(&p)
                    .map_err(|e| ApiError::Internal(format!("{}: {e}", p.display())))?;
                (Some(f), Some(p))
            }
            None => (None, None),
        };
        let record = SessionRecord {
            id: id.clone(),
            subject: req.subject.clone(),
            technique,
            scene: scene.id.clone(),
            marker_set: scene.markers.id.clone(),
            created_at: clock.now(),
            log_path,
            status: Status::Active,
        };
        let (tx, _) = broadcast::channel(STREAM_BUFFER);
        let mut session = Session {
            record: record.clone(),
            state,
            last_t: 0.0,
            events: Vec::new(),
            log,
            frames: Some(tx),
        };
        session.append(EventKind::Start(SessionStart {
            subject: req.subject.clone(),
            technique,
            scene: scene.id.clone(),
            marker_set: scene.markers.id.clone(),
            direction,
            policy: state.policy,
            s: state.s,
            speed: state.speed,
            fov_deg: state.fov_deg,
            path_length: scene.path.length(),
        }))?;
        self.sessions.insert(id, session);
        Ok(record)
    }

    pub fn apply(
        &mut self,
        id: &str,
        input: &Input,
        scene: &Scene,
        clock: &dyn Clock,
    ) -> Result<Tick, ApiError> {
        let session = self.active(id)?;
        let bad = |m: &str| Err(ApiError::BadRequest(m.to_string()));
        let policy = input.policy.map(|p| match p {
            TravelPolicy::FlyOver { phi } if phi.is_finite() => TravelPolicy::fly_over(phi),
            p => p,
        });
        if let Some(policy) = policy {
            let next = TravelState {
                policy,
                ..session.state
            };
            next.validate(scene.path.length())
                .map_err(|e| ApiError::BadRequest(e.to_string()))?;
        }
        if let Some(q) = input.head {
            if !q.iter().all(|x| x.is_finite()) || q.iter().all(|x| *x == 0.0) {
                return bad("head quaternion must be finite and non-zero");
            }
        }
        if let Some(m) = input.movement {
            if !(m.dt >= 0.0 && m.dt.is_finite()) {
                return bad("dt must be finite and non-negative");
            }
        }
        if let Some(o) = input.offset {
            if !o.iter().all(|x| x.is_finite()) {
                return bad("offset must be finite");
            }
        }

        let t = session.stamp(clock);
        if let Some(policy) = policy {
            session.state.policy = policy;
            session.append(EventKind::Policy { policy })?;
        }
        if let Some([i, j, k, w]) = input.head {
            session.state.head = UnitQuaternion::new_normalize(Quaternion::new(w, i, j, k));
            let event = SessionEvent::head(t, &session.state.head);
            session.append(event.kind)?;
        }
        if let Some(m) = input.movement {
            session.state = step(&session.state, m.input, m.dt, scene.path.length());
            let s = session.state.s;
            session.append(EventKind::Move {
                input: m.input,
                dt: m.dt,
                s,
            })?;
        }
        if let Some([x, y]) = input.offset {
            let requested = Vector2::new(x, y);
            let radius = scene.local_radius(session.state.s);
            session.state =
                clamp_offset(&scene.bvh, &scene.path, &session.state, requested, radius)
                    .map_err(|e| ApiError::BadRequest(e.to_string()))?;
            let event = SessionEvent::offset(t, requested, session.state.offset);
            session.append(event.kind)?;
        }
        let cam =
            pose(&scene.path, &session.state).map_err(|e| ApiError::Internal(e.to_string()))?;
        let tagged = if input.tag {
            let event = tag(t, &cam, &scene.markers.markers, &scene.bvh);
            session.append(EventKind::Tag {
                s: session.state.s,
                marker: event.marker,
            })?;
            Some(event)
        } else {
            None
        };
        Ok(Tick {
            t,
            s: session.state.s,
            offset: session.state.offset.into(),
            pose: cam,
            tag: tagged,
        })
    }

    /// Current authoritative pose and arrows, stamped with session time.
    /// Stamping does not write to the log.
    pub fn frame(&mut self, id: &str, scene: &Scene, clock: &dyn Clock) -> Result<Frame, ApiError> {
        let session = self.active(id)?;
        let t = session.stamp(clock);
        let pose =
            pose(&scene.path, &session.state).map_err(|e| ApiError::Internal(e.to_string()))?;
        let arrows = guidance_arrows(&scene.path, &session.state, ARROW_LOOKAHEAD)
            .map_err(|e| ApiError::Internal(e.to_string()))?;
        Ok(Frame {
            t,
            s: session.state.s,
            pose,
            arrows,
        })
    }

    /// Computes the current frame and sends it to every subscriber.
    /// Returns false once the session is closed or gone.
    pub fn publish(&mut self, id: &str, scene: &Scene, clock: &dyn Clock) -> bool {
        let Ok(frame) = self.frame(id, scene, clock) else {
            return false;
        };
        if let Some(tx) = self.sessions.get(id).and_then(|s| s.frames.as_ref()) {
            let _ = tx.send(frame);
        }
        true
    }

    pub fn subscribe(&mut self, id: &str) -> Result<broadcast::Receiver<Frame>, ApiError> {
        let session = self.active(id)?;
        Ok(session
            .frames
            .as_ref()
            .expect("active sessions stream")
            .subscribe())
    }

    pub fn close(&mut self, id: &str, clock: &dyn Clock) -> Result<CloseSummary, ApiError> {
        let session = self.active(id)?;
        session.stamp(clock);
        let s = session.state.s;
        session.append(EventKind::End { s })?;
        session.record.status = Status::Closed;
        session.log = None;
        session.frames = None;
        let mut tags = 0;
        let mut distinct = BTreeSet::new();
        for e in &session.events {
            if let EventKind::Tag { marker, .. } = e.kind {
                tags += 1;
                distinct.extend(marker);
            }
        }
        Ok(CloseSummary {
            id: id.to_string(),
            duration: session.last_t,
            tags,
            distinct_markers: distinct.len(),
            s,
        })
    }

    pub fn record(&self, id: &str) -> Result<SessionRecord, ApiError> {
        Ok(self.session(id)?.record.clone())
    }

    pub fn records(&self) -> Vec<SessionRecord> {
        self.sessions.values().map(|s| s.record.clone()).collect()
    }

    pub fn scene_of(&self, id: &str) -> Result<String, ApiError> {
        Ok(self.session(id)?.record.scene.clone())
    }

    /// The session log as line-delimited JSON, identical to the file on disk.
    pub fn log_text(&self, id: &str) -> Result<String, ApiError> {
        Ok(lumen_core::travel::write_log(&self.session(id)?.events))
    }

    pub fn state(&self, id: &str) -> Result<TravelState, ApiError> {
        Ok(self.session(id)?.state)
    }

    pub fn logs_dir(&self) -> Option<&Path> {
        self.logs.as_deref()
    }
}
