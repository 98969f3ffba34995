//! Session event records, one JSON object per line, and deterministic
//! replay of a log back into a [`TravelState`].

use nalgebra::{Quaternion, UnitQuaternion, Vector2};
use serde::{Deserialize, Serialize};

use super::{step, Direction, MoveInput, Technique, TravelError, TravelPolicy, TravelState};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionStart {
    pub subject: String,
    pub technique: Technique,
    pub scene: String,
    pub marker_set: String,
    pub direction: Direction,
    pub policy: TravelPolicy,
    pub s: f64,
    pub speed: f64,
    pub fov_deg: f64,
    pub path_length: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "payload", rename_all = "snake_case")]
pub enum EventKind {
    Start(SessionStart),
    /// `s` is the arc length after the step.
    Move {
        input: MoveInput,
        dt: f64,
        s: f64,
    },
    /// Head rotation as quaternion coordinates `[i, j, k, w]`.
    Head {
        q: [f64; 4],
    },
    Offset {
        requested: [f64; 2],
        granted: [f64; 2],
    },
    Policy {
        policy: TravelPolicy,
    },
    Tag {
        s: f64,
        marker: Option<u32>,
    },
    End {
        s: f64,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionEvent {
    /// Seconds since session start.
    pub t: f64,
    #[serde(flatten)]
    pub kind: EventKind,
}

impl SessionEvent {
    pub fn to_line(&self) -> String {
        serde_json::to_string(self).expect("event serializes")
    }

    pub fn head(t: f64, q: &UnitQuaternion<f64>) -> Self {
        let c = q.coords;
        Self {
            t,
            kind: EventKind::Head {
                q: [c.x, c.y, c.z, c.w],
            },
        }
    }

    pub fn offset(t: f64, requested: Vector2<f64>, granted: Vector2<f64>) -> Self {
        Self {
            t,
            kind: EventKind::Offset {
                requested: [requested.x, requested.y],
                granted: [granted.x, granted.y],
            },
        }
    }
}

/// Parses a line-delimited log. Blank lines are skipped.
pub fn parse_log(text: &str) -> Result<Vec<SessionEvent>, TravelError> {
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| {
            serde_json::from_str(l)
                .map_err(|e| TravelError::InvalidLog(format!("line {}: {e}", i + 1)))
        })
        .collect()
}

pub fn write_log(events: &[SessionEvent]) -> String {
    events.iter().map(|e| e.to_line() + "\n").collect()
}

/// Rebuilds the final travel state from a log. Moves are re-stepped;
/// head, offset and policy changes are applied as recorded, so the result
/// matches the recording session bit for bit.
pub fn replay(events: &[SessionEvent]) -> Result<TravelState, TravelError> {
    let bad = |m: String| Err(TravelError::InvalidLog(m));
    let Some(SessionEvent {
        kind: EventKind::Start(start),
        ..
    }) = events.first()
    else {
        return bad("log must begin with a start event".into());
    };
    let mut state = TravelState {
        s: start.s,
        speed: start.speed,
        fov_deg: start.fov_deg,
        ..TravelState::new(start.policy, start.direction)
    };
    state.validate(start.path_length)?;
    let mut last_t = events[0].t;
    for (i, e) in events.iter().enumerate().skip(1) {
        if !(e.t >= last_t) {
            return bad(format!("event {i} goes back in time"));
        }
        last_t = e.t;
        match &e.kind {
            EventKind::Start(_) => return bad(format!("event {i} is a second start")),
            EventKind::Move { input, dt, s } => {
                state = step(&state, *input, *dt, start.path_length);
                if state.s != *s {
                    return bad(format!(
                        "event {i}: replayed s = {} but log says {s}",
                        state.s
                    ));
                }
            }
            EventKind::Head { q } => {
                state.head = UnitQuaternion::new_unchecked(Quaternion::new(q[3], q[0], q[1], q[2]));
            }
            EventKind::Offset { granted, .. } => {
                state.offset = Vector2::new(granted[0], granted[1])
            }
            EventKind::Policy { policy } => state.policy = *policy,
            EventKind::Tag { .. } => {}
            EventKind::End { .. } => {
                if i + 1 != events.len() {
                    return bad(format!("events after end at {i}"));
                }
            }
        }
    }
    Ok(state)
}
