//! Path-constrained camera travel: constant-speed stepping along the
//! centerline, the three orientation policies, lateral offsets clamped to
//! the lumen, guidance arrows and marker tagging.
//!
//! Camera convention: the orientation matrix maps camera-local axes to world
//! with columns (right, up, −view), so the camera looks down its local −z.

mod session;

use std::f64::consts::TAU;
use std::fmt;
use std::str::FromStr;

use nalgebra::{Matrix3, Point3, Rotation3, UnitQuaternion, Vector2, Vector3};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::path::{CenterlinePath, PathError};
use crate::visibility::{Bvh, Marker};

pub use session::{parse_log, replay, write_log, EventKind, SessionEvent, SessionStart};

pub const DEFAULT_SPEED: f64 = 0.5;
pub const DEFAULT_FOV_DEG: f64 = 110.0;
/// Offsets stop this fraction of the way to the wall.
pub const WALL_MARGIN: f64 = 0.9;
pub const ARROW_LOOKAHEAD: f64 = 0.1;
pub const TAG_HALF_ANGLE_DEG: f64 = 5.0;
pub const TAG_RANGE: f64 = 0.5;

#[derive(Debug, Error, PartialEq)]
pub enum TravelError {
    #[error(transparent)]
    Path(#[from] PathError),
    #[error("unknown technique {0:?} (expected fly-through, fly-over or elevator)")]
    UnknownTechnique(String),
    #[error("invalid travel state: {0}")]
    InvalidState(String),
    #[error("invalid session log: {0}")]
    InvalidLog(String),
}

/// Which way "forward" runs along the path, fixed for a session.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Direction {
    Antegrade,
    Retrograde,
}

impl Direction {
    pub fn sign(self) -> f64 {
        match self {
            Direction::Antegrade => 1.0,
            Direction::Retrograde => -1.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Technique {
    FlyThrough,
    FlyOver,
    Elevator,
}

impl Technique {
    pub const ALL: [Technique; 3] = [
        Technique::FlyThrough,
        Technique::FlyOver,
        Technique::Elevator,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Technique::FlyThrough => "fly-through",
            Technique::FlyOver => "fly-over",
            Technique::Elevator => "elevator",
        }
    }

    pub fn policy(self) -> TravelPolicy {
        match self {
            Technique::FlyThrough => TravelPolicy::FlyThrough,
            Technique::FlyOver => TravelPolicy::FlyOver { phi: 0.0 },
            Technique::Elevator => TravelPolicy::Elevator,
        }
    }
}

impl fmt::Display for Technique {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Technique {
    type Err = TravelError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Technique::ALL
            .into_iter()
            .find(|t| t.name() == s)
            .ok_or_else(|| TravelError::UnknownTechnique(s.to_string()))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "kebab-case")]
pub enum TravelPolicy {
    FlyThrough,
    /// `phi` is the wall azimuth from the frame normal toward the binormal.
    FlyOver {
        phi: f64,
    },
    Elevator,
}

impl TravelPolicy {
    /// Fly-Over with `phi` wrapped into [0, 2π).
    pub fn fly_over(phi: f64) -> Self {
        let w = phi.rem_euclid(TAU);
        TravelPolicy::FlyOver {
            phi: if w >= TAU { 0.0 } else { w },
        }
    }

    pub fn technique(&self) -> Technique {
        match self {
            TravelPolicy::FlyThrough => Technique::FlyThrough,
            TravelPolicy::FlyOver { .. } => Technique::FlyOver,
            TravelPolicy::Elevator => Technique::Elevator,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MoveInput {
    Forward,
    Backward,
    Idle,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TravelState {
    /// Arc length along the path (m).
    pub s: f64,
    pub direction: Direction,
    pub policy: TravelPolicy,
    /// User head rotation in camera-local coordinates.
    pub head: UnitQuaternion<f64>,
    /// Lateral offset in the frame's (normal, binormal) plane (m).
    pub offset: Vector2<f64>,
    /// m/s
    pub speed: f64,
    /// Vertical field of view (degrees).
    pub fov_deg: f64,
}

impl TravelState {
    pub fn new(policy: TravelPolicy, direction: Direction) -> Self {
        Self {
            s: 0.0,
            direction,
            policy,
            head: UnitQuaternion::identity(),
            offset: Vector2::zeros(),
            speed: DEFAULT_SPEED,
            fov_deg: DEFAULT_FOV_DEG,
        }
    }

    /// Starts at the end that `direction` leaves from.
    pub fn at_start(path: &CenterlinePath, policy: TravelPolicy, direction: Direction) -> Self {
        let mut st = Self::new(policy, direction);
        if direction == Direction::Retrograde {
            st.s = path.length();
        }
        st
    }

    pub fn validate(&self, length: f64) -> Result<(), TravelError> {
        let bad = |m: &str| Err(TravelError::InvalidState(m.to_string()));
        if !(0.0..=length).contains(&self.s) {
            return bad("s outside path");
        }
        if !(self.speed > 0.0 && self.speed.is_finite()) {
            return bad("speed must be positive");
        }
        if !(self.fov_deg > 0.0 && self.fov_deg < 180.0) {
            return bad("field of view must be in (0, 180) degrees");
        }
        if let TravelPolicy::FlyOver { phi } = self.policy {
            if !(0.0..TAU).contains(&phi) {
                return bad("fly-over azimuth must be in [0, 2π)");
            }
        }
        Ok(())
    }
}

/// Advance at constant speed. Forward runs toward increasing `s` for an
/// antegrade session and toward decreasing `s` for a retrograde one.
pub fn step(state: &TravelState, input: MoveInput, dt: f64, length: f64) -> TravelState {
    let sign = match input {
        MoveInput::Idle => return *state,
        MoveInput::Forward => state.direction.sign(),
        MoveInput::Backward => -state.direction.sign(),
    };
    let mut next = *state;
    next.s = (state.s + sign * state.speed * dt.max(0.0)).clamp(0.0, length);
    next
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CameraPose {
    pub position: Point3<f64>,
    pub view: Vector3<f64>,
    pub up: Vector3<f64>,
    pub right: Vector3<f64>,
    pub fov_deg: f64,
}

impl CameraPose {
    /// Columns (right, up, −view).
    pub fn matrix(&self) -> Matrix3<f64> {
        Matrix3::from_columns(&[self.right, self.up, -self.view])
    }

    pub fn from_matrix(position: Point3<f64>, m: &Matrix3<f64>, fov_deg: f64) -> Self {
        Self {
            position,
            right: m.column(0).into_owned(),
            up: m.column(1).into_owned(),
            view: -m.column(2).into_owned(),
            fov_deg,
        }
    }

    pub fn orthonormality_error(&self) -> f64 {
        let m = self.matrix();
        let e = m.transpose() * m - Matrix3::identity();
        e.amax().max((m.determinant() - 1.0).abs())
    }

    /// World direction through normalized image coordinates in [−1, 1]²
    /// (square aspect).
    pub fn ray(&self, x: f64, y: f64) -> Vector3<f64> {
        let k = (self.fov_deg.to_radians() / 2.0).tan();
        (self.view + k * x * self.right + k * y * self.up).normalize()
    }

    /// Whether a world direction falls inside the square frustum.
    pub fn in_view(&self, dir: &Vector3<f64>) -> bool {
        let z = dir.dot(&self.view);
        if !(z > 0.0) {
            return false;
        }
        let k = (self.fov_deg.to_radians() / 2.0).tan();
        dir.dot(&self.right).abs() <= k * z && dir.dot(&self.up).abs() <= k * z
    }
}

/// Policy orientation before head rotation, as (view, up).
pub fn base_orientation(
    path: &CenterlinePath,
    state: &TravelState,
) -> Result<Matrix3<f64>, TravelError> {
    let (view, up) = match state.policy {
        TravelPolicy::Elevator => (-Vector3::z(), Vector3::y()),
        TravelPolicy::FlyThrough => {
            let f = path.eval(state.s)?.frame;
            (state.direction.sign() * f.tangent, f.binormal)
        }
        TravelPolicy::FlyOver { phi } => {
            let f = path.eval(state.s)?.frame;
            (
                phi.cos() * f.normal + phi.sin() * f.binormal,
                state.direction.sign() * f.tangent,
            )
        }
    };
    Ok(Matrix3::from_columns(&[view.cross(&up), up, -view]))
}

/// Camera pose: policy orientation, then the head rotation composed on the
/// right, placed at the path point plus the lateral offset.
pub fn pose(path: &CenterlinePath, state: &TravelState) -> Result<CameraPose, TravelError> {
    let sample = path.eval(state.s)?;
    let base = base_orientation(path, state)?;
    let m = base * state.head.to_rotation_matrix().into_inner();
    let f = sample.frame;
    let position = sample.position + state.offset.x * f.normal + state.offset.y * f.binormal;
    Ok(CameraPose::from_matrix(position, &m, state.fov_deg))
}

/// Head rotation turning the view by `yaw` about the camera's up axis and
/// then by `pitch` about its right axis (radians).
pub fn head_yaw_pitch(yaw: f64, pitch: f64) -> UnitQuaternion<f64> {
    UnitQuaternion::from_axis_angle(&Vector3::y_axis(), yaw)
        * UnitQuaternion::from_axis_angle(&Vector3::x_axis(), pitch)
}

/// Grant as much of the requested offset as fits: at most `WALL_MARGIN` of
/// the distance to the wall along the offset direction, or twice
/// `local_radius` if the ray escapes the mesh.
pub fn clamp_offset(
    bvh: &Bvh,
    path: &CenterlinePath,
    state: &TravelState,
    requested: Vector2<f64>,
    local_radius: f64,
) -> Result<TravelState, TravelError> {
    let mut next = *state;
    let len = requested.norm();
    if !(len > 0.0 && len.is_finite()) {
        next.offset = Vector2::zeros();
        return Ok(next);
    }
    let sample = path.eval(state.s)?;
    let f = sample.frame;
    let dir = (requested.x * f.normal + requested.y * f.binormal) / len;
    let limit = match bvh.raycast(&sample.position, &dir) {
        Some(hit) => WALL_MARGIN * hit.t,
        None => 2.0 * local_radius,
    };
    next.offset = requested * (len.min(limit) / len);
    Ok(next)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Arrow {
    pub s: f64,
    pub position: Point3<f64>,
    pub direction: Vector3<f64>,
}

/// Green points toward increasing `s`, red toward decreasing `s`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GuidanceArrows {
    pub green: Arrow,
    pub red: Arrow,
}

pub fn guidance_arrows(
    path: &CenterlinePath,
    state: &TravelState,
    delta: f64,
) -> Result<GuidanceArrows, TravelError> {
    let ahead = (state.s + delta).min(path.length());
    let behind = (state.s - delta).max(0.0);
    let g = path.eval(ahead)?;
    let r = path.eval(behind)?;
    Ok(GuidanceArrows {
        green: Arrow {
            s: ahead,
            position: g.position,
            direction: g.frame.tangent,
        },
        red: Arrow {
            s: behind,
            position: r.position,
            direction: -r.frame.tangent,
        },
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TagEvent {
    pub t: f64,
    pub pose: CameraPose,
    pub marker: Option<u32>,
}

/// The nearest marker whose center lies inside the tag cone and in plain
/// sight of the camera. Ties in distance go to the lower id.
pub fn tag(t: f64, pose: &CameraPose, markers: &[Marker], bvh: &Bvh) -> TagEvent {
    let cos_limit = TAG_HALF_ANGLE_DEG.to_radians().cos();
    let mut best: Option<(f64, u32)> = None;
    for m in markers {
        let v = m.center() - pose.position;
        let d = v.norm();
        if !(d > 0.0) || d > TAG_RANGE {
            continue;
        }
        let dir = v / d;
        if dir.dot(&pose.view) < cos_limit {
            continue;
        }
        if bvh.raycast(&pose.position, &dir).is_some_and(|h| h.t < d) {
            continue;
        }
        if best.is_none_or(|(bd, bid)| d < bd || (d == bd && m.id < bid)) {
            best = Some((d, m.id));
        }
    }
    TagEvent {
        t,
        pose: *pose,
        marker: best.map(|b| b.1),
    }
}

/// Rotation carrying frame `a` to frame `b` as an angle (rad).
pub fn pose_angle(a: &CameraPose, b: &CameraPose) -> f64 {
    let r = Rotation3::from_matrix_unchecked(b.matrix() * a.matrix().transpose());
    r.angle()
}
