//! Coverage sweeps: the union of per-pose visible faces over path stations,
//! head stops and travel directions.

use nalgebra::{Point3, UnitQuaternion, Vector3};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{Bvh, Marker, VisibilityError};
use crate::path::{CenterlinePath, DEFAULT_DS};
use crate::travel::{pose, CameraPose, Direction, TravelPolicy, TravelState, DEFAULT_FOV_DEG};

pub const DEFAULT_GRID: usize = 256;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "kebab-case")]
pub enum HeadModel {
    Fixed,
    /// Yaw about the camera's up axis at `stops` evenly spaced angles in
    /// [−half_angle_deg, +half_angle_deg].
    YawSweep {
        half_angle_deg: f64,
        stops: usize,
    },
}

impl HeadModel {
    pub fn rotations(&self) -> Vec<UnitQuaternion<f64>> {
        match *self {
            HeadModel::Fixed => vec![UnitQuaternion::identity()],
            HeadModel::YawSweep { stops: 1, .. } => vec![UnitQuaternion::identity()],
            HeadModel::YawSweep {
                half_angle_deg,
                stops,
            } => {
                let step = 2.0 * half_angle_deg.to_radians() / (stops - 1) as f64;
                let mid = (stops - 1) as f64 / 2.0;
                (0..stops)
                    .map(|i| {
                        UnitQuaternion::from_axis_angle(&Vector3::y_axis(), (i as f64 - mid) * step)
                    })
                    .collect()
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Directions {
    Antegrade,
    Both,
}

impl Directions {
    fn list(self) -> &'static [Direction] {
        match self {
            Directions::Antegrade => &[Direction::Antegrade],
            Directions::Both => &[Direction::Antegrade, Direction::Retrograde],
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SweepParams {
    pub policy: TravelPolicy,
    pub head: HeadModel,
    /// Station spacing along the path (m).
    pub ds: f64,
    pub directions: Directions,
    pub fov_deg: f64,
    /// Rays per image side.
    pub grid: usize,
}

impl SweepParams {
    pub fn new(policy: TravelPolicy) -> Self {
        Self {
            policy,
            head: HeadModel::Fixed,
            ds: DEFAULT_DS,
            directions: Directions::Antegrade,
            fov_deg: DEFAULT_FOV_DEG,
            grid: DEFAULT_GRID,
        }
    }

    pub fn validate(&self) -> Result<(), VisibilityError> {
        let bad = |m: &str| Err(VisibilityError::InvalidParams(m.to_string()));
        if !(self.ds > 0.0 && self.ds.is_finite()) {
            return bad("ds must be positive");
        }
        if self.grid < 2 {
            return bad("grid must be at least 2");
        }
        if !(self.fov_deg > 0.0 && self.fov_deg < 180.0) {
            return bad("field of view must be in (0, 180) degrees");
        }
        if let HeadModel::YawSweep {
            half_angle_deg,
            stops,
        } = self.head
        {
            if stops == 0 || !(0.0..=180.0).contains(&half_angle_deg) {
                return bad("yaw sweep needs stops ≥ 1 and half angle in [0, 180]");
            }
        }
        if let TravelPolicy::FlyOver { phi } = self.policy {
            if !(0.0..std::f64::consts::TAU).contains(&phi) {
                return bad("fly-over azimuth must be in [0, 2π)");
            }
        }
        Ok(())
    }
}

/// Per-face seen flags, serialized run-length encoded as the first flag and
/// the lengths of alternating runs.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(into = "RunLength", from = "RunLength")]
pub struct FaceFlags(pub Vec<bool>);

#[derive(Serialize, Deserialize)]
struct RunLength {
    start: bool,
    runs: Vec<usize>,
}

impl From<FaceFlags> for RunLength {
    fn from(f: FaceFlags) -> Self {
        let start = f.0.first().copied().unwrap_or(false);
        let mut runs = Vec::new();
        let mut cur = start;
        let mut len = 0;
        for &b in &f.0 {
            if b == cur {
                len += 1;
            } else {
                runs.push(len);
                cur = b;
                len = 1;
            }
        }
        if len > 0 {
            runs.push(len);
        }
        RunLength { start, runs }
    }
}

impl From<RunLength> for FaceFlags {
    fn from(r: RunLength) -> Self {
        let mut out = Vec::with_capacity(r.runs.iter().sum());
        let mut cur = r.start;
        for n in r.runs {
            out.extend(std::iter::repeat_n(cur, n));
            cur = !cur;
        }
        FaceFlags(out)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MarkerResult {
    pub id: u32,
    pub ever_visible: bool,
    /// Fraction of surface samples seen from at least one pose.
    pub fraction: f64,
    /// Set when the marker is invalid or not inside the mesh; such markers
    /// are never visible.
    pub excluded: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoverageReport {
    pub params: SweepParams,
    pub path_length: f64,
    pub poses: usize,
    pub face_count: usize,
    /// Area-weighted fraction of faces seen.
    pub coverage: f64,
    pub seen: FaceFlags,
    pub markers: Vec<MarkerResult>,
}

impl CoverageReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    pub fn from_json(text: &str) -> Result<Self, serde_json::Error> {
        serde_json::from_str(text)
    }
}

/// Faces hit first by at least one pixel-center ray of a `grid`×`grid`
/// square frustum.
pub fn visible_set(pose: &CameraPose, bvh: &Bvh, grid: usize) -> Vec<usize> {
    let mut seen = vec![false; bvh.face_count()];
    mark_visible(pose, bvh, grid, &mut seen);
    seen.iter()
        .enumerate()
        .filter(|(_, &b)| b)
        .map(|(f, _)| f)
        .collect()
}

fn mark_visible(pose: &CameraPose, bvh: &Bvh, grid: usize, seen: &mut [bool]) {
    let g = grid as f64;
    for j in 0..grid {
        let y = 1.0 - 2.0 * (j as f64 + 0.5) / g;
        for i in 0..grid {
            let x = 2.0 * (i as f64 + 0.5) / g - 1.0;
            if let Some(hit) = bvh.raycast(&pose.position, &pose.ray(x, y)) {
                seen[hit.face] = true;
            }
        }
    }
}

/// Station arc lengths 0, ds, 2·ds, … and finally L.
pub fn stations(length: f64, ds: f64) -> Vec<f64> {
    let mut out = Vec::new();
    let mut i = 0usize;
    loop {
        let s = i as f64 * ds;
        if s >= length {
            break;
        }
        out.push(s);
        i += 1;
    }
    out.push(length);
    out
}

/// Every pose of a sweep, ordered by direction, station, then head stop.
pub fn sweep_poses(
    path: &CenterlinePath,
    params: &SweepParams,
) -> Result<Vec<CameraPose>, VisibilityError> {
    params.validate()?;
    let heads = params.head.rotations();
    let mut out = Vec::new();
    for &direction in params.directions.list() {
        for s in stations(path.length(), params.ds) {
            for head in &heads {
                let state = TravelState {
                    s,
                    head: *head,
                    fov_deg: params.fov_deg,
                    ..TravelState::new(params.policy, direction)
                };
                out.push(pose(path, &state)?);
            }
        }
    }
    Ok(out)
}

/// Rejects a path that leaves the mesh's bounding box or whose midpoint is
/// not enclosed by the mesh.
pub fn check_path_in_mesh(bvh: &Bvh, path: &CenterlinePath) -> Result<(), VisibilityError> {
    let (lo, hi) = bvh.bounds().ok_or(VisibilityError::EmptyMesh)?;
    if let Some(x) = path
        .samples()
        .iter()
        .find(|x| (0..3).any(|k| x.position[k] < lo[k] || x.position[k] > hi[k]))
    {
        return Err(VisibilityError::Mismatch(format!(
            "path leaves the mesh bounds at s = {:.4} m",
            x.s
        )));
    }
    let mid = path
        .eval(path.length() / 2.0)
        .map_err(crate::travel::TravelError::from)?;
    if !bvh.contains(&mid.position) {
        return Err(VisibilityError::Mismatch(
            "path midpoint lies outside the mesh".into(),
        ));
    }
    Ok(())
}

/// Whether a marker surface sample at `p` with outward normal `n` is seen
/// from `pose`: inside the frustum, facing the camera and not hidden behind
/// the mesh.
pub fn sample_visible(pose: &CameraPose, bvh: &Bvh, p: &Point3<f64>, n: &Vector3<f64>) -> bool {
    let v = p - pose.position;
    let d = v.norm();
    if !(d > 0.0) || n.dot(&v) >= 0.0 || !pose.in_view(&v) {
        return false;
    }
    bvh.raycast(&pose.position, &v).is_none_or(|h| h.t >= d)
}

fn marker_exclusion(bvh: &Bvh, m: &Marker) -> Option<String> {
    if let Err(e) = m.validate() {
        return Some(e.to_string());
    }
    if !(bvh.contains(&m.a) && bvh.contains(&m.b) && bvh.contains(&m.center())) {
        return Some("marker is not inside the mesh".into());
    }
    None
}

fn markers_over(poses: &[CameraPose], bvh: &Bvh, markers: &[Marker]) -> Vec<MarkerResult> {
    markers
        .iter()
        .map(|m| {
            if let Some(reason) = marker_exclusion(bvh, m) {
                return MarkerResult {
                    id: m.id,
                    ever_visible: false,
                    fraction: 0.0,
                    excluded: Some(reason),
                };
            }
            let samples = m.surface_samples();
            let seen = samples
                .iter()
                .filter(|(p, n)| poses.iter().any(|pose| sample_visible(pose, bvh, p, n)))
                .count();
            MarkerResult {
                id: m.id,
                ever_visible: seen > 0,
                fraction: seen as f64 / samples.len() as f64,
                excluded: None,
            }
        })
        .collect()
}

/// Per-marker detectability over the poses of a sweep.
pub fn marker_visibility(
    bvh: &Bvh,
    path: &CenterlinePath,
    params: &SweepParams,
    markers: &[Marker],
) -> Result<Vec<MarkerResult>, VisibilityError> {
    check_path_in_mesh(bvh, path)?;
    let poses = sweep_poses(path, params)?;
    Ok(markers_over(&poses, bvh, markers))
}

pub fn sweep_coverage(
    bvh: &Bvh,
    path: &CenterlinePath,
    params: &SweepParams,
    markers: &[Marker],
) -> Result<CoverageReport, VisibilityError> {
    check_path_in_mesh(bvh, path)?;
    let poses = sweep_poses(path, params)?;
    let nf = bvh.face_count();
    let seen = poses
        .par_iter()
        .fold(
            || vec![false; nf],
            |mut acc, p| {
                mark_visible(p, bvh, params.grid, &mut acc);
                acc
            },
        )
        .reduce(
            || vec![false; nf],
            |mut a, b| {
                a.iter_mut().zip(b).for_each(|(x, y)| *x |= y);
                a
            },
        );
    let total: f64 = (0..nf).map(|f| bvh.triangle_area(f)).sum();
    let covered: f64 = (0..nf)
        .filter(|&f| seen[f])
        .map(|f| bvh.triangle_area(f))
        .sum();
    Ok(CoverageReport {
        params: *params,
        path_length: path.length(),
        poses: poses.len(),
        face_count: nf,
        coverage: if total > 0.0 {
            (covered / total).clamp(0.0, 1.0)
        } else {
            0.0
        },
        seen: FaceFlags(seen),
        markers: markers_over(&poses, bvh, markers),
    })
}
