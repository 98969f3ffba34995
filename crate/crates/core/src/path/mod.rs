//! Arc-length parameterized centerlines with rotation-minimizing frames.
//!
//! Frames are propagated with the double-reflection method, which keeps
//! the normal twist-free about the tangent. Frenet frames are not used:
//! they are undefined on straight runs and flip at inflections.

mod file;

use nalgebra::{Matrix3, Point3, Rotation3, UnitQuaternion, Vector3};
use thiserror::Error;

pub use file::{PathFile, PathFileSample, PATH_FILE_VERSION};

/// Default resampling step (m).
pub const DEFAULT_DS: f64 = 0.005;
pub const DEFAULT_SMOOTH_ITERATIONS: usize = 25;
pub const DEFAULT_SMOOTH_LAMBDA: f64 = 0.5;

#[derive(Debug, Error, PartialEq)]
pub enum PathError {
    #[error("polyline needs at least {needed} points, got {got}")]
    TooFewPoints { needed: usize, got: usize },
    #[error("step ds = {ds} m must be positive and not exceed path length {length} m")]
    BadStep { ds: f64, length: f64 },
    #[error("zero-length tangent at sample {0} (duplicate points)")]
    ZeroTangent(usize),
    #[error("arc length {s} m outside [0, {length}] m")]
    OutOfRange { s: f64, length: f64 },
    #[error("invalid path file: {0}")]
    InvalidFile(String),
}

/// Orthonormal right-handed moving frame; `binormal = tangent × normal`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Frame {
    pub tangent: Vector3<f64>,
    pub normal: Vector3<f64>,
    pub binormal: Vector3<f64>,
}

impl Frame {
    /// Columns (tangent, normal, binormal).
    pub fn matrix(&self) -> Matrix3<f64> {
        Matrix3::from_columns(&[self.tangent, self.normal, self.binormal])
    }

    fn from_rotation(r: &Rotation3<f64>) -> Self {
        let m = r.matrix();
        Self {
            tangent: m.column(0).into_owned(),
            normal: m.column(1).into_owned(),
            binormal: m.column(2).into_owned(),
        }
    }

    /// Largest deviation from orthonormality: max of |det − 1| and the
    /// pairwise dot products / unit-length errors.
    pub fn orthonormality_error(&self) -> f64 {
        let (t, n, b) = (&self.tangent, &self.normal, &self.binormal);
        [
            (self.matrix().determinant() - 1.0).abs(),
            t.dot(n).abs(),
            t.dot(b).abs(),
            n.dot(b).abs(),
            (t.norm() - 1.0).abs(),
            (n.norm() - 1.0).abs(),
            (b.norm() - 1.0).abs(),
        ]
        .into_iter()
        .fold(0.0, f64::max)
    }

    /// Rotation angle (rad) carrying this frame onto `other`.
    pub fn angle_to(&self, other: &Frame) -> f64 {
        let r = other.matrix() * self.matrix().transpose();
        let c = ((r.trace() - 1.0) / 2.0).clamp(-1.0, 1.0);
        c.acos()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PathSample {
    pub s: f64,
    pub position: Point3<f64>,
    pub frame: Frame,
}

/// Samples at uniform arc length, before frames are attached.
#[derive(Debug, Clone, PartialEq)]
pub struct ArcLengthPath {
    pub positions: Vec<Point3<f64>>,
    pub s: Vec<f64>,
    pub length: f64,
}

/// Framed centerline. Immutable after construction.
#[derive(Debug, Clone, PartialEq)]
pub struct CenterlinePath {
    samples: Vec<PathSample>,
    length: f64,
}

/// Laplacian smoothing with fixed endpoints. Updates are simultaneous
/// (Jacobi), so for `lambda` in (0, 1] the length never grows.
pub fn smooth(polyline: &[Point3<f64>], iterations: usize, lambda: f64) -> Vec<Point3<f64>> {
    let mut cur = polyline.to_vec();
    if cur.len() < 3 {
        return cur;
    }
    let mut next = cur.clone();
    for _ in 0..iterations {
        for i in 1..cur.len() - 1 {
            let mid = (cur[i - 1].coords + cur[i + 1].coords) * 0.5;
            next[i] = cur[i] + lambda * (mid - cur[i].coords);
        }
        std::mem::swap(&mut cur, &mut next);
    }
    cur
}

pub fn polyline_length(points: &[Point3<f64>]) -> f64 {
    points.windows(2).map(|w| (w[1] - w[0]).norm()).sum()
}

fn point_segment_distance(p: &Point3<f64>, a: &Point3<f64>, b: &Point3<f64>) -> f64 {
    let ab = b - a;
    let len2 = ab.norm_squared();
    let u = if len2 > 0.0 {
        ((p - a).dot(&ab) / len2).clamp(0.0, 1.0)
    } else {
        0.0
    };
    (p - (a + u * ab)).norm()
}

/// Largest distance from a vertex of `a` to the polyline `b`.
pub fn directed_hausdorff(a: &[Point3<f64>], b: &[Point3<f64>]) -> f64 {
    a.iter()
        .map(|p| match b.len() {
            0 => f64::INFINITY,
            1 => (p - b[0]).norm(),
            _ => b
                .windows(2)
                .map(|w| point_segment_distance(p, &w[0], &w[1]))
                .fold(f64::INFINITY, f64::min),
        })
        .fold(0.0, f64::max)
}

/// Symmetric Hausdorff distance between two polylines, measured from each
/// one's vertices to the other's segments.
pub fn hausdorff(a: &[Point3<f64>], b: &[Point3<f64>]) -> f64 {
    directed_hausdorff(a, b).max(directed_hausdorff(b, a))
}

/// Resample at uniform arc-length spacing `ds` by piecewise-linear
/// interpolation. The last sample lands exactly on the total length.
pub fn reparameterize(polyline: &[Point3<f64>], ds: f64) -> Result<ArcLengthPath, PathError> {
    if polyline.len() < 2 {
        return Err(PathError::TooFewPoints {
            needed: 2,
            got: polyline.len(),
        });
    }
    let mut cumulative = Vec::with_capacity(polyline.len());
    cumulative.push(0.0);
    for w in polyline.windows(2) {
        cumulative.push(cumulative.last().unwrap() + (w[1] - w[0]).norm());
    }
    let length = *cumulative.last().unwrap();
    if !(ds > 0.0) || !(length > 0.0) || ds > length {
        return Err(PathError::BadStep { ds, length });
    }

    let n = (length / ds + 1e-9).floor() as usize;
    let mut s: Vec<f64> = (0..=n).map(|k| k as f64 * ds).collect();
    let tail = length - s[n];
    if tail.abs() <= 1e-9 * length {
        s[n] = length;
    } else {
        s.push(length);
    }

    let mut positions = Vec::with_capacity(s.len());
    let mut seg = 0;
    for &si in &s {
        while seg + 1 < polyline.len() - 1 && cumulative[seg + 1] < si {
            seg += 1;
        }
        let (s0, s1) = (cumulative[seg], cumulative[seg + 1]);
        let u = if s1 > s0 {
            ((si - s0) / (s1 - s0)).clamp(0.0, 1.0)
        } else {
            0.0
        };
        positions.push(polyline[seg] + u * (polyline[seg + 1] - polyline[seg]));
    }
    *positions.last_mut().unwrap() = *polyline.last().unwrap();
    Ok(ArcLengthPath {
        positions,
        s,
        length,
    })
}

/// World axis least aligned with `t`, projected perpendicular to it.
fn initial_normal(t: &Vector3<f64>) -> Vector3<f64> {
    let axes = [Vector3::x(), Vector3::y(), Vector3::z()];
    let mut best = 0;
    for k in 1..3 {
        if t.dot(&axes[k]).abs() < t.dot(&axes[best]).abs() {
            best = k;
        }
    }
    let e = axes[best];
    (e - e.dot(t) * t).normalize()
}

fn orthonormal(tangent: Vector3<f64>, normal: Vector3<f64>) -> Frame {
    let normal = (normal - normal.dot(&tangent) * tangent).normalize();
    Frame {
        tangent,
        normal,
        binormal: tangent.cross(&normal),
    }
}

/// Attach tangents (central differences, mirrored at the ends) and double-reflection
/// rotation-minimizing normals.
pub fn attach_frames(path: &ArcLengthPath) -> Result<CenterlinePath, PathError> {
    let p = &path.positions;
    let n = p.len();
    if n < 2 {
        return Err(PathError::TooFewPoints { needed: 2, got: n });
    }
    let mut tangents = Vec::with_capacity(n);
    for i in 0..n {
        let d = match i {
            0 => p[1] - p[0],
            i if i == n - 1 => p[n - 1] - p[n - 2],
            i => p[i + 1] - p[i - 1],
        };
        let norm = d.norm();
        if !(norm > 1e-15) {
            return Err(PathError::ZeroTangent(i));
        }
        tangents.push(d / norm);
    }
    if n >= 3 {
        // Mirror the neighbouring tangent across the end chord: exact on
        // circles and lines, unlike the one-sided difference.
        for (end, next) in [(0, 1), (n - 1, n - 2)] {
            let c = (p[end] - p[next]).normalize();
            let t = tangents[next];
            tangents[end] = (2.0 * c.dot(&t) * c - t).normalize();
        }
    }

    let mut frames = Vec::with_capacity(n);
    frames.push(orthonormal(tangents[0], initial_normal(&tangents[0])));
    for i in 0..n - 1 {
        let prev: &Frame = &frames[i];
        let v1 = p[i + 1] - p[i];
        let c1 = v1.dot(&v1);
        if !(c1 > 0.0) {
            return Err(PathError::ZeroTangent(i + 1));
        }
        let r_l = prev.normal - (2.0 / c1) * v1.dot(&prev.normal) * v1;
        let t_l = prev.tangent - (2.0 / c1) * v1.dot(&prev.tangent) * v1;
        let v2 = tangents[i + 1] - t_l;
        let c2 = v2.dot(&v2);
        let r_next = if c2 > 0.0 {
            r_l - (2.0 / c2) * v2.dot(&r_l) * v2
        } else {
            r_l
        };
        frames.push(orthonormal(tangents[i + 1], r_next));
    }

    let samples = frames
        .into_iter()
        .enumerate()
        .map(|(i, frame)| PathSample {
            s: path.s[i],
            position: p[i],
            frame,
        })
        .collect();
    Ok(CenterlinePath {
        samples,
        length: path.length,
    })
}

impl CenterlinePath {
    /// Smooth, resample and frame a raw polyline in one go.
    pub fn from_polyline(
        polyline: &[Point3<f64>],
        ds: f64,
        smooth_iterations: usize,
        lambda: f64,
    ) -> Result<Self, PathError> {
        let smoothed = smooth(polyline, smooth_iterations, lambda);
        attach_frames(&reparameterize(&smoothed, ds)?)
    }

    /// Build from already-framed samples, checking the path invariants.
    pub fn from_samples(samples: Vec<PathSample>) -> Result<Self, PathError> {
        if samples.len() < 2 {
            return Err(PathError::TooFewPoints {
                needed: 2,
                got: samples.len(),
            });
        }
        if samples[0].s != 0.0 {
            return Err(PathError::InvalidFile(
                "first sample must have s = 0".into(),
            ));
        }
        if samples.windows(2).any(|w| !(w[1].s > w[0].s)) {
            return Err(PathError::InvalidFile(
                "arc length must be strictly increasing".into(),
            ));
        }
        if let Some(i) = samples
            .iter()
            .position(|x| x.frame.orthonormality_error() > 1e-9)
        {
            return Err(PathError::InvalidFile(format!(
                "frame {i} is not orthonormal"
            )));
        }
        let length = samples.last().unwrap().s;
        Ok(Self { samples, length })
    }

    pub fn samples(&self) -> &[PathSample] {
        &self.samples
    }

    pub fn length(&self) -> f64 {
        self.length
    }

    pub fn positions(&self) -> Vec<Point3<f64>> {
        self.samples.iter().map(|x| x.position).collect()
    }

    /// Position and frame at arc length `s`. Positions interpolate linearly;
    /// frames rotate at constant angular velocity between samples.
    pub fn eval(&self, s: f64) -> Result<PathSample, PathError> {
        if !(0.0..=self.length).contains(&s) {
            return Err(PathError::OutOfRange {
                s,
                length: self.length,
            });
        }
        let i = match self.samples.binary_search_by(|x| x.s.total_cmp(&s)) {
            Ok(i) => return Ok(self.samples[i]),
            Err(i) => i.clamp(1, self.samples.len() - 1) - 1,
        };
        let (a, b) = (&self.samples[i], &self.samples[i + 1]);
        let u = (s - a.s) / (b.s - a.s);
        let position = a.position + u * (b.position - a.position);
        let qa = UnitQuaternion::from_matrix(&a.frame.matrix());
        let mut qb = UnitQuaternion::from_matrix(&b.frame.matrix());
        if qa.coords.dot(&qb.coords) < 0.0 {
            qb = UnitQuaternion::new_unchecked(-qb.into_inner());
        }
        let q = qa.slerp(&qb, u);
        Ok(PathSample {
            s,
            position,
            frame: Frame::from_rotation(&q.to_rotation_matrix()),
        })
    }

    /// Largest angle between consecutive sample frames (rad).
    pub fn max_frame_step(&self) -> f64 {
        self.samples
            .windows(2)
            .map(|w| w[0].frame.angle_to(&w[1].frame))
            .fold(0.0, f64::max)
    }

    /// Index of the sample nearest in arc length.
    pub fn nearest_index(&self, s: f64) -> usize {
        let i = self.samples.partition_point(|x| x.s < s);
        if i == 0 {
            0
        } else if i >= self.samples.len() {
            self.samples.len() - 1
        } else if (self.samples[i].s - s) < (s - self.samples[i - 1].s) {
            i
        } else {
            i - 1
        }
    }
}
