//! Synthetic tubular phantoms with analytic centerlines.
//!
//! A phantom is a circular cross-section swept along an analytic axis curve,
//! closed at both ends by conical caps whose height equals the end radius.
//! Vertex layout is ring-major (`ring * segments + j`) followed by the two
//! cap apices, so the vertex count is always `rings * segments + 2`.

use std::f64::consts::{PI, TAU};

use nalgebra::{Point3, Vector3};
use rand::{rngs::StdRng, Rng, SeedableRng};
use serde::{Deserialize, Serialize};

use super::{MeshError, TriMesh};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PhantomKind {
    StraightTube,
    TorusArc,
    SCurve,
    HaustralTube,
}

impl std::str::FromStr for PhantomKind {
    type Err = MeshError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "straight-tube" | "straight" => Ok(PhantomKind::StraightTube),
            "torus-arc" | "torus" => Ok(PhantomKind::TorusArc),
            "s-curve" => Ok(PhantomKind::SCurve),
            "haustral-tube" | "haustral" => Ok(PhantomKind::HaustralTube),
            other => Err(MeshError::InvalidPhantom(format!(
                "unknown phantom kind `{other}`"
            ))),
        }
    }
}

/// Parameters of a synthetic phantom.
///
/// `length` applies to straight and haustral tubes. `bend_radius` and
/// `arc_angle` apply to the torus arc (total sweep) and the s-curve (sweep of
/// each of its two opposite bends).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PhantomSpec {
    pub kind: PhantomKind,
    pub radius: f64,
    pub length: f64,
    pub bend_radius: f64,
    pub arc_angle: f64,
    pub fold_amplitude: f64,
    pub fold_wavelength: f64,
    pub rings: usize,
    pub segments: usize,
    /// Uniform radial noise amplitude (m); zero gives an exact surface.
    pub jitter: f64,
    pub seed: u64,
}

impl Default for PhantomSpec {
    fn default() -> Self {
        Self {
            kind: PhantomKind::StraightTube,
            radius: 0.025,
            length: 0.5,
            bend_radius: 0.2,
            arc_angle: PI,
            fold_amplitude: 0.0,
            fold_wavelength: 0.05,
            rings: 64,
            segments: 32,
            jitter: 0.0,
            seed: 0,
        }
    }
}

impl PhantomSpec {
    pub fn straight_tube() -> Self {
        Self::default()
    }

    pub fn torus_arc() -> Self {
        Self {
            kind: PhantomKind::TorusArc,
            ..Self::default()
        }
    }

    pub fn s_curve() -> Self {
        Self {
            kind: PhantomKind::SCurve,
            arc_angle: PI / 2.0,
            bend_radius: 0.15,
            ..Self::default()
        }
    }

    /// Colon-like folded tube: 2.5 cm lumen, folds 1.2 cm deep every 2.5 cm.
    /// Both ends sit mid-pocket at the full radius.
    pub fn haustral_tube() -> Self {
        Self {
            kind: PhantomKind::HaustralTube,
            fold_amplitude: 0.012,
            fold_wavelength: 0.025,
            rings: 161,
            segments: 48,
            ..Self::default()
        }
    }

    /// Arc length of the analytic axis.
    pub fn axis_length(&self) -> f64 {
        match self.kind {
            PhantomKind::StraightTube | PhantomKind::HaustralTube => self.length,
            PhantomKind::TorusArc => self.bend_radius * self.arc_angle,
            PhantomKind::SCurve => 2.0 * self.bend_radius * self.arc_angle,
        }
    }

    /// Tube radius at arc length `s`.
    pub fn radius_at(&self, s: f64) -> f64 {
        match self.kind {
            PhantomKind::HaustralTube => {
                self.radius
                    - self.fold_amplitude * (1.0 - (TAU * s / self.fold_wavelength).cos()) / 2.0
            }
            _ => self.radius,
        }
    }

    /// Point and orthonormal frame (tangent, normal, binormal) of the axis.
    pub fn axis_frame(&self, s: f64) -> AxisSample {
        match self.kind {
            PhantomKind::StraightTube | PhantomKind::HaustralTube => AxisSample {
                point: Point3::new(s, 0.0, 0.0),
                tangent: Vector3::x(),
                normal: Vector3::y(),
            },
            PhantomKind::TorusArc => {
                let th = s / self.bend_radius;
                AxisSample {
                    point: Point3::new(
                        self.bend_radius * th.cos(),
                        self.bend_radius * th.sin(),
                        0.0,
                    ),
                    tangent: Vector3::new(-th.sin(), th.cos(), 0.0),
                    normal: Vector3::new(-th.cos(), -th.sin(), 0.0),
                }
            }
            PhantomKind::SCurve => {
                let rho = self.bend_radius;
                let first = rho * self.arc_angle;
                if s <= first {
                    let th = s / rho;
                    AxisSample {
                        point: Point3::new(rho * th.sin(), rho * (1.0 - th.cos()), 0.0),
                        tangent: Vector3::new(th.cos(), th.sin(), 0.0),
                        normal: Vector3::new(-th.sin(), th.cos(), 0.0),
                    }
                } else {
                    let a = self.arc_angle;
                    let joint = Vector3::new(rho * a.sin(), rho * (1.0 - a.cos()), 0.0);
                    let center = joint + rho * Vector3::new(a.sin(), -a.cos(), 0.0);
                    let th = a - (s - first) / rho;
                    AxisSample {
                        point: Point3::from(center + rho * Vector3::new(-th.sin(), th.cos(), 0.0)),
                        tangent: Vector3::new(th.cos(), th.sin(), 0.0),
                        normal: Vector3::new(-th.sin(), th.cos(), 0.0),
                    }
                }
            }
        }
    }

    pub fn validate(&self) -> Result<(), MeshError> {
        let bad = |m: &str| Err(MeshError::InvalidPhantom(m.to_string()));
        if self.rings < 8 || self.segments < 8 {
            return Err(MeshError::TooCoarse(format!(
                "rings {} and segments {} must both be at least 8",
                self.rings, self.segments
            )));
        }
        if !(self.radius > 0.0) {
            return bad("radius must be positive");
        }
        if !(self.jitter >= 0.0) || self.jitter >= 0.25 * self.radius {
            return bad("jitter must be in [0, radius/4)");
        }
        match self.kind {
            PhantomKind::StraightTube => {
                if !(self.length > 0.0) {
                    return bad("length must be positive");
                }
            }
            PhantomKind::HaustralTube => {
                if !(self.length > 0.0) {
                    return bad("length must be positive");
                }
                if !(self.fold_amplitude >= 0.0 && self.fold_amplitude < self.radius) {
                    return bad("fold amplitude must be in [0, radius)");
                }
                if !(self.fold_wavelength > 0.0) {
                    return bad("fold wavelength must be positive");
                }
                let spacing = self.length / (self.rings - 1) as f64;
                if spacing > self.fold_wavelength / 4.0 {
                    return Err(MeshError::TooCoarse(format!(
                        "ring spacing {spacing:.4} m cannot resolve {:.4} m folds",
                        self.fold_wavelength
                    )));
                }
            }
            PhantomKind::TorusArc | PhantomKind::SCurve => {
                if !(self.bend_radius > self.radius) {
                    return bad("bend radius must exceed tube radius");
                }
                let max = if self.kind == PhantomKind::TorusArc {
                    TAU
                } else {
                    PI
                };
                if !(self.arc_angle > 0.0 && self.arc_angle < max) {
                    return bad("arc angle out of range");
                }
                if self.kind == PhantomKind::TorusArc {
                    // The two conical caps must not meet across the gap.
                    let gap = self.bend_radius * (TAU - self.arc_angle);
                    if gap <= 4.0 * self.radius {
                        return bad("torus arc ends overlap");
                    }
                }
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy)]
pub struct AxisSample {
    pub point: Point3<f64>,
    pub tangent: Vector3<f64>,
    pub normal: Vector3<f64>,
}

impl AxisSample {
    pub fn binormal(&self) -> Vector3<f64> {
        self.tangent.cross(&self.normal)
    }
}

/// A generated phantom: closed surface plus the analytic axis sampled at ring
/// positions.
#[derive(Debug, Clone)]
pub struct Phantom {
    pub spec: PhantomSpec,
    pub mesh: TriMesh,
    pub centerline: Vec<Point3<f64>>,
}

pub fn generate_phantom(spec: &PhantomSpec) -> Result<Phantom, MeshError> {
    spec.validate()?;
    let length = spec.axis_length();
    let mut rng = StdRng::seed_from_u64(spec.seed);
    let rings: Vec<Ring> = (0..spec.rings)
        .map(|k| {
            let s = length * k as f64 / (spec.rings - 1) as f64;
            let a = spec.axis_frame(s);
            Ring {
                center: a.point,
                tangent: a.tangent,
                normal: a.normal,
                radius: spec.radius_at(s),
            }
        })
        .collect();
    let jitter = |_: usize, _: usize| -> f64 {
        if spec.jitter > 0.0 {
            rng.gen_range(-spec.jitter..=spec.jitter)
        } else {
            0.0
        }
    };
    let mesh = sweep(&rings, spec.segments, jitter)?;
    let centerline = rings.iter().map(|r| r.center).collect();
    Ok(Phantom {
        spec: spec.clone(),
        mesh,
        centerline,
    })
}

/// Surface of revolution about +x from a `(x, r)` profile, closed by conical
/// caps. The profile may fold back on itself in x, which allows overhanging
/// folds that a radius modulation cannot express.
pub fn revolve_profile(profile: &[(f64, f64)], segments: usize) -> Result<TriMesh, MeshError> {
    if profile.len() < 2 || segments < 8 {
        return Err(MeshError::TooCoarse(
            "profile needs >= 2 points and >= 8 segments".into(),
        ));
    }
    if profile.iter().any(|&(_, r)| !(r > 0.0)) {
        return Err(MeshError::InvalidPhantom(
            "profile radii must be positive".into(),
        ));
    }
    let rings: Vec<Ring> = profile
        .iter()
        .map(|&(x, r)| Ring {
            center: Point3::new(x, 0.0, 0.0),
            tangent: Vector3::x(),
            normal: Vector3::y(),
            radius: r,
        })
        .collect();
    sweep(&rings, segments, |_, _| 0.0)
}

struct Ring {
    center: Point3<f64>,
    tangent: Vector3<f64>,
    normal: Vector3<f64>,
    radius: f64,
}

fn sweep(
    rings: &[Ring],
    segments: usize,
    mut radial_noise: impl FnMut(usize, usize) -> f64,
) -> Result<TriMesh, MeshError> {
    let n_rings = rings.len();
    let mut vertices = Vec::with_capacity(n_rings * segments + 2);
    for (k, ring) in rings.iter().enumerate() {
        let binormal = ring.tangent.cross(&ring.normal);
        for j in 0..segments {
            let th = TAU * j as f64 / segments as f64;
            let r = ring.radius + radial_noise(k, j);
            vertices.push(ring.center + r * (th.cos() * ring.normal + th.sin() * binormal));
        }
    }
    let (first, last) = (&rings[0], &rings[n_rings - 1]);
    vertices.push(first.center - first.radius * first.tangent);
    vertices.push(last.center + last.radius * last.tangent);
    let apex0 = n_rings * segments;
    let apex1 = apex0 + 1;

    let at = |k: usize, j: usize| k * segments + (j % segments);
    let mut faces = Vec::with_capacity(2 * (n_rings - 1) * segments + 2 * segments);
    for k in 0..n_rings - 1 {
        for j in 0..segments {
            faces.push([at(k, j), at(k, j + 1), at(k + 1, j + 1)]);
            faces.push([at(k, j), at(k + 1, j + 1), at(k + 1, j)]);
        }
    }
    for j in 0..segments {
        faces.push([apex0, at(0, j + 1), at(0, j)]);
        faces.push([apex1, at(n_rings - 1, j), at(n_rings - 1, j + 1)]);
    }
    TriMesh::new(vertices, faces)
}
