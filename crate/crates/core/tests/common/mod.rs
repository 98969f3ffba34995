//! Independent oracles shared by the integration tests.
#![allow(dead_code)]

pub mod stats;

use lumen_core::mesh::{generate_phantom, PhantomSpec};
use lumen_core::path::{CenterlinePath, Frame};
use lumen_core::travel::{
    clamp_offset, head_yaw_pitch, step, Direction, EventKind, MoveInput, SessionEvent,
    SessionStart, Technique, TravelPolicy, TravelState,
};
use lumen_core::visibility::{sweep_poses, Bvh, Marker, SweepParams};
use nalgebra::{Point3, Rotation3, Vector2, Vector3};

pub fn helix(a: f64, c: f64, turns: f64, n: usize) -> Vec<Point3<f64>> {
    (0..=n)
        .map(|i| {
            let t = std::f64::consts::TAU * turns * i as f64 / n as f64;
            Point3::new(a * t.cos(), a * t.sin(), c * t)
        })
        .collect()
}

pub fn arc(radius: f64, angle: f64, n: usize) -> Vec<Point3<f64>> {
    (0..=n)
        .map(|i| {
            let t = angle * i as f64 / n as f64;
            Point3::new(radius * t.cos(), radius * t.sin(), 0.0)
        })
        .collect()
}

/// Signed rotation about the tangent between two consecutive frames after
/// removing the minimal rotation that aligns their tangents.
pub fn step_twist(f0: &Frame, f1: &Frame) -> f64 {
    let align =
        Rotation3::rotation_between(&f0.tangent, &f1.tangent).unwrap_or_else(Rotation3::identity);
    let carried = align * f0.normal;
    let sin = carried.cross(&f1.normal).dot(&f1.tangent);
    let cos = carried.dot(&f1.normal);
    sin.atan2(cos)
}

pub fn total_twist(path: &CenterlinePath) -> f64 {
    path.samples()
        .windows(2)
        .map(|w| step_twist(&w[0].frame, &w[1].frame))
        .sum()
}

/// Angle of the frame normal measured from the analytic Frenet normal of
/// the helix `(a cos t, a sin t, c t)` toward its Frenet binormal.
pub fn helix_frenet_angle(a: f64, c: f64, p: &Point3<f64>, normal: &Vector3<f64>) -> f64 {
    let t = p.z / c;
    let k = (a * a + c * c).sqrt();
    let tangent = Vector3::new(-a * t.sin(), a * t.cos(), c) / k;
    let n = Vector3::new(-t.cos(), -t.sin(), 0.0);
    let b = tangent.cross(&n);
    normal.dot(&b).atan2(normal.dot(&n))
}

pub fn unwrap_angles(a: &[f64]) -> Vec<f64> {
    let mut out = Vec::with_capacity(a.len());
    let mut offset = 0.0;
    for (i, &x) in a.iter().enumerate() {
        if i > 0 {
            let d = x + offset - out[i - 1];
            if d > std::f64::consts::PI {
                offset -= std::f64::consts::TAU;
            } else if d < -std::f64::consts::PI {
                offset += std::f64::consts::TAU;
            }
        }
        out.push(x + offset);
    }
    out
}

/// Möller–Trumbore, two-sided. Returns t for a unit `dir`.
pub fn moller_trumbore(o: &Point3<f64>, dir: &Vector3<f64>, tri: &[Point3<f64>; 3]) -> Option<f64> {
    let e1 = tri[1] - tri[0];
    let e2 = tri[2] - tri[0];
    let p = dir.cross(&e2);
    let det = e1.dot(&p);
    if det.abs() < 1e-18 {
        return None;
    }
    let inv = 1.0 / det;
    let s = o - tri[0];
    let u = s.dot(&p) * inv;
    if !(0.0..=1.0).contains(&u) {
        return None;
    }
    let q = s.cross(&e1);
    let v = dir.dot(&q) * inv;
    if v < 0.0 || u + v > 1.0 {
        return None;
    }
    let t = e2.dot(&q) * inv;
    (t > 1e-9).then_some(t)
}

/// Nearest hit over every triangle; ties go to the lower index.
pub fn naive_nearest(
    tris: &[[Point3<f64>; 3]],
    o: &Point3<f64>,
    dir: &Vector3<f64>,
) -> Option<(usize, f64)> {
    let d = dir.normalize();
    let mut best: Option<(usize, f64)> = None;
    for (i, tri) in tris.iter().enumerate() {
        if let Some(t) = moller_trumbore(o, &d, tri) {
            if best.is_none_or(|(_, bt)| t < bt) {
                best = Some((i, t));
            }
        }
    }
    best
}

pub fn triangles(mesh: &lumen_core::mesh::TriMesh) -> Vec<[Point3<f64>; 3]> {
    (0..mesh.face_count())
        .map(|f| mesh.face_corners(f))
        .collect()
}

/// Closed tube of radius 0.04 along +x from x = 0 with a 12 mm thick fold whose
/// opening has radius 0.01. The distal face of the fold sits at x = 0.162.
pub struct FoldFixture {
    pub mesh: lumen_core::mesh::TriMesh,
    pub length: f64,
    pub radius: f64,
    pub distal_x: f64,
}

pub fn fold_fixture() -> FoldFixture {
    let (radius, hole) = (0.04, 0.01);
    let (x1, x2) = (0.15, 0.162);
    let step = 0.0025;
    let mut profile: Vec<(f64, f64)> = (0..60).map(|i| (i as f64 * step, radius)).collect();
    for k in 0..=6 {
        profile.push((x1, radius - (radius - hole) * k as f64 / 6.0));
    }
    profile.push((x2, hole));
    for k in 1..=6 {
        profile.push((x2, hole + (radius - hole) * k as f64 / 6.0));
    }
    profile.extend((1..=55).map(|i| (x2 + i as f64 * step, radius)));
    let length = profile.last().unwrap().0;
    let mesh = lumen_core::mesh::revolve_profile(&profile, 64).unwrap();
    FoldFixture {
        mesh,
        length,
        radius,
        distal_x: x2,
    }
}

/// Capsule resting on the fold's distal face, 3 cm long, laid along the
/// circumference at radial distance 0.03 in direction `side`.
pub fn distal_marker(fx: &FoldFixture, side: &Vector3<f64>) -> lumen_core::visibility::Marker {
    let side = side.normalize();
    let along = Vector3::x().cross(&side);
    let center = Point3::new(fx.distal_x + 0.006, 0.0, 0.0) + 0.03 * side;
    lumen_core::visibility::Marker::standard(7, center, along)
}

pub fn x_path(len: f64) -> CenterlinePath {
    let pts: Vec<_> = (0..=100)
        .map(|i| Point3::new(len * i as f64 / 100.0, 0.0, 0.0))
        .collect();
    CenterlinePath::from_polyline(&pts, 0.005, 0, 0.5).unwrap()
}

pub fn tube_bvh() -> (Bvh, CenterlinePath) {
    let spec = PhantomSpec {
        length: 0.3,
        rings: 40,
        segments: 32,
        ..PhantomSpec::straight_tube()
    };
    let ph = generate_phantom(&spec).unwrap();
    (Bvh::build(&ph.mesh), x_path(0.3))
}

/// Drives a session the way the server does and records every event.
pub fn drive(
    script: &[(u8, f64, f64)],
    path: &CenterlinePath,
    bvh: &Bvh,
) -> (Vec<SessionEvent>, TravelState) {
    let mut st = TravelState::new(TravelPolicy::FlyThrough, Direction::Antegrade);
    let mut events = vec![SessionEvent {
        t: 0.0,
        kind: EventKind::Start(SessionStart {
            subject: "p".into(),
            technique: Technique::FlyThrough,
            scene: "tube".into(),
            marker_set: "none".into(),
            direction: st.direction,
            policy: st.policy,
            s: st.s,
            speed: st.speed,
            fov_deg: st.fov_deg,
            path_length: path.length(),
        }),
    }];
    let mut t = 0.0;
    for &(op, a, b) in script {
        t += 1.0 / 60.0;
        match op % 5 {
            0 | 1 => {
                let input = if op % 5 == 0 {
                    MoveInput::Forward
                } else {
                    MoveInput::Backward
                };
                st = step(&st, input, a.abs() * 0.1, path.length());
                events.push(SessionEvent {
                    t,
                    kind: EventKind::Move {
                        input,
                        dt: a.abs() * 0.1,
                        s: st.s,
                    },
                });
            }
            2 => {
                st.head = head_yaw_pitch(a, b);
                events.push(SessionEvent::head(t, &st.head));
            }
            3 => {
                let req = Vector2::new(a * 0.03, b * 0.03);
                st = clamp_offset(bvh, path, &st, req, 0.025).unwrap();
                events.push(SessionEvent::offset(t, req, st.offset));
            }
            _ => {
                st.policy = TravelPolicy::fly_over(a * 3.0);
                events.push(SessionEvent {
                    t,
                    kind: EventKind::Policy { policy: st.policy },
                });
            }
        }
    }
    events.push(SessionEvent {
        t,
        kind: EventKind::End { s: st.s },
    });
    (events, st)
}

/// Straight path along +x between `x0` and `x1`.
pub fn straight_path(x0: f64, x1: f64) -> CenterlinePath {
    let pts: Vec<_> = (0..=200)
        .map(|i| Point3::new(x0 + (x1 - x0) * i as f64 / 200.0, 0.0, 0.0))
        .collect();
    CenterlinePath::from_polyline(&pts, 0.005, 0, 0.5).unwrap()
}

/// Marker visibility by naive raycasting from every sweep pose.
pub fn oracle_ever_visible(
    fx: &FoldFixture,
    path: &CenterlinePath,
    params: &SweepParams,
    marker: &Marker,
) -> bool {
    let tris = triangles(&fx.mesh);
    let half = (params.fov_deg / 2.0).to_radians().tan();
    let poses = sweep_poses(path, params).unwrap();
    marker.surface_samples().iter().any(|(p, n)| {
        poses.iter().any(|pose| {
            let v = p - pose.position;
            let z = v.dot(&pose.view);
            if z <= 0.0 || n.dot(&v) >= 0.0 {
                return false;
            }
            if v.dot(&pose.right).abs() > half * z || v.dot(&pose.up).abs() > half * z {
                return false;
            }
            naive_nearest(&tris, &pose.position, &v).is_none_or(|(_, t)| t >= v.norm())
        })
    })
}
