mod common;

use common::{
    distal_marker, fold_fixture, naive_nearest, oracle_ever_visible, straight_path, triangles,
};
use lumen_core::mesh::{generate_phantom, PhantomSpec, TriMesh};
use lumen_core::path::CenterlinePath;
use lumen_core::travel::{CameraPose, TravelPolicy};
use lumen_core::visibility::{
    marker_visibility, sweep_coverage, visible_set, Bvh, CoverageReport, Directions, HeadModel,
    Marker, SweepParams, VisibilityError,
};
use nalgebra::{Point3, Vector3};
use rand::{rngs::StdRng, Rng, SeedableRng};

fn tube() -> (TriMesh, CenterlinePath) {
    let spec = PhantomSpec {
        length: 0.3,
        rings: 40,
        segments: 32,
        ..PhantomSpec::straight_tube()
    };
    (
        generate_phantom(&spec).unwrap().mesh,
        straight_path(0.01, 0.29),
    )
}

fn quick(policy: TravelPolicy) -> SweepParams {
    SweepParams {
        grid: 48,
        ds: 0.01,
        ..SweepParams::new(policy)
    }
}

#[test]
fn bvh_matches_naive_oracle_on_every_phantom() {
    let mut rng = StdRng::seed_from_u64(11);
    let specs = [
        PhantomSpec::straight_tube(),
        PhantomSpec::torus_arc(),
        PhantomSpec::s_curve(),
        PhantomSpec {
            rings: 101,
            segments: 24,
            ..PhantomSpec::haustral_tube()
        },
    ];
    for spec in specs {
        let mesh = generate_phantom(&spec).unwrap().mesh;
        let bvh = Bvh::build(&mesh);
        bvh.check().unwrap();
        let tris = triangles(&mesh);
        let (lo, hi) = mesh.bounds().unwrap();
        for _ in 0..2_000 {
            let o = Point3::new(
                rng.gen_range(lo.x..hi.x),
                rng.gen_range(lo.y..hi.y),
                rng.gen_range(lo.z..hi.z),
            );
            let d = Vector3::new(
                rng.gen_range(-1.0..1.0),
                rng.gen_range(-1.0..1.0),
                rng.gen_range(-1.0..1.0),
            )
            .normalize();
            let got = bvh.raycast(&o, &d).map(|h| (h.face, h.t));
            let want = naive_nearest(&tris, &o, &d);
            match (got, want) {
                (Some((f, t)), Some((g, u))) => {
                    assert_eq!(f, g, "{:?}", spec.kind);
                    assert!((t - u).abs() < 1e-9);
                }
                (None, None) => {}
                other => panic!("{:?}: {other:?}", spec.kind),
            }
        }
    }
}

#[test]
fn empty_mesh_is_rejected() {
    assert_eq!(
        Bvh::try_build(&TriMesh::empty()).err(),
        Some(VisibilityError::EmptyMesh)
    );
}

fn looking_down_z(position: Point3<f64>, fov_deg: f64) -> CameraPose {
    CameraPose {
        position,
        view: -Vector3::z(),
        up: Vector3::y(),
        right: Vector3::x(),
        fov_deg,
    }
}

#[test]
fn triangle_filling_the_frustum_is_the_only_visible_face() {
    let mesh = TriMesh::new(
        vec![
            Point3::new(-10.0, -10.0, -1.0),
            Point3::new(10.0, -10.0, -1.0),
            Point3::new(0.0, 20.0, -1.0),
        ],
        vec![[0, 1, 2]],
    )
    .unwrap();
    let bvh = Bvh::build(&mesh);
    assert_eq!(
        visible_set(&looking_down_z(Point3::origin(), 90.0), &bvh, 8),
        vec![0]
    );
}

#[test]
fn occluded_face_is_absent() {
    let big = |z: f64| {
        [
            Point3::new(-10.0, -10.0, z),
            Point3::new(10.0, -10.0, z),
            Point3::new(0.0, 20.0, z),
        ]
    };
    let mut v = big(-1.0).to_vec();
    v.extend(big(-2.0));
    let mesh = TriMesh::new(v, vec![[3, 4, 5], [0, 1, 2]]).unwrap();
    let bvh = Bvh::build(&mesh);
    assert_eq!(
        visible_set(&looking_down_z(Point3::origin(), 90.0), &bvh, 16),
        vec![1]
    );
}

#[test]
fn axial_view_matches_naive_rasterization() {
    let (mesh, _) = tube();
    let bvh = Bvh::build(&mesh);
    let tris = triangles(&mesh);
    let pose = CameraPose {
        position: Point3::new(0.05, 0.003, -0.002),
        view: Vector3::x(),
        up: Vector3::z(),
        right: Vector3::x().cross(&Vector3::z()),
        fov_deg: 110.0,
    };
    let grid = 40;
    let mut oracle = std::collections::BTreeSet::new();
    let half = (55f64).to_radians().tan();
    for j in 0..grid {
        for i in 0..grid {
            let x = (2.0 * i as f64 + 1.0) / grid as f64 - 1.0;
            let y = 1.0 - (2.0 * j as f64 + 1.0) / grid as f64;
            let d = pose.view + half * (x * pose.right + y * pose.up);
            if let Some((f, _)) = naive_nearest(&tris, &pose.position, &d) {
                oracle.insert(f);
            }
        }
    }
    assert_eq!(
        visible_set(&pose, &bvh, grid),
        oracle.into_iter().collect::<Vec<_>>()
    );
}

#[test]
fn fly_over_without_head_motion_sees_one_side() {
    let (mesh, path) = tube();
    let bvh = Bvh::build(&mesh);
    let fixed =
        sweep_coverage(&bvh, &path, &quick(TravelPolicy::FlyOver { phi: 0.0 }), &[]).unwrap();
    let swept = sweep_coverage(
        &bvh,
        &path,
        &SweepParams {
            head: HeadModel::YawSweep {
                half_angle_deg: 90.0,
                stops: 5,
            },
            ..quick(TravelPolicy::FlyOver { phi: 0.0 })
        },
        &[],
    )
    .unwrap();
    assert!(
        fixed.coverage < swept.coverage,
        "{} vs {}",
        fixed.coverage,
        swept.coverage
    );

    // Seen side-wall area concentrates on the half facing the frame normal.
    let n = path.samples()[0].frame.normal;
    let (mut toward, mut away) = (0.0, 0.0);
    for f in 0..mesh.face_count() {
        let c = mesh.face_centroid(f);
        if !fixed.seen.0[f] || c.x < 0.0 || c.x > 0.3 {
            continue;
        }
        let radial = Vector3::new(0.0, c.y, c.z);
        if radial.dot(&n) > 0.0 {
            toward += mesh.face_area(f);
        } else {
            away += mesh.face_area(f);
        }
    }
    assert!(toward > 4.0 * away, "toward {toward} away {away}");
}

#[test]
fn halving_station_spacing_never_loses_coverage() {
    let (mesh, path) = tube();
    let bvh = Bvh::build(&mesh);
    for policy in [
        TravelPolicy::FlyThrough,
        TravelPolicy::FlyOver { phi: 1.0 },
        TravelPolicy::Elevator,
    ] {
        let coarse = sweep_coverage(
            &bvh,
            &path,
            &SweepParams {
                ds: 0.04,
                ..quick(policy)
            },
            &[],
        )
        .unwrap();
        let fine = sweep_coverage(
            &bvh,
            &path,
            &SweepParams {
                ds: 0.02,
                ..quick(policy)
            },
            &[],
        )
        .unwrap();
        assert!(fine.coverage >= coarse.coverage);
        assert!(coarse
            .seen
            .0
            .iter()
            .zip(&fine.seen.0)
            .all(|(c, f)| !c || *f));
    }
}

#[test]
fn wider_head_sweep_never_loses_coverage() {
    let (mesh, path) = tube();
    let bvh = Bvh::build(&mesh);
    let run = |half_angle_deg, stops| {
        let head = HeadModel::YawSweep {
            half_angle_deg,
            stops,
        };
        sweep_coverage(
            &bvh,
            &path,
            &SweepParams {
                head,
                ..quick(TravelPolicy::FlyOver { phi: 0.0 })
            },
            &[],
        )
        .unwrap()
    };
    let narrow = run(45.0, 3);
    let wide = run(90.0, 5);
    assert!(narrow
        .seen
        .0
        .iter()
        .zip(&wide.seen.0)
        .all(|(a, b)| !a || *b));
    assert!(wide.coverage >= narrow.coverage);
}

#[test]
fn both_directions_is_the_union() {
    let spec = PhantomSpec {
        length: 0.3,
        rings: 61,
        segments: 32,
        ..PhantomSpec::haustral_tube()
    };
    let mesh = generate_phantom(&spec).unwrap().mesh;
    let bvh = Bvh::build(&mesh);
    let path = straight_path(0.01, 0.29);
    let ante = sweep_coverage(&bvh, &path, &quick(TravelPolicy::FlyThrough), &[]).unwrap();
    let both = sweep_coverage(
        &bvh,
        &path,
        &SweepParams {
            directions: Directions::Both,
            ..quick(TravelPolicy::FlyThrough)
        },
        &[],
    )
    .unwrap();
    let reversed: Vec<Point3<f64>> = path.positions().into_iter().rev().collect();
    let retro_path = CenterlinePath::from_polyline(&reversed, 0.005, 0, 0.5).unwrap();
    let retro = sweep_coverage(&bvh, &retro_path, &quick(TravelPolicy::FlyThrough), &[]).unwrap();
    assert!(both.coverage >= ante.coverage.max(retro.coverage));
    assert!(both.coverage > ante.coverage);
    assert!(ante.seen.0.iter().zip(&both.seen.0).all(|(a, b)| !a || *b));
}

#[test]
fn symmetric_tube_gives_symmetric_coverage() {
    let (mesh, path) = tube();
    let bvh = Bvh::build(&mesh);
    let params = SweepParams {
        directions: Directions::Both,
        ..quick(TravelPolicy::FlyThrough)
    };
    let report = sweep_coverage(&bvh, &path, &params, &[]).unwrap();
    for axis in [1, 2] {
        let (mut pos, mut neg, mut pos_total, mut neg_total) = (0.0, 0.0, 0.0, 0.0);
        for f in 0..mesh.face_count() {
            let c = mesh.face_centroid(f)[axis];
            let a = mesh.face_area(f);
            let seen = if report.seen.0[f] { a } else { 0.0 };
            if c > 1e-9 {
                pos += seen;
                pos_total += a;
            } else if c < -1e-9 {
                neg += seen;
                neg_total += a;
            }
        }
        let diff = (pos / pos_total - neg / neg_total).abs();
        assert!(diff < 0.01, "axis {axis}: {diff}");
    }
}

#[test]
fn report_round_trips_through_json() {
    let (mesh, path) = tube();
    let bvh = Bvh::build(&mesh);
    let marker = Marker::standard(1, Point3::new(0.15, 0.0, 0.0), Vector3::x());
    let report = sweep_coverage(&bvh, &path, &quick(TravelPolicy::FlyThrough), &[marker]).unwrap();
    assert!((0.0..=1.0).contains(&report.coverage));
    assert_eq!(
        CoverageReport::from_json(&report.to_json()).unwrap(),
        report
    );
}

#[test]
fn path_outside_mesh_is_rejected() {
    let (mesh, _) = tube();
    let bvh = Bvh::build(&mesh);
    let far = straight_path(1.0, 1.2);
    assert!(matches!(
        sweep_coverage(&bvh, &far, &quick(TravelPolicy::FlyThrough), &[]),
        Err(VisibilityError::Mismatch(_))
    ));
}

#[test]
fn open_lumen_marker_is_visible_under_every_policy() {
    let (mesh, path) = tube();
    let bvh = Bvh::build(&mesh);
    // Halfway between the axis and the floor, so the camera never passes
    // through it.
    let m = Marker::standard(3, Point3::new(0.15, 0.0, -0.012), Vector3::x());
    let yaw = HeadModel::YawSweep {
        half_angle_deg: 90.0,
        stops: 5,
    };
    let runs = [
        quick(TravelPolicy::FlyThrough),
        SweepParams {
            head: yaw,
            ..quick(TravelPolicy::FlyOver { phi: 0.0 })
        },
        quick(TravelPolicy::Elevator),
    ];
    for params in runs {
        let policy = params.policy;
        let r = marker_visibility(&bvh, &path, &params, std::slice::from_ref(&m)).unwrap();
        assert!(r[0].ever_visible, "{policy:?}");
        assert!(r[0].excluded.is_none());
    }
}

#[test]
fn marker_outside_mesh_is_excluded() {
    let (mesh, path) = tube();
    let bvh = Bvh::build(&mesh);
    let outside = Marker::standard(9, Point3::new(0.15, 0.2, 0.0), Vector3::x());
    let r = marker_visibility(&bvh, &path, &quick(TravelPolicy::FlyThrough), &[outside]).unwrap();
    assert!(!r[0].ever_visible);
    assert!(r[0].excluded.is_some());
}

/// Oracle for one sweep: a sample counts if it lies in the square frustum,
/// faces the camera, and no triangle is hit before it.

#[test]
fn fold_hides_distal_marker_from_one_way_fly_through() {
    let fx = fold_fixture();
    let bvh = Bvh::build(&fx.mesh);
    let path = straight_path(0.01, fx.length - 0.01);
    let marker = distal_marker(&fx, &path.samples()[0].frame.normal);
    let cases = [
        (quick(TravelPolicy::FlyThrough), false),
        (
            SweepParams {
                directions: Directions::Both,
                ..quick(TravelPolicy::FlyThrough)
            },
            true,
        ),
        (
            SweepParams {
                head: HeadModel::YawSweep {
                    half_angle_deg: 90.0,
                    stops: 5,
                },
                ..quick(TravelPolicy::FlyOver { phi: 0.0 })
            },
            true,
        ),
    ];
    for (params, expected) in cases {
        let got = marker_visibility(&bvh, &path, &params, std::slice::from_ref(&marker)).unwrap();
        assert!(got[0].excluded.is_none());
        assert_eq!(got[0].ever_visible, expected, "{params:?}");
        assert_eq!(
            oracle_ever_visible(&fx, &path, &params, &marker),
            expected,
            "oracle {params:?}"
        );
    }
}
