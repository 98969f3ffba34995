use std::collections::BTreeMap;

use lumen_core::mesh::{generate_phantom, PhantomSpec, TriMesh};
use lumen_core::path::{hausdorff, polyline_length};
use lumen_core::skeleton::{
    collapse_to_skeleton, contract, extract_centerline, extract_path, extract_path_indices,
    max_distance_to_segment, CenterlineParams, ContractionParams, SkeletonError, SkeletonGraph,
};
use nalgebra::{Point3, Vector3};

/// Subdivided icosahedron; isotropic, unlike a revolved sphere whose poles
/// pull contraction toward a segment.
fn icosphere(radius: f64, levels: usize) -> TriMesh {
    let t = (1.0 + 5f64.sqrt()) / 2.0;
    let mut v: Vec<Vector3<f64>> = [
        [-1.0, t, 0.0],
        [1.0, t, 0.0],
        [-1.0, -t, 0.0],
        [1.0, -t, 0.0],
        [0.0, -1.0, t],
        [0.0, 1.0, t],
        [0.0, -1.0, -t],
        [0.0, 1.0, -t],
        [t, 0.0, -1.0],
        [t, 0.0, 1.0],
        [-t, 0.0, -1.0],
        [-t, 0.0, 1.0],
    ]
    .iter()
    .map(|p| Vector3::from(*p).normalize())
    .collect();
    let mut f: Vec<[usize; 3]> = vec![
        [0, 11, 5],
        [0, 5, 1],
        [0, 1, 7],
        [0, 7, 10],
        [0, 10, 11],
        [1, 5, 9],
        [5, 11, 4],
        [11, 10, 2],
        [10, 7, 6],
        [7, 1, 8],
        [3, 9, 4],
        [3, 4, 2],
        [3, 2, 6],
        [3, 6, 8],
        [3, 8, 9],
        [4, 9, 5],
        [2, 4, 11],
        [6, 2, 10],
        [8, 6, 7],
        [9, 8, 1],
    ];
    for _ in 0..levels {
        let mut mid = BTreeMap::new();
        let mut next = Vec::with_capacity(f.len() * 4);
        for [a, b, c] in f {
            let mut m = |i: usize, j: usize| {
                *mid.entry((i.min(j), i.max(j))).or_insert_with(|| {
                    v.push(((v[i] + v[j]) / 2.0).normalize());
                    v.len() - 1
                })
            };
            let (ab, bc, ca) = (m(a, b), m(b, c), m(c, a));
            next.extend([[a, ab, ca], [b, bc, ab], [c, ca, bc], [ab, bc, ca]]);
        }
        f = next;
    }
    TriMesh::new(v.into_iter().map(|p| Point3::from(p * radius)).collect(), f).unwrap()
}

#[test]
fn straight_tube_contracts_onto_axis() {
    let ph = generate_phantom(&PhantomSpec::straight_tube()).unwrap();
    let out = contract(&ph.mesh, &ContractionParams::for_mesh(&ph.mesh)).unwrap();
    assert!(out.report.converged);
    let a = ph.centerline[0];
    let b = *ph.centerline.last().unwrap();
    let d = max_distance_to_segment(out.mesh.vertices(), &a, &b);
    assert!(d < 0.05 * ph.spec.radius, "max distance {d}");
}

#[test]
fn contraction_area_never_increases() {
    let ph = generate_phantom(&PhantomSpec::torus_arc()).unwrap();
    let out = contract(&ph.mesh, &ContractionParams::for_mesh(&ph.mesh)).unwrap();
    assert_eq!(out.report.areas.len(), out.report.iterations + 1);
    for w in out.report.areas.windows(2) {
        assert!(w[1] <= w[0], "area grew {} -> {}", w[0], w[1]);
    }
}

#[test]
fn near_line_mesh_stops_immediately() {
    // Thin bipyramid: 10 m long, 1e-10 m wide.
    let r = 1e-10;
    let mut v = vec![Point3::new(-5.0, 0.0, 0.0), Point3::new(5.0, 0.0, 0.0)];
    for k in 0..3 {
        let th = std::f64::consts::TAU * k as f64 / 3.0;
        v.push(Point3::new(0.0, r * th.cos(), r * th.sin()));
    }
    let f = vec![
        [0, 3, 2],
        [0, 4, 3],
        [0, 2, 4],
        [1, 2, 3],
        [1, 3, 4],
        [1, 4, 2],
    ];
    let mesh = TriMesh::new(v, f).unwrap();
    let out = contract(&mesh, &ContractionParams::for_mesh(&mesh)).unwrap();
    assert!(out.report.converged);
    assert_eq!(out.report.iterations, 0);
    assert_eq!(out.mesh.vertices(), mesh.vertices());
}

#[test]
fn sphere_has_no_tubular_structure() {
    let r = 0.05;
    let mesh = icosphere(r, 3);
    let out = contract(&mesh, &ContractionParams::for_mesh(&mesh)).unwrap();
    let graph = collapse_to_skeleton(&out.mesh, &mesh, 1.5 * mesh.mean_edge_length()).unwrap();
    assert!(graph.diameter() < r / 10.0, "diameter {}", graph.diameter());
    let err = extract_centerline(&mesh, &CenterlineParams::default()).unwrap_err();
    assert_eq!(err, SkeletonError::NoTubularStructure);
    assert_eq!(err.to_string(), "no tubular structure");
}

#[test]
fn straight_tube_collapses_to_chain() {
    let ph = generate_phantom(&PhantomSpec::straight_tube()).unwrap();
    let out = contract(&ph.mesh, &ContractionParams::for_mesh(&ph.mesh)).unwrap();
    let spacing = 0.02;
    let g = collapse_to_skeleton(&out.mesh, &ph.mesh, spacing).unwrap();
    let expect = ph.spec.length / spacing;
    let n = g.nodes.len() as f64;
    assert!(
        (n - expect).abs() <= 2.0,
        "{n} nodes, expected {expect} ± 2"
    );
    for i in 0..g.nodes.len() {
        assert!(g.degree(i) <= 2);
    }
    assert!(g.radii.iter().all(|&r| r >= 0.0));
    assert!(g.edges.iter().all(|&(a, b)| a < b));
}

#[test]
fn torus_chain_length_matches_arc() {
    let ph = generate_phantom(&PhantomSpec::torus_arc()).unwrap();
    let out = contract(&ph.mesh, &ContractionParams::for_mesh(&ph.mesh)).unwrap();
    let g = collapse_to_skeleton(&out.mesh, &ph.mesh, 1.5 * ph.mesh.mean_edge_length()).unwrap();
    for i in 0..g.nodes.len() {
        assert!(g.degree(i) <= 2);
    }
    let chain = extract_path(&g).unwrap();
    let rho = ph.spec.bend_radius;
    for p in &chain {
        let off = ((p.x.hypot(p.y) - rho).powi(2) + p.z * p.z).sqrt();
        assert!(off < 0.2 * ph.spec.radius, "node {off} m off the axis");
    }
    // Contraction pulls the free ends in, so the chain is measured against
    // the arc the contracted vertices still span.
    let angles: Vec<f64> = out.mesh.vertices().iter().map(|p| p.y.atan2(p.x)).collect();
    let lo = angles.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = angles.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let spanned = rho * (hi - lo);
    let len = polyline_length(&chain);
    assert!(
        (len - spanned).abs() < 0.03 * spanned,
        "chain {len} vs spanned arc {spanned}"
    );
    assert!(spanned > 0.8 * ph.spec.axis_length());
}

#[test]
fn disconnected_mesh_is_rejected() {
    let a = generate_phantom(&PhantomSpec {
        length: 0.1,
        rings: 16,
        ..PhantomSpec::straight_tube()
    })
    .unwrap();
    let mut v = a.mesh.vertices().to_vec();
    let mut f = a.mesh.faces().to_vec();
    let n = v.len();
    v.extend(
        a.mesh
            .vertices()
            .iter()
            .map(|p| p + nalgebra::Vector3::new(0.0, 0.2, 0.0)),
    );
    f.extend(
        a.mesh
            .faces()
            .iter()
            .map(|t| [t[0] + n, t[1] + n, t[2] + n]),
    );
    let two = TriMesh::new(v, f).unwrap();
    let err = extract_centerline(&two, &CenterlineParams::default()).unwrap_err();
    assert_eq!(err, SkeletonError::NotConnected { components: 2 });
    assert!(err.to_string().starts_with("mesh not connected"));
    let err = collapse_to_skeleton(&two, &two, 0.01).unwrap_err();
    assert!(err.to_string().starts_with("mesh not connected"));
}

#[test]
fn oversized_spacing_is_rejected() {
    let ph = generate_phantom(&PhantomSpec {
        length: 0.1,
        rings: 16,
        ..PhantomSpec::straight_tube()
    })
    .unwrap();
    let err = collapse_to_skeleton(&ph.mesh, &ph.mesh, 10.0).unwrap_err();
    assert!(matches!(err, SkeletonError::SpacingTooLarge { .. }));
}

/// Longest shortest path by Floyd–Warshall over every node pair.
fn all_pairs_longest(g: &SkeletonGraph) -> (usize, usize, f64) {
    let n = g.nodes.len();
    let mut d = vec![vec![f64::INFINITY; n]; n];
    for i in 0..n {
        d[i][i] = 0.0;
    }
    for &(a, b) in &g.edges {
        let w = (g.nodes[a] - g.nodes[b]).norm();
        d[a][b] = w;
        d[b][a] = w;
    }
    for k in 0..n {
        for i in 0..n {
            for j in 0..n {
                if d[i][k] + d[k][j] < d[i][j] {
                    d[i][j] = d[i][k] + d[k][j];
                }
            }
        }
    }
    let mut best = (0, 0, 0.0);
    for i in 0..n {
        for j in i + 1..n {
            if d[i][j] > best.2 {
                best = (i, j, d[i][j]);
            }
        }
    }
    best
}

#[test]
fn spur_is_discarded() {
    // Chain of 8 along x with a 2-node spur off node 3.
    let mut nodes: Vec<Point3<f64>> = (0..8).map(|i| Point3::new(i as f64, 0.0, 0.0)).collect();
    nodes.push(Point3::new(3.0, 1.0, 0.0));
    nodes.push(Point3::new(3.0, 2.0, 0.0));
    let mut edges: Vec<(usize, usize)> = (0..7).map(|i| (i, i + 1)).collect();
    edges.push((3, 8));
    edges.push((8, 9));
    let g = SkeletonGraph {
        radii: vec![0.1; nodes.len()],
        nodes,
        edges,
        membership: Vec::new(),
    };

    let (a, b, len) = all_pairs_longest(&g);
    let path = extract_path_indices(&g).unwrap();
    let ends = (
        path[0].min(*path.last().unwrap()),
        path[0].max(*path.last().unwrap()),
    );
    assert_eq!(ends, (a, b));
    assert_eq!(path, (0..8).collect::<Vec<_>>());
    assert!((polyline_length(&extract_path(&g).unwrap()) - len).abs() < 1e-12);
}

#[test]
fn random_trees_match_all_pairs_oracle() {
    use rand::{Rng, SeedableRng};
    let mut rng = rand::rngs::StdRng::seed_from_u64(7);
    for _ in 0..50 {
        let n = rng.gen_range(2..25);
        let nodes: Vec<Point3<f64>> = (0..n)
            .map(|_| {
                Point3::new(
                    rng.gen_range(0.0..1.0),
                    rng.gen_range(0.0..1.0),
                    rng.gen_range(0.0..1.0),
                )
            })
            .collect();
        let edges: Vec<(usize, usize)> = (1..n).map(|i| (rng.gen_range(0..i), i)).collect();
        let g = SkeletonGraph {
            radii: vec![0.0; n],
            nodes,
            edges,
            membership: Vec::new(),
        };
        let (_, _, len) = all_pairs_longest(&g);
        let got = polyline_length(&extract_path(&g).unwrap());
        assert!((got - len).abs() < 1e-12, "{got} vs {len}");
    }
}

#[test]
fn extraction_is_deterministic() {
    let spec = PhantomSpec {
        length: 0.2,
        rings: 32,
        ..PhantomSpec::straight_tube()
    };
    let ph = generate_phantom(&spec).unwrap();
    let a = extract_centerline(&ph.mesh, &CenterlineParams::default()).unwrap();
    let b = extract_centerline(&ph.mesh, &CenterlineParams::default()).unwrap();
    assert_eq!(a.path, b.path);
    assert_eq!(a.graph, b.graph);
    assert_eq!(a.path.to_json(), b.path.to_json());
}

#[test]
fn explicit_endpoints_follow_the_graph() {
    let spec = PhantomSpec {
        length: 0.2,
        rings: 32,
        ..PhantomSpec::straight_tube()
    };
    let ph = generate_phantom(&spec).unwrap();
    let last = ph.mesh.vertex_count() - 1;
    let c = extract_centerline(
        &ph.mesh,
        &CenterlineParams {
            endpoints: Some((0, last)),
            ..Default::default()
        },
    )
    .unwrap();
    assert!(hausdorff(&c.raw, &ph.centerline) < spec.length / 2.0);
    let mut by_node = BTreeMap::new();
    for &m in &c.graph.membership {
        *by_node.entry(m).or_insert(0) += 1;
    }
    assert!(by_node.len() == c.graph.nodes.len());

    let err = extract_centerline(
        &ph.mesh,
        &CenterlineParams {
            endpoints: Some((0, 10_000_000)),
            ..Default::default()
        },
    )
    .unwrap_err();
    assert!(matches!(err, SkeletonError::BadEndpoints(_)));
}
