//! Collapse a contracted mesh into a skeleton graph.

use std::cmp::Reverse;
use std::collections::{BTreeSet, BinaryHeap};

use nalgebra::Point3;

use super::{SkeletonError, SkeletonGraph};
use crate::mesh::TriMesh;

/// Ordered float for heaps; NaN never occurs for finite meshes.
#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) struct Dist(pub f64);

impl Eq for Dist {}

impl PartialOrd for Dist {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Dist {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        self.0.total_cmp(&other.0)
    }
}

/// Single-source shortest paths over an adjacency list with Euclidean edge
/// lengths. Ties are broken by index so results are bit-reproducible.
pub(crate) fn dijkstra(
    points: &[Point3<f64>],
    adj: &[Vec<usize>],
    src: usize,
) -> (Vec<f64>, Vec<usize>) {
    let n = points.len();
    let mut dist = vec![f64::INFINITY; n];
    let mut prev = vec![usize::MAX; n];
    let mut heap = BinaryHeap::new();
    dist[src] = 0.0;
    heap.push(Reverse((Dist(0.0), src)));
    while let Some(Reverse((Dist(d), u))) = heap.pop() {
        if d > dist[u] {
            continue;
        }
        for &v in &adj[u] {
            let nd = d + (points[v] - points[u]).norm();
            if nd < dist[v] || (nd == dist[v] && u < prev[v]) {
                dist[v] = nd;
                prev[v] = u;
                heap.push(Reverse((Dist(nd), v)));
            }
        }
    }
    (dist, prev)
}

fn farthest(points: &[Point3<f64>], from: &Point3<f64>) -> usize {
    let mut best = (0, f64::NEG_INFINITY);
    for (i, p) in points.iter().enumerate() {
        let d = (p - from).norm_squared();
        if d > best.1 {
            best = (i, d);
        }
    }
    best.0
}

/// Clusters contracted vertices into geodesic slabs.
///
/// Seeds at the vertex farthest from vertex 0 and measures geodesic distance
/// from it over the contracted mesh. Vertex `v` falls in slab
/// `⌊geo(v) / spacing⌋`; each slab splits into its connected components,
/// which become the clusters.
pub fn collapse_to_skeleton(
    contracted: &TriMesh,
    original: &TriMesh,
    spacing: f64,
) -> Result<SkeletonGraph, SkeletonError> {
    if contracted.vertex_count() != original.vertex_count()
        || contracted.faces() != original.faces()
    {
        return Err(SkeletonError::InvalidParams(
            "contracted mesh must share the original's connectivity".into(),
        ));
    }
    if !(spacing > 0.0) {
        return Err(SkeletonError::InvalidParams(format!(
            "spacing {spacing} must be positive"
        )));
    }
    let components = original.connected_components();
    if components != 1 {
        return Err(SkeletonError::NotConnected { components });
    }
    let (lo, hi) = original.bounds().ok_or(SkeletonError::NoTubularStructure)?;
    let extent = (hi - lo).norm();
    if spacing > extent {
        return Err(SkeletonError::SpacingTooLarge { spacing, extent });
    }

    let pts = contracted.vertices();
    let adj = contracted.vertex_neighbors();
    let seed = farthest(pts, &pts[0]);
    let (geo, _) = dijkstra(pts, &adj, seed);
    let mut order: Vec<usize> = (0..pts.len()).filter(|&i| !adj[i].is_empty()).collect();
    order.sort_by(|&a, &b| geo[a].total_cmp(&geo[b]).then(a.cmp(&b)));
    let slab: Vec<usize> = geo.iter().map(|g| (g / spacing).floor() as usize).collect();

    let mut parent: Vec<usize> = (0..pts.len()).collect();
    fn find(parent: &mut [usize], mut x: usize) -> usize {
        while parent[x] != x {
            parent[x] = parent[parent[x]];
            x = parent[x];
        }
        x
    }
    for (a, b) in original.undirected_edges().into_keys() {
        if slab[a] == slab[b] {
            let (ra, rb) = (find(&mut parent, a), find(&mut parent, b));
            if ra != rb {
                parent[ra.max(rb)] = ra.min(rb);
            }
        }
    }
    // Number clusters in order of first appearance along the sweep.
    let mut membership = vec![usize::MAX; pts.len()];
    let mut cluster_of_root = std::collections::BTreeMap::new();
    for &v in &order {
        let root = find(&mut parent, v);
        let next = cluster_of_root.len();
        membership[v] = *cluster_of_root.entry(root).or_insert(next);
    }

    let k = cluster_of_root.len();
    let mut sums = vec![nalgebra::Vector3::zeros(); k];
    let mut counts = vec![0usize; k];
    for &v in &order {
        sums[membership[v]] += pts[v].coords;
        counts[membership[v]] += 1;
    }
    // A center always claims itself, so no cluster is empty.
    let nodes: Vec<Point3<f64>> = sums
        .iter()
        .zip(&counts)
        .map(|(s, &c)| Point3::from(s / c as f64))
        .collect();
    let mut radius_sum = vec![0.0; k];
    for &v in &order {
        let c = membership[v];
        radius_sum[c] += (original.vertices()[v] - nodes[c]).norm();
    }
    let radii = radius_sum
        .iter()
        .zip(&counts)
        .map(|(r, &c)| r / c as f64)
        .collect();

    let mut edges = BTreeSet::new();
    for (a, b) in original.undirected_edges().into_keys() {
        let (ca, cb) = (membership[a], membership[b]);
        if ca != cb {
            edges.insert((ca.min(cb), ca.max(cb)));
        }
    }
    Ok(SkeletonGraph {
        nodes,
        radii,
        edges: edges.into_iter().collect(),
        membership,
    })
}
