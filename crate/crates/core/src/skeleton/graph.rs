//! Longest-geodesic path selection on a skeleton graph.

use nalgebra::Point3;

use super::collapse::dijkstra;
use super::{SkeletonError, SkeletonGraph};

fn lexicographic_less(a: &Point3<f64>, b: &Point3<f64>) -> bool {
    for k in 0..3 {
        match a[k].total_cmp(&b[k]) {
            std::cmp::Ordering::Less => return true,
            std::cmp::Ordering::Greater => return false,
            std::cmp::Ordering::Equal => {}
        }
    }
    false
}

fn farthest_reached(dist: &[f64]) -> usize {
    let mut best = 0;
    for (i, &d) in dist.iter().enumerate() {
        if d.is_finite() && d > dist[best] {
            best = i;
        }
    }
    best
}

fn trace(prev: &[usize], src: usize, dst: usize) -> Vec<usize> {
    let mut out = vec![dst];
    let mut cur = dst;
    while cur != src {
        cur = prev[cur];
        out.push(cur);
    }
    out.reverse();
    out
}

impl SkeletonGraph {
    pub fn adjacency(&self) -> Vec<Vec<usize>> {
        let mut adj = vec![Vec::new(); self.nodes.len()];
        for &(a, b) in &self.edges {
            adj[a].push(b);
            adj[b].push(a);
        }
        for l in &mut adj {
            l.sort_unstable();
        }
        adj
    }

    pub fn degree(&self, node: usize) -> usize {
        self.edges
            .iter()
            .filter(|&&(a, b)| a == node || b == node)
            .count()
    }

    /// Largest Euclidean distance between any two nodes.
    pub fn diameter(&self) -> f64 {
        let mut d: f64 = 0.0;
        for (i, a) in self.nodes.iter().enumerate() {
            for b in &self.nodes[i + 1..] {
                d = d.max((a - b).norm());
            }
        }
        d
    }

    /// Node indices of the shortest path between two nodes.
    pub fn shortest_path(&self, from: usize, to: usize) -> Result<Vec<usize>, SkeletonError> {
        let n = self.nodes.len();
        if from >= n || to >= n {
            return Err(SkeletonError::BadEndpoints(format!(
                "node index out of range 0..{n}"
            )));
        }
        let (dist, prev) = dijkstra(&self.nodes, &self.adjacency(), from);
        if !dist[to].is_finite() {
            return Err(SkeletonError::BadEndpoints(format!(
                "nodes {from} and {to} are not connected"
            )));
        }
        Ok(trace(&prev, from, to))
    }
}

/// Node indices of the longest geodesic, found by a double Dijkstra sweep.
/// Index 0 is the endpoint with the lexicographically smaller (x, y, z).
pub fn extract_path_indices(graph: &SkeletonGraph) -> Result<Vec<usize>, SkeletonError> {
    if graph.nodes.len() < 2 {
        return Err(SkeletonError::NoTubularStructure);
    }
    let adj = graph.adjacency();
    let (d0, _) = dijkstra(&graph.nodes, &adj, 0);
    let a = farthest_reached(&d0);
    let (da, prev) = dijkstra(&graph.nodes, &adj, a);
    let b = farthest_reached(&da);
    if a == b {
        return Err(SkeletonError::NoTubularStructure);
    }
    let mut path = trace(&prev, a, b);
    if lexicographic_less(&graph.nodes[b], &graph.nodes[a]) {
        path.reverse();
    }
    Ok(path)
}

pub fn extract_path(graph: &SkeletonGraph) -> Result<Vec<Point3<f64>>, SkeletonError> {
    Ok(extract_path_indices(graph)?
        .into_iter()
        .map(|i| graph.nodes[i])
        .collect())
}
