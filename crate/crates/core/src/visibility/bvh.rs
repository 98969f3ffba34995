//! Bounding volume hierarchy over mesh triangles and watertight ray casting.

use nalgebra::{Point3, Vector3};

use super::VisibilityError;
use crate::mesh::TriMesh;

pub const DEFAULT_LEAF_CAPACITY: usize = 8;
/// Hits closer than this (m) are ignored so rays leaving a surface do not
/// re-hit it.
pub const T_MIN: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Hit {
    pub face: usize,
    /// Distance along the unit ray direction.
    pub t: f64,
    pub point: Point3<f64>,
}

#[derive(Debug, Clone, Copy)]
struct Aabb {
    min: Point3<f64>,
    max: Point3<f64>,
}

impl Aabb {
    fn empty() -> Self {
        Self {
            min: Point3::from([f64::INFINITY; 3]),
            max: Point3::from([f64::NEG_INFINITY; 3]),
        }
    }

    fn grow(&mut self, p: &Point3<f64>) {
        self.min = self.min.inf(p);
        self.max = self.max.sup(p);
    }

    fn pad(&mut self) {
        let e = (self.max - self.min).amax() * 1e-9 + 1e-12;
        self.min -= Vector3::repeat(e);
        self.max += Vector3::repeat(e);
    }

    fn holds(&self, p: &Point3<f64>) -> bool {
        (0..3).all(|k| self.min[k] <= p[k] && p[k] <= self.max[k])
    }

    /// Entry distance of the ray into the box, or `None` if it misses
    /// within `(T_MIN, t_max]`.
    fn entry(&self, o: &Point3<f64>, inv: &Vector3<f64>, t_max: f64) -> Option<f64> {
        let mut lo = T_MIN;
        let mut hi = t_max;
        for k in 0..3 {
            let a = (self.min[k] - o[k]) * inv[k];
            let b = (self.max[k] - o[k]) * inv[k];
            // NaN arises only for a zero direction component with the origin
            // on the slab boundary; f64::min/max then keep the other bound.
            lo = lo.max(a.min(b));
            hi = hi.min(a.max(b));
        }
        (lo <= hi).then_some(lo)
    }
}

#[derive(Debug, Clone, Copy)]
enum NodeKind {
    Leaf { start: usize, count: usize },
    Inner { left: usize, right: usize },
}

#[derive(Debug, Clone, Copy)]
struct Node {
    bounds: Aabb,
    kind: NodeKind,
}

/// Median-split BVH. Triangle corners are copied so the mesh can be dropped.
#[derive(Debug, Clone)]
pub struct Bvh {
    tris: Vec<[Point3<f64>; 3]>,
    order: Vec<usize>,
    nodes: Vec<Node>,
}

/// Watertight ray/triangle test, two-sided. Returns the hit distance in
/// units of `dir`.
pub fn intersect_triangle(
    o: &Point3<f64>,
    dir: &Vector3<f64>,
    tri: &[Point3<f64>; 3],
) -> Option<f64> {
    let kz = dir.iamax();
    let mut kx = (kz + 1) % 3;
    let mut ky = (kx + 1) % 3;
    if dir[kz] < 0.0 {
        std::mem::swap(&mut kx, &mut ky);
    }
    let sx = dir[kx] / dir[kz];
    let sy = dir[ky] / dir[kz];
    let sz = 1.0 / dir[kz];

    let a = tri[0] - o;
    let b = tri[1] - o;
    let c = tri[2] - o;
    let (ax, ay) = (a[kx] - sx * a[kz], a[ky] - sy * a[kz]);
    let (bx, by) = (b[kx] - sx * b[kz], b[ky] - sy * b[kz]);
    let (cx, cy) = (c[kx] - sx * c[kz], c[ky] - sy * c[kz]);

    let u = cx * by - cy * bx;
    let v = ax * cy - ay * cx;
    let w = bx * ay - by * ax;
    if (u < 0.0 || v < 0.0 || w < 0.0) && (u > 0.0 || v > 0.0 || w > 0.0) {
        return None;
    }
    let det = u + v + w;
    if det == 0.0 {
        return None;
    }
    let t = (u * sz * a[kz] + v * sz * b[kz] + w * sz * c[kz]) / det;
    (t > T_MIN).then_some(t)
}

fn closer(t: f64, face: usize, best: &Option<(f64, usize)>) -> bool {
    match *best {
        None => true,
        Some((bt, bf)) => t < bt || (t == bt && face < bf),
    }
}

impl Bvh {
    pub fn build(mesh: &TriMesh) -> Self {
        Self::with_capacity(mesh, DEFAULT_LEAF_CAPACITY)
    }

    /// Like [`Bvh::build`] but rejects an empty mesh.
    pub fn try_build(mesh: &TriMesh) -> Result<Self, VisibilityError> {
        if mesh.face_count() == 0 {
            return Err(VisibilityError::EmptyMesh);
        }
        Ok(Self::build(mesh))
    }

    pub fn with_capacity(mesh: &TriMesh, leaf_capacity: usize) -> Self {
        let tris: Vec<_> = (0..mesh.face_count())
            .map(|f| mesh.face_corners(f))
            .collect();
        let centroids: Vec<Point3<f64>> = tris
            .iter()
            .map(|[a, b, c]| Point3::from((a.coords + b.coords + c.coords) / 3.0))
            .collect();
        let mut bvh = Bvh {
            tris,
            order: (0..mesh.face_count()).collect(),
            nodes: Vec::new(),
        };
        if !bvh.tris.is_empty() {
            let n = bvh.order.len();
            bvh.build_node(&centroids, 0, n, leaf_capacity.max(1));
        }
        bvh
    }

    fn build_node(
        &mut self,
        centroids: &[Point3<f64>],
        start: usize,
        end: usize,
        cap: usize,
    ) -> usize {
        let mut bounds = Aabb::empty();
        let mut cbounds = Aabb::empty();
        for &f in &self.order[start..end] {
            for p in &self.tris[f] {
                bounds.grow(p);
            }
            cbounds.grow(&centroids[f]);
        }
        bounds.pad();
        let id = self.nodes.len();
        self.nodes.push(Node {
            bounds,
            kind: NodeKind::Leaf {
                start,
                count: end - start,
            },
        });
        if end - start <= cap {
            return id;
        }
        let axis = (cbounds.max - cbounds.min).imax();
        let mid = (start + end) / 2;
        self.order[start..end].select_nth_unstable_by(mid - start, |&x, &y| {
            centroids[x][axis]
                .total_cmp(&centroids[y][axis])
                .then(x.cmp(&y))
        });
        let left = self.build_node(centroids, start, mid, cap);
        let right = self.build_node(centroids, mid, end, cap);
        self.nodes[id].kind = NodeKind::Inner { left, right };
        id
    }

    pub fn face_count(&self) -> usize {
        self.tris.len()
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn leaf_count(&self) -> usize {
        self.nodes
            .iter()
            .filter(|n| matches!(n.kind, NodeKind::Leaf { .. }))
            .count()
    }

    /// Verifies the structural invariants: every face sits in exactly one
    /// leaf and every box contains its children's boxes.
    pub fn check(&self) -> Result<(), String> {
        let mut seen = vec![0usize; self.tris.len()];
        for (id, node) in self.nodes.iter().enumerate() {
            match node.kind {
                NodeKind::Leaf { start, count } => {
                    for &f in &self.order[start..start + count] {
                        seen[f] += 1;
                        if self.tris[f].iter().any(|p| !node.bounds.holds(p)) {
                            return Err(format!("face {f} escapes leaf {id}"));
                        }
                    }
                }
                NodeKind::Inner { left, right } => {
                    for c in [left, right] {
                        let b = &self.nodes[c].bounds;
                        if !node.bounds.holds(&b.min) || !node.bounds.holds(&b.max) {
                            return Err(format!("node {c} escapes parent {id}"));
                        }
                    }
                }
            }
        }
        match seen.iter().position(|&n| n != 1) {
            Some(f) => Err(format!("face {f} appears in {} leaves", seen[f])),
            None => Ok(()),
        }
    }

    /// Corners of the root box.
    pub fn bounds(&self) -> Option<(Point3<f64>, Point3<f64>)> {
        self.nodes.first().map(|n| (n.bounds.min, n.bounds.max))
    }

    pub fn triangle_area(&self, face: usize) -> f64 {
        let [a, b, c] = &self.tris[face];
        0.5 * (b - a).cross(&(c - a)).norm()
    }

    pub fn triangle(&self, face: usize) -> &[Point3<f64>; 3] {
        &self.tris[face]
    }

    /// Nearest hit along the ray. Ties in distance go to the lower face id.
    pub fn raycast(&self, origin: &Point3<f64>, dir: &Vector3<f64>) -> Option<Hit> {
        let d = dir.try_normalize(0.0)?;
        let inv = d.map(|x| 1.0 / x);
        let mut best: Option<(f64, usize)> = None;
        let mut stack = Vec::with_capacity(64);
        if !self.nodes.is_empty() {
            stack.push(0usize);
        }
        while let Some(id) = stack.pop() {
            let node = &self.nodes[id];
            let limit = best.map_or(f64::INFINITY, |b| b.0);
            match node.bounds.entry(origin, &inv, limit) {
                Some(entry) if entry <= limit => {}
                _ => continue,
            }
            match node.kind {
                NodeKind::Leaf { start, count } => {
                    for &f in &self.order[start..start + count] {
                        if let Some(t) = intersect_triangle(origin, &d, &self.tris[f]) {
                            if closer(t, f, &best) {
                                best = Some((t, f));
                            }
                        }
                    }
                }
                NodeKind::Inner { left, right } => {
                    let el = self.nodes[left].bounds.entry(origin, &inv, limit);
                    let er = self.nodes[right].bounds.entry(origin, &inv, limit);
                    match (el, er) {
                        (Some(a), Some(b)) if a <= b => stack.extend([right, left]),
                        (Some(_), Some(_)) => stack.extend([left, right]),
                        (Some(_), None) => stack.push(left),
                        (None, Some(_)) => stack.push(right),
                        (None, None) => {}
                    }
                }
            }
        }
        best.map(|(t, face)| Hit {
            face,
            t,
            point: origin + t * d,
        })
    }

    /// Reference implementation: test every triangle.
    pub fn raycast_brute_force(&self, origin: &Point3<f64>, dir: &Vector3<f64>) -> Option<Hit> {
        let d = dir.try_normalize(0.0)?;
        let mut best: Option<(f64, usize)> = None;
        for (f, tri) in self.tris.iter().enumerate() {
            if let Some(t) = intersect_triangle(origin, &d, tri) {
                if closer(t, f, &best) {
                    best = Some((t, f));
                }
            }
        }
        best.map(|(t, face)| Hit {
            face,
            t,
            point: origin + t * d,
        })
    }

    /// Number of surface crossings along a ray.
    pub fn crossings(&self, origin: &Point3<f64>, dir: &Vector3<f64>) -> usize {
        let Some(d) = dir.try_normalize(0.0) else {
            return 0;
        };
        let inv = d.map(|x| 1.0 / x);
        let mut count = 0;
        let mut stack = vec![0usize];
        if self.nodes.is_empty() {
            return 0;
        }
        while let Some(id) = stack.pop() {
            let node = &self.nodes[id];
            if node.bounds.entry(origin, &inv, f64::INFINITY).is_none() {
                continue;
            }
            match node.kind {
                NodeKind::Leaf { start, count: n } => {
                    count += self.order[start..start + n]
                        .iter()
                        .filter(|&&f| intersect_triangle(origin, &d, &self.tris[f]).is_some())
                        .count();
                }
                NodeKind::Inner { left, right } => stack.extend([left, right]),
            }
        }
        count
    }

    /// Inside test for a closed mesh: majority vote of crossing parity over
    /// three skew directions, which tolerates a ray grazing an edge.
    pub fn contains(&self, p: &Point3<f64>) -> bool {
        let dirs = [
            Vector3::new(0.5773, 0.5774, 0.5775),
            Vector3::new(-0.6172, 0.2184, 0.7559),
            Vector3::new(0.1392, -0.8941, -0.4257),
        ];
        dirs.iter()
            .filter(|d| self.crossings(p, d) % 2 == 1)
            .count()
            >= 2
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::{generate_phantom, PhantomSpec};
    use rand::{rngs::StdRng, Rng, SeedableRng};

    fn tri_mesh(tris: &[[[f64; 3]; 3]]) -> TriMesh {
        let mut v = Vec::new();
        let mut f = Vec::new();
        for t in tris {
            let base = v.len();
            v.extend(t.iter().map(|p| Point3::from(*p)));
            f.push([base, base + 1, base + 2]);
        }
        TriMesh::new(v, f).unwrap()
    }

    #[test]
    fn single_triangle_single_leaf() {
        let m = tri_mesh(&[[[0.0, 0.0, 0.0], [1.0, 0.0, 0.0], [0.0, 1.0, 0.0]]]);
        let bvh = Bvh::build(&m);
        assert_eq!((bvh.node_count(), bvh.leaf_count()), (1, 1));
        let c = Point3::new(1.0 / 3.0, 1.0 / 3.0, 0.0);
        let hit = bvh
            .raycast(&(c + Vector3::new(0.0, 0.0, 2.5)), &-Vector3::z())
            .unwrap();
        assert_eq!(hit.face, 0);
        assert!((hit.t - 2.5).abs() < 1e-12);
        assert!(bvh
            .raycast(&(c + Vector3::new(0.0, 0.0, 2.5)), &Vector3::z())
            .is_none());
    }

    #[test]
    fn two_disjoint_triangles_two_leaves() {
        let m = tri_mesh(&[
            [[0.0, 0.0, 0.0], [1.0, 0.0, 0.0], [0.0, 1.0, 0.0]],
            [[5.0, 0.0, 0.0], [6.0, 0.0, 0.0], [5.0, 1.0, 0.0]],
        ]);
        let bvh = Bvh::with_capacity(&m, 1);
        assert_eq!((bvh.node_count(), bvh.leaf_count()), (3, 2));
    }

    #[test]
    fn shared_edge_reports_one_hit() {
        // Two triangles sharing the edge x = y in the z = 0 plane.
        let m = TriMesh::new(
            vec![
                Point3::new(0.0, 0.0, 0.0),
                Point3::new(1.0, 0.0, 0.0),
                Point3::new(1.0, 1.0, 0.0),
                Point3::new(0.0, 1.0, 0.0),
            ],
            vec![[0, 1, 2], [0, 2, 3]],
        )
        .unwrap();
        let bvh = Bvh::build(&m);
        let o = Point3::new(0.5, 0.5, 1.0);
        let hit = bvh.raycast(&o, &-Vector3::z()).unwrap();
        assert_eq!(hit.face, 0);
        assert_eq!(bvh.raycast_brute_force(&o, &-Vector3::z()), Some(hit));
        // Watertightness: the edge is hit by both triangles, never by neither.
        assert_eq!(bvh.crossings(&o, &-Vector3::z()), 2);
    }

    #[test]
    fn random_rays_match_brute_force() {
        let ph = generate_phantom(&PhantomSpec::haustral_tube()).unwrap();
        let bvh = Bvh::build(&ph.mesh);
        let mut rng = StdRng::seed_from_u64(7);
        for _ in 0..2000 {
            let s = rng.gen_range(0.0..ph.spec.axis_length());
            let a = ph.spec.axis_frame(s);
            let o = a.point + rng.gen_range(-0.01..0.01) * a.normal;
            let d = Vector3::new(
                rng.gen_range(-1.0..1.0),
                rng.gen_range(-1.0..1.0),
                rng.gen_range(-1.0..1.0),
            );
            assert_eq!(bvh.raycast(&o, &d), bvh.raycast_brute_force(&o, &d));
        }
    }

    #[test]
    fn containment_of_closed_tube() {
        let ph = generate_phantom(&PhantomSpec::torus_arc()).unwrap();
        let bvh = Bvh::build(&ph.mesh);
        for p in &ph.centerline {
            assert!(bvh.contains(p));
        }
        assert!(!bvh.contains(&Point3::new(0.0, 0.0, 0.0)));
        assert!(!bvh.contains(&Point3::new(5.0, 5.0, 5.0)));
    }
}
