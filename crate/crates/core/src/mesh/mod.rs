//! Triangle meshes: validated storage, ASCII PLY / OBJ I/O and synthetic
//! tubular phantoms with analytic centerlines.
//!
//! All coordinates are meters.

mod obj;
mod phantom;
mod ply;

use std::collections::{BTreeMap, HashMap};
use std::path::Path;

use nalgebra::{Point3, Vector3};
use thiserror::Error;

pub use obj::{parse_obj, write_obj};
pub use phantom::{generate_phantom, revolve_profile, Phantom, PhantomKind, PhantomSpec};
pub use ply::{parse_ply, write_ply};

/// Faces with area at or below this are rejected as degenerate (m²).
pub const MIN_FACE_AREA: f64 = 1e-12;

#[derive(Debug, Error, PartialEq)]
pub enum MeshError {
    #[error("malformed header: {0}")]
    MalformedHeader(String),
    #[error("binary PLY is not supported (only `format ascii 1.0`)")]
    BinaryPly,
    #[error("truncated vertex block: expected {expected} vertices, found {found}")]
    TruncatedVertices { expected: usize, found: usize },
    #[error("truncated face block: expected {expected} faces, found {found}")]
    TruncatedFaces { expected: usize, found: usize },
    #[error("line {line}: {message}")]
    Syntax { line: usize, message: String },
    #[error("face {face} references vertex {index} but mesh has {count} vertices")]
    IndexOutOfRange {
        face: usize,
        index: i64,
        count: usize,
    },
    #[error("face {face} has {arity} vertices; only triangles and quads are accepted")]
    UnsupportedArity { face: usize, arity: usize },
    #[error("face {face} is degenerate (area {area:e} m²)")]
    DegenerateFace { face: usize, area: f64 },
    #[error("invalid phantom: {0}")]
    InvalidPhantom(String),
    #[error("tessellation too coarse to remain manifold: {0}")]
    TooCoarse(String),
    #[error("cannot infer mesh format")]
    UnknownFormat,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MeshFormat {
    Ply,
    Obj,
}

impl MeshFormat {
    pub fn from_path(path: &Path) -> Option<Self> {
        let ext = path.extension()?.to_str()?.to_ascii_lowercase();
        match ext.as_str() {
            "ply" => Some(MeshFormat::Ply),
            "obj" => Some(MeshFormat::Obj),
            _ => None,
        }
    }

    /// Guess the format from the first bytes of a file.
    pub fn sniff(bytes: &[u8]) -> Option<Self> {
        let head = &bytes[..bytes.len().min(64)];
        let text = std::str::from_utf8(head).ok()?;
        let first = text.trim_start().lines().next().unwrap_or("");
        if first.trim() == "ply" {
            return Some(MeshFormat::Ply);
        }
        let obj_like = text.lines().any(|l| {
            let l = l.trim_start();
            l.starts_with("v ") || l.starts_with('#') || l.starts_with("o ") || l.starts_with("f ")
        });
        obj_like.then_some(MeshFormat::Obj)
    }
}

/// Parse a mesh from raw bytes. When `format` is `None` it is sniffed.
pub fn parse_mesh(bytes: &[u8], format: Option<MeshFormat>) -> Result<TriMesh, MeshError> {
    match format.or_else(|| MeshFormat::sniff(bytes)) {
        Some(MeshFormat::Ply) => parse_ply(bytes),
        Some(MeshFormat::Obj) => parse_obj(bytes),
        None => Err(MeshError::UnknownFormat),
    }
}

pub fn write_mesh(mesh: &TriMesh, format: MeshFormat) -> Vec<u8> {
    match format {
        MeshFormat::Ply => write_ply(mesh),
        MeshFormat::Obj => write_obj(mesh),
    }
}

/// Indexed triangle surface. Immutable once built.
#[derive(Debug, Clone)]
pub struct TriMesh {
    vertices: Vec<Point3<f64>>,
    faces: Vec<[usize; 3]>,
    areas: Vec<f64>,
}

impl PartialEq for TriMesh {
    fn eq(&self, other: &Self) -> bool {
        self.vertices == other.vertices && self.faces == other.faces
    }
}

impl TriMesh {
    /// Build a mesh, checking index ranges and rejecting degenerate faces.
    pub fn new(vertices: Vec<Point3<f64>>, faces: Vec<[usize; 3]>) -> Result<Self, MeshError> {
        for (fi, face) in faces.iter().enumerate() {
            for &i in face {
                if i >= vertices.len() {
                    return Err(MeshError::IndexOutOfRange {
                        face: fi,
                        index: i as i64,
                        count: vertices.len(),
                    });
                }
            }
        }
        let areas: Vec<f64> = faces.iter().map(|f| tri_area(&vertices, f)).collect();
        if let Some((fi, &area)) = areas
            .iter()
            .enumerate()
            .find(|(_, &a)| !(a > MIN_FACE_AREA))
        {
            return Err(MeshError::DegenerateFace { face: fi, area });
        }
        Ok(Self {
            vertices,
            faces,
            areas,
        })
    }

    pub fn empty() -> Self {
        Self {
            vertices: Vec::new(),
            faces: Vec::new(),
            areas: Vec::new(),
        }
    }

    /// Same connectivity, new positions. Sliver faces are tolerated here since
    /// contraction legitimately produces them.
    pub fn with_positions(&self, vertices: Vec<Point3<f64>>) -> Self {
        assert_eq!(
            vertices.len(),
            self.vertices.len(),
            "vertex count must not change"
        );
        let areas = self.faces.iter().map(|f| tri_area(&vertices, f)).collect();
        Self {
            vertices,
            faces: self.faces.clone(),
            areas,
        }
    }

    pub fn vertices(&self) -> &[Point3<f64>] {
        &self.vertices
    }

    pub fn faces(&self) -> &[[usize; 3]] {
        &self.faces
    }

    pub fn vertex_count(&self) -> usize {
        self.vertices.len()
    }

    pub fn face_count(&self) -> usize {
        self.faces.len()
    }

    pub fn is_empty(&self) -> bool {
        self.faces.is_empty()
    }

    pub fn face_area(&self, face: usize) -> f64 {
        self.areas[face]
    }

    pub fn face_areas(&self) -> &[f64] {
        &self.areas
    }

    pub fn total_area(&self) -> f64 {
        self.areas.iter().sum()
    }

    pub fn face_corners(&self, face: usize) -> [Point3<f64>; 3] {
        let [a, b, c] = self.faces[face];
        [self.vertices[a], self.vertices[b], self.vertices[c]]
    }

    pub fn face_centroid(&self, face: usize) -> Point3<f64> {
        let [a, b, c] = self.face_corners(face);
        Point3::from((a.coords + b.coords + c.coords) / 3.0)
    }

    /// Unit normal following the face winding (outward for a correctly wound
    /// closed surface).
    pub fn face_normal(&self, face: usize) -> Vector3<f64> {
        let [a, b, c] = self.face_corners(face);
        (b - a).cross(&(c - a)).normalize()
    }

    /// Signed enclosed volume via the divergence theorem. Positive for
    /// outward-wound closed meshes.
    pub fn signed_volume(&self) -> f64 {
        self.faces
            .iter()
            .map(|&[a, b, c]| {
                let (a, b, c) = (&self.vertices[a], &self.vertices[b], &self.vertices[c]);
                a.coords.dot(&b.coords.cross(&c.coords)) / 6.0
            })
            .sum()
    }

    pub fn bounds(&self) -> Option<(Point3<f64>, Point3<f64>)> {
        let first = *self.vertices.first()?;
        Some(
            self.vertices
                .iter()
                .fold((first, first), |(lo, hi), p| (lo.inf(p), hi.sup(p))),
        )
    }

    pub fn mean_edge_length(&self) -> f64 {
        let edges = self.undirected_edges();
        if edges.is_empty() {
            return 0.0;
        }
        let total: f64 = edges
            .keys()
            .map(|&(a, b)| (self.vertices[a] - self.vertices[b]).norm())
            .sum();
        total / edges.len() as f64
    }

    /// Undirected edge -> number of incident faces, in sorted edge order.
    pub fn undirected_edges(&self) -> BTreeMap<(usize, usize), usize> {
        let mut edges = BTreeMap::new();
        for face in &self.faces {
            for k in 0..3 {
                let (a, b) = (face[k], face[(k + 1) % 3]);
                *edges.entry((a.min(b), a.max(b))).or_insert(0) += 1;
            }
        }
        edges
    }

    /// Every edge shared by exactly two faces.
    pub fn is_watertight(&self) -> bool {
        !self.faces.is_empty() && self.undirected_edges().values().all(|&n| n == 2)
    }

    /// Number of connected components over face-vertex connectivity
    /// (isolated vertices are ignored).
    pub fn connected_components(&self) -> usize {
        let mut parent: Vec<usize> = (0..self.vertices.len()).collect();
        fn find(parent: &mut [usize], mut x: usize) -> usize {
            while parent[x] != x {
                parent[x] = parent[parent[x]];
                x = parent[x];
            }
            x
        }
        for &[a, b, c] in &self.faces {
            for (u, v) in [(a, b), (b, c)] {
                let (ru, rv) = (find(&mut parent, u), find(&mut parent, v));
                if ru != rv {
                    parent[ru] = rv;
                }
            }
        }
        let mut used = vec![false; self.vertices.len()];
        for f in &self.faces {
            for &i in f {
                used[i] = true;
            }
        }
        let mut roots = std::collections::HashSet::new();
        for i in 0..self.vertices.len() {
            if used[i] {
                roots.insert(find(&mut parent, i));
            }
        }
        roots.len()
    }

    /// Checks winding consistency. Reported, never repaired.
    pub fn winding_report(&self) -> WindingReport {
        let mut directed: HashMap<(usize, usize), usize> = HashMap::new();
        for face in &self.faces {
            for k in 0..3 {
                *directed.entry((face[k], face[(k + 1) % 3])).or_insert(0) += 1;
            }
        }
        // A manifold edge with consistent winding is traversed once each way.
        let inconsistent_edges = directed.values().filter(|&&n| n > 1).count();
        WindingReport { inconsistent_edges }
    }

    /// Vertex adjacency lists built from face edges.
    pub fn vertex_neighbors(&self) -> Vec<Vec<usize>> {
        let mut adj = vec![Vec::new(); self.vertices.len()];
        for (a, b) in self.undirected_edges().into_keys() {
            adj[a].push(b);
            adj[b].push(a);
        }
        for list in &mut adj {
            list.sort_unstable();
        }
        adj
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct WindingReport {
    /// Directed edges used by more than one face in the same direction.
    pub inconsistent_edges: usize,
}

impl WindingReport {
    pub fn is_consistent(&self) -> bool {
        self.inconsistent_edges == 0
    }
}

fn tri_area(vertices: &[Point3<f64>], face: &[usize; 3]) -> f64 {
    let (a, b, c) = (vertices[face[0]], vertices[face[1]], vertices[face[2]]);
    0.5 * (b - a).cross(&(c - a)).norm()
}

/// Fan-triangulate a polygon given as vertex indices. Triangles pass through,
/// quads are split, anything else is rejected.
pub(crate) fn triangulate(poly: &[usize], face: usize) -> Result<Vec<[usize; 3]>, MeshError> {
    match poly.len() {
        3 => Ok(vec![[poly[0], poly[1], poly[2]]]),
        4 => Ok(vec![
            [poly[0], poly[1], poly[2]],
            [poly[0], poly[2], poly[3]],
        ]),
        arity => Err(MeshError::UnsupportedArity { face, arity }),
    }
}

#[cfg(test)]
pub(crate) mod fixtures {
    use super::*;

    pub fn tetrahedron() -> TriMesh {
        let v = vec![
            Point3::new(1.0, 1.0, 1.0),
            Point3::new(1.0, -1.0, -1.0),
            Point3::new(-1.0, 1.0, -1.0),
            Point3::new(-1.0, -1.0, 1.0),
        ];
        let f = vec![[0, 1, 2], [0, 3, 1], [0, 2, 3], [1, 3, 2]];
        TriMesh::new(v, f).unwrap()
    }
}
