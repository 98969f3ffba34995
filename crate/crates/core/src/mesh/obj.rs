//! Wavefront OBJ reader/writer restricted to `v` and `f` records.

use std::fmt::Write;

use nalgebra::Point3;

use super::{triangulate, MeshError, TriMesh};

pub fn parse_obj(bytes: &[u8]) -> Result<TriMesh, MeshError> {
    let text = std::str::from_utf8(bytes).map_err(|_| MeshError::Syntax {
        line: 0,
        message: "not valid UTF-8 text".into(),
    })?;
    let mut vertices = Vec::new();
    let mut polys: Vec<(usize, Vec<i64>)> = Vec::new();

    for (i, raw) in text.lines().enumerate() {
        let ln = i + 1;
        let line = raw.split('#').next().unwrap_or("").trim();
        let mut tok = line.split_whitespace();
        match tok.next() {
            Some("v") => {
                let coords: Vec<f64> = tok
                    .take(3)
                    .map(|t| t.parse::<f64>())
                    .collect::<Result<_, _>>()
                    .map_err(|_| MeshError::Syntax {
                        line: ln,
                        message: "bad vertex".into(),
                    })?;
                if coords.len() != 3 {
                    return Err(MeshError::Syntax {
                        line: ln,
                        message: "vertex needs three coordinates".into(),
                    });
                }
                vertices.push(Point3::new(coords[0], coords[1], coords[2]));
            }
            Some("f") => {
                let idx = tok
                    .map(|t| {
                        // `v`, `v/vt`, `v//vn`, `v/vt/vn`: only the position index matters.
                        t.split('/')
                            .next()
                            .unwrap_or("")
                            .parse::<i64>()
                            .map_err(|_| MeshError::Syntax {
                                line: ln,
                                message: format!("bad face token `{t}`"),
                            })
                    })
                    .collect::<Result<Vec<_>, _>>()?;
                polys.push((vertices.len(), idx));
            }
            // vt, vn, o, g, s, usemtl, mtllib and blank lines carry no geometry we need.
            _ => {}
        }
    }

    let count = vertices.len();
    let mut faces = Vec::with_capacity(polys.len());
    for (fi, (seen, idx)) in polys.into_iter().enumerate() {
        let resolved = idx
            .iter()
            .map(|&k| {
                // Negative indices are relative to the vertices defined so far.
                let abs = if k < 0 { seen as i64 + k } else { k - 1 };
                if k == 0 || abs < 0 || abs as usize >= count {
                    Err(MeshError::IndexOutOfRange {
                        face: fi,
                        index: k,
                        count,
                    })
                } else {
                    Ok(abs as usize)
                }
            })
            .collect::<Result<Vec<_>, _>>()?;
        faces.extend(triangulate(&resolved, fi)?);
    }
    TriMesh::new(vertices, faces)
}

pub fn write_obj(mesh: &TriMesh) -> Vec<u8> {
    let mut out = String::with_capacity(16 + mesh.vertex_count() * 48 + mesh.face_count() * 24);
    let _ = writeln!(
        out,
        "# lumen: {} vertices, {} faces",
        mesh.vertex_count(),
        mesh.face_count()
    );
    for v in mesh.vertices() {
        let _ = writeln!(out, "v {} {} {}", v.x, v.y, v.z);
    }
    for [a, b, c] in mesh.faces() {
        let _ = writeln!(out, "f {} {} {}", a + 1, b + 1, c + 1);
    }
    out.into_bytes()
}
