//! ASCII PLY reader and writer (`element vertex` / `element face` form).

use std::fmt::Write;

use nalgebra::Point3;

use super::{triangulate, MeshError, TriMesh};

#[derive(Debug)]
struct Element {
    name: String,
    count: usize,
    props: Vec<Property>,
}

#[derive(Debug)]
enum Property {
    Scalar(String),
    List(String),
}

impl Property {
    fn name(&self) -> &str {
        match self {
            Property::Scalar(n) | Property::List(n) => n,
        }
    }
}

pub fn parse_ply(bytes: &[u8]) -> Result<TriMesh, MeshError> {
    let text = std::str::from_utf8(bytes)
        .map_err(|_| MeshError::MalformedHeader("not valid UTF-8 text".into()))?;
    let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l.trim()));

    match lines.next() {
        Some((_, "ply")) => {}
        _ => return Err(MeshError::MalformedHeader("missing `ply` magic".into())),
    }

    let mut elements: Vec<Element> = Vec::new();
    let mut saw_format = false;
    loop {
        let Some((ln, line)) = lines.next() else {
            return Err(MeshError::MalformedHeader("missing end_header".into()));
        };
        let mut tok = line.split_whitespace();
        match tok.next() {
            Some("format") => {
                match tok.next() {
                    Some("ascii") => {}
                    Some(f) if f.starts_with("binary") => return Err(MeshError::BinaryPly),
                    other => {
                        return Err(MeshError::MalformedHeader(format!(
                            "unknown format {other:?} on line {ln}"
                        )))
                    }
                }
                saw_format = true;
            }
            Some("comment") | Some("obj_info") | None => {}
            Some("element") => {
                let name = tok
                    .next()
                    .ok_or_else(|| header_err(ln, "element without name"))?;
                let count = tok
                    .next()
                    .and_then(|c| c.parse().ok())
                    .ok_or_else(|| header_err(ln, "element without count"))?;
                elements.push(Element {
                    name: name.to_string(),
                    count,
                    props: Vec::new(),
                });
            }
            Some("property") => {
                let el = elements
                    .last_mut()
                    .ok_or_else(|| header_err(ln, "property before any element"))?;
                let rest: Vec<&str> = tok.collect();
                let prop = match rest.as_slice() {
                    ["list", _, _, name] => Property::List(name.to_string()),
                    [_, name] => Property::Scalar(name.to_string()),
                    _ => return Err(header_err(ln, "malformed property")),
                };
                el.props.push(prop);
            }
            Some("end_header") => break,
            Some(other) => return Err(header_err(ln, &format!("unexpected keyword `{other}`"))),
        }
    }
    if !saw_format {
        return Err(MeshError::MalformedHeader("missing format line".into()));
    }

    let vertex_el = elements
        .iter()
        .position(|e| e.name == "vertex")
        .ok_or_else(|| MeshError::MalformedHeader("no vertex element".into()))?;
    let xyz: Vec<usize> = ["x", "y", "z"]
        .iter()
        .map(|axis| {
            elements[vertex_el]
                .props
                .iter()
                .position(|p| matches!(p, Property::Scalar(n) if n == axis))
                .ok_or_else(|| MeshError::MalformedHeader(format!("vertex lacks `{axis}`")))
        })
        .collect::<Result<_, _>>()?;

    let mut vertices = Vec::new();
    let mut faces = Vec::new();
    let mut face_no = 0usize;
    for el in &elements {
        match el.name.as_str() {
            "vertex" => {
                vertices.reserve(el.count);
                for found in 0..el.count {
                    let (ln, line) = lines.next().ok_or(MeshError::TruncatedVertices {
                        expected: el.count,
                        found,
                    })?;
                    let values = parse_numbers(line, ln)?;
                    if values.len() < el.props.len() {
                        return Err(MeshError::Syntax {
                            line: ln,
                            message: format!(
                                "expected {} vertex values, found {}",
                                el.props.len(),
                                values.len()
                            ),
                        });
                    }
                    vertices.push(Point3::new(values[xyz[0]], values[xyz[1]], values[xyz[2]]));
                }
            }
            "face" => {
                let list_pos = el
                    .props
                    .iter()
                    .position(|p| {
                        matches!(p, Property::List(_))
                            && matches!(p.name(), "vertex_indices" | "vertex_index")
                    })
                    .ok_or_else(|| {
                        MeshError::MalformedHeader("face lacks vertex_indices".into())
                    })?;
                if list_pos != 0 {
                    return Err(MeshError::MalformedHeader(
                        "vertex_indices must be the first face property".into(),
                    ));
                }
                for found in 0..el.count {
                    let (ln, line) = lines.next().ok_or(MeshError::TruncatedFaces {
                        expected: el.count,
                        found,
                    })?;
                    let mut tok = line.split_whitespace();
                    let n: usize = tok.next().and_then(|t| t.parse().ok()).ok_or_else(|| {
                        MeshError::Syntax {
                            line: ln,
                            message: "missing face arity".into(),
                        }
                    })?;
                    let mut poly = Vec::with_capacity(n);
                    for _ in 0..n {
                        let raw: i64 =
                            tok.next().and_then(|t| t.parse().ok()).ok_or_else(|| {
                                MeshError::Syntax {
                                    line: ln,
                                    message: "bad face index".into(),
                                }
                            })?;
                        if raw < 0 || raw as usize >= vertices.len() {
                            return Err(MeshError::IndexOutOfRange {
                                face: face_no,
                                index: raw,
                                count: vertices.len(),
                            });
                        }
                        poly.push(raw as usize);
                    }
                    faces.extend(triangulate(&poly, face_no)?);
                    face_no += 1;
                }
            }
            _ => {
                for found in 0..el.count {
                    lines.next().ok_or_else(|| MeshError::Syntax {
                        line: 0,
                        message: format!(
                            "truncated `{}` block: expected {}, found {found}",
                            el.name, el.count
                        ),
                    })?;
                }
            }
        }
    }
    TriMesh::new(vertices, faces)
}

fn header_err(line: usize, msg: &str) -> MeshError {
    MeshError::MalformedHeader(format!("line {line}: {msg}"))
}

fn parse_numbers(line: &str, ln: usize) -> Result<Vec<f64>, MeshError> {
    line.split_whitespace()
        .map(|t| {
            t.parse::<f64>().map_err(|_| MeshError::Syntax {
                line: ln,
                message: format!("not a number: `{t}`"),
            })
        })
        .collect()
}

pub fn write_ply(mesh: &TriMesh) -> Vec<u8> {
    let mut out = String::with_capacity(64 + mesh.vertex_count() * 48 + mesh.face_count() * 24);
    out.push_str("ply\nformat ascii 1.0\ncomment lumen\n");
    let _ = writeln!(out, "element vertex {}", mesh.vertex_count());
    out.push_str("property double x\nproperty double y\nproperty double z\n");
    let _ = writeln!(out, "element face {}", mesh.face_count());
    out.push_str("property list uchar int vertex_indices\nend_header\n");
    for v in mesh.vertices() {
        let _ = writeln!(out, "{} {} {}", v.x, v.y, v.z);
    }
    for [a, b, c] in mesh.faces() {
        let _ = writeln!(out, "3 {a} {b} {c}");
    }
    out.into_bytes()
}
