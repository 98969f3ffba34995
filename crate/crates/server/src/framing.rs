//! Compact binary mesh framing served by `GET /scenes/{id}/mesh?format=binary`.
//!
//! All integers and floats are little-endian:
//!
//! | offset            | size      | content                          |
//! |-------------------|-----------|----------------------------------|
//! | 0                 | 4         | magic `b"CLMB"`                  |
//! | 4                 | 4         | `u32` version, currently 1       |
//! | 8                 | 4         | `u32` vertex count `nv`          |
//! | 12                | 4         | `u32` face count `nf`            |
//! | 16                | 12·nv     | `f32` x, y, z per vertex         |
//! | 16 + 12·nv        | 12·nf     | `u32` a, b, c per face           |

use lumen_core::mesh::TriMesh;
use nalgebra::Point3;
use thiserror::Error;

pub const MAGIC: [u8; 4] = *b"CLMB";
pub const VERSION: u32 = 1;
pub const HEADER_LEN: usize = 16;
pub const CONTENT_TYPE: &str = "application/octet-stream";

#[derive(Debug, Error, PartialEq)]
pub enum FramingError {
    #[error("bad magic")]
    BadMagic,
    #[error("unsupported version {0}")]
    Version(u32),
    #[error("expected {expected} bytes, got {got}")]
    Length { expected: usize, got: usize },
    #[error("invalid mesh: {0}")]
    Mesh(String),
}

pub fn encode_mesh(mesh: &TriMesh) -> Vec<u8> {
    let nv = mesh.vertex_count();
    let nf = mesh.face_count();
    let mut out = Vec::with_capacity(HEADER_LEN + 12 * (nv + nf));
    out.extend_from_slice(&MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    out.extend_from_slice(&(nv as u32).to_le_bytes());
    out.extend_from_slice(&(nf as u32).to_le_bytes());
    for p in mesh.vertices() {
        for c in [p.x, p.y, p.z] {
            out.extend_from_slice(&(c as f32).to_le_bytes());
        }
    }
    for f in mesh.faces() {
        for &i in f {
            out.extend_from_slice(&(i as u32).to_le_bytes());
        }
    }
    out
}

fn word(bytes: &[u8], at: usize) -> [u8; 4] {
    bytes[at..at + 4].try_into().expect("4-byte slice")
}

pub fn decode_mesh(bytes: &[u8]) -> Result<TriMesh, FramingError> {
    if bytes.len() < HEADER_LEN {
        return Err(FramingError::Length {
            expected: HEADER_LEN,
            got: bytes.len(),
        });
    }
    if word(bytes, 0) != MAGIC {
        return Err(FramingError::BadMagic);
    }
    let version = u32::from_le_bytes(word(bytes, 4));
    if version != VERSION {
        return Err(FramingError::Version(version));
    }
    let nv = u32::from_le_bytes(word(bytes, 8)) as usize;
    let nf = u32::from_le_bytes(word(bytes, 12)) as usize;
    let expected = HEADER_LEN + 12 * (nv + nf);
    if bytes.len() != expected {
        return Err(FramingError::Length {
            expected,
            got: bytes.len(),
        });
    }
    let float = |at: usize| f32::from_le_bytes(word(bytes, at)) as f64;
    let vertices = (0..nv)
        .map(|i| {
            let at = HEADER_LEN + 12 * i;
            Point3::new(float(at), float(at + 4), float(at + 8))
        })
        .collect();
    let base = HEADER_LEN + 12 * nv;
    let index = |at: usize| u32::from_le_bytes(word(bytes, at)) as usize;
    let faces = (0..nf)
        .map(|i| {
            let at = base + 12 * i;
            [index(at), index(at + 4), index(at + 8)]
        })
        .collect();
    TriMesh::new(vertices, faces).map_err(|e| FramingError::Mesh(e.to_string()))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tetrahedron() -> TriMesh {
        let v = vec![
            Point3::new(0.0, 0.0, 0.0),
            Point3::new(1.0, 0.0, 0.0),
            Point3::new(0.0, 1.0, 0.0),
            Point3::new(0.0, 0.0, 1.0),
        ];
        TriMesh::new(v, vec![[0, 2, 1], [0, 1, 3], [0, 3, 2], [1, 2, 3]]).unwrap()
    }

    #[test]
    fn header_layout_is_fixed() {
        let bytes = encode_mesh(&tetrahedron());
        assert_eq!(&bytes[0..4], b"CLMB");
        assert_eq!(bytes[4..8], [1, 0, 0, 0]);
        assert_eq!(bytes[8..12], [4, 0, 0, 0]);
        assert_eq!(bytes[12..16], [4, 0, 0, 0]);
        assert_eq!(bytes.len(), 16 + 48 + 48);
    }

    #[test]
    fn truncated_and_foreign_input_is_rejected() {
        let bytes = encode_mesh(&tetrahedron());
        assert!(matches!(
            decode_mesh(&bytes[..20]),
            Err(FramingError::Length { .. })
        ));
        let mut bad = bytes.clone();
        bad[0] = b'X';
        assert_eq!(decode_mesh(&bad).unwrap_err(), FramingError::BadMagic);
        let mut v2 = bytes;
        v2[4] = 2;
        assert_eq!(decode_mesh(&v2).unwrap_err(), FramingError::Version(2));
    }
}
