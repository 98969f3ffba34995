//! Path file: `{version, length_m, samples: [{s, pos, t, n, b}]}` JSON.
//!
//! Floats are written in shortest round-trip form, so
//! write → read → write is byte-identical.

use nalgebra::{Point3, Vector3};
use serde::{Deserialize, Serialize};

use super::{CenterlinePath, Frame, PathError, PathSample};

pub const PATH_FILE_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PathFileSample {
    pub s: f64,
    pub pos: [f64; 3],
    pub t: [f64; 3],
    pub n: [f64; 3],
    pub b: [f64; 3],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PathFile {
    pub version: u32,
    pub length_m: f64,
    pub samples: Vec<PathFileSample>,
}

fn arr(v: &Vector3<f64>) -> [f64; 3] {
    [v.x, v.y, v.z]
}

impl From<&CenterlinePath> for PathFile {
    fn from(path: &CenterlinePath) -> Self {
        PathFile {
            version: PATH_FILE_VERSION,
            length_m: path.length(),
            samples: path
                .samples()
                .iter()
                .map(|x| PathFileSample {
                    s: x.s,
                    pos: arr(&x.position.coords),
                    t: arr(&x.frame.tangent),
                    n: arr(&x.frame.normal),
                    b: arr(&x.frame.binormal),
                })
                .collect(),
        }
    }
}

impl TryFrom<PathFile> for CenterlinePath {
    type Error = PathError;

    fn try_from(file: PathFile) -> Result<Self, Self::Error> {
        if file.version != PATH_FILE_VERSION {
            return Err(PathError::InvalidFile(format!(
                "unsupported version {}",
                file.version
            )));
        }
        let samples = file
            .samples
            .iter()
            .map(|x| PathSample {
                s: x.s,
                position: Point3::from(x.pos),
                frame: Frame {
                    tangent: Vector3::from(x.t),
                    normal: Vector3::from(x.n),
                    binormal: Vector3::from(x.b),
                },
            })
            .collect();
        let path = CenterlinePath::from_samples(samples)?;
        if path.length() != file.length_m {
            return Err(PathError::InvalidFile(format!(
                "length_m {} disagrees with last sample {}",
                file.length_m,
                path.length()
            )));
        }
        Ok(path)
    }
}

impl CenterlinePath {
    pub fn to_json(&self) -> String {
        let mut out = serde_json::to_string(&PathFile::from(self)).expect("path serializes");
        out.push('\n');
        out
    }

    pub fn from_json(text: &str) -> Result<Self, PathError> {
        let file: PathFile =
            serde_json::from_str(text).map_err(|e| PathError::InvalidFile(e.to_string()))?;
        file.try_into()
    }
}
