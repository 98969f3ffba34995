//! Scene assets: mesh, centerline path and marker set, loaded once and
//! shared read-only by every session.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use lumen_core::mesh::{parse_mesh, MeshFormat, TriMesh};
use lumen_core::path::CenterlinePath;
use lumen_core::visibility::{check_path_in_mesh, Bvh, MarkerSet};
use serde::Serialize;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum SceneError {
    #[error("{0}: {1}")]
    Io(String, std::io::Error),
    #[error("scene {0}: {1}")]
    Invalid(String, String),
}

pub struct Scene {
    pub id: String,
    pub mesh: TriMesh,
    pub bvh: Bvh,
    pub path: CenterlinePath,
    pub markers: MarkerSet,
    /// Mean wall distance around each path sample, for the offset clamp's
    /// open-cap fallback.
    radii: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SceneSummary {
    pub id: String,
    pub vertices: usize,
    pub faces: usize,
    pub path_length: f64,
    pub marker_set: String,
    pub markers: usize,
}

impl Scene {
    pub fn new(
        id: &str,
        mesh: TriMesh,
        path: CenterlinePath,
        markers: MarkerSet,
    ) -> Result<Self, SceneError> {
        let invalid = |e: String| SceneError::Invalid(id.to_string(), e);
        let bvh = Bvh::try_build(&mesh).map_err(|e| invalid(e.to_string()))?;
        check_path_in_mesh(&bvh, &path).map_err(|e| invalid(e.to_string()))?;
        let mut radii: Vec<Option<f64>> = path
            .samples()
            .iter()
            .map(|x| {
                let f = x.frame;
                let hits: Vec<f64> = [f.normal, -f.normal, f.binormal, -f.binormal]
                    .iter()
                    .filter_map(|d| bvh.raycast(&x.position, d).map(|h| h.t))
                    .collect();
                (!hits.is_empty()).then(|| hits.iter().sum::<f64>() / hits.len() as f64)
            })
            .collect();
        let known: Vec<f64> = radii.iter().flatten().copied().collect();
        if known.is_empty() {
            return Err(invalid("no wall found around the path".into()));
        }
        let mean = known.iter().sum::<f64>() / known.len() as f64;
        for r in &mut radii {
            r.get_or_insert(mean);
        }
        Ok(Self {
            id: id.to_string(),
            mesh,
            bvh,
            path,
            markers,
            radii: radii.into_iter().flatten().collect(),
        })
    }

    /// Reads `mesh.ply` or `mesh.obj`, `path.json` and an optional
    /// `markers.json` from `dir`. The scene id is the directory name.
    pub fn load(dir: &Path) -> Result<Self, SceneError> {
        let id = dir
            .file_name()
            .map(|n| n.to_string_lossy().into_owned())
            .unwrap_or_default();
        let read = |p: &Path| fs::read(p).map_err(|e| SceneError::Io(p.display().to_string(), e));
        let mesh_file = ["mesh.ply", "mesh.obj"]
            .iter()
            .map(|n| dir.join(n))
            .find(|p| p.exists())
            .ok_or_else(|| SceneError::Invalid(id.clone(), "no mesh.ply or mesh.obj".into()))?;
        let mesh = parse_mesh(&read(&mesh_file)?, MeshFormat::from_path(&mesh_file))
            .map_err(|e| SceneError::Invalid(id.clone(), e.to_string()))?;
        let path_text = String::from_utf8_lossy(&read(&dir.join("path.json"))?).into_owned();
        let path = CenterlinePath::from_json(&path_text)
            .map_err(|e| SceneError::Invalid(id.clone(), e.to_string()))?;
        let markers_file = dir.join("markers.json");
        let markers = if markers_file.exists() {
            serde_json::from_slice(&read(&markers_file)?)
                .map_err(|e| SceneError::Invalid(id.clone(), e.to_string()))?
        } else {
            MarkerSet {
                id: "none".into(),
                markers: Vec::new(),
            }
        };
        Self::new(&id, mesh, path, markers)
    }

    /// Mean wall distance at the path sample nearest `s`.
    pub fn local_radius(&self, s: f64) -> f64 {
        self.radii[self.path.nearest_index(s)]
    }

    pub fn summary(&self) -> SceneSummary {
        SceneSummary {
            id: self.id.clone(),
            vertices: self.mesh.vertex_count(),
            faces: self.mesh.face_count(),
            path_length: self.path.length(),
            marker_set: self.markers.id.clone(),
            markers: self.markers.markers.len(),
        }
    }
}

#[derive(Default)]
pub struct SceneStore {
    scenes: BTreeMap<String, Scene>,
}

impl SceneStore {
    pub fn new() -> Self {
        Self::default()
    }

    /// Loads every subdirectory of `dir` as a scene.
    pub fn load_dir(dir: &Path) -> Result<Self, SceneError> {
        let mut store = Self::new();
        let entries =
            fs::read_dir(dir).map_err(|e| SceneError::Io(dir.display().to_string(), e))?;
        let mut dirs: Vec<_> = entries
            .filter_map(Result::ok)
            .map(|e| e.path())
            .filter(|p| p.is_dir())
            .collect();
        dirs.sort();
        for d in dirs {
            store.insert(Scene::load(&d)?);
        }
        Ok(store)
    }

    pub fn insert(&mut self, scene: Scene) {
        self.scenes.insert(scene.id.clone(), scene);
    }

    pub fn get(&self, id: &str) -> Option<&Scene> {
        self.scenes.get(id)
    }

    pub fn summaries(&self) -> Vec<SceneSummary> {
        self.scenes.values().map(Scene::summary).collect()
    }
}
