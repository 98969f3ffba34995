#![allow(dead_code)]

use std::path::PathBuf;
use std::sync::Arc;

use axum::body::Body;
use axum::http::{Request, StatusCode};
use axum::Router;
use http_body_util::BodyExt;
use lumen_core::mesh::{generate_phantom, PhantomSpec};
use lumen_core::path::CenterlinePath;
use lumen_core::visibility::{Marker, MarkerSet};
use lumen_server::{router, AppState, ManualClock, Scene, SceneStore};
use nalgebra::{Point3, Vector3};
use serde_json::Value;
use tower::ServiceExt;

pub const RADIUS: f64 = 0.025;

/// Straight tube along +x, 0.3 m long, with one marker on the axis at
/// x = 0.12 and one 12 mm below the axis at x = 0.2.
pub fn tube_scene() -> Scene {
    let spec = PhantomSpec {
        length: 0.3,
        rings: 40,
        segments: 32,
        ..PhantomSpec::straight_tube()
    };
    let mesh = generate_phantom(&spec).unwrap().mesh;
    let pts: Vec<_> = (0..=100)
        .map(|i| Point3::new(0.01 + 0.28 * i as f64 / 100.0, 0.0, 0.0))
        .collect();
    let path = CenterlinePath::from_polyline(&pts, 0.005, 0, 0.5).unwrap();
    let markers = MarkerSet {
        id: "tube-markers".into(),
        markers: vec![
            Marker::standard(1, Point3::new(0.12, 0.0, 0.0), Vector3::y()),
            Marker::standard(2, Point3::new(0.2, 0.0, -0.012), Vector3::x()),
        ],
    };
    Scene::new("tube", mesh, path, markers).unwrap()
}

pub struct TestApp {
    pub state: Arc<AppState>,
    pub clock: Arc<ManualClock>,
    pub router: Router,
}

pub fn app(logs: Option<PathBuf>) -> TestApp {
    let mut scenes = SceneStore::new();
    scenes.insert(tube_scene());
    let clock = Arc::new(ManualClock::default());
    let state = Arc::new(AppState::new(scenes, logs, clock.clone()));
    TestApp {
        router: router(state.clone()),
        state,
        clock,
    }
}

impl TestApp {
    pub async fn call(
        &self,
        method: &str,
        uri: &str,
        body: Option<Value>,
    ) -> (StatusCode, Vec<u8>) {
        let mut req = Request::builder().method(method).uri(uri);
        let body = match body {
            Some(v) => {
                req = req.header("content-type", "application/json");
                Body::from(v.to_string())
            }
            None => Body::empty(),
        };
        let resp = self
            .router
            .clone()
            .oneshot(req.body(body).unwrap())
            .await
            .unwrap();
        let status = resp.status();
        (
            status,
            resp.into_body()
                .collect()
                .await
                .unwrap()
                .to_bytes()
                .to_vec(),
        )
    }

    pub async fn json(&self, method: &str, uri: &str, body: Option<Value>) -> (StatusCode, Value) {
        let (status, bytes) = self.call(method, uri, body).await;
        (
            status,
            serde_json::from_slice(&bytes).unwrap_or(Value::Null),
        )
    }

    pub async fn create(&self, subject: &str, technique: Option<&str>) -> (StatusCode, Value) {
        let mut body = serde_json::json!({ "subject": subject, "scene": "tube" });
        if let Some(t) = technique {
            body["technique"] = t.into();
        }
        self.json("POST", "/sessions", Some(body)).await
    }

    pub async fn input(&self, id: &str, body: Value) -> (StatusCode, Value) {
        self.json("POST", &format!("/sessions/{id}/input"), Some(body))
            .await
    }
}
