//! Capsule-shaped lesion markers.

use nalgebra::{Point3, Vector3};
use serde::{Deserialize, Serialize};

use super::VisibilityError;

pub const DEFAULT_MARKER_LENGTH: f64 = 0.03;
pub const DEFAULT_MARKER_RADIUS: f64 = 0.005;
/// Surface points tested per marker.
pub const MARKER_SAMPLES: usize = 26;

/// Capsule: all points within `radius` of the segment `a`–`b`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Marker {
    pub id: u32,
    pub a: Point3<f64>,
    pub b: Point3<f64>,
    pub radius: f64,
}

/// A named set of markers, as stored in `markers.json`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MarkerSet {
    pub id: String,
    pub markers: Vec<Marker>,
}

impl Marker {
    /// Capsule centered at `center` with its segment along `axis`.
    pub fn new(id: u32, center: Point3<f64>, axis: Vector3<f64>, length: f64, radius: f64) -> Self {
        let u = axis.try_normalize(0.0).unwrap_or_else(Vector3::x);
        let h = 0.5 * length * u;
        Self {
            id,
            a: center - h,
            b: center + h,
            radius,
        }
    }

    /// Default 3 cm × 5 mm capsule.
    pub fn standard(id: u32, center: Point3<f64>, axis: Vector3<f64>) -> Self {
        Self::new(
            id,
            center,
            axis,
            DEFAULT_MARKER_LENGTH,
            DEFAULT_MARKER_RADIUS,
        )
    }

    pub fn validate(&self) -> Result<(), VisibilityError> {
        let finite = self.a.iter().chain(self.b.iter()).all(|x| x.is_finite());
        if finite && self.radius > 0.0 && self.radius.is_finite() {
            Ok(())
        } else {
            Err(VisibilityError::InvalidMarker(self.id))
        }
    }

    pub fn center(&self) -> Point3<f64> {
        Point3::from((self.a.coords + self.b.coords) / 2.0)
    }

    pub fn length(&self) -> f64 {
        (self.b - self.a).norm()
    }

    /// Signed distance from `p` to the capsule surface.
    pub fn distance(&self, p: &Point3<f64>) -> f64 {
        let ab = self.b - self.a;
        let l2 = ab.norm_squared();
        let u = if l2 > 0.0 {
            ((p - self.a).dot(&ab) / l2).clamp(0.0, 1.0)
        } else {
            0.0
        };
        (p - (self.a + u * ab)).norm() - self.radius
    }

    fn basis(&self) -> (Vector3<f64>, Vector3<f64>, Vector3<f64>) {
        let u = (self.b - self.a)
            .try_normalize(0.0)
            .unwrap_or_else(Vector3::x);
        let helper = if u.x.abs() < 0.9 {
            Vector3::x()
        } else {
            Vector3::y()
        };
        let e1 = u.cross(&helper).normalize();
        (u, e1, u.cross(&e1))
    }

    /// Surface samples with outward normals: both poles, a ring of 8 on
    /// the cylinder midline and a ring of 8 at 45° latitude on each cap.
    pub fn surface_samples(&self) -> Vec<(Point3<f64>, Vector3<f64>)> {
        let (u, e1, e2) = self.basis();
        let r = self.radius;
        let c = self.center();
        let mut out = Vec::with_capacity(MARKER_SAMPLES);
        out.push((self.a - r * u, -u));
        out.push((self.b + r * u, u));
        let h = std::f64::consts::FRAC_1_SQRT_2;
        for k in 0..8 {
            let th = std::f64::consts::TAU * k as f64 / 8.0;
            let radial = th.cos() * e1 + th.sin() * e2;
            out.push((c + r * radial, radial));
            let na = (-h * u + h * radial).normalize();
            out.push((self.a + r * na, na));
            let nb = (h * u + h * radial).normalize();
            out.push((self.b + r * nb, nb));
        }
        out
    }
}
