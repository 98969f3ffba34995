//! Laplacian mesh contraction toward the medial axis.
//!
//! Each iteration minimizes `‖w_L·L·V′‖² + ‖w_H·(V′ − V)‖²` with a fresh
//! cotangent Laplacian `L`, i.e. solves `(w_L²·L² + w_H²·I)·V′ = w_H²·V`
//! per coordinate, then multiplies `w_L` by the growth factor.

use std::f64::consts::PI;

use nalgebra::Point3;
use tracing::debug;

use super::sparse::{conjugate_gradient, cotangent_laplacian};
use super::SkeletonError;
use crate::mesh::TriMesh;

const CG_TOLERANCE: f64 = 1e-9;
const CG_MAX_ITERATIONS: usize = 200_000;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ContractionParams {
    /// Initial contraction weight `w_L`.
    pub contraction_weight: f64,
    /// Attraction weight `w_H`.
    pub attraction_weight: f64,
    pub growth: f64,
    pub max_iterations: usize,
    /// Stop once enclosed volume / reference volume falls below this.
    pub volume_ratio: f64,
}

impl ContractionParams {
    /// Defaults scaled to the mesh: `w_L = 10⁻³·√(mean face area)`.
    pub fn for_mesh(mesh: &TriMesh) -> Self {
        let mean_area = mesh.total_area() / mesh.face_count().max(1) as f64;
        Self {
            contraction_weight: 1e-3 * mean_area.sqrt(),
            attraction_weight: 1.0,
            growth: 2.0,
            max_iterations: 30,
            volume_ratio: 1e-5,
        }
    }

    pub fn validate(&self) -> Result<(), SkeletonError> {
        let ok = self.contraction_weight > 0.0
            && self.attraction_weight > 0.0
            && self.growth > 1.0
            && self.max_iterations >= 1
            && self.volume_ratio > 0.0;
        if ok {
            Ok(())
        } else {
            Err(SkeletonError::InvalidParams(format!("{self:?}")))
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ContractionReport {
    /// Linear solves performed.
    pub iterations: usize,
    pub converged: bool,
    /// Surface area before the first solve and after each one.
    pub areas: Vec<f64>,
    /// Volume ratio before the first solve and after each one.
    pub volume_ratios: Vec<f64>,
    pub cg_iterations: Vec<usize>,
}

#[derive(Debug, Clone)]
pub struct Contraction {
    pub mesh: TriMesh,
    pub report: ContractionReport,
}

/// Volume of the sphere whose surface area equals `area`.
///
/// Used as the volume reference instead of the input's own volume so that an
/// input that already encloses (almost) nothing reports a tiny ratio rather
/// than 0/0.
pub fn reference_volume(area: f64) -> f64 {
    area.powf(1.5) / (6.0 * PI.sqrt())
}

pub fn check_input(mesh: &TriMesh) -> Result<(), SkeletonError> {
    if !mesh.is_watertight() {
        let open = mesh
            .undirected_edges()
            .values()
            .filter(|&&n| n != 2)
            .count();
        return Err(SkeletonError::NotWatertight { bad_edges: open });
    }
    let components = mesh.connected_components();
    if components != 1 {
        return Err(SkeletonError::NotConnected { components });
    }
    Ok(())
}

pub fn contract(mesh: &TriMesh, params: &ContractionParams) -> Result<Contraction, SkeletonError> {
    params.validate()?;
    check_input(mesh)?;
    let n = mesh.vertex_count();
    let v_ref = reference_volume(mesh.total_area());
    let ratio = |m: &TriMesh| m.signed_volume().abs() / v_ref;

    let mut current = mesh.clone();
    let mut report = ContractionReport {
        iterations: 0,
        converged: false,
        areas: vec![current.total_area()],
        volume_ratios: vec![ratio(&current)],
        cg_iterations: Vec::new(),
    };
    let mut w_l = params.contraction_weight;
    let w_h2 = params.attraction_weight * params.attraction_weight;

    for iteration in 1..=params.max_iterations {
        if *report.volume_ratios.last().unwrap() < params.volume_ratio {
            report.converged = true;
            break;
        }
        let lap = cotangent_laplacian(&current);
        let w_l2 = w_l * w_l;
        let diag: Vec<f64> = lap
            .gram_diagonal()
            .iter()
            .map(|d| w_l2 * d + w_h2)
            .collect();
        let mut tmp = vec![0.0; n];
        let apply = |x: &[f64], y: &mut [f64]| {
            let mut t = vec![0.0; n];
            lap.mul_vec(x, &mut t);
            lap.mul_vec(&t, y);
            for i in 0..n {
                y[i] = w_l2 * y[i] + w_h2 * x[i];
            }
        };

        let mut next = current.vertices().to_vec();
        let mut cg_total = 0;
        for axis in 0..3 {
            let b: Vec<f64> = current.vertices().iter().map(|p| w_h2 * p[axis]).collect();
            for (t, p) in tmp.iter_mut().zip(current.vertices()) {
                *t = p[axis];
            }
            let out =
                conjugate_gradient(&apply, &diag, &b, &mut tmp, CG_TOLERANCE, CG_MAX_ITERATIONS);
            if !out.converged || tmp.iter().any(|x| !x.is_finite()) {
                return Err(SkeletonError::SolveFailed {
                    iteration,
                    residual: out.relative_residual,
                });
            }
            cg_total += out.iterations;
            for (p, &x) in next.iter_mut().zip(&tmp) {
                p[axis] = x;
            }
        }

        current = current.with_positions(next);
        report.iterations = iteration;
        report.areas.push(current.total_area());
        report.volume_ratios.push(ratio(&current));
        report.cg_iterations.push(cg_total);
        debug!(
            iteration,
            w_l,
            area = current.total_area(),
            ratio = report.volume_ratios.last().unwrap(),
            cg = cg_total,
            "contraction step"
        );
        w_l *= params.growth;
    }
    if *report.volume_ratios.last().unwrap() < params.volume_ratio {
        report.converged = true;
    }
    Ok(Contraction {
        mesh: current,
        report,
    })
}

/// Largest distance from any vertex to the segment `a`–`b`.
pub fn max_distance_to_segment(points: &[Point3<f64>], a: &Point3<f64>, b: &Point3<f64>) -> f64 {
    let ab = b - a;
    points
        .iter()
        .map(|p| {
            let u = ((p - a).dot(&ab) / ab.norm_squared()).clamp(0.0, 1.0);
            (p - (a + u * ab)).norm()
        })
        .fold(0.0, f64::max)
}
