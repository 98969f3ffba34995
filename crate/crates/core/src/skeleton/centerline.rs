//! Mesh → framed centerline pipeline.

use nalgebra::Point3;

use super::{
    collapse_to_skeleton, contract, extract_path_indices, recenter_polyline, track_ends,
    ContractionParams, ContractionReport, SkeletonError, SkeletonGraph,
};
use crate::mesh::TriMesh;
use crate::path::{
    attach_frames, polyline_length, reparameterize, smooth, CenterlinePath, DEFAULT_DS,
    DEFAULT_SMOOTH_ITERATIONS, DEFAULT_SMOOTH_LAMBDA,
};
use crate::visibility::Bvh;

/// Smoothing runs on the raw polyline resampled at `ds / SMOOTHING_DENSITY`.
/// Laplacian smoothing pulls a curve of radius R inward by about
/// λ·h²/(2R) per pass at point spacing h, so it has to run on a dense
/// polyline to keep bends in place.
pub const SMOOTHING_DENSITY: f64 = 4.0;

#[derive(Debug, Clone, PartialEq)]
pub struct CenterlineParams {
    /// `None` derives defaults from the mesh.
    pub contraction: Option<ContractionParams>,
    /// Cluster spacing; `None` means 1.5 × mean edge length.
    pub spacing: Option<f64>,
    /// Mesh vertex indices to use as the two path ends instead of the
    /// longest geodesic.
    pub endpoints: Option<(usize, usize)>,
    pub ds: f64,
    pub smooth_iterations: usize,
    pub smooth_lambda: f64,
}

impl Default for CenterlineParams {
    fn default() -> Self {
        Self {
            contraction: None,
            spacing: None,
            endpoints: None,
            ds: DEFAULT_DS,
            smooth_iterations: DEFAULT_SMOOTH_ITERATIONS,
            smooth_lambda: DEFAULT_SMOOTH_LAMBDA,
        }
    }
}

#[derive(Debug, Clone)]
pub struct Centerline {
    pub path: CenterlinePath,
    /// Recentered polyline with tracked ends, before smoothing.
    pub raw: Vec<Point3<f64>>,
    pub graph: SkeletonGraph,
    pub report: ContractionReport,
}

pub fn extract_centerline(
    mesh: &TriMesh,
    params: &CenterlineParams,
) -> Result<Centerline, SkeletonError> {
    let cparams = params
        .contraction
        .unwrap_or_else(|| ContractionParams::for_mesh(mesh));
    let contracted = contract(mesh, &cparams)?;
    let spacing = params.spacing.unwrap_or(1.5 * mesh.mean_edge_length());
    let graph = collapse_to_skeleton(&contracted.mesh, mesh, spacing)?;
    let bvh = Bvh::build(mesh);

    let (nodes, free_ends): (Vec<Point3<f64>>, bool) = match params.endpoints {
        None => (
            extract_path_indices(&graph)?
                .iter()
                .map(|&i| graph.nodes[i])
                .collect(),
            true,
        ),
        Some((i, j)) => {
            let node_of = |v: usize| {
                graph
                    .membership
                    .get(v)
                    .copied()
                    .filter(|&c| c != usize::MAX)
                    .ok_or_else(|| {
                        SkeletonError::BadEndpoints(format!("vertex {v} is not on the mesh"))
                    })
            };
            let (a, b) = (node_of(i)?, node_of(j)?);
            if a == b {
                return Err(SkeletonError::BadEndpoints(format!(
                    "vertices {i} and {j} collapse to the same skeleton node"
                )));
            }
            (
                graph
                    .shortest_path(a, b)?
                    .iter()
                    .map(|&k| graph.nodes[k])
                    .collect(),
                false,
            )
        }
    };

    // Cluster centroids wander off the axis where a cluster splits a ring
    // and retract from the tube ends; recenter against the surface.
    let coarse = reparameterize(&nodes, params.ds.min(polyline_length(&nodes)))?;
    let mut raw = recenter_polyline(&coarse.positions, &bvh);
    if free_ends {
        track_ends(&mut raw, &bvh);
    }
    raw.dedup_by(|a, b| (*a - *b).norm() == 0.0);

    let dense = reparameterize(&raw, params.ds / SMOOTHING_DENSITY)?;
    let smoothed = smooth(
        &dense.positions,
        params.smooth_iterations,
        params.smooth_lambda,
    );
    let path = attach_frames(&reparameterize(&smoothed, params.ds)?)?;
    Ok(Centerline {
        path,
        raw,
        graph,
        report: contracted.report,
    })
}
