//! Curve-skeleton extraction: Laplacian contraction, clustering into a
//! graph, and selection of the longest geodesic as the centerline.

mod centering;
mod centerline;
mod collapse;
mod contract;
mod graph;
pub mod sparse;

use nalgebra::Point3;
use thiserror::Error;

use crate::path::PathError;

pub use centering::{center_in_plane, recenter_polyline, track_ends};
pub use centerline::{extract_centerline, Centerline, CenterlineParams};
pub use collapse::collapse_to_skeleton;
pub use contract::{
    check_input, contract, max_distance_to_segment, reference_volume, Contraction,
    ContractionParams, ContractionReport,
};
pub use graph::{extract_path, extract_path_indices};

#[derive(Debug, Error, PartialEq)]
pub enum SkeletonError {
    #[error("mesh is not watertight ({bad_edges} edges without exactly two faces)")]
    NotWatertight { bad_edges: usize },
    #[error("mesh not connected ({components} components)")]
    NotConnected { components: usize },
    #[error("linear solve failed at iteration {iteration} (relative residual {residual:e})")]
    SolveFailed { iteration: usize, residual: f64 },
    #[error("spacing {spacing} m exceeds mesh extent {extent} m")]
    SpacingTooLarge { spacing: f64, extent: f64 },
    #[error("no tubular structure")]
    NoTubularStructure,
    #[error("invalid parameters: {0}")]
    InvalidParams(String),
    #[error("bad endpoints: {0}")]
    BadEndpoints(String),
    #[error(transparent)]
    Path(#[from] PathError),
}

/// Skeleton nodes with their mean distance to the original surface.
#[derive(Debug, Clone, PartialEq)]
pub struct SkeletonGraph {
    pub nodes: Vec<Point3<f64>>,
    pub radii: Vec<f64>,
    /// `(a, b)` with `a < b`, sorted, no duplicates.
    pub edges: Vec<(usize, usize)>,
    /// Node index of every mesh vertex (`usize::MAX` for isolated vertices).
    pub membership: Vec<usize>,
}
