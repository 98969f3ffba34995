//! Ray-cast visibility: BVH queries, per-station coverage sweeps and
//! marker detectability.

mod bvh;
mod coverage;
mod marker;

use thiserror::Error;

pub use bvh::{intersect_triangle, Bvh, Hit, DEFAULT_LEAF_CAPACITY, T_MIN};
pub use coverage::{
    check_path_in_mesh, marker_visibility, sample_visible, stations, sweep_coverage, sweep_poses,
    visible_set, CoverageReport, Directions, FaceFlags, HeadModel, MarkerResult, SweepParams,
    DEFAULT_GRID,
};
pub use marker::{Marker, MarkerSet, DEFAULT_MARKER_LENGTH, DEFAULT_MARKER_RADIUS, MARKER_SAMPLES};

#[derive(Debug, Error, PartialEq)]
pub enum VisibilityError {
    #[error("mesh has no faces")]
    EmptyMesh,
    #[error("marker {0} has a non-positive radius or non-finite endpoints")]
    InvalidMarker(u32),
    #[error("path does not lie in this mesh: {0}")]
    Mismatch(String),
    #[error("invalid sweep parameters: {0}")]
    InvalidParams(String),
    #[error(transparent)]
    Travel(#[from] crate::travel::TravelError),
}
