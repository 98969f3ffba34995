//! Centerline extraction, path-constrained camera travel, ray-cast
//! visibility and study statistics for virtual colonography on tubular
//! triangle meshes.
//!
//! The pipeline runs mesh ([`mesh`]) → curve skeleton ([`skeleton`]) →
//! framed centerline ([`path`]) → camera policies ([`travel`]) →
//! coverage and marker detectability ([`visibility`]), with session logs
//! reduced by [`analytics`].

pub mod analytics;
pub mod mesh;
pub mod path;
pub mod skeleton;
pub mod travel;
pub mod visibility;
