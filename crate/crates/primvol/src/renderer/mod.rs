//! Differentiable volume renderer for oriented-box primitives.
//!
//! The scene is a set of scaled, rotated boxes, each carrying voxel grids of
//! color and density. Rays gather overlap intervals from a BVH, march them
//! with fixed-step midpoint quadrature, and composite front to back. There
//! is no shading model: pixels integrate exactly what the payloads store,
//! which keeps the pipeline differentiable with respect to every payload
//! voxel and per-primitive scale.

pub(crate) mod bvh;
pub(crate) mod camera;
pub(crate) mod march;
pub(crate) mod sampling;
pub(crate) mod set;

pub use bvh::{intersect_brute, Bvh, Interval, MAX_LEAF_SIZE};
pub use camera::{generate_rays, Camera, Ray};
pub use march::{
    render, render_sequence, MarchConfig, RenderOutput, SequenceDriver, DEPTH_SENTINEL_ALPHA,
};
pub use sampling::sample_field;
pub use set::PrimitiveSet;
