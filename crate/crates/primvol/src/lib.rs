//! Volumetric-primitive 3D human bodies.
//!
//! A subject is a set of K small oriented volumes riding on a skinned body
//! mesh. Each primitive carries voxel payloads (RGB color, density, and a
//! per-axis scale correction), and the whole set is rendered by direct
//! volumetric ray marching, so there is no neural decoder anywhere in the
//! pipeline. The same primitive set flattens into a 2D-tensor layout suitable
//! for denoising-diffusion training and sampling, and the voxel payloads are
//! fit per subject by inverse rendering with analytically derived gradients.
//!
//! Module map:
//! - [`math`]: small f64 vector/quaternion types.
//! - [`body`]: rigged mesh I/O, a procedural toy body, linear blend
//!   skinning, and primitive frame attachment on the mesh surface.
//! - [`renderer`]: cameras, a BVH over primitive bounds, and the
//!   differentiable ray marcher.
//! - [`fitting`]: photometric losses, the hand-written backward pass, and
//!   the Adam loop that fits payloads to posed multi-view images.
//! - [`diffusion`]: primitive-set packing into a normalized tensor, the
//!   noising schedule, and ancestral sampling with optional inpainting.
//! - [`apps`]: file formats, synthetic data generation, texture transfer,
//!   run manifests, and the command-line entry point.

pub mod apps;
pub mod body;
pub mod diffusion;
mod error;
pub mod fitting;
mod fsutil;
pub mod math;
pub mod renderer;

pub use error::{Error, Result};
