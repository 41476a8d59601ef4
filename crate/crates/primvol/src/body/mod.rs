//! Rigged body meshes, posing, and primitive attachment.

mod frames;
mod lbs;
mod mesh;
mod toy;

pub use frames::{
    base_scales, init_primitive_frames, pose_primitives, PrimitiveFrame, PrimitiveFrames,
    PrimitiveKinematics,
};
pub use lbs::lbs_pose;
pub use mesh::{load_pose, load_rigged_mesh, save_pose, save_rigged_mesh, Joint, Pose, RiggedMesh};
pub use toy::make_toy_body;
