//! Re-poses a fitted subject along a short joint-swing sequence and renders
//! each frame from a fixed camera. Voxel payloads travel with the
//! primitives, so the texture stays attached while the body moves.
//!
//! Run with `cargo run --release --example animate_pose`.

use primvol::apps::{make_synthetic_subject, ring_cameras, save_png};
use primvol::body::{init_primitive_frames, Pose};
use primvol::math::Vec3;
use primvol::renderer::{render_sequence, MarchConfig, SequenceDriver};

fn main() -> primvol::Result<()> {
    let dir = std::env::temp_dir().join("primvol-animate");
    std::fs::create_dir_all(&dir).map_err(|e| primvol::Error::io(&dir, e))?;

    let subject = make_synthetic_subject(19, 8, 4, 1, 96)?;
    let frames = init_primitive_frames(&subject.mesh, 8)?;
    let camera = &ring_cameras(1, 160)[0];
    let march = MarchConfig::for_set(&subject.gt_set);

    let joint_count = subject.mesh.joints.len();
    let poses: Vec<Pose> = (0..16)
        .map(|f| {
            let phase = 2.0 * std::f64::consts::PI * f as f64 / 16.0;
            let mut pose = Pose::rest(joint_count);
            // Swing two mid-chain joints in opposite directions.
            pose.angles[3] = Vec3::new(0.0, 0.0, 0.45 * phase.sin());
            pose.angles[6] = Vec3::new(0.35 * phase.cos(), 0.0, 0.0);
            pose
        })
        .collect();

    let driver = SequenceDriver::Poses {
        mesh: &subject.mesh,
        frames: &frames,
        camera,
        poses: &poses,
    };
    let rendered = render_sequence(&subject.gt_set, driver, &march)?;
    for (f, out) in rendered.iter().enumerate() {
        save_png(dir.join(format!("frame_{f:03}.png")), out.width, out.height, &out.rgb)?;
    }
    println!("wrote {} frames to {}", rendered.len(), dir.display());
    Ok(())
}
