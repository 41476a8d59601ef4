//! Renders a subject from a ring of cameras and writes a PNG per view,
//! producing a turntable when the frames are played in order.
//!
//! Run with `cargo run --release --example render_turntable`.

use primvol::apps::{make_synthetic_subject, ring_cameras, save_png};
use primvol::renderer::{render, MarchConfig};

fn main() -> primvol::Result<()> {
    let dir = std::env::temp_dir().join("primvol-turntable");
    std::fs::create_dir_all(&dir).map_err(|e| primvol::Error::io(&dir, e))?;

    let subject = make_synthetic_subject(11, 8, 4, 1, 96)?;
    let cameras = ring_cameras(12, 160);
    let march = MarchConfig::for_set(&subject.gt_set);

    for (i, camera) in cameras.iter().enumerate() {
        let out = render(&subject.gt_set, camera, &march)?;
        let path = dir.join(format!("turn_{i:03}.png"));
        save_png(&path, out.width, out.height, &out.rgb)?;
        println!("{} (mean alpha {:.3})", path.display(), mean(&out.alpha));
    }
    Ok(())
}

fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}
