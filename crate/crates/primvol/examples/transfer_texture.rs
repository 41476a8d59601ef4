//! Moves one subject's color payloads onto another subject's geometry and
//! shows that only appearance changes: alpha and depth images match the
//! target's originals because occupancy lives in the density payload.
//!
//! Run with `cargo run --release --example transfer_texture`.

use primvol::apps::{make_synthetic_subject, ring_cameras, save_png, transfer_texture};
use primvol::renderer::{render, MarchConfig};

fn main() -> primvol::Result<()> {
    let dir = std::env::temp_dir().join("primvol-transfer");
    std::fs::create_dir_all(&dir).map_err(|e| primvol::Error::io(&dir, e))?;

    let source = make_synthetic_subject(41, 6, 4, 1, 64)?;
    let target = make_synthetic_subject(42, 6, 4, 1, 64)?;
    let dressed = transfer_texture(&source.gt_set, &target.gt_set)?;

    let camera = &ring_cameras(1, 160)[0];
    let march = MarchConfig::for_set(&target.gt_set);
    let before = render(&target.gt_set, camera, &march)?;
    let after = render(&dressed, camera, &march)?;

    let max_abs =
        |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max);
    println!("alpha difference: {:.2e}", max_abs(&before.alpha, &after.alpha));
    println!("depth difference: {:.2e}", max_abs(&before.depth, &after.depth));
    println!("color difference: {:.3}", max_abs(&before.rgb, &after.rgb));

    save_png(dir.join("target_before.png"), before.width, before.height, &before.rgb)?;
    save_png(dir.join("target_after.png"), after.width, after.height, &after.rgb)?;
    println!("wrote before/after previews to {}", dir.display());
    Ok(())
}
