//! Generates a small synthetic multi-view capture and writes it to disk:
//! rigged mesh, rest pose, camera ring, ground-truth primitive set, and
//! per-view PFM images and masks with PNG previews.
//!
//! Run with `cargo run --release --example make_synth`.

use primvol::apps::{make_synthetic_subject, save_dataset};

fn main() -> primvol::Result<()> {
    let dir = std::env::temp_dir().join("primvol-make-synth");
    let subject = make_synthetic_subject(7, 8, 4, 6, 96)?;

    let coverage: f64 = subject.views.masks.iter().flatten().sum::<f64>()
        / subject.views.masks.iter().map(|m| m.len()).sum::<usize>() as f64;
    println!(
        "subject: {} primitives, {} views at 96x96, {:.1}% of pixels covered",
        subject.gt_set.count(),
        subject.views.cameras.len(),
        100.0 * coverage
    );

    let written = save_dataset(&dir, &subject)?;
    println!("wrote {} files to {}", written.len(), dir.display());
    for name in written.iter().take(6) {
        println!("  {name}");
    }
    if written.len() > 6 {
        println!("  ... and {} more", written.len() - 6);
    }
    Ok(())
}
