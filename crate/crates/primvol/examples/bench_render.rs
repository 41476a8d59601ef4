//! Times repeated renders of a mid-sized subject and reports ms/frame.
//!
//! Run with `cargo run --release --example bench_render`. Pass a repeat
//! count as the first argument (default 20).

use primvol::apps::make_synthetic_subject;
use primvol::renderer::{render, MarchConfig};
use std::time::Instant;

fn main() -> primvol::Result<()> {
    let repeat: usize = std::env::args()
        .nth(1)
        .map(|s| s.parse().expect("repeat count must be a positive integer"))
        .unwrap_or(20);

    let subject = make_synthetic_subject(13, 16, 4, 1, 256)?;
    let camera = &subject.views.cameras[0];
    let march = MarchConfig::for_set(&subject.gt_set);

    // One warmup render keeps one-time setup out of the timings.
    std::hint::black_box(render(&subject.gt_set, camera, &march)?);

    let start = Instant::now();
    for _ in 0..repeat {
        std::hint::black_box(render(&subject.gt_set, camera, &march)?);
    }
    let ms = start.elapsed().as_secs_f64() * 1000.0 / repeat as f64;
    println!(
        "{} primitives at {}x{}: {:.2} ms/frame ({:.2} FPS) over {repeat} renders",
        subject.gt_set.count(),
        camera.width,
        camera.height,
        ms,
        1000.0 / ms
    );
    Ok(())
}
