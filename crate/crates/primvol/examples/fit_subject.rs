//! Fits a primitive set to a synthetic capture by inverse rendering and
//! reports reconstruction quality on a held-out view.
//!
//! The capture has seven views; six drive the fit and the seventh is only
//! used for evaluation. Run with `cargo run --release --example fit_subject`.

use primvol::apps::make_synthetic_subject;
use primvol::body::init_primitive_frames;
use primvol::fitting::{fit_subject, psnr, FitConfig, MultiViewSample};
use primvol::renderer::{render, MarchConfig};

fn main() -> primvol::Result<()> {
    let subject = make_synthetic_subject(3, 6, 4, 7, 64)?;
    let held_out = subject.views.cameras.len() - 1;

    let train = MultiViewSample {
        images: subject.views.images[..held_out].to_vec(),
        masks: subject.views.masks[..held_out].to_vec(),
        cameras: subject.views.cameras[..held_out].to_vec(),
        pose: subject.views.pose.clone(),
    };

    let frames = init_primitive_frames(&subject.mesh, 6)?;
    let cfg = FitConfig { iterations: 300, seed: 1, ..FitConfig::default() };
    println!(
        "fitting {} primitives to {} views for {} iterations...",
        frames.frames.len(),
        train.cameras.len(),
        cfg.iterations
    );
    let result = fit_subject(&train, &subject.mesh, &frames, &cfg)?;

    let first = result.trace.first().expect("trace is never empty");
    let last = result.trace.last().expect("trace is never empty");
    println!("loss: {:.5} -> {:.5} over {} rows", first.total, last.total, result.trace.len());

    let march = MarchConfig::for_set(&result.set);
    let eval = render(&result.set, &subject.views.cameras[held_out], &march)?;
    let db = psnr(&eval.rgb, &subject.views.images[held_out])?;
    println!("held-out view PSNR: {db:.2} dB");
    Ok(())
}
