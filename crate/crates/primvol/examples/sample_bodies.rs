//! Draws new subject tensors by reverse diffusion over a tiny dataset of
//! fitted bodies, then unpacks one sample onto a mesh and renders it.
//!
//! The denoiser is a nearest-neighbor estimate of the clean tensor, so
//! ancestral sampling lands on (a noisy neighborhood of) dataset items;
//! swapping in a learned denoiser changes nothing else in the loop.
//!
//! Run with `cargo run --release --example sample_bodies`.

use primvol::apps::{make_synthetic_subject, ring_cameras, save_png};
use primvol::body::{init_primitive_frames, lbs_pose, Pose};
use primvol::diffusion::{
    make_schedule, pack, sample, unpack, NearestNeighborDenoiser, Normalization,
};
use primvol::renderer::{render, MarchConfig};
use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;

fn main() -> primvol::Result<()> {
    let dir = std::env::temp_dir().join("primvol-sample");
    std::fs::create_dir_all(&dir).map_err(|e| primvol::Error::io(&dir, e))?;

    let norm = Normalization::default();
    let subjects: Vec<_> = [21u64, 22, 23]
        .iter()
        .map(|&seed| make_synthetic_subject(seed, 4, 4, 1, 64))
        .collect::<primvol::Result<_>>()?;
    let dataset: Vec<_> =
        subjects.iter().map(|s| pack(&s.gt_set, &norm)).collect::<primvol::Result<_>>()?;

    let denoiser = NearestNeighborDenoiser::new(dataset.clone())?;
    let schedule = make_schedule(60, 1e-3, 0.25)?;

    for draw in 0..2u64 {
        let mut rng = ChaCha12Rng::seed_from_u64(100 + draw);
        let tensor = sample(&denoiser, &schedule, 4, 4, &mut rng)?;

        let (item, dist) = dataset
            .iter()
            .enumerate()
            .map(|(i, d)| {
                let sq: f64 =
                    tensor.data().iter().zip(d.data()).map(|(a, b)| (a - b) * (a - b)).sum();
                (i, sq.sqrt())
            })
            .min_by(|a, b| a.1.total_cmp(&b.1))
            .expect("dataset is nonempty");
        println!("draw {draw}: nearest dataset item {item} at L2 distance {dist:.4}");

        // Attach the sampled payloads to the first subject's body and render.
        let host = &subjects[0];
        let frames = init_primitive_frames(&host.mesh, 4)?;
        let posed = lbs_pose(&host.mesh, &Pose::rest(host.mesh.joints.len()))?;
        let set = unpack(&tensor, &frames, &posed, &norm)?;
        let out = render(&set, &ring_cameras(1, 128)[0], &MarchConfig::for_set(&set))?;
        let path = dir.join(format!("draw_{draw}.png"));
        save_png(&path, out.width, out.height, &out.rgb)?;
        println!("  rendered to {}", path.display());
    }
    Ok(())
}
