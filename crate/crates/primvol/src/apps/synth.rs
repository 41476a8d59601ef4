//! Self-consistent synthetic capture data: a toy body with procedurally
//! textured payloads, rendered from a camera ring. Everything stored is
//! quantized through f32 first, so the dataset a fit reads back from disk
//! re-renders bitwise from the ground-truth set saved next to it.

use std::path::Path;

use rand::prelude::*;
use rand_chacha::ChaCha12Rng;

use crate::body::{
    init_primitive_frames, lbs_pose, load_pose, load_rigged_mesh, make_toy_body, pose_primitives,
    save_pose, save_rigged_mesh, Pose, RiggedMesh,
};
use crate::error::{Error, Result};
use crate::fitting::MultiViewSample;
use crate::math::Vec3;
use crate::renderer::{render, Camera, MarchConfig, PrimitiveSet};

use super::formats::{
    load_cameras, load_pfm, quantize_set, save_cameras, save_pfm, save_png, save_primitive_set,
};

pub struct SyntheticSubject {
    pub mesh: RiggedMesh,
    pub gt_set: PrimitiveSet,
    pub views: MultiViewSample,
    pub seed: u64,
}

/// Evenly spaced cameras on a ring around the body, all aimed at the
/// torso.
pub fn ring_cameras(count: usize, resolution: usize) -> Vec<Camera> {
    (0..count)
        .map(|i| {
            let az = 2.0 * std::f64::consts::PI * i as f64 / count as f64;
            Camera::look_at(
                Vec3::new(2.2 * az.sin(), 1.0, 2.2 * az.cos()),
                Vec3::new(0.0, 0.9, 0.0),
                Vec3::Y,
                resolution,
                resolution,
                0.9,
                0.1,
                10.0,
            )
        })
        .collect()
}

fn trilinear_corners(corners: &[f64; 8], fx: f64, fy: f64, fz: f64) -> f64 {
    let lerp = |a: f64, b: f64, t: f64| a + (b - a) * t;
    let c00 = lerp(corners[0], corners[1], fz);
    let c01 = lerp(corners[2], corners[3], fz);
    let c10 = lerp(corners[4], corners[5], fz);
    let c11 = lerp(corners[6], corners[7], fz);
    lerp(lerp(c00, c01, fy), lerp(c10, c11, fy), fx)
}

/// Builds the subject: toy body, primitive frames at rest pose, smooth
/// random payload fields (per-primitive corner noise interpolated across
/// the voxel grid), and `n_views` ring renders with masks taken from the
/// rendered alpha. Deterministic per seed.
pub fn make_synthetic_subject(
    seed: u64,
    grid_width: usize,
    payload_res: usize,
    n_views: usize,
    resolution: usize,
) -> Result<SyntheticSubject> {
    if n_views < 1 {
        return Err(Error::validation("need at least one view"));
    }
    if resolution < 8 {
        return Err(Error::validation(format!("resolution {resolution} is below the minimum of 8")));
    }
    let mesh = make_toy_body(10, 8, seed);
    let frames = init_primitive_frames(&mesh, grid_width)?;
    let pose = Pose::rest(mesh.joints.len());
    let posed = lbs_pose(&mesh, &pose)?;
    let kin = pose_primitives(&frames, &posed, &vec![Vec3::ONE; frames.count()])?;

    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    let k = frames.count();
    let s = payload_res;
    let s3 = s * s * s;
    let mut color = vec![0.0; k * 3 * s3];
    let mut density = vec![0.0; k * s3];
    let span = (s - 1).max(1) as f64;
    for prim in 0..k {
        let color_corners: [[f64; 8]; 3] =
            std::array::from_fn(|_| std::array::from_fn(|_| rng.random_range(0.15..0.85)));
        let density_corners: [f64; 8] = std::array::from_fn(|_| rng.random_range(30.0..80.0));
        for x in 0..s {
            for y in 0..s {
                for z in 0..s {
                    let vox = (x * s + y) * s + z;
                    let (fx, fy, fz) = (x as f64 / span, y as f64 / span, z as f64 / span);
                    for ch in 0..3 {
                        color[(prim * 3 + ch) * s3 + vox] =
                            trilinear_corners(&color_corners[ch], fx, fy, fz);
                    }
                    density[prim * s3 + vox] = trilinear_corners(&density_corners, fx, fy, fz);
                }
            }
        }
    }

    let gt_set = quantize_set(&PrimitiveSet {
        grid_width,
        payload_res,
        kin,
        color,
        density,
    });
    gt_set.validate()?;

    let cameras = ring_cameras(n_views, resolution);
    let march = MarchConfig::for_set(&gt_set);
    let mut images = Vec::with_capacity(n_views);
    let mut masks = Vec::with_capacity(n_views);
    for camera in &cameras {
        let out = render(&gt_set, camera, &march)?;
        images.push(out.rgb.iter().map(|&v| v as f32 as f64).collect());
        masks.push(out.alpha.iter().map(|&v| v as f32 as f64).collect());
    }
    let views = MultiViewSample { images, masks, cameras, pose };
    views.validate()?;
    Ok(SyntheticSubject { mesh, gt_set, views, seed })
}

/// Writes the dataset directory: mesh, pose, cameras, ground-truth set,
/// and per view a color PFM, a mask PFM, and a preview PNG.
pub fn save_dataset(dir: impl AsRef<Path>, subject: &SyntheticSubject) -> Result<Vec<String>> {
    let dir = dir.as_ref();
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let mut written = Vec::new();
    let mut record = |p: std::path::PathBuf| {
        let s = p.to_string_lossy().into_owned();
        written.push(s);
        p
    };
    save_rigged_mesh(record(dir.join("mesh.rigmesh")), &subject.mesh)?;
    save_pose(record(dir.join("pose.json")), &subject.views.pose)?;
    save_cameras(record(dir.join("cameras.json")), &subject.views.cameras)?;
    save_primitive_set(record(dir.join("gt.prm")), &subject.gt_set)?;
    for (i, camera) in subject.views.cameras.iter().enumerate() {
        let (w, h) = (camera.width, camera.height);
        save_pfm(record(dir.join(format!("view_{i:03}.pfm"))), w, h, &subject.views.images[i])?;
        save_pfm(record(dir.join(format!("mask_{i:03}.pfm"))), w, h, &subject.views.masks[i])?;
        save_png(record(dir.join(format!("view_{i:03}.png"))), w, h, &subject.views.images[i])?;
    }
    Ok(written)
}

/// Reads back what a fit needs from a dataset directory.
pub fn load_dataset(dir: impl AsRef<Path>) -> Result<(RiggedMesh, MultiViewSample)> {
    let dir = dir.as_ref();
    let mesh = load_rigged_mesh(dir.join("mesh.rigmesh"))?;
    let pose = load_pose(dir.join("pose.json"))?;
    let cameras = load_cameras(dir.join("cameras.json"))?;
    let mut images = Vec::with_capacity(cameras.len());
    let mut masks = Vec::with_capacity(cameras.len());
    for (i, camera) in cameras.iter().enumerate() {
        let img_path = dir.join(format!("view_{i:03}.pfm"));
        let (w, h, ch, data) = load_pfm(&img_path)?;
        if (w, h, ch) != (camera.width, camera.height, 3) {
            return Err(Error::format(
                &img_path,
                format!("got {w}x{h}x{ch}, camera expects {}x{}x3", camera.width, camera.height),
            ));
        }
        images.push(data);
        let mask_path = dir.join(format!("mask_{i:03}.pfm"));
        let (w, h, ch, data) = load_pfm(&mask_path)?;
        if (w, h, ch) != (camera.width, camera.height, 1) {
            return Err(Error::format(
                &mask_path,
                format!("got {w}x{h}x{ch}, camera expects {}x{}x1", camera.width, camera.height),
            ));
        }
        masks.push(data);
    }
    let views = MultiViewSample { images, masks, cameras, pose };
    views.validate()?;
    Ok((mesh, views))
}
