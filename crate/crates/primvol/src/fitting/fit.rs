//! The per-subject optimization loop.
//!
//! Colors are optimized directly in [0,1], densities through sigma/SIGMA_MAX
//! so one learning rate serves both, and delta scales through their log so
//! they stay positive without constraints. Colors and normalized densities
//! are clamped back to [0,1] after every step; log delta scales are bounded
//! and stepped without adaptive moments (see the loop body for why).

use rayon::prelude::*;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;

use crate::body::{lbs_pose, pose_primitives, Pose, PrimitiveFrames, RiggedMesh};
use crate::error::{Error, Result};
use crate::fitting::backward::{backprop_recorded, replay_ray, Gradients, RayRecorder};
use crate::fitting::loss::{volume_total, LossWeights};
use crate::math::Vec3;
use crate::renderer::bvh::Bvh;
use crate::renderer::march::{Accel, MarchConfig, MarchScratch};
use crate::renderer::set::{PrimitiveSet, SceneView};
use crate::renderer::Camera;

/// Densities above this are clamped away during fitting; it also bounds the
/// density normalization range elsewhere.
pub const SIGMA_MAX: f64 = 500.0;

/// Initial density (1/m): low enough to start translucent, high enough to
/// leave every ray a usable gradient.
pub const SIGMA_INIT: f64 = 5.0;

/// Rays per deterministic reduction chunk inside a minibatch.
const RAY_CHUNK: usize = 256;

/// Bounds on the log delta scales, i.e. delta in [e^-3, e^3].
const LOG_DELTA_RANGE: f64 = 3.0;

#[derive(Clone, Debug, PartialEq)]
pub struct FitConfig {
    pub iterations: usize,
    pub learning_rate: f64,
    pub weights: LossWeights,
    /// Rays per optimization step, drawn uniformly over all views.
    pub batch: usize,
    pub seed: u64,
    /// Voxel resolution S of the fitted payloads.
    pub payload_res: usize,
}

impl Default for FitConfig {
    fn default() -> FitConfig {
        FitConfig {
            iterations: 2000,
            learning_rate: 0.05,
            weights: LossWeights::default(),
            batch: 2048,
            seed: 0,
            payload_res: 4,
        }
    }
}

impl FitConfig {
    pub fn validate(&self) -> Result<()> {
        self.weights.validate()?;
        if !(self.learning_rate > 0.0) || !self.learning_rate.is_finite() {
            return Err(Error::validation(format!(
                "learning rate {} must be positive",
                self.learning_rate
            )));
        }
        if self.batch == 0 {
            return Err(Error::validation("batch must be at least one ray"));
        }
        if self.payload_res < 2 {
            return Err(Error::validation(format!(
                "payload resolution {} is below the minimum of 2",
                self.payload_res
            )));
        }
        Ok(())
    }
}

/// Calibrated multi-view capture of one subject in one pose. Images are
/// H*W*3 and masks H*W, both in [0,1], both composited over black.
#[derive(Clone, Debug)]
pub struct MultiViewSample {
    pub images: Vec<Vec<f64>>,
    pub masks: Vec<Vec<f64>>,
    pub cameras: Vec<Camera>,
    pub pose: Pose,
}

impl MultiViewSample {
    pub fn validate(&self) -> Result<()> {
        if self.cameras.is_empty() {
            return Err(Error::validation("need at least one view"));
        }
        if self.images.len() != self.cameras.len() || self.masks.len() != self.cameras.len() {
            return Err(Error::validation(format!(
                "{} images / {} masks for {} cameras",
                self.images.len(),
                self.masks.len(),
                self.cameras.len()
            )));
        }
        let (w, h) = (self.cameras[0].width, self.cameras[0].height);
        for (i, camera) in self.cameras.iter().enumerate() {
            camera.validate()?;
            if camera.width != w || camera.height != h {
                return Err(Error::validation(format!(
                    "view {i} is {}x{}, expected {w}x{h}",
                    camera.width, camera.height
                )));
            }
            if self.images[i].len() != w * h * 3 {
                return Err(Error::validation(format!(
                    "view {i} image has {} values, expected {}",
                    self.images[i].len(),
                    w * h * 3
                )));
            }
            if self.masks[i].len() != w * h {
                return Err(Error::validation(format!(
                    "view {i} mask has {} values, expected {}",
                    self.masks[i].len(),
                    w * h
                )));
            }
            if self.images[i].iter().chain(&self.masks[i]).any(|v| !(0.0..=1.0).contains(v)) {
                return Err(Error::validation(format!("view {i} has values outside [0,1]")));
            }
        }
        Ok(())
    }
}

/// One optimization step of the loss trace. `total` is weighted; the per
/// term values are raw.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LossRow {
    pub iteration: usize,
    pub total: f64,
    pub rgb: f64,
    pub sil: f64,
    pub vol: f64,
}

#[derive(Clone, Debug)]
pub struct FitResult {
    pub set: PrimitiveSet,
    pub trace: Vec<LossRow>,
}

/// Adaptive-moment state for one parameter vector.
struct Adam {
    m: Vec<f64>,
    v: Vec<f64>,
}

impl Adam {
    const BETA1: f64 = 0.9;
    const BETA2: f64 = 0.999;
    const EPS: f64 = 1e-8;

    fn new(n: usize) -> Adam {
        Adam { m: vec![0.0; n], v: vec![0.0; n] }
    }

    fn step(&mut self, theta: &mut [f64], grad: &[f64], lr: f64, t: i32) {
        let bc1 = 1.0 - Self::BETA1.powi(t);
        let bc2 = 1.0 - Self::BETA2.powi(t);
        for i in 0..theta.len() {
            let g = grad[i];
            self.m[i] = Self::BETA1 * self.m[i] + (1.0 - Self::BETA1) * g;
            self.v[i] = Self::BETA2 * self.v[i] + (1.0 - Self::BETA2) * g * g;
            let m_hat = self.m[i] / bc1;
            let v_hat = self.v[i] / bc2;
            theta[i] -= lr * m_hat / (v_hat.sqrt() + Self::EPS);
        }
    }
}

/// Fits payloads and delta scales to the capture by minibatch gradient
/// descent from a flat initialization (color 0.5, density SIGMA_INIT,
/// delta scale 1). Payloads take adaptive-moment steps; log delta scales
/// take plain gradient steps. Zero iterations return the initialization
/// unchanged.
///
/// The march step and the per-primitive placements' translation/rotation
/// are frozen from the posed rest scales; only payloads and delta scales
/// move. Rays are drawn from a seeded generator and gradients reduced over
/// fixed-size chunks in index order, so a given configuration reproduces
/// its loss trace bitwise regardless of thread count.
pub fn fit_subject(
    data: &MultiViewSample,
    mesh: &RiggedMesh,
    frames: &PrimitiveFrames,
    cfg: &FitConfig,
) -> Result<FitResult> {
    cfg.validate()?;
    data.validate()?;
    let posed = lbs_pose(mesh, &data.pose)?;
    let unit_delta = vec![Vec3::ONE; frames.count()];
    let base_kin = pose_primitives(frames, &posed, &unit_delta)?;

    let k = frames.count();
    let s = cfg.payload_res;
    let s3 = s * s * s;

    let mut color = vec![0.5; k * 3 * s3];
    let mut sigma_norm = vec![SIGMA_INIT / SIGMA_MAX; k * s3];
    let mut log_delta = vec![0.0f64; k * 3];

    let mut set = PrimitiveSet {
        grid_width: frames.grid_width,
        payload_res: s,
        kin: base_kin,
        color: color.clone(),
        density: vec![SIGMA_INIT; k * s3],
    };
    let march = MarchConfig::for_set(&set);

    let mut adam_color = Adam::new(color.len());
    let mut adam_sigma = Adam::new(sigma_norm.len());

    let mut rng = ChaCha12Rng::seed_from_u64(cfg.seed);
    let (width, height) = (data.cameras[0].width, data.cameras[0].height);
    let views = data.cameras.len();

    let mut trace = Vec::with_capacity(cfg.iterations);
    for iteration in 0..cfg.iterations {
        set.color.copy_from_slice(&color);
        for (d, &n) in set.density.iter_mut().zip(&sigma_norm) {
            *d = n * SIGMA_MAX;
        }
        for (i, kin) in set.kin.iter_mut().enumerate() {
            kin.delta_scale = Vec3::new(
                log_delta[i * 3].exp(),
                log_delta[i * 3 + 1].exp(),
                log_delta[i * 3 + 2].exp(),
            );
        }

        let rays: Vec<(usize, usize, usize)> = (0..cfg.batch)
            .map(|_| {
                (
                    rng.random_range(0..views),
                    rng.random_range(0..width),
                    rng.random_range(0..height),
                )
            })
            .collect();

        let view = SceneView::of(&set);
        let placements = view.placements();
        let bvh = Bvh::from_placements(placements.clone());
        let accel = Accel::Bvh(&bvh);

        let g_rgb_scale = 2.0 * cfg.weights.rgb / (3.0 * cfg.batch as f64);
        let g_alpha_scale = 2.0 * cfg.weights.sil / cfg.batch as f64;
        let chunks: Vec<(Gradients, f64, f64)> = rays
            .par_chunks(RAY_CHUNK)
            .map(|chunk| {
                let mut grads = Gradients::zeros(&set);
                let mut scratch = MarchScratch::default();
                let mut rec = RayRecorder::default();
                let (mut sq_rgb, mut sq_sil) = (0.0, 0.0);
                for &(v, x, y) in chunk {
                    let camera = &data.cameras[v];
                    let ray = camera.ray_for_pixel(x, y);
                    let outcome = replay_ray(
                        &view,
                        &placements,
                        &accel,
                        ray,
                        camera.near,
                        camera.far,
                        &march,
                        &mut scratch,
                        &mut rec,
                    );
                    let i = y * width + x;
                    let target = Vec3::new(
                        data.images[v][i * 3],
                        data.images[v][i * 3 + 1],
                        data.images[v][i * 3 + 2],
                    );
                    let res_rgb = outcome.rgb - target;
                    let res_alpha = outcome.alpha - data.masks[v][i];
                    sq_rgb += res_rgb.dot(res_rgb);
                    sq_sil += res_alpha * res_alpha;
                    backprop_recorded(
                        &view,
                        &placements,
                        ray,
                        &march,
                        &outcome,
                        &rec,
                        res_rgb * g_rgb_scale,
                        res_alpha * g_alpha_scale,
                        &mut grads,
                    );
                }
                (grads, sq_rgb, sq_sil)
            })
            .collect();

        let mut grads = Gradients::zeros(&set);
        let (mut sq_rgb, mut sq_sil) = (0.0, 0.0);
        for (g, a, b) in &chunks {
            grads.add_assign(g);
            sq_rgb += a;
            sq_sil += b;
        }

        let l_rgb = sq_rgb / (3.0 * cfg.batch as f64);
        let l_sil = sq_sil / cfg.batch as f64;
        let l_vol = volume_total(&set);
        let total = cfg.weights.rgb * l_rgb + cfg.weights.sil * l_sil + cfg.weights.vol * l_vol;
        if !total.is_finite() {
            return Err(Error::runtime(format!(
                "loss became non-finite at iteration {iteration}"
            )));
        }

        let d_sigma_norm: Vec<f64> = grads.d_density.iter().map(|g| g * SIGMA_MAX).collect();

        let t = (iteration + 1) as i32;
        adam_color.step(&mut color, &grads.d_color, cfg.learning_rate, t);
        adam_sigma.step(&mut sigma_norm, &d_sigma_norm, cfg.learning_rate, t);
        // Log scales take plain proportional steps, not adaptive ones.
        // Scale is only weakly identifiable here: intersection bounds carry
        // no gradient by convention, so coverage changes are invisible and
        // payload re-fitting absorbs most misalignment. Adaptive moments
        // renormalize whatever tiny gradient remains (the volume prior, or
        // minibatch noise) to full-rate drift and ratchet the geometry into
        // collapse or inflation; proportional steps stay quiescent instead.
        // The volume term's log-space gradient is the primitive's own
        // volume, the same on every axis.
        for i in 0..k {
            let delta = set.kin[i].delta_scale;
            let vol = set.kin[i].scale().component_product();
            for a in 0..3 {
                let g = grads.d_delta_scale[i].axis(a) * delta.axis(a) + cfg.weights.vol * vol;
                log_delta[i * 3 + a] = (log_delta[i * 3 + a] - cfg.learning_rate * g)
                    .clamp(-LOG_DELTA_RANGE, LOG_DELTA_RANGE);
            }
        }
        for c in color.iter_mut() {
            *c = c.clamp(0.0, 1.0);
        }
        for v in sigma_norm.iter_mut() {
            *v = v.clamp(0.0, 1.0);
        }

        trace.push(LossRow { iteration, total, rgb: l_rgb, sil: l_sil, vol: l_vol });
    }

    set.color.copy_from_slice(&color);
    for (d, &n) in set.density.iter_mut().zip(&sigma_norm) {
        *d = n * SIGMA_MAX;
    }
    for (i, kin) in set.kin.iter_mut().enumerate() {
        kin.delta_scale = Vec3::new(
            log_delta[i * 3].exp(),
            log_delta[i * 3 + 1].exp(),
            log_delta[i * 3 + 2].exp(),
        );
    }
    Ok(FitResult { set, trace })
}
