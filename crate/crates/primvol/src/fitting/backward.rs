//! Hand-written adjoint of the volume renderer.
//!
//! There is no tape: each ray is re-marched with a sink that records its
//! composited samples, then the compositing chain is reversed in one pass
//! using a suffix sum of downstream color weight. The gradients are exact
//! for the discretized forward pass, including rays the early-stop
//! transmittance threshold truncated. Interval endpoints and per-segment
//! step counts are treated as constants of the march: box extents receive
//! gradients only through the local-coordinate mapping at fixed world
//! sample points, and the depth output carries no adjoint.

use crate::error::{Error, Result};
use crate::math::Vec3;
use crate::renderer::bvh::Bvh;
use crate::renderer::camera::{Camera, Ray};
use crate::renderer::march::{march_ray, Accel, MarchConfig, MarchScratch, RayOutcome, SampleSink};
use crate::renderer::sampling::{tri_grad_local, tri_scatter, tri_stencil, tri_value};
use crate::renderer::set::{PrimPlacement, PrimitiveSet, SceneView};

/// Loss gradients shaped like the payloads they flow into.
#[derive(Clone, Debug, PartialEq)]
pub struct Gradients {
    /// K * 3 * S^3, same layout as `PrimitiveSet::color`.
    pub d_color: Vec<f64>,
    /// K * S^3, same layout as `PrimitiveSet::density`.
    pub d_density: Vec<f64>,
    /// Per primitive, with respect to the delta scale factors.
    pub d_delta_scale: Vec<Vec3>,
}

impl Gradients {
    pub fn zeros(set: &PrimitiveSet) -> Gradients {
        let k = set.count();
        let s3 = set.voxels_per_primitive();
        Gradients {
            d_color: vec![0.0; k * 3 * s3],
            d_density: vec![0.0; k * s3],
            d_delta_scale: vec![Vec3::ZERO; k],
        }
    }

    pub fn is_finite(&self) -> bool {
        self.d_color.iter().all(|g| g.is_finite())
            && self.d_density.iter().all(|g| g.is_finite())
            && self.d_delta_scale.iter().all(|g| g.is_finite())
    }

    pub(crate) fn add_assign(&mut self, other: &Gradients) {
        for (a, b) in self.d_color.iter_mut().zip(&other.d_color) {
            *a += b;
        }
        for (a, b) in self.d_density.iter_mut().zip(&other.d_density) {
            *a += b;
        }
        for (a, b) in self.d_delta_scale.iter_mut().zip(&other.d_delta_scale) {
            *a += *b;
        }
    }
}

#[derive(Clone, Copy)]
struct SampleRec {
    t: f64,
    dt: f64,
    sigma: f64,
    color: Vec3,
    t_before: f64,
    active_start: u32,
    active_len: u32,
}

/// Sink that keeps every composited sample of one ray, with the primitives
/// active at it, so the march can be reversed.
#[derive(Default)]
pub(crate) struct RayRecorder {
    samples: Vec<SampleRec>,
    arena: Vec<u32>,
}

impl RayRecorder {
    pub fn clear(&mut self) {
        self.samples.clear();
        self.arena.clear();
    }
}

impl SampleSink for RayRecorder {
    fn record(&mut self, t: f64, dt: f64, sigma: f64, color: Vec3, t_before: f64, active: &[u32]) {
        self.samples.push(SampleRec {
            t,
            dt,
            sigma,
            color,
            t_before,
            active_start: self.arena.len() as u32,
            active_len: active.len() as u32,
        });
        self.arena.extend_from_slice(active);
    }
}

/// Marches one ray while recording its samples into `rec`.
pub(crate) fn replay_ray(
    view: &SceneView,
    placements: &[PrimPlacement],
    accel: &Accel,
    ray: Ray,
    near: f64,
    far: f64,
    cfg: &MarchConfig,
    scratch: &mut MarchScratch,
    rec: &mut RayRecorder,
) -> RayOutcome {
    rec.clear();
    march_ray(view, placements, accel, ray, near, far, cfg, scratch, rec)
}

/// Reverses one recorded ray. `g_rgb` and `g_alpha` are the loss gradients
/// of this ray's composited rgb and alpha.
pub(crate) fn backprop_recorded(
    view: &SceneView,
    placements: &[PrimPlacement],
    ray: Ray,
    cfg: &MarchConfig,
    outcome: &RayOutcome,
    rec: &RayRecorder,
    g_rgb: Vec3,
    g_alpha: f64,
    grads: &mut Gradients,
) {
    let s = view.payload_res;
    let s3 = s * s * s;
    // alpha = 1 - T_final and composited rgb = rgb_pre + background * T_final
    let d_t_final = g_rgb.dot(cfg.background) - g_alpha;
    let t_final = outcome.transmittance;

    // suffix holds sum_{j > i} weight_j * color_j while visiting sample i
    let mut suffix = Vec3::ZERO;
    for smp in rec.samples.iter().rev() {
        let e = (-smp.sigma * smp.dt).exp();
        let w = smp.t_before * (1.0 - e);
        let d_sigma_blend =
            smp.dt * (g_rgb.dot(smp.color * (smp.t_before * e) - suffix) - d_t_final * t_final);
        let d_c_blend = g_rgb * w;

        let p = ray.origin + ray.dir * smp.t;
        let active =
            &rec.arena[smp.active_start as usize..(smp.active_start + smp.active_len) as usize];
        for &k in active {
            let k = k as usize;
            let local = placements[k].local_of(p);
            let st = tri_stencil(local, s);
            let sig_k = tri_value(&st, s, view.density, k * s3);
            let c_k = Vec3::new(
                tri_value(&st, s, view.color, (k * 3) * s3),
                tri_value(&st, s, view.color, (k * 3 + 1) * s3),
                tri_value(&st, s, view.color, (k * 3 + 2) * s3),
            );
            // blended sigma adds the primitives; blended color weighs them
            // by density. A zero-density primitive still gets a density
            // gradient (the blend's right derivative), which is what lets
            // cleared voxels recover during optimization.
            let d_sig_k = d_sigma_blend + d_c_blend.dot(c_k - smp.color) / smp.sigma;
            let d_c_k = d_c_blend * (sig_k / smp.sigma);

            tri_scatter(&st, s, &mut grads.d_density, k * s3, d_sig_k);
            tri_scatter(&st, s, &mut grads.d_color, (k * 3) * s3, d_c_k.x);
            tri_scatter(&st, s, &mut grads.d_color, (k * 3 + 1) * s3, d_c_k.y);
            tri_scatter(&st, s, &mut grads.d_color, (k * 3 + 2) * s3, d_c_k.z);

            // growing the box shrinks |local| at a fixed world point:
            // d local_a / d delta_a = -local_a / delta_a
            let mut d_local = tri_grad_local(&st, s, view.density, k * s3) * d_sig_k;
            d_local += tri_grad_local(&st, s, view.color, (k * 3) * s3) * d_c_k.x;
            d_local += tri_grad_local(&st, s, view.color, (k * 3 + 1) * s3) * d_c_k.y;
            d_local += tri_grad_local(&st, s, view.color, (k * 3 + 2) * s3) * d_c_k.z;
            let delta = view.kin[k].delta_scale;
            grads.d_delta_scale[k] += Vec3::new(
                d_local.x * (-local.x / delta.x),
                d_local.y * (-local.y / delta.y),
                d_local.z * (-local.z / delta.z),
            );
        }
        suffix += smp.color * w;
    }
}

/// Gradients of a scalar loss through `render`, given the loss gradient at
/// every output pixel's composited rgb and alpha. Marches the same rays as
/// the forward pass, sequentially, so results are deterministic. Rays whose
/// upstream gradients are all zero contribute exact zeros and are skipped.
pub fn render_backward(
    set: &PrimitiveSet,
    camera: &Camera,
    cfg: &MarchConfig,
    d_rgb: &[f64],
    d_alpha: &[f64],
) -> Result<Gradients> {
    camera.validate()?;
    cfg.validate()?;
    let pixels = camera.width * camera.height;
    if d_rgb.len() != pixels * 3 || d_alpha.len() != pixels {
        return Err(Error::validation(format!(
            "upstream gradients sized {} rgb / {} alpha for a {}x{} camera",
            d_rgb.len(),
            d_alpha.len(),
            camera.width,
            camera.height
        )));
    }

    let view = SceneView::of(set);
    let placements = view.placements();
    let bvh = (!cfg.brute_force && !placements.is_empty())
        .then(|| Bvh::from_placements(placements.clone()));
    let accel = match &bvh {
        Some(b) => Accel::Bvh(b),
        None => Accel::Brute,
    };

    let mut grads = Gradients::zeros(set);
    let mut scratch = MarchScratch::default();
    let mut rec = RayRecorder::default();
    for y in 0..camera.height {
        for x in 0..camera.width {
            let i = y * camera.width + x;
            let g_rgb = Vec3::new(d_rgb[i * 3], d_rgb[i * 3 + 1], d_rgb[i * 3 + 2]);
            let g_alpha = d_alpha[i];
            if g_rgb == Vec3::ZERO && g_alpha == 0.0 {
                continue;
            }
            let ray = camera.ray_for_pixel(x, y);
            let outcome = replay_ray(
                &view,
                &placements,
                &accel,
                ray,
                camera.near,
                camera.far,
                cfg,
                &mut scratch,
                &mut rec,
            );
            backprop_recorded(&view, &placements, ray, cfg, &outcome, &rec, g_rgb, g_alpha, &mut grads);
        }
    }
    Ok(grads)
}
