//! Trilinear payload sampling and the overlap blend.
//!
//! A primitive's payload lives on an S^3 voxel grid over its local box
//! [-1,1]^3, sampled with clamped trilinear interpolation (voxel centers at
//! grid coordinates 0..S-1; positions beyond the outermost centers clamp).
//! Where primitives overlap, densities add and colors average weighted by
//! density, which is independent of primitive order.

use crate::math::Vec3;
use crate::renderer::set::{PrimPlacement, PrimitiveSet, SceneView};

/// Clamped-trilinear stencil at one local position, for one axis grid of
/// size S: base corner, fractional weight, and the d(grid)/d(local) factor
/// that is zeroed in the clamp zones.
#[derive(Clone, Copy, Debug)]
pub(crate) struct TriStencil {
    pub i0: [usize; 3],
    pub f: [f64; 3],
    pub dg_dl: [f64; 3],
}

pub(crate) fn tri_stencil(local: Vec3, s: usize) -> TriStencil {
    let mut i0 = [0usize; 3];
    let mut f = [0.0; 3];
    let mut dg_dl = [0.0; 3];
    let scale = 0.5 * s as f64;
    for a in 0..3 {
        let g_raw = (local.axis(a) + 1.0) * scale - 0.5;
        let clamped = g_raw >= (s - 1) as f64 || g_raw <= 0.0;
        let g = g_raw.clamp(0.0, (s - 1) as f64);
        let base = (g.floor() as usize).min(s - 2);
        i0[a] = base;
        f[a] = g - base as f64;
        dg_dl[a] = if clamped { 0.0 } else { scale };
    }
    TriStencil { i0, f, dg_dl }
}

/// Interpolated value of the S^3 grid starting at `data[base]`.
pub(crate) fn tri_value(st: &TriStencil, s: usize, data: &[f64], base: usize) -> f64 {
    let [x, y, z] = st.i0;
    let [fx, fy, fz] = st.f;
    let idx = |dx: usize, dy: usize, dz: usize| base + ((x + dx) * s + (y + dy)) * s + (z + dz);
    let lerp = |a: f64, b: f64, t: f64| a + (b - a) * t;
    let c00 = lerp(data[idx(0, 0, 0)], data[idx(0, 0, 1)], fz);
    let c01 = lerp(data[idx(0, 1, 0)], data[idx(0, 1, 1)], fz);
    let c10 = lerp(data[idx(1, 0, 0)], data[idx(1, 0, 1)], fz);
    let c11 = lerp(data[idx(1, 1, 0)], data[idx(1, 1, 1)], fz);
    lerp(lerp(c00, c01, fy), lerp(c10, c11, fy), fx)
}

/// Scatters `upstream` onto the 8 stencil corners (adjoint of `tri_value`).
pub(crate) fn tri_scatter(st: &TriStencil, s: usize, grad: &mut [f64], base: usize, upstream: f64) {
    let [x, y, z] = st.i0;
    let [fx, fy, fz] = st.f;
    let idx = |dx: usize, dy: usize, dz: usize| base + ((x + dx) * s + (y + dy)) * s + (z + dz);
    for dx in 0..2 {
        let wx = if dx == 0 { 1.0 - fx } else { fx };
        for dy in 0..2 {
            let wy = if dy == 0 { 1.0 - fy } else { fy };
            for dz in 0..2 {
                let wz = if dz == 0 { 1.0 - fz } else { fz };
                grad[idx(dx, dy, dz)] += upstream * wx * wy * wz;
            }
        }
    }
}

/// Derivative of the interpolated value with respect to the local position.
pub(crate) fn tri_grad_local(st: &TriStencil, s: usize, data: &[f64], base: usize) -> Vec3 {
    let [x, y, z] = st.i0;
    let [fx, fy, fz] = st.f;
    let idx = |dx: usize, dy: usize, dz: usize| base + ((x + dx) * s + (y + dy)) * s + (z + dz);
    let v = |dx: usize, dy: usize, dz: usize| data[idx(dx, dy, dz)];
    let lerp = |a: f64, b: f64, t: f64| a + (b - a) * t;
    // d/dgx: difference of the two x slices, interpolated over y,z
    let dx = {
        let a = lerp(lerp(v(1, 0, 0), v(1, 0, 1), fz), lerp(v(1, 1, 0), v(1, 1, 1), fz), fy);
        let b = lerp(lerp(v(0, 0, 0), v(0, 0, 1), fz), lerp(v(0, 1, 0), v(0, 1, 1), fz), fy);
        a - b
    };
    let dy = {
        let a = lerp(lerp(v(0, 1, 0), v(0, 1, 1), fz), lerp(v(1, 1, 0), v(1, 1, 1), fz), fx);
        let b = lerp(lerp(v(0, 0, 0), v(0, 0, 1), fz), lerp(v(1, 0, 0), v(1, 0, 1), fz), fx);
        a - b
    };
    let dz = {
        let a = lerp(lerp(v(0, 0, 1), v(0, 1, 1), fy), lerp(v(1, 0, 1), v(1, 1, 1), fy), fx);
        let b = lerp(lerp(v(0, 0, 0), v(0, 1, 0), fy), lerp(v(1, 0, 0), v(1, 1, 0), fy), fx);
        a - b
    };
    Vec3::new(dx * st.dg_dl[0], dy * st.dg_dl[1], dz * st.dg_dl[2])
}

/// Density and color of one primitive at a local position.
pub(crate) fn eval_primitive(
    view: &SceneView,
    k: usize,
    local: Vec3,
) -> (Vec3, f64) {
    let s = view.payload_res;
    let s3 = s * s * s;
    let st = tri_stencil(local, s);
    let sigma = tri_value(&st, s, view.density, k * s3);
    if sigma <= 0.0 {
        return (Vec3::ZERO, sigma);
    }
    let c = Vec3::new(
        tri_value(&st, s, view.color, (k * 3) * s3),
        tri_value(&st, s, view.color, (k * 3 + 1) * s3),
        tri_value(&st, s, view.color, (k * 3 + 2) * s3),
    );
    (c, sigma)
}

/// Blends the primitives in `active` at world point `p`: densities add,
/// colors are density-weighted. Returns black where the summed density is 0.
pub(crate) fn blend_active(
    view: &SceneView,
    placements: &[PrimPlacement],
    active: &[u32],
    p: Vec3,
) -> (Vec3, f64) {
    let mut sigma_sum = 0.0;
    let mut rgb_sigma = Vec3::ZERO;
    for &k in active {
        let k = k as usize;
        let local = placements[k].local_of(p);
        let (c, sigma) = eval_primitive(view, k, local);
        if sigma > 0.0 {
            sigma_sum += sigma;
            rgb_sigma += c * sigma;
        }
    }
    if sigma_sum > 0.0 {
        (rgb_sigma / sigma_sum, sigma_sum)
    } else {
        (Vec3::ZERO, sigma_sum)
    }
}

/// Field probe at an arbitrary world point: checks containment in every
/// primitive and applies the overlap blend.
pub fn sample_field(set: &PrimitiveSet, point: Vec3) -> (Vec3, f64) {
    let view = SceneView::of(set);
    let placements = view.placements();
    let mut sigma_sum = 0.0;
    let mut rgb_sigma = Vec3::ZERO;
    for (k, placement) in placements.iter().enumerate() {
        let local = placement.local_of(point);
        if local.x.abs() <= 1.0 && local.y.abs() <= 1.0 && local.z.abs() <= 1.0 {
            let (c, sigma) = eval_primitive(&view, k, local);
            if sigma > 0.0 {
                sigma_sum += sigma;
                rgb_sigma += c * sigma;
            }
        }
    }
    if sigma_sum > 0.0 {
        (rgb_sigma / sigma_sum, sigma_sum)
    } else {
        (Vec3::ZERO, 0.0)
    }
}
