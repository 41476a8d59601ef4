//! Primitive attachment frames on the body surface.
//!
//! A regular W x W grid over UV space attaches one primitive per cell: each
//! grid-cell center maps to the nearest surface point in UV space. A frame
//! stores the attachment (triangle + barycentric coordinates) together with
//! everything needed to re-derive its world kinematics from any posed vertex
//! set, so animation never re-runs the UV search.

use crate::body::mesh::RiggedMesh;
use crate::error::{Error, Result};
use crate::math::{Mat3, Quat, Vec2, Vec3};

/// Minimum base-scale component, in meters.
pub const MIN_BASE_SCALE: f64 = 1e-4;

/// One primitive's attachment and rest-pose frame.
#[derive(Clone, Debug, PartialEq)]
pub struct PrimitiveFrame {
    pub attach_triangle: usize,
    pub barycentric: [f64; 3],
    /// Vertex indices of the attach triangle (snapshot of connectivity).
    pub triangle_vertices: [usize; 3],
    /// UVs of those vertices, for tangent recomputation under posing.
    pub triangle_uvs: [Vec2; 3],
    pub rest_translation: Vec3,
    pub rest_rotation: Quat,
    pub base_scale: Vec3,
    /// True when this frame's own UV cell had no surface coverage and the
    /// attachment was borrowed from the nearest covered cell.
    pub degenerate: bool,
}

/// All W^2 frames, ordered by cell index k = i*W + j where i indexes u and
/// j indexes v.
#[derive(Clone, Debug, PartialEq)]
pub struct PrimitiveFrames {
    pub grid_width: usize,
    pub frames: Vec<PrimitiveFrame>,
    pub degenerate_count: usize,
    /// Vertex count of the source mesh; posed vertex sets must match it.
    pub vertex_count: usize,
}

impl PrimitiveFrames {
    pub fn count(&self) -> usize {
        self.frames.len()
    }
}

/// World kinematic state of one primitive. The rendered half-extent is
/// `base_scale * delta_scale` componentwise; the two factors stay separate
/// because fitting updates `delta_scale` without re-posing.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PrimitiveKinematics {
    pub translation: Vec3,
    pub rotation: Quat,
    pub base_scale: Vec3,
    pub delta_scale: Vec3,
}

impl PrimitiveKinematics {
    pub fn scale(&self) -> Vec3 {
        self.base_scale.mul_elem(self.delta_scale)
    }
}

/// Closest point to `p` inside triangle (a, b, c), as barycentric weights.
/// Ericson's region walk, specialized to 2D.
fn closest_point_barycentric(a: Vec2, b: Vec2, c: Vec2, p: Vec2) -> [f64; 3] {
    let ab = b - a;
    let ac = c - a;
    let ap = p - a;
    let d1 = ab.dot(ap);
    let d2 = ac.dot(ap);
    if d1 <= 0.0 && d2 <= 0.0 {
        return [1.0, 0.0, 0.0];
    }
    let bp = p - b;
    let d3 = ab.dot(bp);
    let d4 = ac.dot(bp);
    if d3 >= 0.0 && d4 <= d3 {
        return [0.0, 1.0, 0.0];
    }
    let vc = d1 * d4 - d3 * d2;
    if vc <= 0.0 && d1 >= 0.0 && d3 <= 0.0 {
        let v = d1 / (d1 - d3);
        return [1.0 - v, v, 0.0];
    }
    let cp = p - c;
    let d5 = ab.dot(cp);
    let d6 = ac.dot(cp);
    if d6 >= 0.0 && d5 <= d6 {
        return [0.0, 0.0, 1.0];
    }
    let vb = d5 * d2 - d1 * d6;
    if vb <= 0.0 && d2 >= 0.0 && d6 <= 0.0 {
        let w = d2 / (d2 - d6);
        return [1.0 - w, 0.0, w];
    }
    let va = d3 * d6 - d5 * d4;
    if va <= 0.0 && (d4 - d3) >= 0.0 && (d5 - d6) >= 0.0 {
        let w = (d4 - d3) / ((d4 - d3) + (d5 - d6));
        return [0.0, 1.0 - w, w];
    }
    let denom = va + vb + vc;
    if denom > 0.0 {
        let v = vb / denom;
        let w = vc / denom;
        [1.0 - v - w, v, w]
    } else {
        // Degenerate (zero-area) UV triangle: fall back to nearest corner.
        let da = (p - a).norm_squared();
        let db = (p - b).norm_squared();
        let dc = (p - c).norm_squared();
        if da <= db && da <= dc {
            [1.0, 0.0, 0.0]
        } else if db <= dc {
            [0.0, 1.0, 0.0]
        } else {
            [0.0, 0.0, 1.0]
        }
    }
}

fn bary_point2(uv: &[Vec2; 3], bary: [f64; 3]) -> Vec2 {
    uv[0] * bary[0] + uv[1] * bary[1] + uv[2] * bary[2]
}

fn bary_point3(p: &[Vec3; 3], bary: [f64; 3]) -> Vec3 {
    p[0] * bary[0] + p[1] * bary[1] + p[2] * bary[2]
}

/// Orthonormal tangent frame of a triangle: tangent follows the surface's
/// u direction (Gram-Schmidt against the normal), bitangent completes a
/// right-handed basis, normal is the triangle normal.
pub(crate) fn triangle_tangent_frame(p: &[Vec3; 3], uv: &[Vec2; 3]) -> Quat {
    let e1 = p[1] - p[0];
    let e2 = p[2] - p[0];
    let n_raw = e1.cross(e2);
    let n = if n_raw.norm_squared() > 1e-24 { n_raw.normalized() } else { Vec3::Z };

    let duv1 = uv[1] - uv[0];
    let duv2 = uv[2] - uv[0];
    let det = duv1.x * duv2.y - duv2.x * duv1.y;
    let du = if det.abs() > 1e-15 { (e1 * duv2.y - e2 * duv1.y) * (1.0 / det) } else { e1 };

    let mut t = du - n * du.dot(n);
    if t.norm_squared() <= 1e-24 {
        // u direction parallel to the normal; fall back to any edge.
        t = e1 - n * e1.dot(n);
        if t.norm_squared() <= 1e-24 {
            t = if n.x.abs() < 0.9 { Vec3::X } else { Vec3::Y }.cross(n);
        }
    }
    let t = t.normalized();
    let b = n.cross(t);
    Quat::from_mat3(&Mat3::from_cols(t, b, n))
}

/// Attaches one frame per UV grid cell (W^2 total). Cells whose center has
/// no surface within the cell square are flagged degenerate and borrow the
/// attachment of the nearest covered cell.
pub fn init_primitive_frames(mesh: &RiggedMesh, grid_width: usize) -> Result<PrimitiveFrames> {
    if grid_width < 2 {
        return Err(Error::validation(format!("grid width {grid_width} is below the minimum of 2")));
    }
    if mesh.triangles.is_empty() {
        return Err(Error::validation("mesh has no triangles to attach primitives to"));
    }
    let w = grid_width;
    let half_cell = 0.5 / w as f64;

    struct Hit {
        tri: usize,
        bary: [f64; 3],
        uv_offset: Vec2,
    }
    let mut hits = Vec::with_capacity(w * w);
    for i in 0..w {
        for j in 0..w {
            let center = Vec2::new((i as f64 + 0.5) / w as f64, (j as f64 + 0.5) / w as f64);
            let mut best: Option<(f64, Hit)> = None;
            for (t, tri) in mesh.triangles.iter().enumerate() {
                let uv = [mesh.uvs[tri[0]], mesh.uvs[tri[1]], mesh.uvs[tri[2]]];
                let bary = closest_point_barycentric(uv[0], uv[1], uv[2], center);
                let offset = bary_point2(&uv, bary) - center;
                let d2 = offset.norm_squared();
                if best.as_ref().is_none_or(|(bd, _)| d2 < *bd) {
                    best = Some((d2, Hit { tri: t, bary, uv_offset: offset }));
                }
                if d2 == 0.0 {
                    break;
                }
            }
            hits.push(best.unwrap().1);
        }
    }

    let covered: Vec<bool> = hits
        .iter()
        .map(|h| h.uv_offset.x.abs() <= half_cell + 1e-9 && h.uv_offset.y.abs() <= half_cell + 1e-9)
        .collect();
    if !covered.iter().any(|&c| c) {
        return Err(Error::validation("no UV grid cell is covered by the mesh atlas"));
    }

    let mut frames = Vec::with_capacity(w * w);
    let mut degenerate_count = 0;
    for i in 0..w {
        for j in 0..w {
            let k = i * w + j;
            let (src, degenerate) = if covered[k] {
                (k, false)
            } else {
                // nearest covered cell by squared grid distance, lowest index wins ties
                let mut best = usize::MAX;
                let mut best_d = usize::MAX;
                for (other, &cov) in covered.iter().enumerate() {
                    if !cov {
                        continue;
                    }
                    let (oi, oj) = (other / w, other % w);
                    let d = oi.abs_diff(i).pow(2) + oj.abs_diff(j).pow(2);
                    if d < best_d {
                        best_d = d;
                        best = other;
                    }
                }
                degenerate_count += 1;
                (best, true)
            };
            let hit = &hits[src];
            let tri = mesh.triangles[hit.tri];
            let pos = [mesh.vertices[tri[0]], mesh.vertices[tri[1]], mesh.vertices[tri[2]]];
            let uv = [mesh.uvs[tri[0]], mesh.uvs[tri[1]], mesh.uvs[tri[2]]];
            frames.push(PrimitiveFrame {
                attach_triangle: hit.tri,
                barycentric: hit.bary,
                triangle_vertices: tri,
                triangle_uvs: uv,
                rest_translation: bary_point3(&pos, hit.bary),
                rest_rotation: triangle_tangent_frame(&pos, &uv),
                base_scale: Vec3::ONE,
                degenerate,
            });
        }
    }

    let mut out = PrimitiveFrames {
        grid_width: w,
        frames,
        degenerate_count,
        vertex_count: mesh.vertices.len(),
    };
    let scales = base_scales(&out, mesh);
    for (f, s) in out.frames.iter_mut().zip(scales) {
        f.base_scale = s;
    }
    Ok(out)
}

/// Base half-extents from grid-neighbor spacing: x from the mean 3D distance
/// to u-adjacent frames, y from v-adjacent frames (half of each), z the mean
/// of the two. Floored at [`MIN_BASE_SCALE`].
pub fn base_scales(frames: &PrimitiveFrames, mesh: &RiggedMesh) -> Vec<Vec3> {
    let w = frames.grid_width;
    let point = |k: usize| {
        let f = &frames.frames[k];
        let tri = f.triangle_vertices;
        bary_point3(
            &[mesh.vertices[tri[0]], mesh.vertices[tri[1]], mesh.vertices[tri[2]]],
            f.barycentric,
        )
    };
    let mut out = Vec::with_capacity(frames.frames.len());
    for i in 0..w {
        for j in 0..w {
            let p = point(i * w + j);
            let mean_dist = |neighbors: [Option<usize>; 2]| {
                let mut sum = 0.0;
                let mut n = 0;
                for k in neighbors.into_iter().flatten() {
                    sum += (point(k) - p).norm();
                    n += 1;
                }
                sum / n as f64
            };
            let un = [
                (i > 0).then(|| (i - 1) * w + j),
                (i + 1 < w).then(|| (i + 1) * w + j),
            ];
            let vn = [(j > 0).then(|| i * w + j - 1), (j + 1 < w).then(|| i * w + j + 1)];
            let sx = (0.5 * mean_dist(un)).max(MIN_BASE_SCALE);
            let sy = (0.5 * mean_dist(vn)).max(MIN_BASE_SCALE);
            out.push(Vec3::new(sx, sy, (0.5 * (sx + sy)).max(MIN_BASE_SCALE)));
        }
    }
    out
}

/// World kinematics of every primitive for one posed vertex set: the
/// attachment point carried by its triangle, the posed triangle's tangent
/// frame, and per-primitive scale factors.
pub fn pose_primitives(
    frames: &PrimitiveFrames,
    posed_vertices: &[Vec3],
    delta_scales: &[Vec3],
) -> Result<Vec<PrimitiveKinematics>> {
    if posed_vertices.len() != frames.vertex_count {
        return Err(Error::validation(format!(
            "got {} posed vertices, frames were built for {}",
            posed_vertices.len(),
            frames.vertex_count
        )));
    }
    if delta_scales.len() != frames.frames.len() {
        return Err(Error::validation(format!(
            "got {} delta scales for {} primitives",
            delta_scales.len(),
            frames.frames.len()
        )));
    }
    for (k, ds) in delta_scales.iter().enumerate() {
        if !(ds.min_component() > 0.0) {
            return Err(Error::validation(format!(
                "delta scale of primitive {k} = ({}, {}, {}) must be strictly positive",
                ds.x, ds.y, ds.z
            )));
        }
    }
    Ok(frames
        .frames
        .iter()
        .zip(delta_scales)
        .map(|(f, &ds)| {
            let [a, b, c] = f.triangle_vertices;
            let pos = [posed_vertices[a], posed_vertices[b], posed_vertices[c]];
            PrimitiveKinematics {
                translation: bary_point3(&pos, f.barycentric),
                rotation: triangle_tangent_frame(&pos, &f.triangle_uvs),
                base_scale: f.base_scale,
                delta_scale: ds,
            }
        })
        .collect())
}
