//! Packing a primitive set into the tensor layout and back.
//!
//! Grid cell (i, j) holds primitive k = i*W + j. A payload voxel (x, y, z)
//! lands at tensor position [i*S + x, j*S + y, c*S + z] where c is the
//! channel: red, green, blue, density, then the three scale-correction
//! axes. Scale corrections are per primitive, broadcast across the block;
//! unpacking averages the block back down so per-voxel noise cancels.

use crate::body::{pose_primitives, PrimitiveFrames};
use crate::error::{Error, Result};
use crate::math::Vec3;
use crate::renderer::PrimitiveSet;

use super::tensor::{Normalization, PackedTensor};

pub fn pack(set: &PrimitiveSet, norm: &Normalization) -> Result<PackedTensor> {
    set.validate()?;
    norm.validate()?;
    let w = set.grid_width;
    let s = set.payload_res;
    let mut tensor = PackedTensor::zeros(w, s)?;
    for k in 0..set.count() {
        let (ci, cj) = (k / w, k % w);
        let delta = set.kin[k].delta_scale;
        let delta_norm =
            [norm.delta_to_norm(delta.x), norm.delta_to_norm(delta.y), norm.delta_to_norm(delta.z)];
        for x in 0..s {
            for y in 0..s {
                for z in 0..s {
                    let vox = (x * s + y) * s + z;
                    let (a, b) = (ci * s + x, cj * s + y);
                    for ch in 0..3 {
                        let v = set.color[set.color_index(k, ch, vox)];
                        tensor.set(a, b, ch * s + z, norm.color_to_norm(v));
                    }
                    let sigma = set.density[set.density_index(k, vox)];
                    tensor.set(a, b, 3 * s + z, norm.density_to_norm(sigma));
                    for (axis, &dn) in delta_norm.iter().enumerate() {
                        tensor.set(a, b, (4 + axis) * s + z, dn);
                    }
                }
            }
        }
    }
    Ok(tensor)
}

/// Recovers the payload buffers and per-primitive scale corrections.
/// Colors and densities clamp to their valid ranges; each correction is
/// exp of its block mean.
pub fn unpack_payloads(
    tensor: &PackedTensor,
    norm: &Normalization,
) -> Result<(Vec<f64>, Vec<f64>, Vec<Vec3>)> {
    tensor.validate()?;
    norm.validate()?;
    let w = tensor.grid_width();
    let s = tensor.payload_res();
    let k_total = w * w;
    let s3 = s * s * s;
    let mut color = vec![0.0; k_total * 3 * s3];
    let mut density = vec![0.0; k_total * s3];
    let mut deltas = Vec::with_capacity(k_total);
    for k in 0..k_total {
        let (ci, cj) = (k / w, k % w);
        let mut log_sum = [0.0f64; 3];
        for x in 0..s {
            for y in 0..s {
                for z in 0..s {
                    let vox = (x * s + y) * s + z;
                    let (a, b) = (ci * s + x, cj * s + y);
                    for ch in 0..3 {
                        color[(k * 3 + ch) * s3 + vox] =
                            norm.color_from_norm(tensor.get(a, b, ch * s + z));
                    }
                    density[k * s3 + vox] = norm.density_from_norm(tensor.get(a, b, 3 * s + z));
                    for (axis, slot) in log_sum.iter_mut().enumerate() {
                        *slot += tensor.get(a, b, (4 + axis) * s + z);
                    }
                }
            }
        }
        let mean = Vec3::new(log_sum[0], log_sum[1], log_sum[2]) / s3 as f64;
        deltas.push(Vec3::new(
            norm.delta_from_norm(mean.x),
            norm.delta_from_norm(mean.y),
            norm.delta_from_norm(mean.z),
        ));
    }
    Ok((color, density, deltas))
}

/// Rebuilds a full primitive set by attaching the unpacked payloads to
/// frames posed at the given vertices.
pub fn unpack(
    tensor: &PackedTensor,
    frames: &PrimitiveFrames,
    posed_vertices: &[Vec3],
    norm: &Normalization,
) -> Result<PrimitiveSet> {
    if frames.grid_width != tensor.grid_width() {
        return Err(Error::validation(format!(
            "tensor grid width {} does not match the frames' {}",
            tensor.grid_width(),
            frames.grid_width
        )));
    }
    let (color, density, deltas) = unpack_payloads(tensor, norm)?;
    let kin = pose_primitives(frames, posed_vertices, &deltas)?;
    let set = PrimitiveSet {
        grid_width: tensor.grid_width(),
        payload_res: tensor.payload_res(),
        kin,
        color,
        density,
    };
    set.validate()?;
    Ok(set)
}
