//! The renderable scene: K primitives with voxel payloads.

use crate::body::PrimitiveKinematics;
use crate::error::{Error, Result};
use crate::math::{Mat3, Vec3};

/// A set of W^2 oriented volumetric primitives. Each primitive k carries an
/// S^3 voxel grid of RGB color (in [0,1]) and density (1/m, >= 0), plus its
/// world kinematics. Payloads are flat row-major grids indexed by
/// (x*S + y)*S + z in the primitive's local frame; colors store the three
/// channels as consecutive S^3 blocks per primitive.
#[derive(Clone, Debug, PartialEq)]
pub struct PrimitiveSet {
    pub grid_width: usize,
    pub payload_res: usize,
    pub kin: Vec<PrimitiveKinematics>,
    /// K * 3 * S^3 values in [0,1].
    pub color: Vec<f64>,
    /// K * S^3 values >= 0.
    pub density: Vec<f64>,
}

impl PrimitiveSet {
    pub fn count(&self) -> usize {
        self.kin.len()
    }

    pub fn voxels_per_primitive(&self) -> usize {
        self.payload_res.pow(3)
    }

    /// Uniform payloads with the given kinematics.
    pub fn with_constant_payload(
        grid_width: usize,
        payload_res: usize,
        kin: Vec<PrimitiveKinematics>,
        color: [f64; 3],
        density: f64,
    ) -> PrimitiveSet {
        let k = kin.len();
        let s3 = payload_res.pow(3);
        let mut color_buf = Vec::with_capacity(k * 3 * s3);
        for _ in 0..k {
            for ch in color {
                color_buf.extend(std::iter::repeat_n(ch, s3));
            }
        }
        PrimitiveSet {
            grid_width,
            payload_res,
            kin,
            color: color_buf,
            density: vec![density; k * s3],
        }
    }

    pub fn color_index(&self, k: usize, channel: usize, voxel: usize) -> usize {
        (k * 3 + channel) * self.voxels_per_primitive() + voxel
    }

    pub fn density_index(&self, k: usize, voxel: usize) -> usize {
        k * self.voxels_per_primitive() + voxel
    }

    pub fn validate(&self) -> Result<()> {
        let k = self.kin.len();
        if k != self.grid_width * self.grid_width {
            return Err(Error::validation(format!(
                "{k} primitives for grid width {} (expected {})",
                self.grid_width,
                self.grid_width * self.grid_width
            )));
        }
        if self.payload_res < 2 {
            return Err(Error::validation(format!(
                "payload resolution {} is below the minimum of 2",
                self.payload_res
            )));
        }
        let s3 = self.voxels_per_primitive();
        if self.color.len() != k * 3 * s3 {
            return Err(Error::validation(format!(
                "color payload has {} values, expected {}",
                self.color.len(),
                k * 3 * s3
            )));
        }
        if self.density.len() != k * s3 {
            return Err(Error::validation(format!(
                "density payload has {} values, expected {}",
                self.density.len(),
                k * s3
            )));
        }
        for (i, &c) in self.color.iter().enumerate() {
            if !(0.0..=1.0).contains(&c) {
                return Err(Error::validation(format!(
                    "color value {c} at flat index {i} (primitive {}) outside [0,1]",
                    i / (3 * s3)
                )));
            }
        }
        for (i, &d) in self.density.iter().enumerate() {
            if !(d >= 0.0) || !d.is_finite() {
                return Err(Error::validation(format!(
                    "density value {d} at flat index {i} (primitive {}) is invalid",
                    i / s3
                )));
            }
        }
        for (i, kin) in self.kin.iter().enumerate() {
            if !(kin.scale().min_component() > 0.0) {
                return Err(Error::validation(format!(
                    "primitive {i} has nonpositive scale"
                )));
            }
            if !kin.translation.is_finite() || !kin.rotation.is_finite() {
                return Err(Error::validation(format!("primitive {i} kinematics not finite")));
            }
        }
        Ok(())
    }

    /// Default march step: half the smallest mean half-extent over the set.
    pub fn default_step(&self) -> f64 {
        let min_mean = self
            .kin
            .iter()
            .map(|k| {
                let s = k.scale();
                (s.x + s.y + s.z) / 3.0
            })
            .fold(f64::INFINITY, f64::min);
        0.5 * min_mean
    }
}

/// Per-primitive cached world placement used by intersection and sampling.
#[derive(Clone, Copy, Debug)]
pub(crate) struct PrimPlacement {
    /// Columns are the primitive's local axes in world space.
    pub rot: Mat3,
    pub translation: Vec3,
    /// Half-extents (base * delta), all positive.
    pub scale: Vec3,
}

impl PrimPlacement {
    pub fn of(kin: &PrimitiveKinematics) -> PrimPlacement {
        PrimPlacement {
            rot: kin.rotation.to_mat3(),
            translation: kin.translation,
            scale: kin.scale(),
        }
    }

    /// World point -> local box coordinates in [-1,1]^3 (when inside).
    pub fn local_of(&self, p: Vec3) -> Vec3 {
        self.rot.tr_mul_vec(p - self.translation).div_elem(self.scale)
    }

    /// World-space axis-aligned bounds of the oriented box.
    pub fn aabb(&self) -> (Vec3, Vec3) {
        let ext = Vec3::new(
            self.rot.cols[0].x.abs() * self.scale.x
                + self.rot.cols[1].x.abs() * self.scale.y
                + self.rot.cols[2].x.abs() * self.scale.z,
            self.rot.cols[0].y.abs() * self.scale.x
                + self.rot.cols[1].y.abs() * self.scale.y
                + self.rot.cols[2].y.abs() * self.scale.z,
            self.rot.cols[0].z.abs() * self.scale.x
                + self.rot.cols[1].z.abs() * self.scale.y
                + self.rot.cols[2].z.abs() * self.scale.z,
        );
        (self.translation - ext, self.translation + ext)
    }
}

/// Borrowed view of a scene, letting callers swap kinematics (animation)
/// without copying the voxel payloads.
#[derive(Clone, Copy)]
pub(crate) struct SceneView<'a> {
    pub payload_res: usize,
    pub kin: &'a [PrimitiveKinematics],
    pub color: &'a [f64],
    pub density: &'a [f64],
}

impl<'a> SceneView<'a> {
    pub fn of(set: &'a PrimitiveSet) -> SceneView<'a> {
        SceneView {
            payload_res: set.payload_res,
            kin: &set.kin,
            color: &set.color,
            density: &set.density,
        }
    }

    pub fn with_kinematics(set: &'a PrimitiveSet, kin: &'a [PrimitiveKinematics]) -> SceneView<'a> {
        SceneView { kin, ..SceneView::of(set) }
    }

    pub fn placements(&self) -> Vec<PrimPlacement> {
        self.kin.iter().map(PrimPlacement::of).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::math::Quat;

    fn unit_kin() -> PrimitiveKinematics {
        PrimitiveKinematics {
            translation: Vec3::ZERO,
            rotation: Quat::IDENTITY,
            base_scale: Vec3::ONE,
            delta_scale: Vec3::ONE,
        }
    }

    #[test]
    fn constant_set_validates() {
        let kin = vec![unit_kin(); 4];
        let set = PrimitiveSet::with_constant_payload(2, 2, kin, [0.5, 0.25, 1.0], 3.0);
        set.validate().unwrap();
        assert_eq!(set.color.len(), 4 * 3 * 8);
        assert_eq!(set.density.len(), 4 * 8);
        assert_eq!(set.default_step(), 0.5);
    }

    #[test]
    fn bad_color_range_is_rejected() {
        let kin = vec![unit_kin(); 4];
        let mut set = PrimitiveSet::with_constant_payload(2, 2, kin, [0.5, 0.5, 0.5], 1.0);
        set.color[5] = 1.5;
        assert!(set.validate().is_err());
    }

    #[test]
    fn aabb_of_rotated_box_contains_corners() {
        let kin = PrimitiveKinematics {
            translation: Vec3::new(1.0, 2.0, 3.0),
            rotation: Quat::from_axis_angle(Vec3::new(1.0, 2.0, -0.5), 0.9),
            base_scale: Vec3::new(0.5, 1.0, 0.25),
            delta_scale: Vec3::new(1.0, 1.5, 1.0),
        };
        let pre = PrimPlacement::of(&kin);
        let (lo, hi) = pre.aabb();
        for ix in [-1.0, 1.0] {
            for iy in [-1.0, 1.0] {
                for iz in [-1.0, 1.0] {
                    let local = Vec3::new(ix, iy, iz).mul_elem(pre.scale);
                    let world = pre.rot.mul_vec(local) + pre.translation;
                    assert!(world.x >= lo.x - 1e-12 && world.x <= hi.x + 1e-12);
                    assert!(world.y >= lo.y - 1e-12 && world.y <= hi.y + 1e-12);
                    assert!(world.z >= lo.z - 1e-12 && world.z <= hi.z + 1e-12);
                }
            }
        }
    }
}
