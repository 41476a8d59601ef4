//! Pinhole cameras and ray generation.
//!
//! Camera space looks down -z with +x right and +y up; image rows grow
//! downward, so pixel row y maps to -y in camera space. Rays pass through
//! pixel centers (x + 0.5, y + 0.5).

use crate::error::{Error, Result};
use crate::math::{Mat3, Vec3};

#[derive(Clone, Debug, PartialEq)]
pub struct Camera {
    pub width: usize,
    pub height: usize,
    pub fx: f64,
    pub fy: f64,
    pub cx: f64,
    pub cy: f64,
    /// Columns are the camera axes in world space.
    pub rotation: Mat3,
    /// Camera position in world space.
    pub position: Vec3,
    pub near: f64,
    pub far: f64,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Ray {
    pub origin: Vec3,
    /// Unit length.
    pub dir: Vec3,
}

impl Camera {
    pub fn validate(&self) -> Result<()> {
        if self.width == 0 || self.height == 0 {
            return Err(Error::validation(format!(
                "camera resolution {}x{} must be nonzero",
                self.width, self.height
            )));
        }
        if !(self.fx > 0.0 && self.fy > 0.0) {
            return Err(Error::validation(format!(
                "focal lengths ({}, {}) must be positive",
                self.fx, self.fy
            )));
        }
        if !(0.0 < self.near && self.near < self.far) {
            return Err(Error::validation(format!(
                "near/far planes ({}, {}) must satisfy 0 < near < far",
                self.near, self.far
            )));
        }
        Ok(())
    }

    /// Camera at `eye` looking at `target`, `up` fixing the roll. The view
    /// spans `fov_y` radians vertically.
    pub fn look_at(
        eye: Vec3,
        target: Vec3,
        up: Vec3,
        width: usize,
        height: usize,
        fov_y: f64,
        near: f64,
        far: f64,
    ) -> Camera {
        let z = (eye - target).normalized();
        let x = up.cross(z).normalized();
        let y = z.cross(x);
        let fy = 0.5 * height as f64 / (0.5 * fov_y).tan();
        Camera {
            width,
            height,
            fx: fy,
            fy,
            cx: 0.5 * width as f64,
            cy: 0.5 * height as f64,
            rotation: Mat3::from_cols(x, y, z),
            position: eye,
            near,
            far,
        }
    }

    /// The ray through the center of pixel (x, y).
    pub fn ray_for_pixel(&self, x: usize, y: usize) -> Ray {
        let dir_cam = Vec3::new(
            (x as f64 + 0.5 - self.cx) / self.fx,
            -(y as f64 + 0.5 - self.cy) / self.fy,
            -1.0,
        )
        .normalized();
        Ray { origin: self.position, dir: self.rotation.mul_vec(dir_cam) }
    }
}

/// One ray per pixel, row-major.
pub fn generate_rays(camera: &Camera) -> Vec<Ray> {
    let mut rays = Vec::with_capacity(camera.width * camera.height);
    for y in 0..camera.height {
        for x in 0..camera.width {
            rays.push(camera.ray_for_pixel(x, y));
        }
    }
    rays
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn simple_camera(width: usize, height: usize) -> Camera {
        Camera {
            width,
            height,
            fx: 100.0,
            fy: 100.0,
            cx: 50.0,
            cy: 50.0,
            rotation: Mat3::IDENTITY,
            position: Vec3::ZERO,
            near: 0.1,
            far: 100.0,
        }
    }

    #[test]
    fn center_pixel_follows_the_principal_axis() {
        // odd resolution puts a pixel center exactly on the principal point
        let mut cam = simple_camera(101, 101);
        cam.cx = 50.5;
        cam.cy = 50.5;
        let ray = cam.ray_for_pixel(50, 50);
        assert_relative_eq!(ray.dir.x, 0.0, epsilon = 1e-6);
        assert_relative_eq!(ray.dir.y, 0.0, epsilon = 1e-6);
        assert_relative_eq!(ray.dir.z, -1.0, epsilon = 1e-6);
    }

    #[test]
    fn all_directions_are_unit_norm() {
        let cam = simple_camera(7, 5);
        for ray in generate_rays(&cam) {
            assert_relative_eq!(ray.dir.norm(), 1.0, epsilon = 1e-6);
        }
    }

    #[test]
    fn corner_pixel_matches_hand_backprojection() {
        let cam = simple_camera(100, 100);
        let ray = cam.ray_for_pixel(0, 0);
        // pixel center (0.5, 0.5): x = (0.5-50)/100, y = -(0.5-50)/100, z = -1
        let expect = Vec3::new(-0.495, 0.495, -1.0);
        let expect = expect / expect.norm();
        assert_relative_eq!(ray.dir.x, expect.x, epsilon = 1e-12);
        assert_relative_eq!(ray.dir.y, expect.y, epsilon = 1e-12);
        assert_relative_eq!(ray.dir.z, expect.z, epsilon = 1e-12);
    }

    #[test]
    fn look_at_points_toward_the_target() {
        let cam = Camera::look_at(
            Vec3::new(0.0, 1.0, 3.0),
            Vec3::new(0.0, 1.0, 0.0),
            Vec3::Y,
            64,
            64,
            0.8,
            0.1,
            10.0,
        );
        cam.validate().unwrap();
        // -z camera axis in world space points from eye to target
        let fwd = cam.rotation.mul_vec(Vec3::new(0.0, 0.0, -1.0));
        assert_relative_eq!(fwd.z, -1.0, epsilon = 1e-12);
    }
}
