//! Small fixed-size linear algebra (f64) used throughout the crate.
//!
//! Hand-rolled on purpose: every operation is plain scalar IEEE arithmetic,
//! so results are reproducible bit-for-bit run to run on the same target,
//! which several consumers (skinning, rendering, manifests) rely on.

use std::ops::{Add, AddAssign, Div, Mul, Neg, Sub};

/// 2D vector, mostly for UV coordinates.
#[derive(Clone, Copy, Debug, PartialEq, Default)]
pub struct Vec2 {
    pub x: f64,
    pub y: f64,
}

impl Vec2 {
    pub const ZERO: Vec2 = Vec2 { x: 0.0, y: 0.0 };

    pub fn new(x: f64, y: f64) -> Self {
        Vec2 { x, y }
    }

    pub fn dot(self, o: Vec2) -> f64 {
        self.x * o.x + self.y * o.y
    }

    pub fn norm_squared(self) -> f64 {
        self.dot(self)
    }

    pub fn norm(self) -> f64 {
        self.norm_squared().sqrt()
    }
}

impl Add for Vec2 {
    type Output = Vec2;
    fn add(self, o: Vec2) -> Vec2 {
        Vec2::new(self.x + o.x, self.y + o.y)
    }
}

impl Sub for Vec2 {
    type Output = Vec2;
    fn sub(self, o: Vec2) -> Vec2 {
        Vec2::new(self.x - o.x, self.y - o.y)
    }
}

impl Mul<f64> for Vec2 {
    type Output = Vec2;
    fn mul(self, s: f64) -> Vec2 {
        Vec2::new(self.x * s, self.y * s)
    }
}

/// 3D vector.
#[derive(Clone, Copy, Debug, PartialEq, Default)]
pub struct Vec3 {
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl Vec3 {
    pub const ZERO: Vec3 = Vec3 { x: 0.0, y: 0.0, z: 0.0 };
    pub const ONE: Vec3 = Vec3 { x: 1.0, y: 1.0, z: 1.0 };
    pub const X: Vec3 = Vec3 { x: 1.0, y: 0.0, z: 0.0 };
    pub const Y: Vec3 = Vec3 { x: 0.0, y: 1.0, z: 0.0 };
    pub const Z: Vec3 = Vec3 { x: 0.0, y: 0.0, z: 1.0 };

    pub fn new(x: f64, y: f64, z: f64) -> Self {
        Vec3 { x, y, z }
    }

    pub fn splat(v: f64) -> Self {
        Vec3 { x: v, y: v, z: v }
    }

    pub fn dot(self, o: Vec3) -> f64 {
        self.x * o.x + self.y * o.y + self.z * o.z
    }

    pub fn cross(self, o: Vec3) -> Vec3 {
        Vec3::new(
            self.y * o.z - self.z * o.y,
            self.z * o.x - self.x * o.z,
            self.x * o.y - self.y * o.x,
        )
    }

    pub fn norm_squared(self) -> f64 {
        self.dot(self)
    }

    pub fn norm(self) -> f64 {
        self.norm_squared().sqrt()
    }

    pub fn normalized(self) -> Vec3 {
        self / self.norm()
    }

    /// Componentwise (Hadamard) product.
    pub fn mul_elem(self, o: Vec3) -> Vec3 {
        Vec3::new(self.x * o.x, self.y * o.y, self.z * o.z)
    }

    pub fn div_elem(self, o: Vec3) -> Vec3 {
        Vec3::new(self.x / o.x, self.y / o.y, self.z / o.z)
    }

    pub fn abs(self) -> Vec3 {
        Vec3::new(self.x.abs(), self.y.abs(), self.z.abs())
    }

    pub fn min_elem(self, o: Vec3) -> Vec3 {
        Vec3::new(self.x.min(o.x), self.y.min(o.y), self.z.min(o.z))
    }

    pub fn max_elem(self, o: Vec3) -> Vec3 {
        Vec3::new(self.x.max(o.x), self.y.max(o.y), self.z.max(o.z))
    }

    pub fn min_component(self) -> f64 {
        self.x.min(self.y).min(self.z)
    }

    pub fn max_component(self) -> f64 {
        self.x.max(self.y).max(self.z)
    }

    pub fn component_product(self) -> f64 {
        self.x * self.y * self.z
    }

    pub fn axis(self, i: usize) -> f64 {
        match i {
            0 => self.x,
            1 => self.y,
            2 => self.z,
            _ => panic!("axis index {i} out of range"),
        }
    }

    pub fn set_axis(&mut self, i: usize, v: f64) {
        match i {
            0 => self.x = v,
            1 => self.y = v,
            2 => self.z = v,
            _ => panic!("axis index {i} out of range"),
        }
    }

    pub fn to_array(self) -> [f64; 3] {
        [self.x, self.y, self.z]
    }

    pub fn from_array(a: [f64; 3]) -> Vec3 {
        Vec3::new(a[0], a[1], a[2])
    }

    pub fn is_finite(self) -> bool {
        self.x.is_finite() && self.y.is_finite() && self.z.is_finite()
    }
}

impl Add for Vec3 {
    type Output = Vec3;
    fn add(self, o: Vec3) -> Vec3 {
        Vec3::new(self.x + o.x, self.y + o.y, self.z + o.z)
    }
}

impl AddAssign for Vec3 {
    fn add_assign(&mut self, o: Vec3) {
        *self = *self + o;
    }
}

impl Sub for Vec3 {
    type Output = Vec3;
    fn sub(self, o: Vec3) -> Vec3 {
        Vec3::new(self.x - o.x, self.y - o.y, self.z - o.z)
    }
}

impl Neg for Vec3 {
    type Output = Vec3;
    fn neg(self) -> Vec3 {
        Vec3::new(-self.x, -self.y, -self.z)
    }
}

impl Mul<f64> for Vec3 {
    type Output = Vec3;
    fn mul(self, s: f64) -> Vec3 {
        Vec3::new(self.x * s, self.y * s, self.z * s)
    }
}

impl Mul<Vec3> for f64 {
    type Output = Vec3;
    fn mul(self, v: Vec3) -> Vec3 {
        v * self
    }
}

impl Div<f64> for Vec3 {
    type Output = Vec3;
    fn div(self, s: f64) -> Vec3 {
        Vec3::new(self.x / s, self.y / s, self.z / s)
    }
}

/// Column-major 3x3 matrix.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Mat3 {
    pub cols: [Vec3; 3],
}

impl Mat3 {
    pub const IDENTITY: Mat3 = Mat3 {
        cols: [Vec3::X, Vec3::Y, Vec3::Z],
    };

    pub fn from_cols(x: Vec3, y: Vec3, z: Vec3) -> Self {
        Mat3 { cols: [x, y, z] }
    }

    pub fn col(&self, i: usize) -> Vec3 {
        self.cols[i]
    }

    pub fn transpose(&self) -> Mat3 {
        Mat3::from_cols(
            Vec3::new(self.cols[0].x, self.cols[1].x, self.cols[2].x),
            Vec3::new(self.cols[0].y, self.cols[1].y, self.cols[2].y),
            Vec3::new(self.cols[0].z, self.cols[1].z, self.cols[2].z),
        )
    }

    pub fn mul_vec(&self, v: Vec3) -> Vec3 {
        self.cols[0] * v.x + self.cols[1] * v.y + self.cols[2] * v.z
    }

    /// Apply the transpose without materializing it; for rotations this is
    /// the inverse.
    pub fn tr_mul_vec(&self, v: Vec3) -> Vec3 {
        Vec3::new(self.cols[0].dot(v), self.cols[1].dot(v), self.cols[2].dot(v))
    }

    pub fn mul_mat(&self, o: &Mat3) -> Mat3 {
        Mat3::from_cols(
            self.mul_vec(o.cols[0]),
            self.mul_vec(o.cols[1]),
            self.mul_vec(o.cols[2]),
        )
    }

    pub fn det(&self) -> f64 {
        self.cols[0].dot(self.cols[1].cross(self.cols[2]))
    }
}

/// Unit quaternion (w, x, y, z) for rotations.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Quat {
    pub w: f64,
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl Quat {
    pub const IDENTITY: Quat = Quat { w: 1.0, x: 0.0, y: 0.0, z: 0.0 };

    pub fn new(w: f64, x: f64, y: f64, z: f64) -> Self {
        Quat { w, x, y, z }
    }

    /// Axis-angle rotation. A zero angle yields the identity quaternion
    /// exactly, which downstream skinning relies on.
    pub fn from_axis_angle(axis: Vec3, angle: f64) -> Quat {
        if angle == 0.0 {
            return Quat::IDENTITY;
        }
        let half = 0.5 * angle;
        let s = half.sin() / axis.norm();
        Quat::new(half.cos(), axis.x * s, axis.y * s, axis.z * s)
    }

    /// Rotation encoded as a scaled axis (angle = vector norm).
    pub fn from_rotation_vector(v: Vec3) -> Quat {
        let angle = v.norm();
        if angle == 0.0 {
            return Quat::IDENTITY;
        }
        Quat::from_axis_angle(v / angle, angle)
    }

    pub fn conj(self) -> Quat {
        Quat::new(self.w, -self.x, -self.y, -self.z)
    }

    pub fn norm(self) -> f64 {
        (self.w * self.w + self.x * self.x + self.y * self.y + self.z * self.z).sqrt()
    }

    pub fn normalized(self) -> Quat {
        let n = self.norm();
        Quat::new(self.w / n, self.x / n, self.y / n, self.z / n)
    }

    pub fn mul(self, o: Quat) -> Quat {
        Quat::new(
            self.w * o.w - self.x * o.x - self.y * o.y - self.z * o.z,
            self.w * o.x + self.x * o.w + self.y * o.z - self.z * o.y,
            self.w * o.y - self.x * o.z + self.y * o.w + self.z * o.x,
            self.w * o.z + self.x * o.y - self.y * o.x + self.z * o.w,
        )
    }

    /// Rotate a vector. Uses v' = v + w*t + q_v x t with t = 2 q_v x v, so a
    /// quaternion with zero vector part returns `v` bit-for-bit.
    pub fn rotate(self, v: Vec3) -> Vec3 {
        let qv = Vec3::new(self.x, self.y, self.z);
        let t = qv.cross(v) * 2.0;
        v + t * self.w + qv.cross(t)
    }

    pub fn to_mat3(self) -> Mat3 {
        let Quat { w, x, y, z } = self;
        Mat3::from_cols(
            Vec3::new(1.0 - 2.0 * (y * y + z * z), 2.0 * (x * y + w * z), 2.0 * (x * z - w * y)),
            Vec3::new(2.0 * (x * y - w * z), 1.0 - 2.0 * (x * x + z * z), 2.0 * (y * z + w * x)),
            Vec3::new(2.0 * (x * z + w * y), 2.0 * (y * z - w * x), 1.0 - 2.0 * (x * x + y * y)),
        )
    }

    /// Shepherd's method; `m` must be a rotation matrix.
    pub fn from_mat3(m: &Mat3) -> Quat {
        let [c0, c1, c2] = m.cols;
        let trace = c0.x + c1.y + c2.z;
        let q = if trace > 0.0 {
            let s = (trace + 1.0).sqrt() * 2.0;
            Quat::new(0.25 * s, (c1.z - c2.y) / s, (c2.x - c0.z) / s, (c0.y - c1.x) / s)
        } else if c0.x > c1.y && c0.x > c2.z {
            let s = (1.0 + c0.x - c1.y - c2.z).sqrt() * 2.0;
            Quat::new((c1.z - c2.y) / s, 0.25 * s, (c1.x + c0.y) / s, (c2.x + c0.z) / s)
        } else if c1.y > c2.z {
            let s = (1.0 + c1.y - c0.x - c2.z).sqrt() * 2.0;
            Quat::new((c2.x - c0.z) / s, (c1.x + c0.y) / s, 0.25 * s, (c2.y + c1.z) / s)
        } else {
            let s = (1.0 + c2.z - c0.x - c1.y).sqrt() * 2.0;
            Quat::new((c0.y - c1.x) / s, (c2.x + c0.z) / s, (c2.y + c1.z) / s, 0.25 * s)
        };
        q.normalized()
    }

    pub fn dot(self, o: Quat) -> f64 {
        self.w * o.w + self.x * o.x + self.y * o.y + self.z * o.z
    }

    pub fn is_finite(self) -> bool {
        self.w.is_finite() && self.x.is_finite() && self.y.is_finite() && self.z.is_finite()
    }
}

/// Rigid transform: rotate then translate.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Transform {
    pub rot: Quat,
    pub trans: Vec3,
}

impl Transform {
    pub const IDENTITY: Transform = Transform { rot: Quat::IDENTITY, trans: Vec3::ZERO };

    pub fn new(rot: Quat, trans: Vec3) -> Self {
        Transform { rot, trans }
    }

    pub fn from_translation(t: Vec3) -> Self {
        Transform { rot: Quat::IDENTITY, trans: t }
    }

    pub fn apply(&self, v: Vec3) -> Vec3 {
        self.rot.rotate(v) + self.trans
    }

    /// self after `o` (i.e. `self * o` as matrices).
    pub fn compose(&self, o: &Transform) -> Transform {
        Transform {
            rot: self.rot.mul(o.rot),
            trans: self.rot.rotate(o.trans) + self.trans,
        }
    }

    pub fn inverse(&self) -> Transform {
        let inv_rot = self.rot.conj();
        Transform {
            rot: inv_rot,
            trans: -inv_rot.rotate(self.trans),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn cross_follows_right_hand_rule() {
        assert_eq!(Vec3::X.cross(Vec3::Y), Vec3::Z);
        assert_eq!(Vec3::Y.cross(Vec3::Z), Vec3::X);
    }

    #[test]
    fn quat_rotate_matches_matrix() {
        let q = Quat::from_axis_angle(Vec3::new(0.3, -1.2, 0.5), 1.1);
        let v = Vec3::new(0.2, 0.7, -0.4);
        let rq = q.rotate(v);
        let rm = q.to_mat3().mul_vec(v);
        assert_relative_eq!(rq.x, rm.x, epsilon = 1e-14);
        assert_relative_eq!(rq.y, rm.y, epsilon = 1e-14);
        assert_relative_eq!(rq.z, rm.z, epsilon = 1e-14);
    }

    #[test]
    fn quat_matrix_round_trip() {
        for (axis, angle) in [
            (Vec3::X, 0.3),
            (Vec3::new(1.0, 1.0, 0.0), 2.9),
            (Vec3::new(-0.2, 0.8, 0.5), -1.7),
            (Vec3::Z, 3.1),
        ] {
            let q = Quat::from_axis_angle(axis, angle);
            let r = Quat::from_mat3(&q.to_mat3());
            // q and -q encode the same rotation
            assert!(q.dot(r).abs() > 1.0 - 1e-12);
        }
    }

    #[test]
    fn pure_scalar_quat_rotation_is_exact_identity() {
        // any quaternion with exactly zero vector part must rotate exactly,
        // regardless of its scalar part
        let v = Vec3::new(0.123456789, -9.87, 3.21e-7);
        for w in [1.0, 0.3, -2.5, 1.0000000001] {
            let q = Quat::new(w, 0.0, 0.0, 0.0);
            assert_eq!(q.rotate(v), v);
        }
        // multiplying by the identity changes nothing, bit for bit
        let q = Quat::from_axis_angle(Vec3::new(0.4, 0.2, -0.9), 0.77);
        assert_eq!(q.mul(Quat::IDENTITY), q);
        assert_eq!(Quat::IDENTITY.mul(q), q);
    }

    #[test]
    fn transform_inverse_composes_to_near_identity() {
        let t = Transform::new(
            Quat::from_axis_angle(Vec3::new(0.1, 0.9, -0.3), 0.6),
            Vec3::new(1.0, -2.0, 0.5),
        );
        let id = t.compose(&t.inverse());
        let v = Vec3::new(0.3, 0.1, -0.8);
        let w = id.apply(v);
        assert_relative_eq!(w.x, v.x, epsilon = 1e-14);
        assert_relative_eq!(w.y, v.y, epsilon = 1e-14);
        assert_relative_eq!(w.z, v.z, epsilon = 1e-14);
    }
}
