//! Linear blend skinning.

use crate::body::mesh::{resolve_tree, Pose, RiggedMesh};
use crate::error::{Error, Result};
use crate::math::{Quat, Transform, Vec3};

/// Per-joint deformation D_j mapping rest-world points to posed-world
/// points, composed down the tree.
///
/// Built as D_j = D_parent * C_j where C_j rotates by the joint's pose angle
/// (conjugated into world axes) about the joint's rest-world position. This
/// is algebraically PosedWorld_j * RestWorld_j^-1 but never forms the
/// inverse; an unrotated joint keeps C_j at the exact identity (conjugating
/// the identity is skipped rather than rounded), so a zero pose composes to
/// exactly-identity deformations and reproduces rest vertices without
/// rounding.
pub(crate) fn skinning_deformations(mesh: &RiggedMesh, pose: &Pose) -> Result<Vec<Transform>> {
    if pose.angles.len() != mesh.joints.len() {
        return Err(Error::validation(format!(
            "pose has {} joint angles, mesh has {} joints",
            pose.angles.len(),
            mesh.joints.len()
        )));
    }
    let rest_world = mesh.rest_world_transforms();
    let locals: Vec<Transform> = (0..mesh.joints.len())
        .map(|j| {
            let a = rest_world[j].trans;
            let q_world = rest_world[j].rot;
            let q_pose = Quat::from_rotation_vector(pose.angles[j]);
            let q = if q_pose == Quat::IDENTITY {
                Quat::IDENTITY
            } else {
                q_world.mul(q_pose).mul(q_world.conj())
            };
            let mut c = Transform::new(q, a - q.rotate(a));
            if mesh.joints[j].parent.is_none() {
                c.trans += pose.root_translation;
            }
            c
        })
        .collect();
    Ok(resolve_tree(&mesh.joints, |j| locals[j]))
}

/// Poses the mesh: v' = v + sum_j w_j (D_j(v) - v).
///
/// The displacement form keeps the identity-pose output exactly equal to the
/// rest vertices even though skin weights only sum to 1 within tolerance.
pub fn lbs_pose(mesh: &RiggedMesh, pose: &Pose) -> Result<Vec<Vec3>> {
    let deform = skinning_deformations(mesh, pose)?;
    Ok(mesh
        .vertices
        .iter()
        .zip(&mesh.skin_weights)
        .map(|(&v, weights)| {
            let mut out = v;
            for &(j, w) in weights {
                out += (deform[j].apply(v) - v) * w;
            }
            out
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::body::make_toy_body;
    use crate::math::Mat3;
    use approx::assert_relative_eq;

    /// Textbook LBS with explicit 3x3 matrix transform chains:
    /// v' = sum_j w_j (PosedWorld_j * RestWorld_j^-1)(v).
    fn matrix_lbs_oracle(mesh: &RiggedMesh, pose: &Pose) -> Vec<Vec3> {
        struct Rigid {
            m: Mat3,
            t: Vec3,
        }
        impl Rigid {
            fn apply(&self, v: Vec3) -> Vec3 {
                self.m.mul_vec(v) + self.t
            }
            fn compose(&self, o: &Rigid) -> Rigid {
                Rigid { m: self.m.mul_mat(&o.m), t: self.m.mul_vec(o.t) + self.t }
            }
            fn inverse(&self) -> Rigid {
                let mt = self.m.transpose();
                Rigid { t: mt.mul_vec(self.t) * -1.0, m: mt }
            }
        }
        let n = mesh.joints.len();
        let mut rest: Vec<Option<Rigid>> = (0..n).map(|_| None).collect();
        let mut posed: Vec<Option<Rigid>> = (0..n).map(|_| None).collect();
        // The toy tree is parent-before-child; iterate until stable anyway.
        for _ in 0..n {
            for j in 0..n {
                if rest[j].is_some() {
                    continue;
                }
                let local_rest = Rigid {
                    m: mesh.joints[j].rest.rot.to_mat3(),
                    t: mesh.joints[j].rest.trans,
                };
                let pose_rot =
                    Rigid { m: Quat::from_rotation_vector(pose.angles[j]).to_mat3(), t: Vec3::ZERO };
                let mut local_posed = local_rest.compose(&pose_rot);
                match mesh.joints[j].parent {
                    None => {
                        local_posed.t += pose.root_translation;
                        rest[j] = Some(local_rest);
                        posed[j] = Some(local_posed);
                    }
                    Some(p) => {
                        if let (Some(pr), Some(pp)) = (&rest[p], &posed[p]) {
                            rest[j] = Some(pr.compose(&local_rest));
                            posed[j] = Some(pp.compose(&local_posed));
                        }
                    }
                }
            }
        }
        mesh.vertices
            .iter()
            .zip(&mesh.skin_weights)
            .map(|(&v, weights)| {
                let mut out = Vec3::ZERO;
                for &(j, w) in weights {
                    let g = posed[j].as_ref().unwrap().compose(&rest[j].as_ref().unwrap().inverse());
                    out += g.apply(v) * w;
                }
                out
            })
            .collect()
    }

    #[test]
    fn identity_pose_reproduces_rest_vertices_exactly() {
        let mesh = make_toy_body(12, 12, 3);
        let posed = lbs_pose(&mesh, &Pose::rest(mesh.joints.len())).unwrap();
        assert_eq!(posed, mesh.vertices);
    }

    #[test]
    fn identity_pose_is_exact_even_with_rotated_rest_joints() {
        use crate::body::mesh::Joint;
        use crate::math::{Transform, Vec2};
        // two joints whose rest rotations are far from identity, mixed weights
        let mesh = RiggedMesh {
            vertices: vec![
                Vec3::new(0.137, -2.4, 0.99),
                Vec3::new(-7.1, 0.003, 1.25e-7),
                Vec3::new(0.5, 0.5, 0.5),
            ],
            triangles: vec![[0, 1, 2]],
            uvs: vec![Vec2::new(0.1, 0.1), Vec2::new(0.9, 0.1), Vec2::new(0.5, 0.9)],
            joints: vec![
                Joint {
                    parent: None,
                    rest: Transform::new(
                        Quat::from_axis_angle(Vec3::new(0.3, -0.7, 0.2), 1.9),
                        Vec3::new(0.4, 0.1, -0.2),
                    ),
                },
                Joint {
                    parent: Some(0),
                    rest: Transform::new(
                        Quat::from_axis_angle(Vec3::new(-1.0, 0.2, 0.5), -0.8),
                        Vec3::new(0.0, 0.3, 0.0),
                    ),
                },
            ],
            skin_weights: vec![
                vec![(0, 0.25), (1, 0.75)],
                vec![(1, 1.0)],
                vec![(0, 0.5), (1, 0.5)],
            ],
        };
        mesh.validate().unwrap();
        let posed = lbs_pose(&mesh, &Pose::rest(2)).unwrap();
        assert_eq!(posed, mesh.vertices);
    }

    #[test]
    fn root_translation_shifts_everything() {
        let mesh = make_toy_body(8, 8, 1);
        let mut pose = Pose::rest(mesh.joints.len());
        pose.root_translation = Vec3::new(1.0, 0.0, 0.0);
        let posed = lbs_pose(&mesh, &pose).unwrap();
        for (p, r) in posed.iter().zip(&mesh.vertices) {
            let d = *p - *r;
            assert_relative_eq!(d.x, 1.0, epsilon = 1e-12);
            assert_relative_eq!(d.y, 0.0, epsilon = 1e-12);
            assert_relative_eq!(d.z, 0.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn elbow_bend_matches_matrix_oracle() {
        let mesh = make_toy_body(10, 10, 7);
        let mut pose = Pose::rest(mesh.joints.len());
        // left elbow (joint 6), 90 degrees about z
        pose.angles[6] = Vec3::new(0.0, 0.0, std::f64::consts::FRAC_PI_2);
        let posed = lbs_pose(&mesh, &pose).unwrap();
        let oracle = matrix_lbs_oracle(&mesh, &pose);
        let mut moved = 0;
        for ((p, o), r) in posed.iter().zip(&oracle).zip(&mesh.vertices) {
            assert_relative_eq!(p.x, o.x, epsilon = 1e-9);
            assert_relative_eq!(p.y, o.y, epsilon = 1e-9);
            assert_relative_eq!(p.z, o.z, epsilon = 1e-9);
            if (*p - *r).norm() > 1e-6 {
                moved += 1;
            }
        }
        assert!(moved > 0, "elbow bend moved no vertices");
        assert!(moved < mesh.vertices.len(), "elbow bend moved every vertex");
    }

    #[test]
    fn general_pose_matches_matrix_oracle() {
        let mesh = make_toy_body(9, 8, 11);
        let mut pose = Pose::rest(mesh.joints.len());
        for (j, a) in pose.angles.iter_mut().enumerate() {
            let f = j as f64;
            *a = Vec3::new((0.3 * f).sin() * 0.4, (0.7 * f).cos() * 0.3, (0.25 * f).sin() * 0.5);
        }
        pose.root_translation = Vec3::new(0.2, -0.1, 0.4);
        let posed = lbs_pose(&mesh, &pose).unwrap();
        let oracle = matrix_lbs_oracle(&mesh, &pose);
        for (p, o) in posed.iter().zip(&oracle) {
            assert_relative_eq!(p.x, o.x, epsilon = 1e-9);
            assert_relative_eq!(p.y, o.y, epsilon = 1e-9);
            assert_relative_eq!(p.z, o.z, epsilon = 1e-9);
        }
    }

    #[test]
    fn pose_length_mismatch_is_rejected() {
        let mesh = make_toy_body(6, 6, 0);
        let err = lbs_pose(&mesh, &Pose::rest(3)).unwrap_err();
        assert!(err.to_string().contains("joint"));
    }
}
