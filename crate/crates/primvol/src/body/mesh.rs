//! Rigged triangle mesh with a UV atlas, a joint tree, and skin weights,
//! plus the JSON file formats for meshes and poses.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::math::{Quat, Transform, Vec2, Vec3};

pub const MAX_WEIGHTS_PER_VERTEX: usize = 4;
const WEIGHT_SUM_TOL: f64 = 1e-6;
const QUAT_NORM_TOL: f64 = 1e-6;

/// One joint of the kinematic tree. `parent` is `None` for the root.
/// `rest` is the joint's rigid transform relative to its parent.
#[derive(Clone, Debug, PartialEq)]
pub struct Joint {
    pub parent: Option<usize>,
    pub rest: Transform,
}

/// Triangle mesh with per-vertex UVs, a joint tree, and per-vertex skin
/// weights (at most [`MAX_WEIGHTS_PER_VERTEX`] entries, summing to 1).
#[derive(Clone, Debug, PartialEq)]
pub struct RiggedMesh {
    pub vertices: Vec<Vec3>,
    pub triangles: Vec<[usize; 3]>,
    pub uvs: Vec<Vec2>,
    pub joints: Vec<Joint>,
    /// Per vertex: (joint index, weight) pairs.
    pub skin_weights: Vec<Vec<(usize, f64)>>,
}

/// A body pose: one axis-angle rotation vector per joint plus a root offset.
#[derive(Clone, Debug, PartialEq)]
pub struct Pose {
    pub angles: Vec<Vec3>,
    pub root_translation: Vec3,
}

impl Pose {
    pub fn rest(joint_count: usize) -> Pose {
        Pose { angles: vec![Vec3::ZERO; joint_count], root_translation: Vec3::ZERO }
    }
}

impl RiggedMesh {
    /// Checks every documented invariant, naming the offending vertex, joint,
    /// or triangle in the error.
    pub fn validate(&self) -> Result<()> {
        let nv = self.vertices.len();
        if nv == 0 {
            return Err(Error::validation("mesh has no vertices"));
        }
        if self.uvs.len() != nv {
            return Err(Error::validation(format!(
                "uv count {} does not match vertex count {}",
                self.uvs.len(),
                nv
            )));
        }
        if self.skin_weights.len() != nv {
            return Err(Error::validation(format!(
                "skin weight count {} does not match vertex count {}",
                self.skin_weights.len(),
                nv
            )));
        }
        for (i, v) in self.vertices.iter().enumerate() {
            if !v.is_finite() {
                return Err(Error::validation(format!("vertex {i} is not finite")));
            }
        }
        for (i, uv) in self.uvs.iter().enumerate() {
            let ok = (0.0..=1.0).contains(&uv.x) && (0.0..=1.0).contains(&uv.y);
            if !ok {
                return Err(Error::validation(format!(
                    "uv at vertex {i} = ({}, {}) lies outside [0,1]^2",
                    uv.x, uv.y
                )));
            }
        }
        for (t, tri) in self.triangles.iter().enumerate() {
            for &vi in tri {
                if vi >= nv {
                    return Err(Error::validation(format!(
                        "triangle {t} references vertex {vi}, mesh has {nv}"
                    )));
                }
            }
        }

        let nj = self.joints.len();
        if nj == 0 {
            return Err(Error::validation("mesh has no joints"));
        }
        let mut roots = 0;
        for (j, joint) in self.joints.iter().enumerate() {
            match joint.parent {
                None => roots += 1,
                Some(p) => {
                    if p >= nj {
                        return Err(Error::validation(format!(
                            "joint {j} has parent {p}, mesh has {nj} joints"
                        )));
                    }
                    if p == j {
                        return Err(Error::validation(format!("joint {j} is its own parent")));
                    }
                }
            }
            let n = joint.rest.rot.norm();
            if (n - 1.0).abs() > QUAT_NORM_TOL {
                return Err(Error::validation(format!(
                    "joint {j} rest rotation has norm {n}, expected 1"
                )));
            }
        }
        if roots != 1 {
            return Err(Error::validation(format!(
                "joint tree has {roots} roots, expected exactly 1"
            )));
        }
        // Cycle check: walking parents from any joint must reach the root
        // in at most nj steps.
        for j in 0..nj {
            let mut cur = j;
            let mut steps = 0;
            while let Some(p) = self.joints[cur].parent {
                cur = p;
                steps += 1;
                if steps > nj {
                    return Err(Error::validation(format!(
                        "joint tree has a cycle involving joint {j}"
                    )));
                }
            }
        }

        for (i, weights) in self.skin_weights.iter().enumerate() {
            if weights.is_empty() || weights.len() > MAX_WEIGHTS_PER_VERTEX {
                return Err(Error::validation(format!(
                    "vertex {i} has {} skin weights, expected 1..={MAX_WEIGHTS_PER_VERTEX}",
                    weights.len()
                )));
            }
            let mut sum = 0.0;
            for &(j, w) in weights {
                if j >= nj {
                    return Err(Error::validation(format!(
                        "vertex {i} is skinned to joint {j}, mesh has {nj} joints"
                    )));
                }
                if !(w >= 0.0) {
                    return Err(Error::validation(format!(
                        "vertex {i} has negative skin weight {w} on joint {j}"
                    )));
                }
                sum += w;
            }
            if (sum - 1.0).abs() > WEIGHT_SUM_TOL {
                return Err(Error::validation(format!(
                    "skin weights at vertex {i} sum to {sum}, expected 1 within {WEIGHT_SUM_TOL}"
                )));
            }
        }
        Ok(())
    }

    /// World-space rest transform of every joint (rest transforms composed
    /// down the tree).
    pub fn rest_world_transforms(&self) -> Vec<Transform> {
        resolve_tree(&self.joints, |j| self.joints[j].rest)
    }
}

/// Composes `local(j)` down the parent chain in dependency order; joints may
/// appear in any order in the file.
pub(crate) fn resolve_tree<F: Fn(usize) -> Transform>(
    joints: &[Joint],
    local: F,
) -> Vec<Transform> {
    let n = joints.len();
    let mut world: Vec<Option<Transform>> = vec![None; n];
    let mut remaining = n;
    while remaining > 0 {
        let before = remaining;
        for j in 0..n {
            if world[j].is_some() {
                continue;
            }
            match joints[j].parent {
                None => world[j] = Some(local(j)),
                Some(p) => {
                    if let Some(pw) = world[p] {
                        world[j] = Some(pw.compose(&local(j)));
                    }
                }
            }
            if world[j].is_some() {
                remaining -= 1;
            }
        }
        // validate() rejects cycles, so every pass resolves at least one.
        assert!(remaining < before, "unresolvable joint tree");
    }
    world.into_iter().map(|t| t.unwrap()).collect()
}

#[derive(Serialize, Deserialize)]
struct JointFile {
    parent: i64,
    rest_rotation_wxyz: [f64; 4],
    rest_translation: [f64; 3],
}

#[derive(Serialize, Deserialize)]
struct MeshFile {
    vertices: Vec<f64>,
    triangles: Vec<i64>,
    uvs: Vec<f64>,
    joints: Vec<JointFile>,
    skin_weights: Vec<Vec<(i64, f64)>>,
}

#[derive(Serialize, Deserialize)]
struct PoseFile {
    angles: Vec<f64>,
    root_translation: [f64; 3],
}

fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| Error::format(path, e.to_string()))
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let text = serde_json::to_string_pretty(value)
        .map_err(|e| Error::format(path, e.to_string()))?;
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

/// Loads and validates a rigged mesh from its JSON file format.
pub fn load_rigged_mesh(path: impl AsRef<Path>) -> Result<RiggedMesh> {
    let path = path.as_ref();
    let file: MeshFile = read_json(path)?;
    let fmt = |msg: String| Error::format(path, msg);

    if file.vertices.len() % 3 != 0 {
        return Err(fmt(format!("vertices has {} floats, expected a multiple of 3", file.vertices.len())));
    }
    if file.uvs.len() % 2 != 0 {
        return Err(fmt(format!("uvs has {} floats, expected a multiple of 2", file.uvs.len())));
    }
    if file.triangles.len() % 3 != 0 {
        return Err(fmt(format!("triangles has {} indices, expected a multiple of 3", file.triangles.len())));
    }
    let vertices: Vec<Vec3> =
        file.vertices.chunks_exact(3).map(|c| Vec3::new(c[0], c[1], c[2])).collect();
    let uvs: Vec<Vec2> = file.uvs.chunks_exact(2).map(|c| Vec2::new(c[0], c[1])).collect();
    let mut triangles = Vec::with_capacity(file.triangles.len() / 3);
    for (t, c) in file.triangles.chunks_exact(3).enumerate() {
        let mut tri = [0usize; 3];
        for (slot, &raw) in tri.iter_mut().zip(c) {
            *slot = usize::try_from(raw)
                .map_err(|_| fmt(format!("triangle {t} has negative vertex index {raw}")))?;
        }
        triangles.push(tri);
    }
    let mut joints = Vec::with_capacity(file.joints.len());
    for (j, jf) in file.joints.iter().enumerate() {
        let parent = match jf.parent {
            -1 => None,
            p => Some(
                usize::try_from(p)
                    .map_err(|_| fmt(format!("joint {j} has invalid parent {p}")))?,
            ),
        };
        let [w, x, y, z] = jf.rest_rotation_wxyz;
        joints.push(Joint {
            parent,
            rest: Transform::new(Quat::new(w, x, y, z), Vec3::from_array(jf.rest_translation)),
        });
    }
    let mut skin_weights = Vec::with_capacity(file.skin_weights.len());
    for (v, pairs) in file.skin_weights.iter().enumerate() {
        let mut entry = Vec::with_capacity(pairs.len());
        for &(j, w) in pairs {
            let j = usize::try_from(j)
                .map_err(|_| fmt(format!("vertex {v} has invalid joint index {j}")))?;
            entry.push((j, w));
        }
        skin_weights.push(entry);
    }

    let mesh = RiggedMesh { vertices, triangles, uvs, joints, skin_weights };
    mesh.validate()?;
    Ok(mesh)
}

/// Writes a rigged mesh in the same JSON format `load_rigged_mesh` reads.
pub fn save_rigged_mesh(path: impl AsRef<Path>, mesh: &RiggedMesh) -> Result<()> {
    let file = MeshFile {
        vertices: mesh.vertices.iter().flat_map(|v| v.to_array()).collect(),
        triangles: mesh.triangles.iter().flatten().map(|&i| i as i64).collect(),
        uvs: mesh.uvs.iter().flat_map(|uv| [uv.x, uv.y]).collect(),
        joints: mesh
            .joints
            .iter()
            .map(|j| JointFile {
                parent: j.parent.map_or(-1, |p| p as i64),
                rest_rotation_wxyz: [j.rest.rot.w, j.rest.rot.x, j.rest.rot.y, j.rest.rot.z],
                rest_translation: j.rest.trans.to_array(),
            })
            .collect(),
        skin_weights: mesh
            .skin_weights
            .iter()
            .map(|pairs| pairs.iter().map(|&(j, w)| (j as i64, w)).collect())
            .collect(),
    };
    write_json(path.as_ref(), &file)
}

/// Loads a pose file: flat `angles` (3 floats per joint) plus a root offset.
pub fn load_pose(path: impl AsRef<Path>) -> Result<Pose> {
    let path = path.as_ref();
    let file: PoseFile = read_json(path)?;
    if file.angles.len() % 3 != 0 {
        return Err(Error::format(
            path,
            format!("angles has {} floats, expected a multiple of 3", file.angles.len()),
        ));
    }
    Ok(Pose {
        angles: file.angles.chunks_exact(3).map(|c| Vec3::new(c[0], c[1], c[2])).collect(),
        root_translation: Vec3::from_array(file.root_translation),
    })
}

pub fn save_pose(path: impl AsRef<Path>, pose: &Pose) -> Result<()> {
    let file = PoseFile {
        angles: pose.angles.iter().flat_map(|a| a.to_array()).collect(),
        root_translation: pose.root_translation.to_array(),
    };
    write_json(path.as_ref(), &file)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::body::make_toy_body;

    #[test]
    fn toy_body_round_trips_through_file() {
        let mesh = make_toy_body(8, 8, 7);
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("body.rigmesh");
        save_rigged_mesh(&path, &mesh).unwrap();
        let loaded = load_rigged_mesh(&path).unwrap();
        assert_eq!(mesh, loaded);
        // and saving the loaded copy reproduces the file byte for byte
        let path2 = dir.path().join("body2.rigmesh");
        save_rigged_mesh(&path2, &loaded).unwrap();
        assert_eq!(std::fs::read(&path).unwrap(), std::fs::read(&path2).unwrap());
    }

    #[test]
    fn bad_weight_sum_names_the_vertex() {
        let mut mesh = make_toy_body(6, 6, 0);
        mesh.skin_weights[7] = vec![(0, 0.5), (1, 0.3)];
        let err = mesh.validate().unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("vertex 7"), "unexpected message: {msg}");
    }

    #[test]
    fn pose_round_trips() {
        let pose = Pose {
            angles: vec![Vec3::new(0.1, -0.2, 0.3), Vec3::ZERO, Vec3::new(1.0, 2.0, 3.0)],
            root_translation: Vec3::new(0.5, 0.0, -0.25),
        };
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("pose.json");
        save_pose(&path, &pose).unwrap();
        assert_eq!(load_pose(&path).unwrap(), pose);
    }

    #[test]
    fn missing_file_reports_io_error() {
        let err = load_rigged_mesh("/nonexistent/body.rigmesh").unwrap_err();
        assert!(matches!(err, Error::Io { .. }));
    }
}
