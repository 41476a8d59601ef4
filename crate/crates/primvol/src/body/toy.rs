//! Procedural humanoid test body.
//!
//! Six capsule-like lathed parts (torso, head, two arms, two legs) around a
//! 17-joint tree, with a cylindrical unwrap per part laid out on a 3x2 UV
//! atlas that covers [0,1]^2 exactly. Proportions are jittered slightly by
//! the seed so different seeds give different bodies.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;

use crate::body::mesh::{Joint, RiggedMesh};
use crate::math::{Transform, Vec2, Vec3};

// Joint indices.
const PELVIS: usize = 0;
const SPINE: usize = 1;
const CHEST: usize = 2;
const NECK: usize = 3;
const HEAD: usize = 4;
const L_SHOULDER: usize = 5;
const L_ELBOW: usize = 6;
const L_WRIST: usize = 7;
const R_SHOULDER: usize = 8;
const R_ELBOW: usize = 9;
const R_WRIST: usize = 10;
const L_HIP: usize = 11;
const L_KNEE: usize = 12;
const L_ANKLE: usize = 13;
const R_HIP: usize = 14;
const R_KNEE: usize = 15;
const R_ANKLE: usize = 16;
const JOINT_COUNT: usize = 17;

const PARENTS: [i64; JOINT_COUNT] =
    [-1, 0, 1, 2, 3, 2, 5, 6, 2, 8, 9, 0, 11, 12, 0, 14, 15];

struct LathePart {
    /// Atlas tile (column 0..3, row 0..2).
    tile: (usize, usize),
    /// Axis endpoints in world space.
    a: Vec3,
    b: Vec3,
    radius: f64,
    /// Joint chain this part skins to, ordered along the axis.
    chain: Vec<usize>,
}

/// Builds the toy body. `radial` and `rings` control tessellation per part
/// (clamped to at least 3 and 2); `seed` jitters the body proportions.
pub fn make_toy_body(radial: usize, rings: usize, seed: u64) -> RiggedMesh {
    let radial = radial.max(3);
    let rings = rings.max(2);
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    let mut jitter = |scale: f64| {
        let u: f64 = rng.random();
        1.0 + scale * (2.0 * u - 1.0)
    };

    let height = jitter(0.05);
    let arm_len = jitter(0.05);
    let leg_len = jitter(0.05);
    let torso_r = 0.14 * jitter(0.1);
    let head_r = 0.11 * jitter(0.1);
    let arm_r = 0.050 * jitter(0.1);
    let leg_r = 0.065 * jitter(0.1);

    let hip_x = 0.10;
    let shoulder = Vec3::new(0.18, 1.42 * height, 0.0);
    let elbow_dx = 0.28 * arm_len;
    let wrist_dx = 0.26 * arm_len;
    let knee_y = 0.92 * height - 0.40 * leg_len;
    let ankle_y = 0.92 * height - 0.82 * leg_len;

    let mut world = [Vec3::ZERO; JOINT_COUNT];
    world[PELVIS] = Vec3::new(0.0, 0.95 * height, 0.0);
    world[SPINE] = Vec3::new(0.0, 1.10 * height, 0.0);
    world[CHEST] = Vec3::new(0.0, 1.25 * height, 0.0);
    world[NECK] = Vec3::new(0.0, 1.45 * height, 0.0);
    world[HEAD] = Vec3::new(0.0, 1.58 * height, 0.0);
    world[L_SHOULDER] = shoulder;
    world[L_ELBOW] = shoulder + Vec3::new(elbow_dx, 0.0, 0.0);
    world[L_WRIST] = shoulder + Vec3::new(elbow_dx + wrist_dx, 0.0, 0.0);
    for (l, r) in [(L_SHOULDER, R_SHOULDER), (L_ELBOW, R_ELBOW), (L_WRIST, R_WRIST)] {
        world[r] = Vec3::new(-world[l].x, world[l].y, world[l].z);
    }
    world[L_HIP] = Vec3::new(hip_x, 0.92 * height, 0.0);
    world[L_KNEE] = Vec3::new(hip_x, knee_y, 0.0);
    world[L_ANKLE] = Vec3::new(hip_x, ankle_y, 0.0);
    for (l, r) in [(L_HIP, R_HIP), (L_KNEE, R_KNEE), (L_ANKLE, R_ANKLE)] {
        world[r] = Vec3::new(-world[l].x, world[l].y, world[l].z);
    }

    let joints: Vec<Joint> = (0..JOINT_COUNT)
        .map(|j| {
            let parent = match PARENTS[j] {
                -1 => None,
                p => Some(p as usize),
            };
            let local = match parent {
                None => world[j],
                Some(p) => world[j] - world[p],
            };
            Joint { parent, rest: Transform::from_translation(local) }
        })
        .collect();

    let hand_tip = 0.06 * arm_len;
    let parts = [
        LathePart {
            tile: (0, 0),
            a: Vec3::new(0.0, 0.78 * height, 0.0),
            b: world[NECK],
            radius: torso_r,
            chain: vec![PELVIS, SPINE, CHEST, NECK],
        },
        LathePart {
            tile: (1, 0),
            a: world[NECK],
            b: Vec3::new(0.0, 1.72 * height, 0.0),
            radius: head_r,
            chain: vec![NECK, HEAD],
        },
        LathePart {
            tile: (2, 0),
            a: world[L_SHOULDER],
            b: world[L_WRIST] + Vec3::new(hand_tip, 0.0, 0.0),
            radius: arm_r,
            chain: vec![L_SHOULDER, L_ELBOW, L_WRIST],
        },
        LathePart {
            tile: (0, 1),
            a: world[R_SHOULDER],
            b: world[R_WRIST] + Vec3::new(-hand_tip, 0.0, 0.0),
            radius: arm_r,
            chain: vec![R_SHOULDER, R_ELBOW, R_WRIST],
        },
        LathePart {
            tile: (1, 1),
            a: world[L_HIP],
            b: Vec3::new(hip_x, ankle_y - 0.08 * leg_len, 0.0),
            radius: leg_r,
            chain: vec![L_HIP, L_KNEE, L_ANKLE],
        },
        LathePart {
            tile: (2, 1),
            a: world[R_HIP],
            b: Vec3::new(-hip_x, ankle_y - 0.08 * leg_len, 0.0),
            radius: leg_r,
            chain: vec![R_HIP, R_KNEE, R_ANKLE],
        },
    ];

    let mut vertices = Vec::new();
    let mut uvs = Vec::new();
    let mut triangles = Vec::new();
    let mut skin_weights = Vec::new();
    for part in &parts {
        lathe(part, radial, rings, &world, &mut vertices, &mut uvs, &mut triangles, &mut skin_weights);
    }

    let mesh = RiggedMesh { vertices, triangles, uvs, joints, skin_weights };
    debug_assert!(mesh.validate().is_ok());
    mesh
}

/// Radius multiplier along the axis: 1 in the middle, shrinking to `END`
/// over the cap fraction at both ends. Ends stay nonzero so no triangle
/// degenerates.
fn cap_profile(t: f64) -> f64 {
    const CAP: f64 = 0.22;
    const END: f64 = 0.35;
    let d = t.min(1.0 - t);
    if d >= CAP {
        return 1.0;
    }
    let u = d / CAP;
    (END * END + (1.0 - END * END) * (2.0 * u - u * u)).sqrt()
}

#[allow(clippy::too_many_arguments)]
fn lathe(
    part: &LathePart,
    radial: usize,
    rings: usize,
    joint_world: &[Vec3],
    vertices: &mut Vec<Vec3>,
    uvs: &mut Vec<Vec2>,
    triangles: &mut Vec<[usize; 3]>,
    skin_weights: &mut Vec<Vec<(usize, f64)>>,
) {
    let base = vertices.len();
    let axis = part.b - part.a;
    let len = axis.norm();
    let d = axis / len;
    let reference = if d.x.abs() < 0.9 { Vec3::X } else { Vec3::Y };
    let e1 = reference.cross(d).normalized();
    let e2 = d.cross(e1);

    // Axial parameters of the chain joints, for skinning.
    let chain_t: Vec<f64> = part
        .chain
        .iter()
        .map(|&j| (((joint_world[j] - part.a).dot(d)) / len).clamp(0.0, 1.0))
        .collect();

    let cols = radial + 1;
    for row in 0..=rings {
        let t = row as f64 / rings as f64;
        let center = part.a + axis * t;
        let rho = part.radius * cap_profile(t);
        for col in 0..cols {
            let phi = 2.0 * std::f64::consts::PI * col as f64 / radial as f64;
            vertices.push(center + (e1 * phi.cos() + e2 * phi.sin()) * rho);
            uvs.push(Vec2::new(
                (part.tile.0 as f64 + col as f64 / radial as f64) / 3.0,
                (part.tile.1 as f64 + t) / 2.0,
            ));
            skin_weights.push(chain_weights(t, &chain_t, &part.chain));
        }
    }
    for row in 0..rings {
        for col in 0..radial {
            let v00 = base + row * cols + col;
            let v01 = v00 + 1;
            let v10 = v00 + cols;
            let v11 = v10 + 1;
            triangles.push([v00, v01, v11]);
            triangles.push([v00, v11, v10]);
        }
    }
}

/// Piecewise-linear blend between the two chain joints bracketing `t`.
fn chain_weights(t: f64, chain_t: &[f64], chain: &[usize]) -> Vec<(usize, f64)> {
    if t <= chain_t[0] {
        return vec![(chain[0], 1.0)];
    }
    let last = chain_t.len() - 1;
    if t >= chain_t[last] {
        return vec![(chain[last], 1.0)];
    }
    let mut seg = 0;
    while !(chain_t[seg] <= t && t < chain_t[seg + 1]) {
        seg += 1;
    }
    let f = (t - chain_t[seg]) / (chain_t[seg + 1] - chain_t[seg]);
    if f == 0.0 {
        vec![(chain[seg], 1.0)]
    } else {
        vec![(chain[seg], 1.0 - f), (chain[seg + 1], f)]
    }
}
