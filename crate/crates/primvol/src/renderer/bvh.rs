//! Bounding-volume hierarchy over the primitives' world-space bounds.
//!
//! Binary tree, median split on the longest axis of the centroid bounds,
//! leaves of at most 4 primitives. Construction and traversal are fully
//! deterministic (total order on floats, index tie-breaks), so renders are
//! reproducible and the brute-force path matches bitwise.

use crate::body::PrimitiveKinematics;
use crate::math::Vec3;
use crate::renderer::set::PrimPlacement;

pub const MAX_LEAF_SIZE: usize = 4;

#[derive(Clone, Copy, Debug)]
struct Node {
    lo: Vec3,
    hi: Vec3,
    /// Child node indices; leaves store u32::MAX in `left`.
    left: u32,
    right: u32,
    /// Leaf payload: range into `order`.
    start: u32,
    count: u32,
}

#[derive(Clone, Debug)]
pub struct Bvh {
    nodes: Vec<Node>,
    order: Vec<u32>,
    placements: Vec<PrimPlacement>,
}

/// One ray/box overlap, world-space distances along the ray.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Interval {
    pub prim: usize,
    pub t_enter: f64,
    pub t_exit: f64,
}

impl Bvh {
    pub fn build(kinematics: &[PrimitiveKinematics]) -> Bvh {
        Bvh::from_placements(kinematics.iter().map(PrimPlacement::of).collect())
    }

    pub(crate) fn from_placements(placements: Vec<PrimPlacement>) -> Bvh {
        assert!(!placements.is_empty(), "BVH needs at least one primitive");
        let aabbs: Vec<(Vec3, Vec3)> = placements.iter().map(|p| p.aabb()).collect();
        let mut order: Vec<u32> = (0..placements.len() as u32).collect();
        let mut nodes = Vec::new();
        build_node(&aabbs, &mut order, 0, placements.len(), &mut nodes);
        Bvh { nodes, order, placements }
    }

    /// All primitives whose oriented box overlaps the ray within
    /// [t_min, t_max], sorted by (t_enter, primitive index).
    pub fn intersect(&self, origin: Vec3, dir: Vec3, t_min: f64, t_max: f64) -> Vec<Interval> {
        self.intersect_with_stack(origin, dir, t_min, t_max, &mut Vec::new(), Vec::new())
    }

    /// Same as [`Bvh::intersect`] with caller-owned buffers, for hot loops.
    pub(crate) fn intersect_with_stack(
        &self,
        origin: Vec3,
        dir: Vec3,
        t_min: f64,
        t_max: f64,
        stack: &mut Vec<u32>,
        mut out: Vec<Interval>,
    ) -> Vec<Interval> {
        out.clear();
        stack.clear();
        stack.push(0);
        while let Some(ni) = stack.pop() {
            let node = &self.nodes[ni as usize];
            if !slab_hit_aabb(node.lo, node.hi, origin, dir, t_min, t_max) {
                continue;
            }
            if node.left == u32::MAX {
                for &p in &self.order[node.start as usize..(node.start + node.count) as usize] {
                    if let Some(iv) = oriented_box_interval(
                        &self.placements[p as usize],
                        origin,
                        dir,
                        t_min,
                        t_max,
                    ) {
                        out.push(Interval { prim: p as usize, t_enter: iv.0, t_exit: iv.1 });
                    }
                }
            } else {
                stack.push(node.right);
                stack.push(node.left);
            }
        }
        sort_intervals(&mut out);
        out
    }
}

/// Exhaustive alternative to [`Bvh::intersect`]; same contract, same order.
pub fn intersect_brute(
    kinematics: &[PrimitiveKinematics],
    origin: Vec3,
    dir: Vec3,
    t_min: f64,
    t_max: f64,
) -> Vec<Interval> {
    let placements: Vec<PrimPlacement> = kinematics.iter().map(PrimPlacement::of).collect();
    intersect_brute_placements(&placements, origin, dir, t_min, t_max, Vec::new())
}

pub(crate) fn intersect_brute_placements(
    placements: &[PrimPlacement],
    origin: Vec3,
    dir: Vec3,
    t_min: f64,
    t_max: f64,
    mut out: Vec<Interval>,
) -> Vec<Interval> {
    out.clear();
    for (p, prim) in placements.iter().enumerate() {
        if let Some((enter, exit)) = oriented_box_interval(prim, origin, dir, t_min, t_max) {
            out.push(Interval { prim: p, t_enter: enter, t_exit: exit });
        }
    }
    sort_intervals(&mut out);
    out
}

fn sort_intervals(intervals: &mut [Interval]) {
    intervals.sort_by(|a, b| {
        a.t_enter.total_cmp(&b.t_enter).then_with(|| a.prim.cmp(&b.prim))
    });
}

fn build_node(
    aabbs: &[(Vec3, Vec3)],
    order: &mut [u32],
    start: usize,
    count: usize,
    nodes: &mut Vec<Node>,
) -> u32 {
    let slice = &order[start..start + count];
    let mut lo = Vec3::splat(f64::INFINITY);
    let mut hi = Vec3::splat(f64::NEG_INFINITY);
    let mut c_lo = lo;
    let mut c_hi = hi;
    for &p in slice.iter() {
        let (a, b) = aabbs[p as usize];
        lo = lo.min_elem(a);
        hi = hi.max_elem(b);
        let c = (a + b) * 0.5;
        c_lo = c_lo.min_elem(c);
        c_hi = c_hi.max_elem(c);
    }

    let index = nodes.len() as u32;
    nodes.push(Node {
        lo,
        hi,
        left: u32::MAX,
        right: u32::MAX,
        start: start as u32,
        count: count as u32,
    });
    if count <= MAX_LEAF_SIZE {
        return index;
    }

    let span = c_hi - c_lo;
    let axis = if span.x >= span.y && span.x >= span.z {
        0
    } else if span.y >= span.z {
        1
    } else {
        2
    };
    order[start..start + count].sort_by(|&a, &b| {
        let ca = (aabbs[a as usize].0.axis(axis) + aabbs[a as usize].1.axis(axis)) * 0.5;
        let cb = (aabbs[b as usize].0.axis(axis) + aabbs[b as usize].1.axis(axis)) * 0.5;
        ca.total_cmp(&cb).then_with(|| a.cmp(&b))
    });
    let half = count / 2;
    let left = build_node(aabbs, order, start, half, nodes);
    let right = build_node(aabbs, order, start + half, count - half, nodes);
    nodes[index as usize].left = left;
    nodes[index as usize].right = right;
    index
}

/// Does the ray hit the axis-aligned box within [t_min, t_max]?
fn slab_hit_aabb(lo: Vec3, hi: Vec3, origin: Vec3, dir: Vec3, t_min: f64, t_max: f64) -> bool {
    let mut enter = t_min;
    let mut exit = t_max;
    for a in 0..3 {
        let o = origin.axis(a);
        let d = dir.axis(a);
        let (l, h) = (lo.axis(a), hi.axis(a));
        if d == 0.0 {
            if o < l || o > h {
                return false;
            }
        } else {
            let inv = 1.0 / d;
            let (t0, t1) = if inv >= 0.0 { ((l - o) * inv, (h - o) * inv) } else { ((h - o) * inv, (l - o) * inv) };
            enter = enter.max(t0);
            exit = exit.min(t1);
            if enter > exit {
                return false;
            }
        }
    }
    true
}

/// Slab test in the primitive's local frame. Directions keep world length
/// (the rotation is orthonormal), so the returned t's are world distances.
pub(crate) fn oriented_box_interval(
    prim: &PrimPlacement,
    origin: Vec3,
    dir: Vec3,
    t_min: f64,
    t_max: f64,
) -> Option<(f64, f64)> {
    let o = prim.rot.tr_mul_vec(origin - prim.translation);
    let d = prim.rot.tr_mul_vec(dir);
    let mut enter = t_min;
    let mut exit = t_max;
    for a in 0..3 {
        let s = prim.scale.axis(a);
        let oa = o.axis(a);
        let da = d.axis(a);
        if da == 0.0 {
            if oa < -s || oa > s {
                return None;
            }
        } else {
            let inv = 1.0 / da;
            let (t0, t1) = if inv >= 0.0 { ((-s - oa) * inv, (s - oa) * inv) } else { ((s - oa) * inv, (-s - oa) * inv) };
            enter = enter.max(t0);
            exit = exit.min(t1);
            if enter > exit {
                return None;
            }
        }
    }
    Some((enter, exit))
}
