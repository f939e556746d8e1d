//! Ball-end tool model and exact tool-versus-voxel collision tests.
//!
//! Positions are in meters in the grid frame: voxel `(i, j, k)` occupies
//! `[i·e, (i+1)·e) × [j·e, (j+1)·e) × [k·e, (k+1)·e)` for edge length `e`.
//! Overlap means positive-volume intersection; touching does not count.

use serde::{Deserialize, Serialize};

use crate::error::ToolError;
use crate::grid::{GridIndex, VoxelGrid, VoxelState};

pub type Vec3 = [f64; 3];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ToolModel {
    pub tip_radius: f64,
    pub shaft_radius: f64,
    /// `None` means the shaft runs past the grid boundary.
    pub shaft_length: Option<f64>,
    /// Allowed cutting directions, each pointing from free space into material.
    pub approach_set: Vec<Vec3>,
}

pub const AXIS_DIRECTIONS: [Vec3; 6] = [
    [1.0, 0.0, 0.0],
    [-1.0, 0.0, 0.0],
    [0.0, 1.0, 0.0],
    [0.0, -1.0, 0.0],
    [0.0, 0.0, 1.0],
    [0.0, 0.0, -1.0],
];

impl ToolModel {
    pub fn default_for(edge_len: f64) -> Self {
        Self {
            tip_radius: 0.45 * edge_len,
            shaft_radius: 0.40 * edge_len,
            shaft_length: None,
            approach_set: AXIS_DIRECTIONS.to_vec(),
        }
    }

    pub fn validate(&self, edge_len: f64) -> Result<(), ToolError> {
        if 2.0 * self.tip_radius >= edge_len {
            return Err(ToolError::TipTooLarge {
                diameter: 2.0 * self.tip_radius,
                edge: edge_len,
            });
        }
        if self.shaft_radius > self.tip_radius {
            return Err(ToolError::ShaftTooWide {
                shaft: self.shaft_radius,
                tip: self.tip_radius,
            });
        }
        if self.approach_set.is_empty() {
            return Err(ToolError::EmptyApproachSet);
        }
        for d in &self.approach_set {
            if (norm(*d) - 1.0).abs() > 1e-9 {
                return Err(ToolError::NonUnitApproach(*d));
            }
        }
        Ok(())
    }

    /// Shaft end point for a pose, far enough out to leave the grid when the
    /// shaft is unbounded.
    pub fn shaft_end(&self, pose: &ToolPose, world: &VoxelGrid) -> Vec3 {
        let len = self
            .shaft_length
            .unwrap_or_else(|| world.edge_len * (world.dim() as f64 * 3f64.sqrt() + 2.0));
        sub(pose.tip, scale(pose.dir, len))
    }
}

/// Tip position and cutting direction. The shaft extends from the tip
/// along `-dir`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ToolPose {
    pub tip: Vec3,
    pub dir: Vec3,
}

pub fn add(a: Vec3, b: Vec3) -> Vec3 {
    [a[0] + b[0], a[1] + b[1], a[2] + b[2]]
}

pub fn sub(a: Vec3, b: Vec3) -> Vec3 {
    [a[0] - b[0], a[1] - b[1], a[2] - b[2]]
}

pub fn scale(a: Vec3, s: f64) -> Vec3 {
    [a[0] * s, a[1] * s, a[2] * s]
}

pub fn dot(a: Vec3, b: Vec3) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

pub fn norm(a: Vec3) -> f64 {
    dot(a, a).sqrt()
}

/// Center of a (possibly out-of-grid) voxel.
pub fn cell_center(c: [i64; 3], edge: f64) -> Vec3 {
    [
        (c[0] as f64 + 0.5) * edge,
        (c[1] as f64 + 0.5) * edge,
        (c[2] as f64 + 0.5) * edge,
    ]
}

/// Voxel containing a point.
pub fn cell_of(p: Vec3, edge: f64) -> [i64; 3] {
    [
        (p[0] / edge).floor() as i64,
        (p[1] / edge).floor() as i64,
        (p[2] / edge).floor() as i64,
    ]
}

/// Squared distance from a point to a box.
pub fn point_box_dist2(p: Vec3, lo: Vec3, hi: Vec3) -> f64 {
    (0..3)
        .map(|a| {
            let d = if p[a] < lo[a] {
                lo[a] - p[a]
            } else if p[a] > hi[a] {
                p[a] - hi[a]
            } else {
                0.0
            };
            d * d
        })
        .sum()
}

pub fn sphere_box_overlap(center: Vec3, r: f64, lo: Vec3, hi: Vec3) -> bool {
    point_box_dist2(center, lo, hi) < r * r
}

/// Exact squared distance between segment `pq` and a box. The distance along
/// the segment is a convex piecewise quadratic whose pieces change where a
/// coordinate crosses a box slab boundary; each piece is minimized in closed
/// form.
pub fn segment_box_dist2(p: Vec3, q: Vec3, lo: Vec3, hi: Vec3) -> f64 {
    let d = sub(q, p);
    let mut ts = vec![0.0, 1.0];
    for a in 0..3 {
        if d[a] != 0.0 {
            for b in [lo[a], hi[a]] {
                let t = (b - p[a]) / d[a];
                if t > 0.0 && t < 1.0 {
                    ts.push(t);
                }
            }
        }
    }
    ts.sort_by(f64::total_cmp);
    let at = |t: f64| point_box_dist2(add(p, scale(d, t)), lo, hi);
    let mut best = at(0.0).min(at(1.0));
    for w in ts.windows(2) {
        let (t0, t1) = (w[0], w[1]);
        if t1 <= t0 {
            continue;
        }
        let mid = add(p, scale(d, 0.5 * (t0 + t1)));
        // On this piece each coordinate is below, inside or above its slab.
        let mut qa = 0.0;
        let mut qb = 0.0;
        for a in 0..3 {
            let bound = if mid[a] < lo[a] {
                lo[a]
            } else if mid[a] > hi[a] {
                hi[a]
            } else {
                continue;
            };
            let off = p[a] - bound;
            qa += d[a] * d[a];
            qb += 2.0 * d[a] * off;
        }
        if qa > 0.0 {
            let t = (-qb / (2.0 * qa)).clamp(t0, t1);
            best = best.min(at(t));
        }
    }
    best
}

pub fn capsule_box_overlap(p: Vec3, q: Vec3, r: f64, lo: Vec3, hi: Vec3) -> bool {
    segment_box_dist2(p, q, lo, hi) < r * r
}

fn cell_box(c: [i64; 3], edge: f64) -> (Vec3, Vec3) {
    let lo = [c[0] as f64 * edge, c[1] as f64 * edge, c[2] as f64 * edge];
    (lo, add(lo, [edge; 3]))
}

fn is_material(world: &VoxelGrid, c: [i64; 3], exempt: Option<GridIndex>) -> bool {
    match world.get_signed(c) {
        Some(VoxelState::Keep) | Some(VoxelState::Remove) => {
            exempt.is_none_or(|e| e.to_signed() != c)
        }
        _ => false,
    }
}

fn axis_of(dir: Vec3) -> Option<usize> {
    (0..3).find(|&a| dir[a].abs() == 1.0 && dir[(a + 1) % 3] == 0.0 && dir[(a + 2) % 3] == 0.0)
}

/// True when the tip sphere or the shaft overlaps a `Keep` or `Remove` voxel
/// other than `cutting`.
pub fn tool_collides(pose: &ToolPose, world: &VoxelGrid, tool: &ToolModel, cutting: Option<GridIndex>) -> bool {
    let e = world.edge_len;
    let rt = tool.tip_radius;
    let lo_c = cell_of(sub(pose.tip, [rt; 3]), e);
    let hi_c = cell_of(add(pose.tip, [rt; 3]), e);
    for x in lo_c[0]..=hi_c[0] {
        for y in lo_c[1]..=hi_c[1] {
            for z in lo_c[2]..=hi_c[2] {
                let c = [x, y, z];
                if is_material(world, c, cutting) {
                    let (lo, hi) = cell_box(c, e);
                    if sphere_box_overlap(pose.tip, rt, lo, hi) {
                        return true;
                    }
                }
            }
        }
    }
    let end = tool.shaft_end(pose, world);
    match axis_of(pose.dir) {
        Some(a) => shaft_hits_axis(pose.tip, end, a, world, tool, cutting),
        None => shaft_hits_general(pose.tip, end, world, tool, cutting),
    }
}

// Axis-aligned shaft: a cylinder plus end caps. The cap at the tip lies inside
// the tip sphere; the far cap is tested as a sphere when the shaft is bounded.
fn shaft_hits_axis(tip: Vec3, end: Vec3, a: usize, world: &VoxelGrid, tool: &ToolModel, cutting: Option<GridIndex>) -> bool {
    let e = world.edge_len;
    let r = tool.shaft_radius;
    let (u, v) = ((a + 1) % 3, (a + 2) % 3);
    let (s0, s1) = if tip[a] < end[a] { (tip[a], end[a]) } else { (end[a], tip[a]) };
    let dim = world.dim() as i64;
    let a_lo = ((s0 / e).floor() as i64).max(0);
    let a_hi = ((s1 / e).floor() as i64).min(dim - 1);
    let u_lo = ((tip[u] - r) / e).floor() as i64;
    let u_hi = ((tip[u] + r) / e).floor() as i64;
    let v_lo = ((tip[v] - r) / e).floor() as i64;
    let v_hi = ((tip[v] + r) / e).floor() as i64;
    for cu in u_lo..=u_hi {
        for cv in v_lo..=v_hi {
            let du = dist_1d(tip[u], cu as f64 * e, (cu + 1) as f64 * e);
            let dv = dist_1d(tip[v], cv as f64 * e, (cv + 1) as f64 * e);
            if du * du + dv * dv >= r * r {
                continue;
            }
            for ca in a_lo..=a_hi {
                // Open-interval overlap along the shaft axis.
                if (ca + 1) as f64 * e <= s0 || ca as f64 * e >= s1 {
                    continue;
                }
                let mut c = [0i64; 3];
                c[a] = ca;
                c[u] = cu;
                c[v] = cv;
                if is_material(world, c, cutting) {
                    return true;
                }
            }
        }
    }
    if tool.shaft_length.is_some() {
        return sphere_hits(end, r, world, cutting);
    }
    false
}

fn shaft_hits_general(tip: Vec3, end: Vec3, world: &VoxelGrid, tool: &ToolModel, cutting: Option<GridIndex>) -> bool {
    let e = world.edge_len;
    let r = tool.shaft_radius;
    let len = norm(sub(end, tip));
    let steps = ((len / (0.5 * e)).ceil() as usize).max(1);
    let reach = r + 0.25 * e;
    let mut seen = std::collections::HashSet::new();
    for k in 0..=steps {
        let s = add(tip, scale(sub(end, tip), k as f64 / steps as f64));
        let lo_c = cell_of(sub(s, [reach; 3]), e);
        let hi_c = cell_of(add(s, [reach; 3]), e);
        for x in lo_c[0]..=hi_c[0] {
            for y in lo_c[1]..=hi_c[1] {
                for z in lo_c[2]..=hi_c[2] {
                    let c = [x, y, z];
                    if !is_material(world, c, cutting) || !seen.insert(c) {
                        continue;
                    }
                    let (lo, hi) = cell_box(c, e);
                    if capsule_box_overlap(tip, end, r, lo, hi) {
                        return true;
                    }
                }
            }
        }
    }
    false
}

fn sphere_hits(center: Vec3, r: f64, world: &VoxelGrid, cutting: Option<GridIndex>) -> bool {
    let e = world.edge_len;
    let lo_c = cell_of(sub(center, [r; 3]), e);
    let hi_c = cell_of(add(center, [r; 3]), e);
    for x in lo_c[0]..=hi_c[0] {
        for y in lo_c[1]..=hi_c[1] {
            for z in lo_c[2]..=hi_c[2] {
                let c = [x, y, z];
                if is_material(world, c, cutting) {
                    let (lo, hi) = cell_box(c, e);
                    if sphere_box_overlap(center, r, lo, hi) {
                        return true;
                    }
                }
            }
        }
    }
    false
}

fn dist_1d(p: f64, lo: f64, hi: f64) -> f64 {
    if p < lo {
        lo - p
    } else if p > hi {
        p - hi
    } else {
        0.0
    }
}
