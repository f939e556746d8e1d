//! Independent plan validation and brute-force oracles.
//!
//! Nothing here calls into the planners or their geometry helpers: adjacency,
//! collision and distance computations are re-implemented from the domain
//! types so that a bug in a planner cannot hide itself.

use std::collections::{BTreeSet, VecDeque};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::geometry::{ToolModel, ToolPose};
use crate::grid::{Face, GridIndex, VoxelGrid, VoxelState};
use crate::plan::VoxelPlan;
use crate::tool_planner::ToolPlan;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum ViolationKind {
    Coverage,
    Contiguity,
    KeepEntered,
    ToolCollision,
    CausalityBreak,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Violation {
    pub kind: ViolationKind,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub location: Option<[i64; 3]>,
    /// Global step (waypoint or pose) index.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub step: Option<usize>,
    pub detail: String,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct Verdict {
    pub pass: bool,
    pub violations: Vec<Violation>,
    pub steps_checked: usize,
}

impl Verdict {
    fn push(&mut self, kind: ViolationKind, location: Option<[i64; 3]>, step: Option<usize>, detail: impl Into<String>) {
        self.violations.push(Violation {
            kind,
            location,
            step,
            detail: detail.into(),
        });
    }

    fn finish(mut self) -> Self {
        self.pass = self.violations.is_empty();
        self
    }

    pub fn count(&self, kind: ViolationKind) -> usize {
        self.violations.iter().filter(|v| v.kind == kind).count()
    }

    pub fn to_json(&self) -> serde_json::Value {
        serde_json::to_value(self).expect("verdict json")
    }
}

fn on_boundary(dim: u32, i: GridIndex) -> bool {
    let m = dim - 1;
    [i.x, i.y, i.z].iter().any(|c| *c == 0 || *c == m)
}

fn check_coverage(world: &VoxelGrid, reported: &[GridIndex], v: &mut Verdict) {
    let reported: BTreeSet<GridIndex> = reported.iter().copied().collect();
    for i in world.indices() {
        let left = world.get(i) == VoxelState::Remove;
        if left && !reported.contains(&i) {
            v.push(ViolationKind::Coverage, Some(i.to_signed()), None, format!("voxel {i} left uncut"));
        }
        if !left && reported.contains(&i) {
            v.push(
                ViolationKind::Coverage,
                Some(i.to_signed()),
                None,
                format!("voxel {i} reported unreachable but is not Remove"),
            );
        }
    }
}

/// Replays a translating-robot plan on a copy of the pristine `grid`.
pub fn validate_voxel_plan(plan: &VoxelPlan, grid: &VoxelGrid) -> Verdict {
    let mut world = grid.clone();
    let mut v = Verdict::default();
    let mut step = 0usize;
    for path in &plan.paths {
        let mut prev: Option<GridIndex> = None;
        for w in &path.waypoints {
            let at = w.at;
            let loc = Some(at.to_signed());
            match prev {
                None if !on_boundary(grid.dim(), at) => {
                    v.push(ViolationKind::Contiguity, loc, Some(step), "path does not enter from an outer face")
                }
                Some(p) if p.l1(at) != 1 => {
                    v.push(ViolationKind::Contiguity, loc, Some(step), format!("step {p} -> {at} is not a unit move"))
                }
                _ => {}
            }
            match world.get(at) {
                VoxelState::Keep => v.push(ViolationKind::KeepEntered, loc, Some(step), format!("entered Keep voxel {at}")),
                VoxelState::Remove => {
                    if !w.removes {
                        v.push(
                            ViolationKind::CausalityBreak,
                            loc,
                            Some(step),
                            format!("entered Remove voxel {at} without removing it"),
                        );
                    }
                    world.set(at, VoxelState::Freed);
                }
                VoxelState::Freed | VoxelState::Void => {
                    if w.removes {
                        v.push(
                            ViolationKind::CausalityBreak,
                            loc,
                            Some(step),
                            format!("removal of {at} which holds no material"),
                        );
                    }
                }
            }
            prev = Some(at);
            step += 1;
        }
    }
    v.steps_checked = step;
    check_coverage(&world, &plan.unreachable, &mut v);
    v.finish()
}

#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct ToolCheckOptions {
    /// Monte-Carlo samples per nearby solid voxel, zero to disable.
    pub mc_samples: usize,
    pub seed: u64,
}

/// Squared distance from a point to an axis-aligned box.
fn dist2_point_box(p: [f64; 3], lo: [f64; 3], hi: [f64; 3]) -> f64 {
    let mut s = 0.0;
    for a in 0..3 {
        let c = p[a].clamp(lo[a], hi[a]);
        s += (p[a] - c) * (p[a] - c);
    }
    s
}

/// Squared distance from segment `pq` to a box by golden-section search on
/// the (convex) distance along the segment.
fn dist2_segment_box(p: [f64; 3], q: [f64; 3], lo: [f64; 3], hi: [f64; 3]) -> f64 {
    let at = |t: f64| {
        let x = [p[0] + t * (q[0] - p[0]), p[1] + t * (q[1] - p[1]), p[2] + t * (q[2] - p[2])];
        dist2_point_box(x, lo, hi)
    };
    let g = (5f64.sqrt() - 1.0) / 2.0;
    let (mut a, mut b) = (0.0f64, 1.0f64);
    let mut c = b - g * (b - a);
    let mut d = a + g * (b - a);
    let (mut fc, mut fd) = (at(c), at(d));
    for _ in 0..200 {
        if fc <= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - g * (b - a);
            fc = at(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + g * (b - a);
            fd = at(d);
        }
    }
    at(0.0).min(at(1.0)).min(fc).min(fd)
}

struct ToolShape {
    tip: [f64; 3],
    tail: [f64; 3],
    rt: f64,
    rs: f64,
}

impl ToolShape {
    fn new(pose: &ToolPose, world: &VoxelGrid, tool: &ToolModel) -> Self {
        let e = world.edge_len;
        let len = tool.shaft_length.unwrap_or(e * (world.dim() as f64 * 2.0 + 4.0));
        let tail = [
            pose.tip[0] - pose.dir[0] * len,
            pose.tip[1] - pose.dir[1] * len,
            pose.tip[2] - pose.dir[2] * len,
        ];
        Self {
            tip: pose.tip,
            tail,
            rt: tool.tip_radius,
            rs: tool.shaft_radius,
        }
    }

    fn contains(&self, x: [f64; 3]) -> bool {
        let d2 = (0..3).map(|a| (x[a] - self.tip[a]).powi(2)).sum::<f64>();
        if d2 < self.rt * self.rt {
            return true;
        }
        let u: Vec<f64> = (0..3).map(|a| self.tail[a] - self.tip[a]).collect();
        let uu: f64 = u.iter().map(|c| c * c).sum();
        let t = ((0..3).map(|a| (x[a] - self.tip[a]) * u[a]).sum::<f64>() / uu).clamp(0.0, 1.0);
        let s2 = (0..3).map(|a| (x[a] - self.tip[a] - t * u[a]).powi(2)).sum::<f64>();
        s2 < self.rs * self.rs
    }

    /// Grid voxels within the bounding box of the tool.
    fn candidate_cells(&self, world: &VoxelGrid) -> Vec<GridIndex> {
        let e = world.edge_len;
        let dim = world.dim() as i64;
        let r = self.rt.max(self.rs);
        let mut lo = [0i64; 3];
        let mut hi = [0i64; 3];
        for a in 0..3 {
            let mn = self.tip[a].min(self.tail[a]) - r;
            let mx = self.tip[a].max(self.tail[a]) + r;
            lo[a] = ((mn / e).floor() as i64).max(0);
            hi[a] = ((mx / e).floor() as i64).min(dim - 1);
        }
        let mut out = Vec::new();
        for x in lo[0]..=hi[0] {
            for y in lo[1]..=hi[1] {
                for z in lo[2]..=hi[2] {
                    out.push(GridIndex::new(x as u32, y as u32, z as u32));
                }
            }
        }
        out
    }
}

fn solid(s: VoxelState) -> bool {
    matches!(s, VoxelState::Keep | VoxelState::Remove)
}

fn cube(i: GridIndex, e: f64) -> ([f64; 3], [f64; 3]) {
    let lo = [i.x as f64 * e, i.y as f64 * e, i.z as f64 * e];
    (lo, [lo[0] + e, lo[1] + e, lo[2] + e])
}

/// First solid voxel (other than `exempt`) the tool overlaps, if any.
pub fn tool_overlap(pose: &ToolPose, world: &VoxelGrid, tool: &ToolModel, exempt: Option<GridIndex>) -> Option<GridIndex> {
    let shape = ToolShape::new(pose, world, tool);
    let e = world.edge_len;
    shape.candidate_cells(world).into_iter().find(|&i| {
        if Some(i) == exempt || !solid(world.get(i)) {
            return false;
        }
        let (lo, hi) = cube(i, e);
        dist2_point_box(shape.tip, lo, hi) < shape.rt * shape.rt
            || dist2_segment_box(shape.tip, shape.tail, lo, hi) < shape.rs * shape.rs
    })
}

/// Monte-Carlo containment check: samples points inside every nearby solid
/// voxel and reports the first voxel with a sample strictly inside the tool.
pub fn tool_overlap_sampled(
    pose: &ToolPose,
    world: &VoxelGrid,
    tool: &ToolModel,
    exempt: Option<GridIndex>,
    samples_per_voxel: usize,
    rng: &mut impl Rng,
) -> Option<GridIndex> {
    let shape = ToolShape::new(pose, world, tool);
    let e = world.edge_len;
    for i in shape.candidate_cells(world) {
        if Some(i) == exempt || !solid(world.get(i)) {
            continue;
        }
        let (lo, _) = cube(i, e);
        for _ in 0..samples_per_voxel {
            let x = [
                lo[0] + rng.gen::<f64>() * e,
                lo[1] + rng.gen::<f64>() * e,
                lo[2] + rng.gen::<f64>() * e,
            ];
            if shape.contains(x) {
                return Some(i);
            }
        }
    }
    None
}

fn center(i: GridIndex, e: f64) -> [f64; 3] {
    [(i.x as f64 + 0.5) * e, (i.y as f64 + 0.5) * e, (i.z as f64 + 0.5) * e]
}

fn has_open_face(world: &VoxelGrid, i: GridIndex) -> bool {
    let d = world.dim() as i64;
    let p = i.to_signed();
    [[1, 0, 0], [-1, 0, 0], [0, 1, 0], [0, -1, 0], [0, 0, 1], [0, 0, -1]]
        .iter()
        .any(|o: &[i64; 3]| {
            let n = [p[0] + o[0], p[1] + o[1], p[2] + o[2]];
            if n.iter().any(|c| *c < 0 || *c >= d) {
                return true;
            }
            matches!(
                world.get(GridIndex::new(n[0] as u32, n[1] as u32, n[2] as u32)),
                VoxelState::Freed | VoxelState::Void
            )
        })
}

/// Replays a tool plan pose by pose against an evolving copy of `grid`.
pub fn validate_tool_plan(plan: &ToolPlan, grid: &VoxelGrid, tool: &ToolModel, options: ToolCheckOptions) -> Verdict {
    let mut world = grid.clone();
    let mut v = Verdict::default();
    let e = world.edge_len;
    let mut rng = ChaCha8Rng::seed_from_u64(options.seed);
    let mut prev: Option<ToolPose> = None;
    let mut check = |pose: &ToolPose, world: &VoxelGrid, exempt: Option<GridIndex>, step: usize, what: &str, v: &mut Verdict| {
        let mut hit = tool_overlap(pose, world, tool, exempt);
        if hit.is_none() && options.mc_samples > 0 {
            hit = tool_overlap_sampled(pose, world, tool, exempt, options.mc_samples, &mut rng);
        }
        if let Some(i) = hit {
            v.push(
                ViolationKind::ToolCollision,
                Some(i.to_signed()),
                Some(step),
                format!("{what} overlaps {} voxel {i}", world.get(i).code()),
            );
        }
    };
    for (step, (_, s)) in plan.steps().enumerate() {
        let pose = s.pose;
        if let Some(p) = prev {
            let d = (0..3).map(|a| (pose.tip[a] - p.tip[a]).powi(2)).sum::<f64>().sqrt();
            if d > e * (1.0 + 1e-9) {
                v.push(
                    ViolationKind::Contiguity,
                    None,
                    Some(step),
                    format!("tip moved {d:.6} m, more than one voxel edge"),
                );
            }
            if d > 0.0 && p.dir == pose.dir {
                let mid = ToolPose {
                    tip: [
                        0.5 * (p.tip[0] + pose.tip[0]),
                        0.5 * (p.tip[1] + pose.tip[1]),
                        0.5 * (p.tip[2] + pose.tip[2]),
                    ],
                    dir: pose.dir,
                };
                check(&mid, &world, s.removes, step, "midpoint", &mut v);
            }
        }
        match s.removes {
            Some(i) => {
                let c = center(i, e);
                if (0..3).any(|a| (c[a] - pose.tip[a]).abs() > 1e-9 * e.max(1.0)) {
                    v.push(
                        ViolationKind::Contiguity,
                        Some(i.to_signed()),
                        Some(step),
                        format!("cut of {i} with tip away from its center"),
                    );
                }
                if world.get(i) != VoxelState::Remove {
                    v.push(
                        ViolationKind::CausalityBreak,
                        Some(i.to_signed()),
                        Some(step),
                        format!("cut of {i} which is {}", world.get(i).code()),
                    );
                } else if !has_open_face(&world, i) {
                    v.push(
                        ViolationKind::CausalityBreak,
                        Some(i.to_signed()),
                        Some(step),
                        format!("cut of {i} before any face was open"),
                    );
                }
                check(&pose, &world, Some(i), step, "cut pose", &mut v);
                if world.get(i) == VoxelState::Remove {
                    world.set(i, VoxelState::Freed);
                }
            }
            None => check(&pose, &world, None, step, "pose", &mut v),
        }
        prev = Some(pose);
        v.steps_checked += 1;
    }
    check_coverage(&world, &plan.unreachable, &mut v);
    v.finish()
}

/// Brute-force oracles shared by tests and the acceptance harness.
pub mod oracles {
    use super::*;

    /// Remaining `Remove` count plus exact minimum L1 distance, by full scan.
    pub fn remaining_distance(grid: &VoxelGrid, robot: GridIndex) -> u64 {
        let mut n = 0u64;
        let mut best = u64::MAX;
        for i in grid.indices() {
            if grid.get(i) == VoxelState::Remove {
                n += 1;
                best = best.min(i.l1(robot) as u64);
            }
        }
        if n == 0 {
            0
        } else {
            n + best
        }
    }

    /// Nearest `Remove` voxel by full scan, lexicographic tie-break.
    pub fn nearest(grid: &VoxelGrid, from: GridIndex) -> Option<(GridIndex, u32)> {
        grid.indices()
            .filter(|i| grid.get(*i) == VoxelState::Remove)
            .map(|i| (i.l1(from), i))
            .min()
            .map(|(d, i)| (i, d))
    }

    fn uniform(grid: &VoxelGrid, o: [u32; 3], s: u32) -> bool {
        let class = |st: VoxelState| match st {
            VoxelState::Freed | VoxelState::Void => 2u8,
            VoxelState::Keep => 0,
            VoxelState::Remove => 1,
        };
        let first = class(grid.get(GridIndex::new(o[0], o[1], o[2])));
        for x in o[0]..o[0] + s {
            for y in o[1]..o[1] + s {
                for z in o[2]..o[2] + s {
                    if class(grid.get(GridIndex::new(x, y, z))) != first {
                        return false;
                    }
                }
            }
        }
        true
    }

    /// Leaf count of the pruned octree by naive recursive subdivision.
    pub fn octree_leaf_count(grid: &VoxelGrid) -> usize {
        fn rec(grid: &VoxelGrid, o: [u32; 3], s: u32) -> usize {
            if s == 1 || uniform(grid, o, s) {
                return 1;
            }
            let h = s / 2;
            let mut n = 0;
            for dx in [0, h] {
                for dy in [0, h] {
                    for dz in [0, h] {
                        n += rec(grid, [o[0] + dx, o[1] + dy, o[2] + dz], h);
                    }
                }
            }
            n
        }
        rec(grid, [0, 0, 0], grid.dim())
    }

    /// Exposed voxel faces of `Keep` (optionally also `Remove`) voxels.
    pub fn surface_faces(grid: &VoxelGrid, include_remove: bool) -> usize {
        let shown = |s: VoxelState| s == VoxelState::Keep || (include_remove && s == VoxelState::Remove);
        let d = grid.dim() as i64;
        let mut n = 0;
        for i in grid.indices() {
            if !shown(grid.get(i)) {
                continue;
            }
            let p = i.to_signed();
            for f in Face::ALL {
                let o = f.normal();
                let q = [p[0] + o[0] as i64, p[1] + o[1] as i64, p[2] + o[2] as i64];
                let out = q.iter().any(|c| *c < 0 || *c >= d);
                if out || !shown(grid.get(GridIndex::new(q[0] as u32, q[1] as u32, q[2] as u32))) {
                    n += 1;
                }
            }
        }
        n
    }

    /// `Remove` voxels a translating robot entering from outside can reach
    /// through 6-connected non-`Keep` space.
    pub fn robot_reachable(grid: &VoxelGrid) -> BTreeSet<GridIndex> {
        let mut seen = vec![false; grid.len()];
        let mut queue = VecDeque::new();
        for i in grid.indices() {
            if on_boundary(grid.dim(), i) && grid.get(i) != VoxelState::Keep {
                seen[grid.linear(i)] = true;
                queue.push_back(i);
            }
        }
        let mut out = BTreeSet::new();
        while let Some(u) = queue.pop_front() {
            if grid.get(u) == VoxelState::Remove {
                out.insert(u);
            }
            for (_, n) in grid.neighbors6(u) {
                let k = grid.linear(n);
                if !seen[k] && grid.get(n) != VoxelState::Keep {
                    seen[k] = true;
                    queue.push_back(n);
                }
            }
        }
        out
    }

    /// `Remove` voxels a ball-end tool with axis approaches and an unbounded
    /// shaft can never cut. Poses live on voxel centers one layer around the
    /// grid; a pose is clear when its voxel and every voxel behind it along
    /// the shaft are free. This voxel-level reading is exact when both radii
    /// are below half an edge. Reachable cuts are applied in rounds until
    /// nothing changes.
    pub fn tool_unreachable(grid: &VoxelGrid) -> Vec<GridIndex> {
        let mut world = grid.clone();
        let dim = grid.dim() as i64;
        let side = dim + 2;
        let dirs: [[i64; 3]; 6] = [[1, 0, 0], [-1, 0, 0], [0, 1, 0], [0, -1, 0], [0, 0, 1], [0, 0, -1]];
        let idx = |c: [i64; 3]| (((c[0] + 1) * side + (c[1] + 1)) * side + (c[2] + 1)) as usize;
        let inside = |c: [i64; 3]| c.iter().all(|v| *v >= -1 && *v <= dim);
        loop {
            let free = |c: [i64; 3]| {
                if c.iter().any(|v| *v < 0 || *v >= dim) {
                    return true;
                }
                matches!(
                    world.get(GridIndex::new(c[0] as u32, c[1] as u32, c[2] as u32)),
                    VoxelState::Freed | VoxelState::Void
                )
            };
            let n = (side * side * side) as usize;
            // clear[d][c]: c and every cell behind it (against d) are free.
            let mut clear = vec![vec![false; n]; 6];
            for (d, dir) in dirs.iter().enumerate() {
                for x in -1..=dim {
                    for y in -1..=dim {
                        for z in -1..=dim {
                            let c = [x, y, z];
                            clear[d][idx(c)] = {
                                let mut p = c;
                                let mut ok = true;
                                while inside(p) {
                                    if !free(p) {
                                        ok = false;
                                        break;
                                    }
                                    p = [p[0] - dir[0], p[1] - dir[1], p[2] - dir[2]];
                                }
                                ok
                            };
                        }
                    }
                }
            }
            let mut reach = vec![vec![false; n]; 6];
            let mut queue = VecDeque::new();
            let home = [-1, -1, -1];
            for d in 0..6 {
                if clear[d][idx(home)] {
                    reach[d][idx(home)] = true;
                    queue.push_back((home, d));
                }
            }
            while let Some((c, d)) = queue.pop_front() {
                for (o, _) in dirs.iter().zip(0..) {
                    let m = [c[0] + o[0], c[1] + o[1], c[2] + o[2]];
                    if inside(m) && clear[d][idx(m)] && !reach[d][idx(m)] {
                        reach[d][idx(m)] = true;
                        queue.push_back((m, d));
                    }
                }
                for d2 in 0..6 {
                    if clear[d2][idx(c)] && !reach[d2][idx(c)] {
                        reach[d2][idx(c)] = true;
                        queue.push_back((c, d2));
                    }
                }
            }
            let mut cut = Vec::new();
            for i in world.indices() {
                if world.get(i) != VoxelState::Remove {
                    continue;
                }
                let p = i.to_signed();
                for (d, dir) in dirs.iter().enumerate() {
                    // Gate on the far side of the cutting direction.
                    let g = [p[0] - dir[0], p[1] - dir[1], p[2] - dir[2]];
                    if reach[d][idx(g)] {
                        cut.push(i);
                        break;
                    }
                }
            }
            if cut.is_empty() {
                break;
            }
            for i in cut {
                world.set(i, VoxelState::Freed);
            }
        }
        let mut left = world.voxels_in(VoxelState::Remove);
        left.sort_unstable();
        left
    }
}
