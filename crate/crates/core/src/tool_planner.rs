//! Block-by-block planner for a ball-end tool.
//!
//! The tool moves on a lattice of voxel centers, one layer wider than the
//! grid on every side, with a cutting direction from the tool's approach set.
//! A move is a unit translation or a reorientation in place; translations are
//! checked at both end poses and at the midpoint. A voxel is cut by stepping
//! the tip from a free neighbor into its center along the neighbor's inward
//! direction.
//!
//! Removing material only ever frees space, so any block or voxel that can be
//! removed stays removable after further removals. Both the outer search over
//! blocks and the inner search over voxels therefore commit to the first
//! admitted child without backtracking.

use std::collections::{BTreeSet, HashMap, HashSet};

use serde::Serialize;

use crate::clock::Stopwatch;
use crate::error::PlanError;
use crate::geometry::{cell_center, cell_of, tool_collides, ToolModel, ToolPose, Vec3};
use crate::grid::{Face, GridIndex, VoxelGrid, VoxelState};
use crate::octree::{Block, BlockId, BlockValue, OctreeGraph};
use crate::search::{best_first, digest_of, greedy_descent, DescentStatus, Limits, Problem, SearchOptions, SearchStatus};

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ToolStep {
    pub pose: ToolPose,
    /// Voxel cut on arrival at this pose.
    pub removes: Option<GridIndex>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ToolTrajectory {
    pub block: BlockId,
    pub entry_face: Face,
    pub steps: Vec<ToolStep>,
}

impl ToolTrajectory {
    pub fn removed(&self) -> impl Iterator<Item = GridIndex> + '_ {
        self.steps.iter().filter_map(|s| s.removes)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Unremovable {
    NoApproachFace,
    InnerSearchExhausted,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Removability {
    Removable(ToolTrajectory),
    Unremovable(Unremovable),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ToolPlanOptions {
    pub limits: Limits,
    /// Penalty for a cut that leaves the line of the previous two cuts.
    pub lambda_line: f64,
    /// Penalty for a cut direction pointing out through an open block face.
    pub lambda_in: f64,
    pub cleanup: bool,
}

impl Default for ToolPlanOptions {
    fn default() -> Self {
        Self {
            limits: Limits::none(),
            lambda_line: 0.5,
            lambda_in: 1.0,
            cleanup: true,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct ToolMetrics {
    /// Blocks committed by the outer search.
    pub expansions: u64,
    /// Removability probes (inner searches) run.
    pub probes: u64,
    pub inner_expansions: u64,
    pub local_plans: u64,
    pub splits: usize,
    pub blocks: usize,
    pub wall_ms: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct ToolPlan {
    pub trajectories: Vec<ToolTrajectory>,
    /// Remove voxels no trajectory could reach, sorted.
    pub unreachable: Vec<GridIndex>,
    pub metrics: ToolMetrics,
}

impl ToolPlan {
    pub fn steps(&self) -> impl Iterator<Item = (BlockId, &ToolStep)> + '_ {
        self.trajectories
            .iter()
            .flat_map(|t| t.steps.iter().map(move |s| (t.block, s)))
    }

    pub fn is_complete(&self) -> bool {
        self.unreachable.is_empty()
    }
}

/// Parking pose outside the grid where every tool plan starts.
pub fn home_pose(world: &VoxelGrid, tool: &ToolModel) -> ToolPose {
    ToolPose {
        tip: cell_center([-1, -1, -1], world.edge_len),
        dir: tool.approach_set[0],
    }
}

/// Faces of `voxel` whose neighbor is free or outside the grid.
pub fn open_faces(voxel: GridIndex, world: &VoxelGrid) -> Vec<Face> {
    Face::ALL
        .into_iter()
        .filter(|f| match voxel.step(*f, world.dim()) {
            None => true,
            Some(n) => world.get(n).is_free(),
        })
        .collect()
}

fn inward(face: Face) -> Vec3 {
    let n = face.normal();
    [-n[0] as f64, -n[1] as f64, -n[2] as f64]
}

fn dir_index(tool: &ToolModel, d: Vec3) -> Option<usize> {
    tool.approach_set.iter().position(|a| *a == d)
}

fn offset(c: [i64; 3], face: Face) -> [i64; 3] {
    let n = face.normal();
    [c[0] + n[0] as i64, c[1] + n[1] as i64, c[2] + n[2] as i64]
}

fn l1(a: [i64; 3], b: [i64; 3]) -> i64 {
    (a[0] - b[0]).abs() + (a[1] - b[1]).abs() + (a[2] - b[2]).abs()
}

/// Pose validity on the tool lattice, memoized for one world state.
struct Clearance<'a> {
    world: &'a VoxelGrid,
    tool: &'a ToolModel,
    poses: HashMap<([i64; 3], usize), bool>,
}

impl<'a> Clearance<'a> {
    fn new(world: &'a VoxelGrid, tool: &'a ToolModel) -> Self {
        Self {
            world,
            tool,
            poses: HashMap::new(),
        }
    }

    fn in_lattice(&self, c: [i64; 3]) -> bool {
        let d = self.world.dim() as i64;
        c.iter().all(|v| *v >= -1 && *v <= d)
    }

    fn pose(&self, c: [i64; 3], d: usize) -> ToolPose {
        ToolPose {
            tip: cell_center(c, self.world.edge_len),
            dir: self.tool.approach_set[d],
        }
    }

    fn ok(&mut self, c: [i64; 3], d: usize) -> bool {
        if let Some(v) = self.poses.get(&(c, d)) {
            return *v;
        }
        let free = self.in_lattice(c) && self.world.get_signed(c).is_none_or(|s| s.is_free());
        let v = free && !tool_collides(&self.pose(c, d), self.world, self.tool, None);
        self.poses.insert((c, d), v);
        v
    }

    /// Translation between face-adjacent cells keeping direction `d`.
    fn step_ok(&mut self, a: [i64; 3], b: [i64; 3], d: usize, cutting: Option<GridIndex>) -> bool {
        let e = self.world.edge_len;
        let ta = cell_center(a, e);
        let tb = cell_center(b, e);
        let mid = ToolPose {
            tip: [0.5 * (ta[0] + tb[0]), 0.5 * (ta[1] + tb[1]), 0.5 * (ta[2] + tb[2])],
            dir: self.tool.approach_set[d],
        };
        !tool_collides(&mid, self.world, self.tool, cutting)
    }
}

struct LocalProblem<'c, 'a> {
    clear: &'c mut Clearance<'a>,
    goal: ([i64; 3], usize),
    ndirs: usize,
}

impl Problem for LocalProblem<'_, '_> {
    type State = ([i64; 3], usize);
    type Key = ([i64; 3], usize);

    fn key(&self, s: &Self::State) -> Self::Key {
        *s
    }

    fn heuristic(&mut self, s: &Self::State) -> f64 {
        (l1(s.0, self.goal.0) + i64::from(s.1 != self.goal.1)) as f64
    }

    fn is_goal(&mut self, s: &Self::State) -> bool {
        *s == self.goal
    }

    fn expand(&mut self, s: &Self::State, out: &mut Vec<Self::State>) {
        let (c, d) = *s;
        for f in Face::ALL {
            let n = offset(c, f);
            if self.clear.ok(n, d) && self.clear.step_ok(c, n, d, None) {
                out.push((n, d));
            }
        }
        for d2 in 0..self.ndirs {
            if d2 != d && self.clear.ok(c, d2) {
                out.push((c, d2));
            }
        }
    }
}

fn local_plan_with(
    clear: &mut Clearance,
    from: &ToolPose,
    to_voxel: GridIndex,
    via_face: Face,
) -> Option<Vec<ToolPose>> {
    let e = clear.world.edge_len;
    let gd = dir_index(clear.tool, inward(via_face))?;
    let target = to_voxel.to_signed();
    let gate = offset(target, via_face);
    if !clear.ok(gate, gd) || !clear.step_ok(gate, target, gd, Some(to_voxel)) {
        return None;
    }
    let cut = ToolPose {
        tip: cell_center(target, e),
        dir: clear.tool.approach_set[gd],
    };
    if tool_collides(&cut, clear.world, clear.tool, Some(to_voxel)) {
        return None;
    }
    let start = (cell_of(from.tip, e), dir_index(clear.tool, from.dir)?);
    let ndirs = clear.tool.approach_set.len();
    let mut problem = LocalProblem {
        clear,
        goal: (gate, gd),
        ndirs,
    };
    let out = best_first(&mut problem, start, SearchOptions::default());
    if out.status != SearchStatus::Found {
        return None;
    }
    let mut poses: Vec<ToolPose> = out.path[1..].iter().map(|(c, d)| problem.clear.pose(*c, *d)).collect();
    poses.push(cut);
    Some(poses)
}

/// Collision-free poses from `from` (excluded) to a cut of `to_voxel` through
/// `via_face`; the last pose is the cut at the voxel center.
pub fn local_plan(
    from: &ToolPose,
    to_voxel: GridIndex,
    via_face: Face,
    world: &VoxelGrid,
    tool: &ToolModel,
) -> Option<Vec<ToolPose>> {
    let mut clear = Clearance::new(world, tool);
    local_plan_with(&mut clear, from, to_voxel, via_face)
}

/// Faces of the block that touch free space or the grid boundary.
pub fn block_open_faces(block: &Block, world: &VoxelGrid) -> Vec<Face> {
    Face::ALL
        .into_iter()
        .filter(|f| {
            block.face_voxels(*f).into_iter().any(|v| match v.step(*f, world.dim()) {
                None => true,
                Some(n) => world.get(n).is_free(),
            })
        })
        .collect()
}

#[derive(Debug, Clone)]
struct InnerState {
    tip: [i64; 3],
    digest: u128,
    left: usize,
    h: f64,
    target: Option<(GridIndex, Face)>,
    poses: Vec<ToolPose>,
}

struct InnerProblem<'a> {
    world: VoxelGrid,
    tool: &'a ToolModel,
    block: Block,
    pose: ToolPose,
    cuts: Vec<GridIndex>,
    /// Block faces open at the start; cuts inside the block never change them.
    open_block: Vec<Face>,
    /// `Remove` voxels of the block with at least one open face.
    exposed: BTreeSet<GridIndex>,
    options: ToolPlanOptions,
    local_plans: u64,
}

impl InnerProblem<'_> {
    fn penalty(&self, v: GridIndex, face: Face) -> f64 {
        let mut p = 0.0;
        if let [.., a, b] = self.cuts[..] {
            let d1 = sub_i(b.to_signed(), a.to_signed());
            let d2 = sub_i(v.to_signed(), b.to_signed());
            if cross_i(d1, d2) != [0, 0, 0] {
                p += self.options.lambda_line;
            }
        }
        let dir = inward(face);
        if self.open_block.iter().any(|f| {
            let n = f.normal();
            dir == [n[0] as f64, n[1] as f64, n[2] as f64]
        }) {
            p += self.options.lambda_in;
        }
        p
    }
}

fn sub_i(a: [i64; 3], b: [i64; 3]) -> [i64; 3] {
    [a[0] - b[0], a[1] - b[1], a[2] - b[2]]
}

fn cross_i(a: [i64; 3], b: [i64; 3]) -> [i64; 3] {
    [a[1] * b[2] - a[2] * b[1], a[2] * b[0] - a[0] * b[2], a[0] * b[1] - a[1] * b[0]]
}

impl Problem for InnerProblem<'_> {
    type State = InnerState;
    type Key = ([i64; 3], u128);

    fn key(&self, s: &InnerState) -> Self::Key {
        (s.tip, s.digest)
    }

    fn heuristic(&mut self, s: &InnerState) -> f64 {
        s.h
    }

    fn is_goal(&mut self, s: &InnerState) -> bool {
        s.left == 0
    }

    fn expand(&mut self, s: &InnerState, out: &mut Vec<InnerState>) {
        let here = cell_of(self.pose.tip, self.world.edge_len);
        let dim = self.world.dim();
        for &v in &self.exposed {
            for f in Face::ALL {
                if v.step(f, dim).is_some_and(|n| !self.world.get(n).is_free()) {
                    continue;
                }
                if dir_index(self.tool, inward(f)).is_none() {
                    continue;
                }
                let h = l1(here, v.to_signed()) as f64 + self.penalty(v, f);
                out.push(InnerState {
                    tip: v.to_signed(),
                    digest: s.digest ^ digest_of(self.world.linear(v) as u64),
                    left: s.left - 1,
                    h,
                    target: Some((v, f)),
                    poses: Vec::new(),
                });
            }
        }
    }

    // Descent commits the first admitted child, so a successful admit also
    // applies the cut.
    fn admit(&mut self, s: &mut InnerState) -> bool {
        let Some((v, f)) = s.target else {
            return true;
        };
        self.local_plans += 1;
        let Some(poses) = local_plan(&self.pose, v, f, &self.world, self.tool) else {
            return false;
        };
        self.world.set(v, VoxelState::Freed);
        self.exposed.remove(&v);
        for (_, n) in self.world.neighbors6(v) {
            if self.block.contains(n) && self.world.get(n) == VoxelState::Remove {
                self.exposed.insert(n);
            }
        }
        self.pose = *poses.last().expect("cut pose");
        self.cuts.push(v);
        s.poses = poses;
        true
    }
}

#[derive(Debug, Clone, Default)]
pub struct InnerStats {
    pub expansions: u64,
    pub local_plans: u64,
}

/// Tries to clear every voxel of `block` starting from pose `from`, cutting
/// only voxels of this block.
pub fn inner_block_search(
    block: &Block,
    world: &VoxelGrid,
    tool: &ToolModel,
    from: &ToolPose,
    options: ToolPlanOptions,
    stats: &mut InnerStats,
) -> Removability {
    let open = block_open_faces(block, world);
    if open.is_empty() {
        return Removability::Unremovable(Unremovable::NoApproachFace);
    }
    let here = cell_of(from.tip, world.edge_len);
    let entry_face = *open
        .iter()
        .min_by_key(|f| {
            let d = block
                .face_voxels(**f)
                .into_iter()
                .map(|v| l1(here, v.to_signed()))
                .min()
                .unwrap_or(i64::MAX);
            (d, f.index())
        })
        .expect("non-empty");
    let left = block.voxels().filter(|v| world.get(*v) == VoxelState::Remove).count();
    let exposed = block
        .voxels()
        .filter(|v| world.get(*v) == VoxelState::Remove && !open_faces(*v, world).is_empty())
        .collect();
    let mut problem = InnerProblem {
        world: world.clone(),
        tool,
        block: *block,
        pose: *from,
        cuts: Vec::new(),
        open_block: open.clone(),
        exposed,
        options,
        local_plans: 0,
    };
    let start = InnerState {
        tip: here,
        digest: 0,
        left,
        h: 0.0,
        target: None,
        poses: Vec::new(),
    };
    let out = greedy_descent(&mut problem, start, Limits::none());
    stats.expansions += out.expansions;
    stats.local_plans += problem.local_plans;
    if out.status != DescentStatus::Found {
        return Removability::Unremovable(Unremovable::InnerSearchExhausted);
    }
    let mut steps = Vec::new();
    for s in &out.path {
        let n = s.poses.len();
        for (k, p) in s.poses.iter().enumerate() {
            steps.push(ToolStep {
                pose: *p,
                removes: if k + 1 == n { s.target.map(|t| t.0) } else { None },
            });
        }
    }
    Removability::Removable(ToolTrajectory {
        block: block.id,
        entry_face,
        steps,
    })
}

/// Shortens the travel between cuts: drops loops that return to an earlier
/// pose and re-plans each gap, keeping whichever is shorter. `world` and
/// `start` are the state before the trajectory runs.
pub fn cleanup(traj: &ToolTrajectory, world: &VoxelGrid, tool: &ToolModel, start: &ToolPose) -> ToolTrajectory {
    let mut world = world.clone();
    let mut pose = *start;
    let mut steps = Vec::with_capacity(traj.steps.len());
    let mut gap: Vec<ToolStep> = Vec::new();
    for s in &traj.steps {
        gap.push(*s);
        let Some(v) = s.removes else {
            continue;
        };
        let mut best = drop_loops(&pose, &gap);
        let via = face_between(v, gap.iter().rev().nth(1).map(|p| p.pose).unwrap_or(pose), world.edge_len);
        if let Some(f) = via {
            if let Some(p) = local_plan(&pose, v, f, &world, tool) {
                if p.len() < best.len() {
                    best = p
                        .iter()
                        .enumerate()
                        .map(|(k, q)| ToolStep {
                            pose: *q,
                            removes: if k + 1 == p.len() { Some(v) } else { None },
                        })
                        .collect();
                }
            }
        }
        steps.extend_from_slice(&best);
        world.set(v, VoxelState::Freed);
        pose = s.pose;
        gap.clear();
    }
    ToolTrajectory {
        block: traj.block,
        entry_face: traj.entry_face,
        steps,
    }
}

/// Face of `v` through which the tool arrived from `prev`.
fn face_between(v: GridIndex, prev: ToolPose, edge: f64) -> Option<Face> {
    let c = cell_of(prev.tip, edge);
    Face::ALL.into_iter().find(|f| offset(v.to_signed(), *f) == c)
}

// Removes the stretch between two visits of the same pose. The world does not
// change between cuts, so the shortened sequence stays valid.
fn drop_loops(start: &ToolPose, gap: &[ToolStep]) -> Vec<ToolStep> {
    let mut out: Vec<ToolStep> = Vec::with_capacity(gap.len());
    for s in gap {
        if s.removes.is_none() {
            if s.pose == *start {
                out.clear();
                continue;
            }
            if let Some(k) = out.iter().position(|p| p.pose == s.pose) {
                out.truncate(k + 1);
                continue;
            }
        }
        out.push(*s);
    }
    out
}

/// Clears `grid` block by block with the tool. Voxels that no trajectory can
/// reach are reported in the plan and left as `Remove`.
pub fn plan_tool(
    grid: &mut VoxelGrid,
    graph: &mut OctreeGraph,
    tool: &ToolModel,
    options: ToolPlanOptions,
) -> Result<ToolPlan, PlanError> {
    tool.validate(grid.edge_len)?;
    if grid.remaining() == 0 {
        return Err(PlanError::NothingToRemove);
    }
    let clock = Stopwatch::start();
    let mut plan = ToolPlan::default();
    let mut pose = home_pose(grid, tool);
    let mut blocked: HashSet<BlockId> = HashSet::new();
    let mut stats = InnerStats::default();

    loop {
        if let Some(max) = options.limits.max_expansions {
            if plan.metrics.expansions >= max {
                return Err(PlanError::LimitHit {
                    expansions: plan.metrics.expansions,
                });
            }
        }
        if let Some(secs) = options.limits.max_seconds {
            if clock.elapsed_secs() > secs {
                return Err(PlanError::LimitHit {
                    expansions: plan.metrics.expansions,
                });
            }
        }
        let here = cell_of(pose.tip, grid.edge_len);
        let remaining = grid.remaining();
        let mut candidates: Vec<(f64, BlockId)> = graph
            .blocks()
            .filter(|b| b.value == BlockValue::Remove && grid.get(b.origin) == VoxelState::Remove)
            .filter(|b| !block_open_faces(b, grid).is_empty())
            .map(|b| {
                let h = (remaining - b.volume()) as u64 + b.l1_to(here);
                (h as f64, b.id)
            })
            .collect();
        if candidates.is_empty() {
            break;
        }
        candidates.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));

        let mut committed = None;
        let mut failed = Vec::new();
        for &(_, b) in &candidates {
            if blocked.contains(&b) {
                continue;
            }
            plan.metrics.probes += 1;
            let block = *graph.block(b);
            match inner_block_search(&block, grid, tool, &pose, options, &mut stats) {
                Removability::Removable(t) => {
                    committed = Some(t);
                    break;
                }
                Removability::Unremovable(_) => {
                    blocked.insert(b);
                    failed.push(b);
                }
            }
        }

        match committed {
            Some(t) => {
                let t = if options.cleanup {
                    cleanup(&t, grid, tool, &pose)
                } else {
                    t
                };
                for v in t.removed() {
                    grid.free_voxel(v)?;
                }
                if let Some(last) = t.steps.last() {
                    pose = last.pose;
                }
                graph.mark_freed(t.block);
                for (_, n) in graph.neighbors(t.block) {
                    blocked.remove(&n);
                }
                plan.metrics.expansions += 1;
                plan.trajectories.push(t);
            }
            None if failed.is_empty() && !blocked.is_empty() => {
                // Every candidate was skipped on a stale verdict; re-test all.
                blocked.clear();
            }
            None => {
                let splittable: Vec<BlockId> = candidates
                    .iter()
                    .map(|c| c.1)
                    .filter(|b| graph.block(*b).size > 1)
                    .collect();
                if splittable.is_empty() {
                    break;
                }
                for b in splittable {
                    blocked.remove(&b);
                    graph.split_block(b);
                    plan.metrics.splits += 1;
                }
            }
        }
    }

    plan.unreachable = grid.voxels_in(VoxelState::Remove);
    plan.unreachable.sort_unstable();
    plan.metrics.inner_expansions = stats.expansions;
    plan.metrics.local_plans = stats.local_plans;
    plan.metrics.blocks = graph.block_count();
    plan.metrics.wall_ms = clock.elapsed_ms();
    Ok(plan)
}

/// Trajectory CSV with one row per pose, positions in meters.
pub fn trajectory_csv(plan: &ToolPlan) -> String {
    let mut s = String::from("step,block_id,tip_x,tip_y,tip_z,dir_x,dir_y,dir_z,removes\n");
    for (k, (b, step)) in plan.steps().enumerate() {
        let p = step.pose;
        let removes = step.removes.map(|v| v.to_string()).unwrap_or_default();
        s.push_str(&format!(
            "{k},{b},{:.6},{:.6},{:.6},{:.6},{:.6},{:.6},{removes}\n",
            p.tip[0], p.tip[1], p.tip[2], p.dir[0], p.dir[1], p.dir[2]
        ));
    }
    s
}

/// Parses [`trajectory_csv`] output back into `(block, step)` rows.
pub fn parse_trajectory_csv(text: &str) -> Result<Vec<(BlockId, ToolStep)>, String> {
    let mut rows = Vec::new();
    for (n, line) in text.lines().enumerate().skip(1) {
        if line.trim().is_empty() {
            continue;
        }
        let f: Vec<&str> = line.split(',').collect();
        if f.len() != 9 {
            return Err(format!("line {}: expected 9 fields", n + 1));
        }
        let num = |i: usize| f[i].parse::<f64>().map_err(|e| format!("line {}: {e}", n + 1));
        let block = f[1].parse::<BlockId>().map_err(|e| format!("line {}: {e}", n + 1))?;
        let removes = if f[8].is_empty() {
            None
        } else {
            let p: Vec<u32> = f[8]
                .split(':')
                .map(|t| t.parse::<u32>())
                .collect::<Result<_, _>>()
                .map_err(|e| format!("line {}: {e}", n + 1))?;
            if p.len() != 3 {
                return Err(format!("line {}: bad voxel {}", n + 1, f[8]));
            }
            Some(GridIndex::new(p[0], p[1], p[2]))
        };
        rows.push((
            block,
            ToolStep {
                pose: ToolPose {
                    tip: [num(2)?, num(3)?, num(4)?],
                    dir: [num(5)?, num(6)?, num(7)?],
                },
                removes,
            },
        ));
    }
    Ok(rows)
}
