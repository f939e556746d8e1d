//! Octree-level planner for a translating robot.
//!
//! The outer search works on octree blocks: each step links the robot to a
//! corner of an uncleared `Remove` block and sweeps the whole block with a
//! serpentine path. Blocks that touch free space only away from their corners
//! are subdivided until a corner becomes reachable.

use crate::clock::Stopwatch;
use crate::error::PlanError;
use crate::grid::{component_map, nearest_matching, start_voxel, Face, GridIndex, VoxelGrid, VoxelState};
use crate::octree::{Block, BlockId, BlockValue, OctreeGraph};
use crate::plan::{ComponentPath, VoxelPlan, Waypoint};
use crate::planner_voxel::{approach_from_outside, remaining_limits, PlanOptions};
use crate::search::{best_first, digest_of, FnProblem, Problem, SearchOptions, SearchStatus, Trail};

fn corners(block: &Block) -> [GridIndex; 8] {
    let o = block.origin;
    let s = block.size - 1;
    std::array::from_fn(|c| GridIndex::new(o.x + s * (c as u32 & 1), o.y + s * ((c as u32 >> 1) & 1), o.z + s * ((c as u32 >> 2) & 1)))
}

fn is_corner(block: &Block, v: GridIndex) -> bool {
    let o = block.origin.to_array();
    let p = v.to_array();
    (0..3).all(|a| p[a] == o[a] || p[a] == o[a] + block.size - 1)
}

/// Corner of `block` nearest `entry` (L1, lexicographic tie-break).
pub fn start_corner(block: &Block, entry: GridIndex) -> GridIndex {
    corners(block)
        .into_iter()
        .min_by_key(|c| (c.l1(entry), *c))
        .expect("eight corners")
}

/// Serpentine sweep of `block` starting at the corner nearest `entry`: x
/// fastest with direction alternating per row, then y alternating per layer,
/// then z.
pub fn boustrophedon(block: &Block, entry: GridIndex) -> Vec<GridIndex> {
    let c = start_corner(block, entry);
    let o = block.origin;
    let s = block.size;
    let axis = |start: u32, origin: u32, k: u32, forward: bool| {
        let from_min = start == origin;
        let step = if forward { k } else { s - 1 - k };
        if from_min {
            origin + step
        } else {
            origin + s - 1 - step
        }
    };
    let mut out = Vec::with_capacity(block.volume());
    let mut row = 0u32;
    for lz in 0..s {
        let z = axis(c.z, o.z, lz, true);
        for ly in 0..s {
            let y = axis(c.y, o.y, ly, lz % 2 == 0);
            for lx in 0..s {
                let x = axis(c.x, o.x, lx, row.is_multiple_of(2));
                out.push(GridIndex::new(x, y, z));
            }
            row += 1;
        }
    }
    out
}

/// Last voxel of [`boustrophedon`] without building the sweep.
pub fn boustrophedon_end(block: &Block, entry: GridIndex) -> GridIndex {
    let c = start_corner(block, entry);
    if block.size == 1 {
        return c;
    }
    let o = block.origin;
    let far_z = if c.z == o.z { o.z + block.size - 1 } else { o.z };
    GridIndex::new(c.x, c.y, far_z)
}

/// Path from `from` to `to` through free voxels, excluding `from`. Tries the
/// x-then-y-then-z dog-leg first and falls back to a greedy search.
pub fn link_path(from: GridIndex, to: GridIndex, world: &VoxelGrid) -> Result<Vec<GridIndex>, PlanError> {
    if from == to {
        return Ok(Vec::new());
    }
    if let Some(p) = dog_leg(from, to, world) {
        return Ok(p);
    }
    let dim = world.dim();
    let mut problem = FnProblem::new(
        |p: &GridIndex| {
            Face::ALL
                .into_iter()
                .filter_map(|f| p.step(f, dim))
                .filter(|n| world.get(*n).is_free())
                .collect()
        },
        |p: &GridIndex| p.l1(to) as f64,
        |p: &GridIndex| *p == to,
        |p: &GridIndex| *p,
    );
    let out = best_first(&mut problem, from, SearchOptions::default());
    match out.status {
        SearchStatus::Found => Ok(out.path[1..].to_vec()),
        _ => Err(PlanError::NoFreePath { from, to }),
    }
}

fn dog_leg(from: GridIndex, to: GridIndex, world: &VoxelGrid) -> Option<Vec<GridIndex>> {
    let mut cur = from.to_array();
    let target = to.to_array();
    let mut out = Vec::with_capacity(from.l1(to) as usize);
    for a in 0..3 {
        while cur[a] != target[a] {
            if cur[a] < target[a] {
                cur[a] += 1;
            } else {
                cur[a] -= 1;
            }
            let p = GridIndex::new(cur[0], cur[1], cur[2]);
            if !world.get(p).is_free() {
                return None;
            }
            out.push(p);
        }
    }
    Some(out)
}

#[derive(Debug, Clone)]
struct State {
    /// Robot position before this step; `None` while outside the grid.
    from: Option<GridIndex>,
    block: Option<BlockId>,
    entry: GridIndex,
    end: GridIndex,
    node: usize,
    remaining: usize,
    digest: u128,
    approach: Vec<GridIndex>,
    segment: Vec<Waypoint>,
}

struct ComponentProblem<'a> {
    world: VoxelGrid,
    graph: &'a mut OctreeGraph,
    labels: &'a [Option<u32>],
    component: u32,
    /// Live `Remove` blocks of the component, ascending.
    blocks: Vec<BlockId>,
    trail: Trail<BlockId>,
    splits: usize,
}

impl ComponentProblem<'_> {
    fn sync(&mut self, node: usize) {
        let mut undo = Vec::new();
        let mut redo = Vec::new();
        self.trail.move_to(node, |b| undo.push(b), |b| redo.push(b));
        for b in undo {
            let block = *self.graph.block(b);
            for v in block.voxels() {
                self.world.unfree_voxel(v);
            }
        }
        for b in redo {
            let block = *self.graph.block(b);
            for v in block.voxels() {
                self.world.set(v, VoxelState::Freed);
            }
        }
    }

    fn cleared(&self, b: BlockId) -> bool {
        self.world.get(self.graph.block(b).origin) == VoxelState::Freed
    }

    fn has_free_outside(&self, block: &Block, v: GridIndex) -> bool {
        let dim = self.world.dim();
        Face::ALL
            .into_iter()
            .filter_map(|f| v.step(f, dim))
            .any(|n| !block.contains(n) && self.world.get(n).is_free())
    }

    fn is_target(&self, b: BlockId) -> bool {
        let block = self.graph.block(b);
        self.graph.is_alive(b)
            && block.value == BlockValue::Remove
            && self.labels[self.world.linear(block.origin)] == Some(self.component)
            && !self.cleared(b)
    }

    fn touches_free(&self, b: BlockId) -> bool {
        self.graph
            .neighbors(b)
            .any(|(_, n)| self.world.get(self.graph.block(n).origin).is_free())
    }

    fn split(&mut self, b: BlockId) -> [BlockId; 8] {
        let kids = self.graph.split_block(b).expect("split of a live block larger than one voxel");
        self.splits += 1;
        self.blocks.retain(|x| *x != b);
        self.blocks.extend(kids);
        self.blocks.sort_unstable();
        kids
    }

    /// Entry corner of `b` for a robot at `from`: the corner with a free
    /// outside neighbor (or, from outside the grid, on an outer face) nearest
    /// the robot.
    fn entry_corner(&self, b: BlockId, from: Option<GridIndex>) -> Option<GridIndex> {
        let block = *self.graph.block(b);
        let origin = GridIndex::new(0, 0, 0);
        corners(&block)
            .into_iter()
            .filter(|c| match from {
                None => self.world.on_outer_face(*c),
                Some(_) => self.has_free_outside(&block, *c),
            })
            .min_by_key(|c| (c.l1(from.unwrap_or(origin)), *c))
    }

    fn child(&mut self, parent: &State, b: BlockId, entry: GridIndex, approach: Vec<GridIndex>) -> State {
        let block = *self.graph.block(b);
        let node = self.trail.push(parent.node, b);
        State {
            from: if parent.block.is_some() { Some(parent.end) } else { None },
            block: Some(b),
            entry,
            end: boustrophedon_end(&block, entry),
            node,
            remaining: parent.remaining - block.volume(),
            digest: parent.digest ^ digest_of(b as u64),
            approach,
            segment: Vec::new(),
        }
    }
}

impl Problem for ComponentProblem<'_> {
    type State = State;
    type Key = (Option<GridIndex>, u128);

    fn key(&self, s: &State) -> Self::Key {
        (s.block.map(|_| s.end), s.digest)
    }

    fn heuristic(&mut self, s: &State) -> f64 {
        let Some(b) = s.block else {
            return s.remaining as f64;
        };
        if s.remaining == 0 {
            return 0.0;
        }
        let block = *self.graph.block(b);
        let d = nearest_matching(&self.world, s.end, None, |i| {
            !block.contains(i)
                && self.world.get(i) == VoxelState::Remove
                && self.labels[self.world.linear(i)] == Some(self.component)
        })
        .map(|(_, d)| d)
        .unwrap_or(0);
        (s.remaining + d as usize) as f64
    }

    fn is_goal(&mut self, s: &State) -> bool {
        s.remaining == 0
    }

    fn admit(&mut self, s: &mut State) -> bool {
        let Some(b) = s.block else {
            return true;
        };
        let block = *self.graph.block(b);
        let mut seg: Vec<Waypoint> = Vec::new();
        if let Some(from) = s.from {
            self.sync(self.trail.parent(s.node));
            let dim = self.world.dim();
            let gate = Face::ALL
                .into_iter()
                .filter_map(|f| s.entry.step(f, dim))
                .filter(|n| !block.contains(*n) && self.world.get(*n).is_free())
                .min_by_key(|n| (n.l1(from), *n));
            let Some(gate) = gate else {
                return false;
            };
            match link_path(from, gate, &self.world) {
                Ok(p) => seg.extend(p.into_iter().map(Waypoint::travel)),
                Err(_) => return false,
            }
        } else {
            seg.extend(s.approach.iter().copied().map(Waypoint::travel));
        }
        seg.extend(boustrophedon(&block, s.entry).into_iter().map(|at| Waypoint {
            at,
            removes: true,
            block: Some(b),
        }));
        s.segment = seg;
        true
    }

    fn expand(&mut self, s: &State, out: &mut Vec<State>) {
        self.sync(s.node);
        let from = s.block.map(|_| s.end);

        if from.is_none() && !self.blocks.iter().any(|b| self.entry_corner(*b, None).is_some()) {
            // No block reaches the outer faces: walk in through free space.
            let labels = self.labels;
            let component = self.component;
            let world = &self.world;
            let Some((route, target)) = approach_from_outside(world, |i| {
                world.get(i) == VoxelState::Remove && labels[world.linear(i)] == Some(component)
            }) else {
                return;
            };
            let mut b = self.graph.block_at(target);
            while !is_corner(self.graph.block(b), target) {
                self.split(b);
                b = self.graph.block_at(target);
            }
            let c = self.child(s, b, target, route);
            out.push(c);
            return;
        }

        // Uncleared neighbors of the block just cleared; the whole frontier
        // only when there are none.
        let mut pending: Vec<BlockId> = match s.block {
            Some(last) => self
                .graph
                .neighbors(last)
                .map(|(_, n)| n)
                .filter(|n| self.is_target(*n))
                .collect(),
            None => Vec::new(),
        };
        if pending.is_empty() {
            pending = self.blocks.iter().copied().filter(|b| !self.cleared(*b)).collect();
        }
        pending.sort_unstable();
        pending.dedup();
        pending.reverse();

        let mut candidates = Vec::new();
        while let Some(b) = pending.pop() {
            if let Some(e) = self.entry_corner(b, from) {
                candidates.push((b, e));
            } else if from.is_some() && self.graph.block(b).size > 1 && self.touches_free(b) {
                let kids = self.split(b);
                pending.extend(kids.into_iter().rev());
            }
        }
        candidates.sort_unstable();
        for (b, e) in candidates {
            let c = self.child(s, b, e, Vec::new());
            out.push(c);
        }
    }
}

/// Plans removal of every `Remove` voxel block by block. Covered components
/// are marked `Freed` in `grid` and their blocks freed in `graph`.
pub fn plan_octree(grid: &mut VoxelGrid, graph: &mut OctreeGraph, options: PlanOptions) -> Result<VoxelPlan, PlanError> {
    if grid.remaining() == 0 {
        return Err(PlanError::NothingToRemove);
    }
    let clock = Stopwatch::start();
    let map = component_map(grid);
    let mut order = Vec::new();
    for c in &map.components {
        let s = start_voxel(grid, c)?;
        order.push((s.index.l1(GridIndex::new(0, 0, 0)), s.index, c.id));
    }
    order.sort();

    let mut plan = VoxelPlan::default();
    for (_, _, cid) in order {
        let comp = &map.components[cid];
        let blocks: Vec<BlockId> = graph
            .blocks()
            .filter(|b| b.value == BlockValue::Remove && map.labels[grid.linear(b.origin)] == Some(cid as u32))
            .map(|b| b.id)
            .collect();
        let limits = remaining_limits(options.limits, plan.metrics.expansions, &clock);
        let mut problem = ComponentProblem {
            world: grid.clone(),
            graph: &mut *graph,
            labels: &map.labels,
            component: cid as u32,
            blocks,
            trail: Trail::new(),
            splits: 0,
        };
        let start = State {
            from: None,
            block: None,
            entry: GridIndex::new(0, 0, 0),
            end: GridIndex::new(0, 0, 0),
            node: Trail::<BlockId>::ROOT,
            remaining: comp.voxels.len(),
            digest: 0,
            approach: Vec::new(),
            segment: Vec::new(),
        };
        let outcome = best_first(
            &mut problem,
            start,
            SearchOptions {
                limits,
                record_pops: false,
            },
        );
        plan.metrics.splits += problem.splits;
        let comp_blocks = std::mem::take(&mut problem.blocks);
        plan.metrics.expansions += outcome.expansions;
        plan.metrics.peak_frontier = plan.metrics.peak_frontier.max(outcome.peak_frontier);
        plan.metrics.rejected += outcome.rejected;
        match outcome.status {
            SearchStatus::Found => {}
            SearchStatus::LimitHit => {
                return Err(PlanError::LimitHit {
                    expansions: plan.metrics.expansions,
                })
            }
            SearchStatus::Exhausted => {
                plan.unreachable_components.push(cid);
                plan.unreachable.extend_from_slice(&comp.voxels);
                continue;
            }
        }
        let mut waypoints = Vec::new();
        for s in &outcome.path {
            for w in &s.segment {
                if w.removes {
                    grid.free_voxel(w.at)?;
                }
                waypoints.push(*w);
            }
        }
        for b in comp_blocks {
            graph.mark_freed(b);
        }
        plan.paths.push(ComponentPath { component: cid, waypoints });
    }
    plan.unreachable.sort_unstable();
    plan.metrics.blocks = Some(graph.block_count());
    plan.metrics.wall_ms = clock.elapsed_ms();
    Ok(plan)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{generate_shape, ShapeKind};
    use crate::octree::build_octree;

    fn block(origin: [u32; 3], size: u32) -> Block {
        Block {
            id: 0,
            origin: GridIndex::new(origin[0], origin[1], origin[2]),
            size,
            value: BlockValue::Remove,
        }
    }

    #[test]
    fn unit_block_sweep_is_entry() {
        let b = block([2, 3, 1], 1);
        let e = GridIndex::new(2, 3, 1);
        assert_eq!(boustrophedon(&b, e), vec![e]);
        assert_eq!(boustrophedon_end(&b, e), e);
    }

    #[test]
    fn sweep_visits_each_voxel_once_and_steps_by_one() {
        let b = block([4, 0, 4], 4);
        for c in corners(&b) {
            let s = boustrophedon(&b, c);
            assert_eq!(s[0], c);
            assert_eq!(*s.last().unwrap(), boustrophedon_end(&b, c));
            let mut sorted = s.clone();
            sorted.sort();
            sorted.dedup();
            assert_eq!(sorted.len(), 64);
            assert!(s.windows(2).all(|w| w[0].l1(w[1]) == 1));
        }
    }

    #[test]
    fn dog_leg_in_empty_space() {
        let g = VoxelGrid::new(8, VoxelState::Void).unwrap();
        let p = link_path(GridIndex::new(0, 0, 0), GridIndex::new(3, 2, 0), &g).unwrap();
        assert_eq!(p.len(), 5);
        assert_eq!(p[2], GridIndex::new(3, 0, 0));
        assert!(link_path(GridIndex::new(1, 1, 1), GridIndex::new(1, 1, 1), &g).unwrap().is_empty());
    }

    #[test]
    fn disconnected_link_fails() {
        let mut g = VoxelGrid::new(4, VoxelState::Keep).unwrap();
        g.set(GridIndex::new(0, 0, 0), VoxelState::Void);
        g.set(GridIndex::new(3, 3, 3), VoxelState::Void);
        assert!(matches!(
            link_path(GridIndex::new(0, 0, 0), GridIndex::new(3, 3, 3), &g),
            Err(PlanError::NoFreePath { .. })
        ));
    }

    #[test]
    fn solid_is_one_sweep() {
        let mut g = generate_shape(ShapeKind::Solid, 8).unwrap();
        let mut graph = build_octree(&g).unwrap();
        let plan = plan_octree(&mut g, &mut graph, PlanOptions::default()).unwrap();
        assert_eq!(plan.paths[0].waypoints.len(), 512);
        assert_eq!(plan.metrics.expansions, 2);
        assert_eq!(g.remaining(), 0);
    }

    #[test]
    fn sphere_is_fully_cleared() {
        let mut g = generate_shape(ShapeKind::Sphere, 16).unwrap();
        let n = g.remaining();
        let mut graph = build_octree(&g).unwrap();
        let plan = plan_octree(&mut g, &mut graph, PlanOptions::default()).unwrap();
        assert!(plan.is_complete());
        assert_eq!(plan.removed_count(), n);
        assert_eq!(g.remaining(), 0);
    }
}
