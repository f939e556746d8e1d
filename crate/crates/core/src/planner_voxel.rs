//! Voxel-level planner for a translating robot.
//!
//! Each connected component of `Remove` voxels is cleared by its own greedy
//! best-first search over (robot position, removed set). Stepping onto a
//! `Remove` voxel of the active component removes it; `Keep` voxels and other
//! components are walls.

use std::collections::VecDeque;

use crate::clock::Stopwatch;
use crate::error::PlanError;
use crate::grid::{component_map, nearest_matching, start_voxel, Face, GridIndex, VoxelGrid, VoxelState};
use crate::plan::{ComponentPath, VoxelPlan, Waypoint};
use crate::search::{best_first, digest_of, Limits, Problem, SearchOptions, SearchStatus, Trail};

/// Remaining `Remove` count plus the L1 distance from `robot` to the nearest
/// `Remove` voxel; zero when nothing remains.
pub fn heuristic_remaining_distance(grid: &VoxelGrid, robot: GridIndex) -> u64 {
    let remaining = grid.remaining() as u64;
    if remaining == 0 {
        return 0;
    }
    let d = nearest_matching(grid, robot, None, |i| grid.get(i) == VoxelState::Remove)
        .map(|(_, d)| d as u64)
        .unwrap_or(0);
    remaining + d
}

#[derive(Debug, Clone, Copy, Default)]
pub struct PlanOptions {
    pub limits: Limits,
}

/// Free-space route from outside the grid to a voxel satisfying `target`.
/// Returns the free voxels walked (starting on an outer face) and the target
/// voxel adjacent to the last of them.
pub(crate) fn approach_from_outside(
    grid: &VoxelGrid,
    mut target: impl FnMut(GridIndex) -> bool,
) -> Option<(Vec<GridIndex>, GridIndex)> {
    let mut parent: Vec<Option<usize>> = vec![None; grid.len()];
    let mut seen = vec![false; grid.len()];
    let mut queue = VecDeque::new();
    for i in grid.indices() {
        if grid.on_outer_face(i) && grid.get(i).is_free() {
            let k = grid.linear(i);
            seen[k] = true;
            queue.push_back(i);
        }
    }
    while let Some(u) = queue.pop_front() {
        for (_, n) in grid.neighbors6(u) {
            if target(n) {
                let mut route = vec![u];
                let mut k = grid.linear(u);
                while let Some(p) = parent[k] {
                    route.push(grid.coords(p));
                    k = p;
                }
                route.reverse();
                return Some((route, n));
            }
        }
        for (_, n) in grid.neighbors6(u) {
            let nk = grid.linear(n);
            if !seen[nk] && grid.get(n).is_free() {
                seen[nk] = true;
                parent[nk] = Some(grid.linear(u));
                queue.push_back(n);
            }
        }
    }
    None
}

#[derive(Debug, Clone)]
struct State {
    pos: GridIndex,
    removes: bool,
    node: usize,
    remaining: usize,
    digest: u128,
}

struct ComponentProblem<'a> {
    world: VoxelGrid,
    labels: &'a [Option<u32>],
    component: u32,
    trail: Trail<GridIndex>,
}

impl ComponentProblem<'_> {
    fn sync(&mut self, node: usize) {
        let world = &mut self.world;
        let mut undo = Vec::new();
        let mut redo = Vec::new();
        self.trail.move_to(node, |i| undo.push(i), |i| redo.push(i));
        for i in undo {
            world.unfree_voxel(i);
        }
        for i in redo {
            world.set(i, VoxelState::Freed);
        }
    }

    fn in_component(&self, i: GridIndex) -> bool {
        self.world.get(i) == VoxelState::Remove && self.labels[self.world.linear(i)] == Some(self.component)
    }
}

impl Problem for ComponentProblem<'_> {
    type State = State;
    type Key = (GridIndex, u128);

    fn key(&self, s: &State) -> Self::Key {
        (s.pos, s.digest)
    }

    fn heuristic(&mut self, s: &State) -> f64 {
        if s.remaining == 0 {
            return 0.0;
        }
        // The world is synced to the parent; apply this state's own removal.
        let temp = s.removes && self.world.get(s.pos) == VoxelState::Remove;
        if temp {
            self.world.set(s.pos, VoxelState::Freed);
        }
        let d = nearest_matching(&self.world, s.pos, None, |i| self.in_component(i))
            .map(|(_, d)| d)
            .unwrap_or(0);
        if temp {
            self.world.unfree_voxel(s.pos);
        }
        (s.remaining as u64 + d as u64) as f64
    }

    fn is_goal(&mut self, s: &State) -> bool {
        s.remaining == 0
    }

    fn expand(&mut self, s: &State, out: &mut Vec<State>) {
        self.sync(s.node);
        let dim = self.world.dim();
        for face in Face::ALL {
            let Some(n) = s.pos.step(face, dim) else {
                continue;
            };
            match self.world.get(n) {
                VoxelState::Keep => {}
                VoxelState::Remove => {
                    if self.labels[self.world.linear(n)] == Some(self.component) {
                        let node = self.trail.push(s.node, n);
                        out.push(State {
                            pos: n,
                            removes: true,
                            node,
                            remaining: s.remaining - 1,
                            digest: s.digest ^ digest_of(self.world.linear(n) as u64),
                        });
                    }
                }
                VoxelState::Freed | VoxelState::Void => out.push(State {
                    pos: n,
                    removes: false,
                    node: s.node,
                    remaining: s.remaining,
                    digest: s.digest,
                }),
            }
        }
    }
}

/// Plans removal of every `Remove` voxel. Covered components are marked
/// `Freed` in `grid`; components with no free-space approach are reported in
/// the plan as unreachable.
pub fn plan_voxel(grid: &mut VoxelGrid, options: PlanOptions) -> Result<VoxelPlan, PlanError> {
    if grid.remaining() == 0 {
        return Err(PlanError::NothingToRemove);
    }
    let clock = Stopwatch::start();
    let map = component_map(grid);
    let mut order = Vec::new();
    for c in &map.components {
        let s = start_voxel(grid, c)?;
        order.push((s.index.l1(GridIndex::new(0, 0, 0)), s.index, s.interior, c.id));
    }
    order.sort();

    let mut plan = VoxelPlan::default();
    for (_, start, interior, cid) in order {
        let comp = &map.components[cid];
        let mut prefix = Vec::new();
        let mut entry = start;
        if interior {
            let found = approach_from_outside(grid, |i| {
                grid.get(i) == VoxelState::Remove && map.labels[grid.linear(i)] == Some(cid as u32)
            });
            match found {
                Some((route, target)) => {
                    prefix = route.into_iter().map(Waypoint::travel).collect();
                    entry = target;
                }
                None => {
                    plan.unreachable_components.push(cid);
                    plan.unreachable.extend_from_slice(&comp.voxels);
                    continue;
                }
            }
        }

        let limits = remaining_limits(options.limits, plan.metrics.expansions, &clock);
        let mut problem = ComponentProblem {
            world: grid.clone(),
            labels: &map.labels,
            component: cid as u32,
            trail: Trail::new(),
        };
        let node = problem.trail.push(Trail::<GridIndex>::ROOT, entry);
        let start_state = State {
            pos: entry,
            removes: true,
            node,
            remaining: comp.voxels.len() - 1,
            digest: digest_of(grid.linear(entry) as u64),
        };
        let outcome = best_first(
            &mut problem,
            start_state,
            SearchOptions {
                limits,
                record_pops: false,
            },
        );
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
        let mut waypoints = prefix;
        for s in &outcome.path {
            if s.removes {
                grid.free_voxel(s.pos)?;
            }
            waypoints.push(Waypoint {
                at: s.pos,
                removes: s.removes,
                block: None,
            });
        }
        plan.paths.push(ComponentPath { component: cid, waypoints });
    }
    plan.unreachable.sort_unstable();
    plan.metrics.wall_ms = clock.elapsed_ms();
    Ok(plan)
}

/// Per-run limits shrunk by what earlier components already consumed.
pub(crate) fn remaining_limits(total: Limits, used: u64, clock: &Stopwatch) -> Limits {
    Limits {
        max_expansions: total.max_expansions.map(|m| m.saturating_sub(used)),
        max_seconds: total.max_seconds.map(|s| (s - clock.elapsed_secs()).max(0.0)),
    }
}
