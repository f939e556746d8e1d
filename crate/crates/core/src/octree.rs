//! Pruned octree over a voxel grid and the graph of its leaves.
//!
//! Leaves are called blocks. Every block is a uniform cube whose value is
//! `Keep`, `Remove` or `Free` (freed and void voxels merge into `Free`).
//! Children are ordered by octant index with x in bit 0, y in bit 1 and z in
//! bit 2, and block ids follow a depth-first walk in that order.

use std::collections::BTreeMap;

use serde::Serialize;

use crate::error::GridError;
use crate::grid::{check_dim, Face, GridIndex, VoxelGrid, VoxelState};

pub type BlockId = u32;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub enum BlockValue {
    Keep,
    Remove,
    Free,
}

impl BlockValue {
    pub fn of(state: VoxelState) -> Self {
        match state {
            VoxelState::Keep => BlockValue::Keep,
            VoxelState::Remove => BlockValue::Remove,
            VoxelState::Freed | VoxelState::Void => BlockValue::Free,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct Block {
    pub id: BlockId,
    pub origin: GridIndex,
    pub size: u32,
    pub value: BlockValue,
}

impl Block {
    pub fn volume(&self) -> usize {
        (self.size as usize).pow(3)
    }

    pub fn contains(&self, i: GridIndex) -> bool {
        let o = self.origin;
        let s = self.size;
        i.x >= o.x && i.x < o.x + s && i.y >= o.y && i.y < o.y + s && i.z >= o.z && i.z < o.z + s
    }

    /// Inclusive maximum corner.
    pub fn max_corner(&self) -> GridIndex {
        let s = self.size - 1;
        GridIndex::new(self.origin.x + s, self.origin.y + s, self.origin.z + s)
    }

    /// L1 distance from a (possibly out-of-grid) voxel to the nearest voxel of
    /// this block.
    pub fn l1_to(&self, p: [i64; 3]) -> u64 {
        let lo = self.origin.to_signed();
        let hi = self.max_corner().to_signed();
        (0..3)
            .map(|a| {
                if p[a] < lo[a] {
                    (lo[a] - p[a]) as u64
                } else if p[a] > hi[a] {
                    (p[a] - hi[a]) as u64
                } else {
                    0
                }
            })
            .sum()
    }

    pub fn voxels(&self) -> impl Iterator<Item = GridIndex> + '_ {
        let o = self.origin;
        let s = self.size;
        (0..s).flat_map(move |dx| {
            (0..s).flat_map(move |dy| {
                (0..s).map(move |dz| GridIndex::new(o.x + dx, o.y + dy, o.z + dz))
            })
        })
    }

    /// Block voxels lying on `face`.
    pub fn face_voxels(&self, face: Face) -> Vec<GridIndex> {
        let a = face.axis();
        let fixed = if face.is_positive() {
            self.origin.to_array()[a] + self.size - 1
        } else {
            self.origin.to_array()[a]
        };
        let (b, c) = ((a + 1) % 3, (a + 2) % 3);
        let o = self.origin.to_array();
        let mut out = Vec::with_capacity((self.size * self.size) as usize);
        for i in 0..self.size {
            for j in 0..self.size {
                let mut p = [0u32; 3];
                p[a] = fixed;
                p[b] = o[b] + i;
                p[c] = o[c] + j;
                out.push(GridIndex::new(p[0], p[1], p[2]));
            }
        }
        out.sort_unstable();
        out
    }
}

#[derive(Debug, Clone)]
struct Node {
    parent: Option<u32>,
    octant: u8,
    children: Option<[u32; 8]>,
    block: Option<BlockId>,
}

#[derive(Debug, Clone)]
pub struct OctreeGraph {
    dim: u32,
    blocks: Vec<Block>,
    alive: Vec<bool>,
    nodes: Vec<Node>,
    node_of_block: Vec<u32>,
    adjacency: Vec<[Vec<BlockId>; 6]>,
    leaf_map: Vec<BlockId>,
}

enum Tmp {
    Leaf(BlockValue),
    Inner(Box<[Tmp; 8]>),
}

fn octant_offset(c: usize, half: u32) -> [u32; 3] {
    [
        (c as u32 & 1) * half,
        ((c as u32 >> 1) & 1) * half,
        ((c as u32 >> 2) & 1) * half,
    ]
}

fn subdivide(grid: &VoxelGrid, origin: GridIndex, size: u32) -> Tmp {
    if size == 1 {
        return Tmp::Leaf(BlockValue::of(grid.get(origin)));
    }
    let half = size / 2;
    let children: [Tmp; 8] = std::array::from_fn(|c| {
        let o = octant_offset(c, half);
        subdivide(
            grid,
            GridIndex::new(origin.x + o[0], origin.y + o[1], origin.z + o[2]),
            half,
        )
    });
    if let Tmp::Leaf(v0) = children[0] {
        if children
            .iter()
            .all(|c| matches!(c, Tmp::Leaf(v) if *v == v0))
        {
            return Tmp::Leaf(v0);
        }
    }
    Tmp::Inner(Box::new(children))
}

/// Block count, per-block voxel volume, and reduction relative to the voxel graph.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GraphStats {
    pub voxel_count: usize,
    pub block_count: usize,
    pub reduction_percent: f64,
}

pub fn build_octree(grid: &VoxelGrid) -> Result<OctreeGraph, GridError> {
    OctreeGraph::build(grid)
}

impl OctreeGraph {
    pub fn build(grid: &VoxelGrid) -> Result<Self, GridError> {
        check_dim(grid.dim())?;
        let dim = grid.dim();
        let tmp = subdivide(grid, GridIndex::new(0, 0, 0), dim);
        let mut g = OctreeGraph {
            dim,
            blocks: Vec::new(),
            alive: Vec::new(),
            nodes: Vec::new(),
            node_of_block: Vec::new(),
            adjacency: Vec::new(),
            leaf_map: vec![0; grid.len()],
        };
        g.flatten(&tmp, GridIndex::new(0, 0, 0), dim, None, 0);
        for id in 0..g.blocks.len() as BlockId {
            g.paint(id);
        }
        for id in 0..g.blocks.len() as BlockId {
            g.adjacency[id as usize] = g.compute_neighbors(id);
        }
        Ok(g)
    }

    fn flatten(&mut self, t: &Tmp, origin: GridIndex, size: u32, parent: Option<u32>, octant: u8) -> u32 {
        let idx = self.nodes.len() as u32;
        self.nodes.push(Node {
            parent,
            octant,
            children: None,
            block: None,
        });
        match t {
            Tmp::Leaf(v) => {
                let id = self.push_block(origin, size, *v, idx);
                self.nodes[idx as usize].block = Some(id);
            }
            Tmp::Inner(ch) => {
                let half = size / 2;
                let mut kids = [0u32; 8];
                for (c, child) in ch.iter().enumerate() {
                    let o = octant_offset(c, half);
                    let co = GridIndex::new(origin.x + o[0], origin.y + o[1], origin.z + o[2]);
                    kids[c] = self.flatten(child, co, half, Some(idx), c as u8);
                }
                self.nodes[idx as usize].children = Some(kids);
            }
        }
        idx
    }

    fn push_block(&mut self, origin: GridIndex, size: u32, value: BlockValue, node: u32) -> BlockId {
        let id = self.blocks.len() as BlockId;
        self.blocks.push(Block {
            id,
            origin,
            size,
            value,
        });
        self.alive.push(true);
        self.node_of_block.push(node);
        self.adjacency.push(Default::default());
        id
    }

    fn paint(&mut self, id: BlockId) {
        let b = self.blocks[id as usize];
        let d = self.dim as usize;
        for v in b.voxels() {
            self.leaf_map[v.x as usize * d * d + v.z as usize * d + v.y as usize] = id;
        }
    }

    pub fn dim(&self) -> u32 {
        self.dim
    }

    pub fn block(&self, id: BlockId) -> &Block {
        &self.blocks[id as usize]
    }

    pub fn is_alive(&self, id: BlockId) -> bool {
        self.alive.get(id as usize).copied().unwrap_or(false)
    }

    /// Current leaves, in id order.
    pub fn blocks(&self) -> impl Iterator<Item = &Block> + '_ {
        self.blocks.iter().filter(|b| self.alive[b.id as usize])
    }

    pub fn block_count(&self) -> usize {
        self.alive.iter().filter(|a| **a).count()
    }

    /// Upper bound on ids ever issued (dead ids included).
    pub fn id_bound(&self) -> usize {
        self.blocks.len()
    }

    pub fn block_at(&self, i: GridIndex) -> BlockId {
        let d = self.dim as usize;
        self.leaf_map[i.x as usize * d * d + i.z as usize * d + i.y as usize]
    }

    /// Blocks sharing positive-area contact with `face` of `id`, ascending.
    pub fn face_neighbors(&self, id: BlockId, face: Face) -> &[BlockId] {
        &self.adjacency[id as usize][face.index()]
    }

    pub fn neighbors(&self, id: BlockId) -> impl Iterator<Item = (Face, BlockId)> + '_ {
        Face::ALL.into_iter().flat_map(move |f| {
            self.adjacency[id as usize][f.index()]
                .iter()
                .map(move |n| (f, *n))
        })
    }

    // Walks the slab just outside the face, jumping over each neighbor's extent.
    fn compute_neighbors(&self, id: BlockId) -> [Vec<BlockId>; 6] {
        let b = self.blocks[id as usize];
        let mut out: [Vec<BlockId>; 6] = Default::default();
        let o = b.origin.to_array();
        for face in Face::ALL {
            let a = face.axis();
            let outside = if face.is_positive() {
                o[a] as i64 + b.size as i64
            } else {
                o[a] as i64 - 1
            };
            if outside < 0 || outside >= self.dim as i64 {
                continue;
            }
            let (ua, va) = ((a + 1) % 3, (a + 2) % 3);
            let list = &mut out[face.index()];
            let mut v = o[va];
            while v < o[va] + b.size {
                let mut u = o[ua];
                let mut row_step = b.size;
                while u < o[ua] + b.size {
                    let mut p = [0u32; 3];
                    p[a] = outside as u32;
                    p[ua] = u;
                    p[va] = v;
                    let n = self.block_at(GridIndex::new(p[0], p[1], p[2]));
                    let nb = self.blocks[n as usize];
                    if !list.contains(&n) {
                        list.push(n);
                    }
                    let nu_end = nb.origin.to_array()[ua] + nb.size;
                    let nv_end = nb.origin.to_array()[va] + nb.size;
                    row_step = row_step.min(nv_end - v);
                    u = nu_end;
                }
                v += row_step.max(1);
            }
            list.sort_unstable();
        }
        out
    }

    /// Neighbor search by walking up to a common ancestor and mirroring back
    /// down. Independent of the stored adjacency.
    pub fn face_neighbors_by_ancestor_walk(&self, id: BlockId, face: Face) -> Vec<BlockId> {
        let node = self.node_of_block[id as usize];
        let Some(n) = self.equal_or_larger_neighbor(node, face) else {
            return Vec::new();
        };
        let mut out = Vec::new();
        self.collect_facing_leaves(n, face.opposite(), &mut out);
        out.sort_unstable();
        out
    }

    fn equal_or_larger_neighbor(&self, node: u32, face: Face) -> Option<u32> {
        let n = &self.nodes[node as usize];
        let parent = n.parent?;
        let bit = 1u8 << face.axis();
        let on_far_side = (n.octant & bit != 0) == face.is_positive();
        if !on_far_side {
            let siblings = self.nodes[parent as usize].children.expect("parent has children");
            return Some(siblings[(n.octant ^ bit) as usize]);
        }
        let up = self.equal_or_larger_neighbor(parent, face)?;
        match self.nodes[up as usize].children {
            None => Some(up),
            Some(ch) => Some(ch[(n.octant ^ bit) as usize]),
        }
    }

    fn collect_facing_leaves(&self, node: u32, side: Face, out: &mut Vec<BlockId>) {
        let n = &self.nodes[node as usize];
        match n.children {
            None => out.push(n.block.expect("leaf node carries a block")),
            Some(ch) => {
                let bit = 1u8 << side.axis();
                for (c, child) in ch.iter().enumerate() {
                    if ((c as u8 & bit) != 0) == side.is_positive() {
                        self.collect_facing_leaves(*child, side, out);
                    }
                }
            }
        }
    }

    /// Marks a cleared `Remove` block as `Free` in place; ids are unchanged
    /// and no merging happens.
    pub fn mark_freed(&mut self, id: BlockId) {
        let b = &mut self.blocks[id as usize];
        if b.value == BlockValue::Remove {
            b.value = BlockValue::Free;
        }
    }

    /// Replaces a leaf of size > 1 by its eight children, all carrying the
    /// parent's value. Returns the new ids in octant order.
    pub fn split_block(&mut self, id: BlockId) -> Option<[BlockId; 8]> {
        let b = self.blocks[id as usize];
        if !self.alive[id as usize] || b.size < 2 {
            return None;
        }
        let node = self.node_of_block[id as usize];
        let half = b.size / 2;
        let mut kids = [0u32; 8];
        let mut ids = [0 as BlockId; 8];
        for c in 0..8 {
            let o = octant_offset(c, half);
            let co = GridIndex::new(b.origin.x + o[0], b.origin.y + o[1], b.origin.z + o[2]);
            let ni = self.nodes.len() as u32;
            self.nodes.push(Node {
                parent: Some(node),
                octant: c as u8,
                children: None,
                block: None,
            });
            let bid = self.push_block(co, half, b.value, ni);
            self.nodes[ni as usize].block = Some(bid);
            kids[c] = ni;
            ids[c] = bid;
        }
        {
            let n = &mut self.nodes[node as usize];
            n.children = Some(kids);
            n.block = None;
        }
        self.alive[id as usize] = false;
        for c in ids {
            self.paint(c);
        }
        let mut touched: Vec<BlockId> = self.adjacency[id as usize].iter().flatten().copied().collect();
        touched.sort_unstable();
        touched.dedup();
        self.adjacency[id as usize] = Default::default();
        for c in ids {
            self.adjacency[c as usize] = self.compute_neighbors(c);
        }
        for t in touched {
            self.adjacency[t as usize] = self.compute_neighbors(t);
        }
        Some(ids)
    }

    pub fn stats(&self) -> GraphStats {
        let voxel_count = (self.dim as usize).pow(3);
        let block_count = self.block_count();
        GraphStats {
            voxel_count,
            block_count,
            reduction_percent: 100.0 * (1.0 - block_count as f64 / voxel_count as f64),
        }
    }

    /// Debug dump: one entry per live block with its per-face neighbors.
    pub fn to_json(&self) -> serde_json::Value {
        #[derive(Serialize)]
        struct Entry<'a> {
            id: BlockId,
            origin: [u32; 3],
            size: u32,
            value: BlockValue,
            neighbors: BTreeMap<&'static str, &'a [BlockId]>,
        }
        let entries: Vec<Entry> = self
            .blocks()
            .map(|b| Entry {
                id: b.id,
                origin: b.origin.to_array(),
                size: b.size,
                value: b.value,
                neighbors: Face::ALL
                    .into_iter()
                    .map(|f| (f.label(), self.face_neighbors(b.id, f)))
                    .collect(),
            })
            .collect();
        serde_json::to_value(entries).expect("octree json")
    }
}

pub fn graph_stats(graph: &OctreeGraph, grid: &VoxelGrid) -> GraphStats {
    debug_assert_eq!(graph.dim(), grid.dim());
    graph.stats()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{generate_shape, ShapeKind};

    #[test]
    fn uniform_grid_is_one_block() {
        let g = VoxelGrid::new(8, VoxelState::Remove).unwrap();
        let t = build_octree(&g).unwrap();
        assert_eq!(t.block_count(), 1);
        assert_eq!(t.block(0).size, 8);
        let s = t.stats();
        assert!((s.reduction_percent - 100.0 * (1.0 - 1.0 / 512.0)).abs() < 1e-12);
        for f in Face::ALL {
            assert!(t.face_neighbors(0, f).is_empty());
        }
    }

    #[test]
    fn one_keep_voxel_prevents_pruning() {
        let mut g = VoxelGrid::new(2, VoxelState::Remove).unwrap();
        g.set(GridIndex::new(1, 0, 1), VoxelState::Keep);
        let t = build_octree(&g).unwrap();
        assert_eq!(t.block_count(), 8);
        assert!(t.blocks().all(|b| b.size == 1));
    }

    #[test]
    fn checkerboard_has_no_reduction() {
        let mut g = VoxelGrid::new(2, VoxelState::Remove).unwrap();
        for i in g.clone().indices() {
            if (i.x + i.y + i.z) % 2 == 0 {
                g.set(i, VoxelState::Keep);
            }
        }
        let t = build_octree(&g).unwrap();
        assert_eq!(t.stats().block_count, 8);
        assert_eq!(t.stats().reduction_percent, 0.0);
    }

    #[test]
    fn two_unit_blocks_see_each_other_once() {
        let mut g = VoxelGrid::new(2, VoxelState::Remove).unwrap();
        g.set(GridIndex::new(1, 1, 1), VoxelState::Keep);
        let t = build_octree(&g).unwrap();
        let a = t.block_at(GridIndex::new(0, 0, 0));
        let b = t.block_at(GridIndex::new(1, 0, 0));
        assert_eq!(t.face_neighbors(a, Face::PosX), &[b]);
        assert_eq!(t.face_neighbors(b, Face::NegX), &[a]);
        assert!(t.face_neighbors(a, Face::NegX).is_empty());
    }

    #[test]
    fn large_block_sees_four_small_neighbors() {
        // Left half uniform (size-2 blocks), right half broken into unit blocks.
        let mut g = VoxelGrid::new(4, VoxelState::Remove).unwrap();
        g.set(GridIndex::new(3, 3, 3), VoxelState::Keep);
        g.set(GridIndex::new(3, 1, 1), VoxelState::Keep);
        let t = build_octree(&g).unwrap();
        let big = t.block_at(GridIndex::new(0, 0, 0));
        assert_eq!(t.block(big).size, 2);
        let right: Vec<BlockId> = {
            let mut v: Vec<_> = [(2, 0, 0), (2, 1, 0), (2, 0, 1), (2, 1, 1)]
                .iter()
                .map(|&(x, y, z)| t.block_at(GridIndex::new(x, y, z)))
                .collect();
            v.sort_unstable();
            v
        };
        assert_eq!(t.face_neighbors(big, Face::PosX), right.as_slice());
        assert_eq!(t.face_neighbors_by_ancestor_walk(big, Face::PosX), right);
    }

    #[test]
    fn ancestor_walk_agrees_on_sphere() {
        let g = generate_shape(ShapeKind::Sphere, 16).unwrap();
        let t = build_octree(&g).unwrap();
        for b in t.blocks() {
            for f in Face::ALL {
                assert_eq!(
                    t.face_neighbors(b.id, f),
                    t.face_neighbors_by_ancestor_walk(b.id, f).as_slice()
                );
            }
        }
    }

    #[test]
    fn split_keeps_tiling_and_symmetry() {
        let g = generate_shape(ShapeKind::Vase, 16).unwrap();
        let mut t = build_octree(&g).unwrap();
        let big = t.blocks().find(|b| b.size >= 4).unwrap().id;
        let kids = t.split_block(big).unwrap();
        assert!(!t.is_alive(big));
        let vol: usize = t.blocks().map(|b| b.volume()).sum();
        assert_eq!(vol, 16usize.pow(3));
        for b in t.blocks() {
            for (f, n) in t.neighbors(b.id) {
                assert!(t.face_neighbors(n, f.opposite()).contains(&b.id));
                assert_eq!(
                    t.face_neighbors(b.id, f),
                    t.face_neighbors_by_ancestor_walk(b.id, f).as_slice()
                );
            }
        }
        assert!(kids.iter().all(|k| t.block(*k).size * 2 == t.block(big).size));
    }

    #[test]
    fn mark_freed_keeps_ids() {
        let g = VoxelGrid::new(4, VoxelState::Remove).unwrap();
        let mut t = build_octree(&g).unwrap();
        t.mark_freed(0);
        assert_eq!(t.block(0).value, BlockValue::Free);
        assert_eq!(t.block_count(), 1);
    }
}
