//! Voxel world representation.
//!
//! A [`VoxelGrid`] is a cubic lattice whose edge is a power of two. Storage is
//! x-major with y running fastest (`index = x*d*d + z*d + y`), which is the
//! byte order of binvox files, so ingestion is a straight run-length expansion.

use std::collections::VecDeque;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::GridError;

/// Lattice coordinate of a voxel. Ordering is lexicographic on `(x, y, z)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct GridIndex {
    pub x: u32,
    pub y: u32,
    pub z: u32,
}

impl GridIndex {
    pub const fn new(x: u32, y: u32, z: u32) -> Self {
        Self { x, y, z }
    }

    pub fn l1(self, other: GridIndex) -> u32 {
        self.x.abs_diff(other.x) + self.y.abs_diff(other.y) + self.z.abs_diff(other.z)
    }

    pub fn to_array(self) -> [u32; 3] {
        [self.x, self.y, self.z]
    }

    pub fn to_signed(self) -> [i64; 3] {
        [self.x as i64, self.y as i64, self.z as i64]
    }

    /// Neighbor across `face`, or `None` when it leaves a grid of edge `dim`.
    pub fn step(self, face: Face, dim: u32) -> Option<GridIndex> {
        let [dx, dy, dz] = face.normal();
        let x = self.x as i64 + dx as i64;
        let y = self.y as i64 + dy as i64;
        let z = self.z as i64 + dz as i64;
        let d = dim as i64;
        if (0..d).contains(&x) && (0..d).contains(&y) && (0..d).contains(&z) {
            Some(GridIndex::new(x as u32, y as u32, z as u32))
        } else {
            None
        }
    }

    pub fn from_signed(p: [i64; 3], dim: u32) -> Option<GridIndex> {
        let d = dim as i64;
        if p.iter().all(|&c| (0..d).contains(&c)) {
            Some(GridIndex::new(p[0] as u32, p[1] as u32, p[2] as u32))
        } else {
            None
        }
    }
}

impl fmt::Display for GridIndex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}:{}", self.x, self.y, self.z)
    }
}

/// One of the six axis-aligned faces of a voxel or block, in the fixed
/// expansion order +x, -x, +y, -y, +z, -z.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Face {
    #[serde(rename = "+x")]
    PosX,
    #[serde(rename = "-x")]
    NegX,
    #[serde(rename = "+y")]
    PosY,
    #[serde(rename = "-y")]
    NegY,
    #[serde(rename = "+z")]
    PosZ,
    #[serde(rename = "-z")]
    NegZ,
}

impl Face {
    pub const ALL: [Face; 6] = [
        Face::PosX,
        Face::NegX,
        Face::PosY,
        Face::NegY,
        Face::PosZ,
        Face::NegZ,
    ];

    pub fn axis(self) -> usize {
        match self {
            Face::PosX | Face::NegX => 0,
            Face::PosY | Face::NegY => 1,
            Face::PosZ | Face::NegZ => 2,
        }
    }

    pub fn is_positive(self) -> bool {
        matches!(self, Face::PosX | Face::PosY | Face::PosZ)
    }

    /// Outward unit normal.
    pub fn normal(self) -> [i32; 3] {
        let mut n = [0; 3];
        n[self.axis()] = if self.is_positive() { 1 } else { -1 };
        n
    }

    pub fn opposite(self) -> Face {
        match self {
            Face::PosX => Face::NegX,
            Face::NegX => Face::PosX,
            Face::PosY => Face::NegY,
            Face::NegY => Face::PosY,
            Face::PosZ => Face::NegZ,
            Face::NegZ => Face::PosZ,
        }
    }

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn label(self) -> &'static str {
        match self {
            Face::PosX => "+x",
            Face::NegX => "-x",
            Face::PosY => "+y",
            Face::NegY => "-y",
            Face::PosZ => "+z",
            Face::NegZ => "-z",
        }
    }
}

impl fmt::Display for Face {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

/// Material state of one voxel.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum VoxelState {
    /// Model material, never cut.
    Keep,
    /// Waste material still to be removed.
    Remove,
    /// Waste that has been removed.
    Freed,
    /// Space that never held material (padding).
    Void,
}

impl VoxelState {
    pub fn is_free(self) -> bool {
        matches!(self, VoxelState::Freed | VoxelState::Void)
    }

    pub fn is_material(self) -> bool {
        !self.is_free()
    }

    pub fn code(self) -> char {
        match self {
            VoxelState::Keep => 'K',
            VoxelState::Remove => 'R',
            VoxelState::Freed => 'F',
            VoxelState::Void => 'V',
        }
    }

    pub fn from_code(c: char) -> Option<Self> {
        match c {
            'K' => Some(VoxelState::Keep),
            'R' => Some(VoxelState::Remove),
            'F' => Some(VoxelState::Freed),
            'V' => Some(VoxelState::Void),
            _ => None,
        }
    }
}

impl Serialize for VoxelState {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(match self {
            VoxelState::Keep => "K",
            VoxelState::Remove => "R",
            VoxelState::Freed => "F",
            VoxelState::Void => "V",
        })
    }
}

impl<'de> Deserialize<'de> for VoxelState {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        let mut chars = s.chars();
        match (chars.next(), chars.next()) {
            (Some(c), None) => VoxelState::from_code(c),
            _ => None,
        }
        .ok_or_else(|| serde::de::Error::custom(format!("unknown voxel state {s:?}")))
    }
}

/// Per-state voxel tallies.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct StateCounts {
    pub keep: usize,
    pub remove: usize,
    pub freed: usize,
    pub void: usize,
}

impl StateCounts {
    pub fn total(&self) -> usize {
        self.keep + self.remove + self.freed + self.void
    }
}

/// Placement metadata carried by binvox headers.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Frame {
    pub translate: [f64; 3],
    pub scale: f64,
}

impl Default for Frame {
    fn default() -> Self {
        Self {
            translate: [0.0; 3],
            scale: 1.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct VoxelGrid {
    dim: u32,
    /// Physical voxel edge in meters.
    pub edge_len: f64,
    states: Vec<VoxelState>,
    remaining: usize,
    /// Edge length of the unpadded source lattice (equals `dim` unless padded).
    pub source_dim: u32,
    pub frame: Frame,
}

pub fn check_dim(dim: u32) -> Result<(), GridError> {
    if dim == 0 || !dim.is_power_of_two() {
        Err(GridError::Dimension(dim))
    } else {
        Ok(())
    }
}

impl VoxelGrid {
    pub fn new(dim: u32, fill: VoxelState) -> Result<Self, GridError> {
        check_dim(dim)?;
        let n = (dim as usize).pow(3);
        Ok(Self {
            dim,
            edge_len: 1.0,
            states: vec![fill; n],
            remaining: if fill == VoxelState::Remove { n } else { 0 },
            source_dim: dim,
            frame: Frame::default(),
        })
    }

    pub fn from_states(dim: u32, states: Vec<VoxelState>) -> Result<Self, GridError> {
        check_dim(dim)?;
        let n = (dim as usize).pow(3);
        if states.len() != n {
            return Err(GridError::LengthMismatch {
                expected: n,
                found: states.len(),
            });
        }
        let remaining = states.iter().filter(|s| **s == VoxelState::Remove).count();
        Ok(Self {
            dim,
            edge_len: 1.0,
            states,
            remaining,
            source_dim: dim,
            frame: Frame::default(),
        })
    }

    pub fn dim(&self) -> u32 {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    /// Number of `Remove` voxels, maintained incrementally.
    pub fn remaining(&self) -> usize {
        self.remaining
    }

    pub fn states(&self) -> &[VoxelState] {
        &self.states
    }

    #[inline]
    pub fn linear(&self, i: GridIndex) -> usize {
        let d = self.dim as usize;
        i.x as usize * d * d + i.z as usize * d + i.y as usize
    }

    #[inline]
    pub fn coords(&self, linear: usize) -> GridIndex {
        let d = self.dim as usize;
        let x = linear / (d * d);
        let rem = linear % (d * d);
        GridIndex::new(x as u32, (rem % d) as u32, (rem / d) as u32)
    }

    pub fn contains(&self, i: GridIndex) -> bool {
        i.x < self.dim && i.y < self.dim && i.z < self.dim
    }

    #[inline]
    pub fn get(&self, i: GridIndex) -> VoxelState {
        self.states[self.linear(i)]
    }

    /// State at a signed coordinate; `None` outside the grid.
    pub fn get_signed(&self, p: [i64; 3]) -> Option<VoxelState> {
        GridIndex::from_signed(p, self.dim).map(|i| self.get(i))
    }

    /// Unchecked assignment used while constructing grids.
    pub fn set(&mut self, i: GridIndex, state: VoxelState) {
        let k = self.linear(i);
        let old = self.states[k];
        if old == VoxelState::Remove {
            self.remaining -= 1;
        }
        if state == VoxelState::Remove {
            self.remaining += 1;
        }
        self.states[k] = state;
    }

    /// Marks a `Remove` voxel as `Freed`. Any other transition is rejected.
    pub fn free_voxel(&mut self, i: GridIndex) -> Result<(), GridError> {
        match self.get(i) {
            VoxelState::Remove => {
                self.set(i, VoxelState::Freed);
                Ok(())
            }
            other => Err(GridError::Transition {
                index: i,
                from: other.code(),
                to: 'F',
            }),
        }
    }

    /// Reverts a `Freed` voxel to `Remove`. Only search scratch worlds use this.
    pub(crate) fn unfree_voxel(&mut self, i: GridIndex) {
        debug_assert_eq!(self.get(i), VoxelState::Freed);
        self.set(i, VoxelState::Remove);
    }

    pub fn counts(&self) -> StateCounts {
        let mut c = StateCounts::default();
        for s in &self.states {
            match s {
                VoxelState::Keep => c.keep += 1,
                VoxelState::Remove => c.remove += 1,
                VoxelState::Freed => c.freed += 1,
                VoxelState::Void => c.void += 1,
            }
        }
        c
    }

    pub fn indices(&self) -> impl Iterator<Item = GridIndex> + '_ {
        (0..self.states.len()).map(move |k| self.coords(k))
    }

    /// All voxels currently in `state`, in storage order.
    pub fn voxels_in(&self, state: VoxelState) -> Vec<GridIndex> {
        self.states
            .iter()
            .enumerate()
            .filter(|(_, s)| **s == state)
            .map(|(k, _)| self.coords(k))
            .collect()
    }

    pub fn neighbors6(&self, i: GridIndex) -> impl Iterator<Item = (Face, GridIndex)> + '_ {
        let dim = self.dim;
        Face::ALL
            .into_iter()
            .filter_map(move |f| i.step(f, dim).map(|n| (f, n)))
    }

    pub fn on_outer_face(&self, i: GridIndex) -> bool {
        let m = self.dim - 1;
        i.x == 0 || i.y == 0 || i.z == 0 || i.x == m || i.y == m || i.z == m
    }

    /// Pads to the next power of two with `Void`. Existing voxels keep their
    /// coordinates.
    pub fn padded_from(source_dim: u32, states: &[VoxelState]) -> Result<Self, GridError> {
        if source_dim == 0 {
            return Err(GridError::Dimension(0));
        }
        let dim = source_dim.next_power_of_two();
        let mut grid = VoxelGrid::new(dim, VoxelState::Void)?;
        let s = source_dim as usize;
        for x in 0..s {
            for z in 0..s {
                for y in 0..s {
                    let st = states[x * s * s + z * s + y];
                    grid.set(GridIndex::new(x as u32, y as u32, z as u32), st);
                }
            }
        }
        grid.source_dim = source_dim;
        Ok(grid)
    }
}

/// Procedural test shapes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ShapeKind {
    Sphere,
    Vase,
    HollowBox,
    DeadEnd,
    Solid,
}

impl ShapeKind {
    pub const ALL: [ShapeKind; 5] = [
        ShapeKind::Sphere,
        ShapeKind::Vase,
        ShapeKind::HollowBox,
        ShapeKind::DeadEnd,
        ShapeKind::Solid,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ShapeKind::Sphere => "sphere",
            ShapeKind::Vase => "vase",
            ShapeKind::HollowBox => "hollow_box",
            ShapeKind::DeadEnd => "dead_end",
            ShapeKind::Solid => "solid",
        }
    }
}

impl FromStr for ShapeKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        ShapeKind::ALL
            .into_iter()
            .find(|k| k.name() == s || k.name().replace('_', "-") == s)
            .ok_or_else(|| format!("unknown shape {s:?}"))
    }
}

impl fmt::Display for ShapeKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Geometry of the generated vase, exposed so tests can reason about it.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct VaseLayout {
    /// Body box spans `[lo, hi)` in x and y.
    pub lo: u32,
    pub hi: u32,
    /// Body spans `[lo, body_top)` in z; the top wall is at `body_top - 1`.
    pub body_top: u32,
    /// Neck column x = y = `center`, from `body_top - 1` to `hi - 1`.
    pub center: u32,
}

impl VaseLayout {
    pub fn for_dim(dim: u32) -> Self {
        let lo = dim / 8;
        let hi = dim - dim / 8;
        let neck = (dim / 8).max(1);
        Self {
            lo,
            hi,
            body_top: hi - neck,
            center: dim / 2,
        }
    }

    pub fn is_cavity(&self, i: GridIndex) -> bool {
        let inside = |c: u32| c > self.lo && c + 1 < self.hi;
        inside(i.x) && inside(i.y) && i.z > self.lo && i.z + 1 < self.body_top
    }

    pub fn is_neck(&self, i: GridIndex) -> bool {
        i.x == self.center && i.y == self.center && i.z + 1 >= self.body_top && i.z < self.hi
    }
}

pub fn generate_shape(kind: ShapeKind, dim: u32) -> Result<VoxelGrid, GridError> {
    check_dim(dim)?;
    if dim < 4 {
        return Err(GridError::Dimension(dim));
    }
    let mut g = VoxelGrid::new(dim, VoxelState::Remove)?;
    match kind {
        ShapeKind::Solid => {}
        ShapeKind::Sphere => {
            let c = dim as f64 / 2.0;
            let r = 0.45 * dim as f64;
            for i in all_indices(dim) {
                let dx = i.x as f64 + 0.5 - c;
                let dy = i.y as f64 + 0.5 - c;
                let dz = i.z as f64 + 0.5 - c;
                if dx * dx + dy * dy + dz * dz <= r * r {
                    g.set(i, VoxelState::Keep);
                }
            }
        }
        ShapeKind::HollowBox => {
            let lo = dim / 8;
            let hi = dim - dim / 8;
            for i in all_indices(dim) {
                let [x, y, z] = i.to_array();
                let in_box = [x, y, z].iter().all(|&c| c >= lo && c < hi);
                let interior = [x, y, z].iter().all(|&c| c > lo && c + 1 < hi);
                if in_box && !interior {
                    g.set(i, VoxelState::Keep);
                }
            }
        }
        ShapeKind::Vase => {
            let v = VaseLayout::for_dim(dim);
            for i in all_indices(dim) {
                let [x, y, z] = i.to_array();
                let in_body =
                    x >= v.lo && x < v.hi && y >= v.lo && y < v.hi && z >= v.lo && z < v.body_top;
                let ring = z >= v.body_top
                    && z < v.hi
                    && x + 1 >= v.center
                    && x <= v.center + 1
                    && y + 1 >= v.center
                    && y <= v.center + 1;
                let keep = (in_body && !v.is_cavity(i) && !v.is_neck(i)) || (ring && !v.is_neck(i));
                if keep {
                    g.set(i, VoxelState::Keep);
                }
            }
        }
        ShapeKind::DeadEnd => {
            // Two corridors leave the origin corner along +x and +y. Whichever
            // the robot clears first ends far from the other one.
            for i in all_indices(dim) {
                let [x, y, z] = i.to_array();
                let open = z == 0 && (x == 0 || y == 0);
                if !open {
                    g.set(i, VoxelState::Keep);
                }
            }
        }
    }
    Ok(g)
}

pub(crate) fn all_indices(dim: u32) -> impl Iterator<Item = GridIndex> {
    (0..dim).flat_map(move |x| {
        (0..dim).flat_map(move |y| (0..dim).map(move |z| GridIndex::new(x, y, z)))
    })
}

/// A maximal 6-connected set of `Remove` voxels.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Component {
    pub id: usize,
    /// Members sorted lexicographically.
    pub voxels: Vec<GridIndex>,
}

/// Label per voxel (`None` for non-`Remove`) plus the components themselves.
#[derive(Debug, Clone)]
pub struct ComponentMap {
    pub labels: Vec<Option<u32>>,
    pub components: Vec<Component>,
}

pub fn components(grid: &VoxelGrid) -> Vec<Component> {
    component_map(grid).components
}

pub fn component_map(grid: &VoxelGrid) -> ComponentMap {
    let mut labels = vec![None; grid.len()];
    let mut comps = Vec::new();
    let mut queue = VecDeque::new();
    for k in 0..grid.len() {
        if grid.states[k] != VoxelState::Remove || labels[k].is_some() {
            continue;
        }
        let id = comps.len() as u32;
        let mut members = Vec::new();
        labels[k] = Some(id);
        queue.push_back(grid.coords(k));
        while let Some(v) = queue.pop_front() {
            members.push(v);
            for (_, n) in grid.neighbors6(v) {
                let nk = grid.linear(n);
                if grid.states[nk] == VoxelState::Remove && labels[nk].is_none() {
                    labels[nk] = Some(id);
                    queue.push_back(n);
                }
            }
        }
        members.sort_unstable();
        comps.push(Component {
            id: id as usize,
            voxels: members,
        });
    }
    ComponentMap {
        labels,
        components: comps,
    }
}

/// Nearest voxel satisfying `pred` by L1 distance, ties broken by the
/// lexicographically smallest index. Searches outward in L1 shells.
pub fn nearest_matching(
    grid: &VoxelGrid,
    from: GridIndex,
    max_dist: Option<u32>,
    mut pred: impl FnMut(GridIndex) -> bool,
) -> Option<(GridIndex, u32)> {
    let dim = grid.dim as i64;
    let limit = max_dist.unwrap_or(3 * (grid.dim - 1)).min(3 * (grid.dim - 1));
    let [fx, fy, fz] = from.to_signed();
    for d in 0..=limit as i64 {
        let mut best: Option<GridIndex> = None;
        for dx in -d..=d {
            let x = fx + dx;
            if !(0..dim).contains(&x) {
                continue;
            }
            let ry = d - dx.abs();
            for dy in -ry..=ry {
                let y = fy + dy;
                if !(0..dim).contains(&y) {
                    continue;
                }
                let rz = ry - dy.abs();
                let zs = [-rz, rz];
                for &dz in &zs[..if rz == 0 { 1 } else { 2 }] {
                    let z = fz + dz;
                    if !(0..dim).contains(&z) {
                        continue;
                    }
                    let i = GridIndex::new(x as u32, y as u32, z as u32);
                    if best.is_some_and(|b| b <= i) {
                        continue;
                    }
                    if pred(i) {
                        best = Some(i);
                    }
                }
            }
        }
        if let Some(b) = best {
            return Some((b, d as u32));
        }
    }
    None
}

/// Nearest `Remove` voxel to `from` (L1), lexicographic tie-break.
pub fn nearest_remove(grid: &VoxelGrid, from: GridIndex) -> Option<(GridIndex, u32)> {
    if grid.remaining() == 0 {
        return None;
    }
    nearest_matching(grid, from, None, |i| grid.get(i) == VoxelState::Remove)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct StartVoxel {
    pub index: GridIndex,
    /// No member of the component touches an outer face of the grid.
    pub interior: bool,
}

/// Start voxel for a component: the outer-face member closest (L1) to the
/// origin corner, or the member closest to the origin flagged `interior`.
pub fn start_voxel(grid: &VoxelGrid, component: &Component) -> Result<StartVoxel, GridError> {
    let origin = GridIndex::new(0, 0, 0);
    let key = |i: &GridIndex| (i.l1(origin), *i);
    let on_face = component
        .voxels
        .iter()
        .filter(|i| grid.on_outer_face(**i))
        .min_by_key(|i| key(i));
    if let Some(i) = on_face {
        return Ok(StartVoxel {
            index: *i,
            interior: false,
        });
    }
    component
        .voxels
        .iter()
        .min_by_key(|i| key(i))
        .map(|i| StartVoxel {
            index: *i,
            interior: true,
        })
        .ok_or(GridError::EmptyComponent)
}
