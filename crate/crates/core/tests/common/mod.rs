#![allow(dead_code)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use sculpt_core::{GridIndex, VoxelGrid, VoxelState};

/// Random Keep/Remove grid; `keep` is the Keep probability.
pub fn random_grid(dim: u32, keep: f64, seed: u64) -> VoxelGrid {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut g = VoxelGrid::new(dim, VoxelState::Remove).unwrap();
    for i in all(dim) {
        if rng.gen_bool(keep) {
            g.set(i, VoxelState::Keep);
        }
    }
    g
}

/// Random grid with all four states.
pub fn random_mixed(dim: u32, seed: u64) -> VoxelGrid {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let states = [VoxelState::Keep, VoxelState::Remove, VoxelState::Freed, VoxelState::Void];
    let mut g = VoxelGrid::new(dim, VoxelState::Remove).unwrap();
    for i in all(dim) {
        g.set(i, states[rng.gen_range(0..4)]);
    }
    g
}

/// Blocky random grid: uniform cubes of random sizes so the octree prunes.
pub fn random_blocky(dim: u32, seed: u64) -> VoxelGrid {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut g = VoxelGrid::new(dim, VoxelState::Remove).unwrap();
    fn fill(g: &mut VoxelGrid, rng: &mut ChaCha8Rng, o: [u32; 3], s: u32) {
        if s > 1 && rng.gen_bool(0.6) {
            let h = s / 2;
            for dx in [0, h] {
                for dy in [0, h] {
                    for dz in [0, h] {
                        fill(g, rng, [o[0] + dx, o[1] + dy, o[2] + dz], h);
                    }
                }
            }
            return;
        }
        let st = if rng.gen_bool(0.4) { VoxelState::Keep } else { VoxelState::Remove };
        for x in o[0]..o[0] + s {
            for y in o[1]..o[1] + s {
                for z in o[2]..o[2] + s {
                    g.set(GridIndex::new(x, y, z), st);
                }
            }
        }
    }
    fill(&mut g, &mut rng, [0, 0, 0], dim);
    g
}

pub fn all(dim: u32) -> impl Iterator<Item = GridIndex> {
    (0..dim).flat_map(move |x| (0..dim).flat_map(move |y| (0..dim).map(move |z| GridIndex::new(x, y, z))))
}

/// Minimal binvox writer: x-major, then z, y fastest; runs capped at 255.
pub fn encode_binvox(dim: u32, occupied: impl Fn(u32, u32, u32) -> bool) -> Vec<u8> {
    let mut out = format!("#binvox 1\ndim {dim} {dim} {dim}\ntranslate 0 0 0\nscale 1\ndata\n").into_bytes();
    let mut bits = Vec::new();
    for x in 0..dim {
        for z in 0..dim {
            for y in 0..dim {
                bits.push(u8::from(occupied(x, y, z)));
            }
        }
    }
    let mut k = 0;
    while k < bits.len() {
        let v = bits[k];
        let mut n = 1;
        while k + n < bits.len() && bits[k + n] == v && n < 255 {
            n += 1;
        }
        out.push(v);
        out.push(n as u8);
        k += n;
    }
    out
}
