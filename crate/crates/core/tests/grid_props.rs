mod common;

use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use sculpt_core::grid::{component_map, generate_shape, nearest_remove, start_voxel, VaseLayout};
use sculpt_core::planner_voxel::heuristic_remaining_distance;
use sculpt_core::verify::oracles;
use sculpt_core::{GridIndex, ShapeKind, VoxelGrid, VoxelState};

/// Union-find labelling of Remove voxels, independent of the library's flood fill.
fn union_find_groups(g: &VoxelGrid) -> Vec<Vec<GridIndex>> {
    let n = g.len();
    let mut parent: Vec<usize> = (0..n).collect();
    fn find(p: &mut [usize], mut a: usize) -> usize {
        while p[a] != a {
            p[a] = p[p[a]];
            a = p[a];
        }
        a
    }
    let d = g.dim();
    for i in common::all(d) {
        if g.get(i) != VoxelState::Remove {
            continue;
        }
        for n in [
            GridIndex::new(i.x + 1, i.y, i.z),
            GridIndex::new(i.x, i.y + 1, i.z),
            GridIndex::new(i.x, i.y, i.z + 1),
        ] {
            if n.x < d && n.y < d && n.z < d && g.get(n) == VoxelState::Remove {
                let (a, b) = (find(&mut parent, g.linear(i)), find(&mut parent, g.linear(n)));
                parent[a] = b;
            }
        }
    }
    let mut groups: std::collections::BTreeMap<usize, Vec<GridIndex>> = Default::default();
    for i in common::all(d) {
        if g.get(i) == VoxelState::Remove {
            let r = find(&mut parent, g.linear(i));
            groups.entry(r).or_default().push(i);
        }
    }
    let mut out: Vec<Vec<GridIndex>> = groups.into_values().collect();
    for v in &mut out {
        v.sort();
    }
    out.sort();
    out
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn components_match_union_find(dim in prop::sample::select(vec![2u32, 4, 8]), keep in 0.0f64..0.8, seed in any::<u64>()) {
        let g = common::random_grid(dim, keep, seed);
        let map = component_map(&g);
        let mut ours: Vec<Vec<GridIndex>> = map.components.iter().map(|c| {
            let mut v = c.voxels.clone();
            v.sort();
            v
        }).collect();
        ours.sort();
        prop_assert_eq!(&ours, &union_find_groups(&g));
        for c in &map.components {
            for v in &c.voxels {
                prop_assert_eq!(map.labels[g.linear(*v)], Some(c.id as u32));
            }
            let s = start_voxel(&g, c).unwrap();
            prop_assert!(c.voxels.contains(&s.index));
            prop_assert_eq!(s.interior, !c.voxels.iter().any(|v| g.on_outer_face(*v)));
        }
    }

    #[test]
    fn nearest_remove_is_exact(dim in prop::sample::select(vec![2u32, 4, 8, 16]), keep in 0.5f64..1.0, seed in any::<u64>(), p in any::<[u32; 3]>()) {
        let g = common::random_grid(dim, keep, seed);
        let from = GridIndex::new(p[0] % dim, p[1] % dim, p[2] % dim);
        prop_assert_eq!(nearest_remove(&g, from), oracles::nearest(&g, from));
    }
}

#[test]
fn heuristic_matches_brute_force_on_1000_states() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    for k in 0..1000 {
        let mut g = common::random_grid(8, rng.gen_range(0.0..1.0), k);
        // Free a random share of the Remove voxels to mimic mid-plan states.
        let freed = rng.gen_range(0.0..1.0);
        for i in g.voxels_in(VoxelState::Remove) {
            if rng.gen_bool(freed) {
                g.free_voxel(i).unwrap();
            }
        }
        let robot = GridIndex::new(rng.gen_range(0..8), rng.gen_range(0..8), rng.gen_range(0..8));
        assert_eq!(heuristic_remaining_distance(&g, robot), oracles::remaining_distance(&g, robot), "state {k}");
    }
}

#[test]
fn vase_cavity_joins_exterior_only_through_the_neck() {
    let g = generate_shape(ShapeKind::Vase, 16).unwrap();
    let layout = VaseLayout::for_dim(16);
    let mut blocked = g.clone();
    for i in common::all(16) {
        if layout.is_neck(i) {
            blocked.set(i, VoxelState::Keep);
        }
    }
    let groups = union_find_groups(&blocked);
    let cavity: Vec<GridIndex> = common::all(16).filter(|i| layout.is_cavity(*i)).collect();
    let group = groups.iter().find(|c| c.contains(&cavity[0])).unwrap();
    let mut sorted = cavity.clone();
    sorted.sort();
    assert_eq!(group, &sorted);
    assert!(group.iter().all(|i| !g.on_outer_face(*i)));
    assert_eq!(union_find_groups(&g).len(), 1);
}
