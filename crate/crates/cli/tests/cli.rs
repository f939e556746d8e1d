use std::path::Path;
use std::process::{Command, Output};

use sculpt_core::grid::generate_shape;
use sculpt_core::io::{grid_to_json, load_grid};
use sculpt_core::verify::oracles;
use sculpt_core::{GridIndex, ShapeKind, VoxelGrid, VoxelState};

fn sculpt(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_sculpt")).args(args).output().unwrap()
}

fn code(out: &Output) -> i32 {
    out.status.code().unwrap()
}

fn p(dir: &Path, name: &str) -> String {
    dir.join(name).display().to_string()
}

fn report(path: &str) -> serde_json::Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

#[test]
fn gen_solid_binvox_parses_back_to_512_remove() {
    let dir = tempfile::tempdir().unwrap();
    let out = p(dir.path(), "s.binvox");
    assert_eq!(code(&sculpt(&["gen", "--shape", "solid", "--dim", "8", "--out", &out])), 0);
    let g = load_grid(&std::fs::read(&out).unwrap()).unwrap();
    assert_eq!(g.counts().remove, 512);
}

#[test]
fn gen_vase_json_round_trips() {
    let dir = tempfile::tempdir().unwrap();
    let out = p(dir.path(), "v.json");
    assert_eq!(code(&sculpt(&["gen", "--shape", "vase", "--dim", "16", "--out", &out])), 0);
    let g = load_grid(&std::fs::read(&out).unwrap()).unwrap();
    assert_eq!(g.states(), generate_shape(ShapeKind::Vase, 16).unwrap().states());
}

#[test]
fn bad_dimension_and_shape_are_errors() {
    let dir = tempfile::tempdir().unwrap();
    let out = p(dir.path(), "x.json");
    assert_eq!(code(&sculpt(&["gen", "--shape", "sphere", "--dim", "3", "--out", &out])), 1);
    assert_eq!(code(&sculpt(&["gen", "--shape", "torus", "--dim", "8", "--out", &out])), 1);
    assert_eq!(code(&sculpt(&["gen", "--shape", "solid", "--dim", "8", "--out", "x.txt"])), 1);
}

#[test]
fn plan_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let vase = p(dir.path(), "v.json");
    let sphere = p(dir.path(), "s.json");
    let solid = p(dir.path(), "solid.json");
    sculpt(&["gen", "--shape", "vase", "--dim", "16", "--out", &vase]);
    sculpt(&["gen", "--shape", "sphere", "--dim", "16", "--out", &sphere]);
    sculpt(&["gen", "--shape", "solid", "--dim", "8", "--out", &solid]);

    let rep = p(dir.path(), "v.rep.json");
    let out = sculpt(&["plan", "--input", &vase, "--tier", "tool", "--report", &rep]);
    assert_eq!(code(&out), 2);
    assert!(!report(&rep)["unreachable"].as_array().unwrap().is_empty());

    let rep = p(dir.path(), "s.rep.json");
    let out = sculpt(&["plan", "--input", &sphere, "--tier", "octree", "--report", &rep, "--validate"]);
    assert_eq!(code(&out), 0);
    let r = report(&rep);
    assert_eq!(r["valid"], true);
    assert_eq!(r["coverage"], 1.0);
    assert_eq!(r["dim"], 16);

    let out = sculpt(&["plan", "--input", &solid, "--tier", "voxel", "--validate"]);
    assert_eq!(code(&out), 0);

    let out = sculpt(&["plan", "--input", &sphere, "--tier", "voxel", "--max-expansions", "100"]);
    assert_eq!(code(&out), 3);

    let out = sculpt(&["plan", "--input", &p(dir.path(), "missing.json"), "--tier", "voxel"]);
    assert_eq!(code(&out), 1);

    let out = sculpt(&["plan", "--input", &solid, "--tier", "tool", "--tip-radius", "0.6"]);
    assert_eq!(code(&out), 1);
}

#[test]
fn plan_csv_is_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let grid = p(dir.path(), "g.json");
    sculpt(&["gen", "--shape", "sphere", "--dim", "8", "--out", &grid]);
    for tier in ["voxel", "octree", "tool"] {
        let a = p(dir.path(), "a.csv");
        let b = p(dir.path(), "b.csv");
        sculpt(&["plan", "--input", &grid, "--tier", tier, "--traj", &a]);
        sculpt(&["plan", "--input", &grid, "--tier", tier, "--traj", &b]);
        assert_eq!(std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap(), "{tier}");
    }
}

fn write_grid(path: &str, g: &VoxelGrid) {
    std::fs::write(path, grid_to_json(g)).unwrap();
}

fn obj_counts(path: &str) -> (usize, usize) {
    let text = std::fs::read_to_string(path).unwrap();
    let v = text.lines().filter(|l| l.starts_with("v ")).count();
    let f = text.lines().filter(|l| l.starts_with("f ")).count();
    (v, f)
}

#[test]
fn export_obj_cases() {
    let dir = tempfile::tempdir().unwrap();
    let one = p(dir.path(), "one.json");
    let mut g = VoxelGrid::new(4, VoxelState::Remove).unwrap();
    g.set(GridIndex::new(1, 2, 3), VoxelState::Keep);
    write_grid(&one, &g);
    let out = p(dir.path(), "one.obj");
    assert_eq!(code(&sculpt(&["export-obj", "--input", &one, "--out", &out])), 0);
    assert_eq!(obj_counts(&out), (8, 6));

    let cube = p(dir.path(), "cube.json");
    write_grid(&cube, &VoxelGrid::new(2, VoxelState::Keep).unwrap());
    let out = p(dir.path(), "cube.obj");
    sculpt(&["export-obj", "--input", &cube, "--out", &out]);
    assert_eq!(obj_counts(&out).0, 27);

    let sphere = p(dir.path(), "sphere.json");
    let s = generate_shape(ShapeKind::Sphere, 16).unwrap();
    write_grid(&sphere, &s);
    let out = p(dir.path(), "sphere.obj");
    sculpt(&["export-obj", "--input", &sphere, "--out", &out]);
    assert_eq!(obj_counts(&out).1, oracles::surface_faces(&s, false));
}

#[test]
fn export_obj_applies_a_plan_state() {
    let dir = tempfile::tempdir().unwrap();
    let grid = p(dir.path(), "g.json");
    sculpt(&["gen", "--shape", "sphere", "--dim", "8", "--out", &grid]);
    let g = load_grid(&std::fs::read(&grid).unwrap()).unwrap();
    for tier in ["octree", "tool"] {
        let traj = p(dir.path(), "t.csv");
        sculpt(&["plan", "--input", &grid, "--tier", tier, "--traj", &traj]);
        let out = p(dir.path(), "t.obj");
        let o = sculpt(&["export-obj", "--input", &grid, "--state", &traj, "--out", &out, "--include-remove"]);
        assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
        // Every Remove voxel is gone, so only the Keep surface is left.
        assert_eq!(obj_counts(&out).1, oracles::surface_faces(&g, false), "{tier}");
    }
}

#[test]
fn bench_matrix_is_repeatable() {
    let dir = tempfile::tempdir().unwrap();
    let a = p(dir.path(), "a.csv");
    let b = p(dir.path(), "b.csv");
    for out in [&a, &b] {
        let o = sculpt(&["bench", "--shape", "sphere", "--dims", "8,16", "--tiers", "voxel,octree", "--csv", out]);
        assert_eq!(code(&o), 0);
    }
    let cols = |path: &str| -> Vec<Vec<String>> {
        std::fs::read_to_string(path)
            .unwrap()
            .lines()
            .skip(1)
            .map(|l| {
                let f: Vec<String> = l.split(',').map(str::to_string).collect();
                vec![f[0].clone(), f[1].clone(), f[3].clone(), f[4].clone(), f[5].clone(), f[7].clone()]
            })
            .collect()
    };
    let ca = cols(&a);
    assert_eq!(ca, cols(&b));
    assert_eq!(ca.len(), 4);
    let red: Vec<f64> = ca.iter().step_by(2).map(|r| r[3].parse().unwrap()).collect();
    assert!(red[1] > red[0]);
}

#[test]
fn bench_records_timeouts_and_continues() {
    let dir = tempfile::tempdir().unwrap();
    let out = p(dir.path(), "t.csv");
    let o = sculpt(&[
        "bench", "--shape", "sphere", "--dims", "16", "--tiers", "voxel,octree", "--csv", &out, "--max-expansions", "500",
    ]);
    assert_eq!(code(&o), 0);
    let text = std::fs::read_to_string(&out).unwrap();
    let rows: Vec<&str> = text.lines().skip(1).collect();
    assert_eq!(rows.len(), 2);
    assert!(rows.iter().all(|r| r.ends_with(",timeout")));
}
