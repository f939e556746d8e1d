//! Browser bindings: generate a shape, inspect its octree, and plan a removal path.
//!
//! Results cross the boundary as JSON strings or flat byte arrays so the page
//! needs no generated type definitions.

use serde_json::{json, Value};
use wasm_bindgen::prelude::*;

use sculpt_core::geometry::{cell_of, ToolModel};
use sculpt_core::grid::generate_shape;
use sculpt_core::octree::{build_octree, BlockValue};
use sculpt_core::planner_octree::plan_octree;
use sculpt_core::planner_voxel::{plan_voxel, PlanOptions};
use sculpt_core::search::Limits;
use sculpt_core::tool_planner::{plan_tool, ToolPlanOptions};
use sculpt_core::{GridIndex, PlanError, ShapeKind, VoxelGrid, VoxelPlan, VoxelState};

/// Largest grid the page offers; planning beyond this stalls a browser tab.
pub const MAX_DIM: u32 = 32;

#[wasm_bindgen]
pub struct Scene {
    grid: VoxelGrid,
}

#[wasm_bindgen]
impl Scene {
    #[wasm_bindgen(constructor)]
    pub fn new(shape: &str, dim: u32) -> Result<Scene, JsError> {
        Scene::build(shape, dim).map_err(|e| JsError::new(&e))
    }

    pub fn dim(&self) -> u32 {
        self.grid.dim()
    }

    /// One state code per voxel in storage order (`x*d*d + z*d + y`):
    /// 0 keep, 1 remove, 2 free.
    pub fn states(&self) -> Vec<u8> {
        self.grid.states().iter().map(|s| state_code(*s)).collect()
    }

    /// Octree summary plus every leaf as `[x, y, z, size, code]`.
    pub fn octree(&self) -> Result<String, JsError> {
        self.octree_json().map(|v| v.to_string()).map_err(|e| JsError::new(&e))
    }

    /// Plans with `tier` ("voxel", "octree" or "tool") under an expansion budget.
    pub fn plan(&self, tier: &str, max_expansions: u32) -> Result<String, JsError> {
        self.plan_json(tier, max_expansions as u64)
            .map(|v| v.to_string())
            .map_err(|e| JsError::new(&e))
    }
}

impl Scene {
    pub fn build(shape: &str, dim: u32) -> Result<Scene, String> {
        let kind: ShapeKind = shape.parse()?;
        if dim > MAX_DIM {
            return Err(format!("dim {dim} exceeds {MAX_DIM}"));
        }
        let grid = generate_shape(kind, dim).map_err(|e| e.to_string())?;
        Ok(Scene { grid })
    }

    pub fn octree_json(&self) -> Result<Value, String> {
        let graph = build_octree(&self.grid).map_err(|e| e.to_string())?;
        let stats = graph.stats();
        let leaves: Vec<[u32; 5]> = graph
            .blocks()
            .map(|b| {
                let [x, y, z] = b.origin.to_array();
                let code = match b.value {
                    BlockValue::Keep => 0,
                    BlockValue::Remove => 1,
                    BlockValue::Free => 2,
                };
                [x, y, z, b.size, code]
            })
            .collect();
        Ok(json!({
            "voxels": stats.voxel_count,
            "blocks": stats.block_count,
            "reduction_percent": stats.reduction_percent,
            "leaves": leaves,
        }))
    }

    /// Path as `[x, y, z, cut]` cells. Tool poses report the cell holding the tip.
    pub fn plan_json(&self, tier: &str, max_expansions: u64) -> Result<Value, String> {
        let limits = Limits {
            max_expansions: Some(max_expansions),
            max_seconds: None,
        };
        let mut grid = self.grid.clone();
        let remove_total = grid.remaining();
        let outcome = match tier {
            "voxel" => plan_voxel(&mut grid, PlanOptions { limits }).map(|p| summarize_voxel(&p)),
            "octree" => {
                let mut graph = build_octree(&grid).map_err(|e| e.to_string())?;
                plan_octree(&mut grid, &mut graph, PlanOptions { limits }).map(|p| summarize_voxel(&p))
            }
            "tool" => {
                let mut graph = build_octree(&grid).map_err(|e| e.to_string())?;
                let tool = ToolModel::default_for(grid.edge_len);
                let options = ToolPlanOptions {
                    limits,
                    ..ToolPlanOptions::default()
                };
                plan_tool(&mut grid, &mut graph, &tool, options).map(|p| {
                    let path = p
                        .steps()
                        .map(|(_, s)| {
                            let c = cell_of(s.pose.tip, grid.edge_len);
                            json!([c[0], c[1], c[2], s.removes.is_some()])
                        })
                        .collect::<Vec<_>>();
                    Summary {
                        path,
                        expansions: p.metrics.expansions + p.metrics.inner_expansions,
                        unreachable: p.unreachable,
                    }
                })
            }
            other => return Err(format!("unknown tier {other:?}")),
        };
        match outcome {
            Ok(s) => Ok(json!({
                "tier": tier,
                "status": if s.unreachable.is_empty() { "complete" } else { "partial" },
                "expansions": s.expansions,
                "remove_total": remove_total,
                "unreachable": s.unreachable.iter().map(|v| v.to_array()).collect::<Vec<_>>(),
                "path": s.path,
            })),
            Err(PlanError::LimitHit { expansions }) => Ok(json!({
                "tier": tier,
                "status": "limit",
                "expansions": expansions,
                "remove_total": remove_total,
                "unreachable": [],
                "path": [],
            })),
            Err(e) => Err(e.to_string()),
        }
    }
}

struct Summary {
    path: Vec<Value>,
    expansions: u64,
    unreachable: Vec<GridIndex>,
}

fn summarize_voxel(plan: &VoxelPlan) -> Summary {
    let path = plan
        .paths
        .iter()
        .flat_map(|p| &p.waypoints)
        .map(|w| {
            let [x, y, z] = w.at.to_array();
            json!([x, y, z, w.removes])
        })
        .collect();
    Summary {
        path,
        expansions: plan.metrics.expansions,
        unreachable: plan.unreachable.clone(),
    }
}

fn state_code(s: VoxelState) -> u8 {
    match s {
        VoxelState::Keep => 0,
        VoxelState::Remove => 1,
        _ => 2,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_unknown_shape_and_large_dim() {
        assert!(Scene::build("teapot", 8).is_err());
        assert!(Scene::build("sphere", 64).is_err());
        assert!(Scene::build("sphere", 6).is_err());
    }

    #[test]
    fn states_follow_storage_order() {
        let s = Scene::build("sphere", 8).unwrap();
        let codes = s.states();
        assert_eq!(codes.len(), 512);
        for (k, c) in codes.iter().enumerate() {
            assert_eq!(*c, state_code(s.grid.get(s.grid.coords(k))));
        }
    }

    #[test]
    fn octree_leaves_tile_the_grid() {
        let s = Scene::build("sphere", 16).unwrap();
        let v = s.octree_json().unwrap();
        let volume: u64 = v["leaves"]
            .as_array()
            .unwrap()
            .iter()
            .map(|l| l[3].as_u64().unwrap().pow(3))
            .sum();
        assert_eq!(volume, 16 * 16 * 16);
        assert_eq!(v["blocks"].as_u64().unwrap() as usize, v["leaves"].as_array().unwrap().len());
    }

    #[test]
    fn plans_report_status_per_tier() {
        let s = Scene::build("sphere", 8).unwrap();
        let total = s.grid.remaining();
        for tier in ["voxel", "octree", "tool"] {
            let v = s.plan_json(tier, 1_000_000).unwrap();
            assert_eq!(v["status"], "complete", "{tier}");
            let cuts = v["path"].as_array().unwrap().iter().filter(|p| p[3] == true).count();
            assert_eq!(cuts, total, "{tier}");
        }
        let vase = Scene::build("vase", 16).unwrap();
        assert_eq!(vase.plan_json("tool", 1_000_000).unwrap()["status"], "partial");
        assert_eq!(s.plan_json("voxel", 3).unwrap()["status"], "limit");
        assert!(s.plan_json("laser", 10).is_err());
    }
}
