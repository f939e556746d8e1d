//! Plan types shared by the translating-robot planners.

use serde::Serialize;

use crate::grid::GridIndex;
use crate::octree::BlockId;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct Waypoint {
    pub at: GridIndex,
    /// The robot removes material on arrival.
    pub removes: bool,
    /// Block being cleared, for octree plans.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub block: Option<BlockId>,
}

impl Waypoint {
    pub fn travel(at: GridIndex) -> Self {
        Self {
            at,
            removes: false,
            block: None,
        }
    }

    pub fn cut(at: GridIndex) -> Self {
        Self {
            at,
            removes: true,
            block: None,
        }
    }
}

/// Contiguous path for one component. Consecutive waypoints are unit steps.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ComponentPath {
    pub component: usize,
    pub waypoints: Vec<Waypoint>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct PlanMetrics {
    pub expansions: u64,
    pub peak_frontier: usize,
    pub rejected: u64,
    pub wall_ms: f64,
    /// Live octree blocks at the end of planning (octree tiers only).
    #[serde(skip_serializing_if = "Option::is_none")]
    pub blocks: Option<usize>,
    /// Blocks subdivided during planning (octree tiers only).
    pub splits: usize,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct VoxelPlan {
    pub paths: Vec<ComponentPath>,
    /// Components that could not be covered.
    pub unreachable_components: Vec<usize>,
    /// Remove voxels left uncovered, sorted.
    pub unreachable: Vec<GridIndex>,
    pub metrics: PlanMetrics,
}

impl VoxelPlan {
    pub fn waypoint_count(&self) -> usize {
        self.paths.iter().map(|p| p.waypoints.len()).sum()
    }

    pub fn removed_count(&self) -> usize {
        self.paths
            .iter()
            .flat_map(|p| &p.waypoints)
            .filter(|w| w.removes)
            .count()
    }

    pub fn is_complete(&self) -> bool {
        self.unreachable.is_empty()
    }
}

pub const WAYPOINT_CSV_HEADER: &str = "step,component,block_id,x,y,z,removes";

/// One row per waypoint; `block_id` is empty for voxel-level plans.
pub fn waypoint_csv(plan: &VoxelPlan) -> String {
    let mut out = String::from(WAYPOINT_CSV_HEADER);
    out.push('\n');
    let mut step = 0;
    for path in &plan.paths {
        for w in &path.waypoints {
            let block = w.block.map(|b| b.to_string()).unwrap_or_default();
            out.push_str(&format!(
                "{step},{},{block},{},{},{},{}\n",
                path.component,
                w.at.x,
                w.at.y,
                w.at.z,
                u8::from(w.removes)
            ));
            step += 1;
        }
    }
    out
}

/// Parses [`waypoint_csv`] output back into `(component, waypoint)` rows.
pub fn parse_waypoint_csv(text: &str) -> Result<Vec<(usize, Waypoint)>, String> {
    let mut lines = text.lines();
    match lines.next() {
        Some(h) if h.trim() == WAYPOINT_CSV_HEADER => {}
        other => return Err(format!("unexpected header {other:?}")),
    }
    let mut out = Vec::new();
    for (k, line) in lines.enumerate().filter(|(_, l)| !l.trim().is_empty()) {
        let f: Vec<&str> = line.split(',').collect();
        if f.len() != 7 {
            return Err(format!("row {k}: expected 7 fields, found {}", f.len()));
        }
        let num = |s: &str| s.trim().parse::<u32>().map_err(|e| format!("row {k}: {e}"));
        let block = match f[2].trim() {
            "" => None,
            b => Some(num(b)?),
        };
        let removes = match f[6].trim() {
            "0" => false,
            "1" => true,
            r => return Err(format!("row {k}: bad removes flag {r:?}")),
        };
        out.push((
            num(f[1])? as usize,
            Waypoint {
                at: GridIndex::new(num(f[3])?, num(f[4])?, num(f[5])?),
                removes,
                block,
            },
        ));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn waypoint_csv_round_trip() {
        let plan = VoxelPlan {
            paths: vec![ComponentPath {
                component: 2,
                waypoints: vec![
                    Waypoint::travel(GridIndex::new(0, 0, 0)),
                    Waypoint {
                        at: GridIndex::new(1, 0, 0),
                        removes: true,
                        block: Some(7),
                    },
                ],
            }],
            ..Default::default()
        };
        let rows = parse_waypoint_csv(&waypoint_csv(&plan)).unwrap();
        let back: Vec<Waypoint> = rows.iter().map(|r| r.1).collect();
        assert_eq!(back, plan.paths[0].waypoints);
        assert!(rows.iter().all(|r| r.0 == 2));
    }

    #[test]
    fn waypoint_csv_rejects_bad_rows() {
        assert!(parse_waypoint_csv("nope\n").is_err());
        let bad = format!("{WAYPOINT_CSV_HEADER}\n0,0,,1,2,3,yes\n");
        assert!(parse_waypoint_csv(&bad).is_err());
    }
}
