//! Planning engine for robotic sculpting: voxel grids, pruned octrees,
//! greedy best-first search, coverage planners for a translating robot and a
//! ball-end tool, and an independent plan validator.

pub mod clock;
pub mod error;
pub mod geometry;
pub mod grid;
pub mod io;
pub mod octree;
pub mod plan;
pub mod planner_octree;
pub mod planner_voxel;
pub mod search;
pub mod tool_planner;
pub mod verify;

pub use error::{GridError, PlanError, ToolError};
pub use grid::{Face, GridIndex, ShapeKind, VoxelGrid, VoxelState};
pub use plan::{ComponentPath, PlanMetrics, VoxelPlan, Waypoint};
