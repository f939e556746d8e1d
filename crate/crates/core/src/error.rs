use thiserror::Error;

use crate::grid::GridIndex;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GridError {
    #[error("malformed binvox data: {0}")]
    Parse(String),
    #[error("run-length data decodes to {found} voxels, expected {expected}")]
    LengthMismatch { expected: usize, found: usize },
    #[error("invalid voxel value byte {0} (expected 0 or 1)")]
    InvalidValue(u8),
    #[error("grid dimension {0} is not a power of two >= 1")]
    Dimension(u32),
    #[error("component has no voxels")]
    EmptyComponent,
    #[error("state transition not allowed at {index:?}: {from} -> {to}")]
    Transition {
        index: GridIndex,
        from: char,
        to: char,
    },
    #[error("invalid grid json: {0}")]
    Json(String),
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ToolError {
    #[error("tip diameter {diameter} must be smaller than the voxel edge {edge}")]
    TipTooLarge { diameter: f64, edge: f64 },
    #[error("shaft radius {shaft} exceeds tip radius {tip}")]
    ShaftTooWide { shaft: f64, tip: f64 },
    #[error("approach direction {0:?} is not a unit vector")]
    NonUnitApproach([f64; 3]),
    #[error("approach set is empty")]
    EmptyApproachSet,
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PlanError {
    #[error(transparent)]
    Grid(#[from] GridError),
    #[error(transparent)]
    Tool(#[from] ToolError),
    #[error("grid contains no material to remove")]
    NothingToRemove,
    #[error("search limit reached after {expansions} expansions")]
    LimitHit { expansions: u64 },
    #[error("no free path between {from:?} and {to:?}")]
    NoFreePath { from: GridIndex, to: GridIndex },
}
