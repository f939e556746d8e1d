//! Subcommand implementations.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use serde_json::json;
use sculpt_core::geometry::{ToolModel, AXIS_DIRECTIONS};
use sculpt_core::grid::generate_shape;
use sculpt_core::io::{export_obj as obj_text, grid_to_json, load_grid, serialize_binvox};
use sculpt_core::octree::{build_octree, graph_stats};
use sculpt_core::plan::{parse_waypoint_csv, waypoint_csv, WAYPOINT_CSV_HEADER};
use sculpt_core::planner_octree::plan_octree;
use sculpt_core::planner_voxel::{plan_voxel, PlanOptions};
use sculpt_core::search::Limits;
use sculpt_core::tool_planner::{parse_trajectory_csv, plan_tool, trajectory_csv, ToolPlanOptions};
use sculpt_core::verify::{validate_tool_plan, validate_voxel_plan, ToolCheckOptions};
use sculpt_core::{GridError, GridIndex, PlanError, ShapeKind, ToolError, VoxelGrid, VoxelState};
use thiserror::Error;

use crate::{BenchArgs, PlanArgs, Tier, ToolArgs};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Outcome {
    Complete,
    Partial,
}

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error(transparent)]
    Grid(#[from] GridError),
    #[error(transparent)]
    Tool(#[from] ToolError),
    #[error("{0}")]
    Plan(PlanError),
    #[error("search limit reached after {expansions} expansions")]
    Limit { expansions: u64 },
    #[error("{0}")]
    Usage(String),
    #[error("bad state csv: {0}")]
    Csv(String),
    #[error("validator rejected the plan: {0}")]
    Invalid(String),
}

impl From<PlanError> for CliError {
    fn from(e: PlanError) -> Self {
        match e {
            PlanError::LimitHit { expansions } => CliError::Limit { expansions },
            other => CliError::Plan(other),
        }
    }
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Limit { .. } => 3,
            _ => 1,
        }
    }
}

fn read(path: &Path) -> Result<Vec<u8>, CliError> {
    fs::read(path).map_err(|source| CliError::Io {
        path: path.display().to_string(),
        source,
    })
}

fn write(path: &Path, bytes: impl AsRef<[u8]>) -> Result<(), CliError> {
    fs::write(path, bytes).map_err(|source| CliError::Io {
        path: path.display().to_string(),
        source,
    })
}

fn load(path: &Path) -> Result<VoxelGrid, CliError> {
    Ok(load_grid(&read(path)?)?)
}

pub fn gen(shape: ShapeKind, dim: u32, out: &Path) -> Result<Outcome, CliError> {
    let grid = generate_shape(shape, dim)?;
    match out.extension().and_then(|e| e.to_str()) {
        Some("binvox") => write(out, serialize_binvox(&grid))?,
        Some("json") => write(out, grid_to_json(&grid))?,
        _ => return Err(CliError::Usage(format!("{}: extension must be .binvox or .json", out.display()))),
    }
    let c = grid.counts();
    println!("wrote {} ({shape} {dim}^3: {} keep, {} remove)", out.display(), c.keep, c.remove);
    Ok(Outcome::Complete)
}

pub fn tool_model(args: &ToolArgs, edge: f64) -> Result<ToolModel, CliError> {
    let tool = ToolModel {
        tip_radius: args.tip_radius * edge,
        shaft_radius: args.shaft_radius * edge,
        shaft_length: args.shaft_length.map(|l| l * edge),
        approach_set: AXIS_DIRECTIONS.to_vec(),
    };
    tool.validate(edge)?;
    Ok(tool)
}

/// Tier-independent summary of one planning run.
pub struct RunResult {
    pub csv: String,
    pub expansions: u64,
    pub blocks: Option<usize>,
    pub wall_ms: f64,
    pub removed: usize,
    pub remove_total: usize,
    pub unreachable: Vec<GridIndex>,
    pub valid: Option<bool>,
}

impl RunResult {
    pub fn coverage(&self) -> f64 {
        if self.remove_total == 0 {
            1.0
        } else {
            self.removed as f64 / self.remove_total as f64
        }
    }
}

pub fn run_tier(
    tier: Tier,
    grid: &VoxelGrid,
    tool: &ToolModel,
    limits: Limits,
    validate: bool,
) -> Result<RunResult, CliError> {
    let mut work = grid.clone();
    let remove_total = grid.remaining();
    let result = match tier {
        Tier::Voxel => {
            let plan = plan_voxel(&mut work, PlanOptions { limits })?;
            RunResult {
                csv: waypoint_csv(&plan),
                expansions: plan.metrics.expansions,
                blocks: None,
                wall_ms: plan.metrics.wall_ms,
                removed: plan.removed_count(),
                remove_total,
                valid: validate.then(|| validate_voxel_plan(&plan, grid).pass),
                unreachable: plan.unreachable,
            }
        }
        Tier::Octree => {
            let mut graph = build_octree(&work)?;
            let blocks = graph.block_count();
            let plan = plan_octree(&mut work, &mut graph, PlanOptions { limits })?;
            RunResult {
                csv: waypoint_csv(&plan),
                expansions: plan.metrics.expansions,
                blocks: Some(blocks),
                wall_ms: plan.metrics.wall_ms,
                removed: plan.removed_count(),
                remove_total,
                valid: validate.then(|| validate_voxel_plan(&plan, grid).pass),
                unreachable: plan.unreachable,
            }
        }
        Tier::Tool => {
            let mut graph = build_octree(&work)?;
            let blocks = graph.block_count();
            let options = ToolPlanOptions {
                limits,
                ..Default::default()
            };
            let plan = plan_tool(&mut work, &mut graph, tool, options)?;
            let check = ToolCheckOptions::default();
            RunResult {
                csv: trajectory_csv(&plan),
                expansions: plan.metrics.expansions + plan.metrics.inner_expansions,
                blocks: Some(blocks),
                wall_ms: plan.metrics.wall_ms,
                removed: plan.steps().filter(|(_, s)| s.removes.is_some()).count(),
                remove_total,
                valid: validate.then(|| validate_tool_plan(&plan, grid, tool, check).pass),
                unreachable: plan.unreachable,
            }
        }
    };
    Ok(result)
}

pub fn plan(args: &PlanArgs) -> Result<Outcome, CliError> {
    let grid = load(&args.input)?;
    let tool = tool_model(&args.tool, grid.edge_len)?;
    let limits = Limits {
        max_expansions: args.limits.max_expansions,
        max_seconds: args.limits.max_seconds,
    };
    let r = run_tier(args.tier, &grid, &tool, limits, args.validate)?;
    if let Some(path) = &args.traj {
        write(path, &r.csv)?;
    }
    let mut report = json!({
        "tier": args.tier.name(),
        "dim": grid.dim(),
        "expansions": r.expansions,
        "blocks": r.blocks,
        "wall_ms": r.wall_ms,
        "coverage": r.coverage(),
        "removed": r.removed,
        "remove_total": r.remove_total,
        "unreachable": r.unreachable.iter().map(|i| [i.x, i.y, i.z]).collect::<Vec<_>>(),
    });
    if let Some(v) = r.valid {
        report["valid"] = json!(v);
    }
    if let Some(path) = &args.report {
        write(path, serde_json::to_string_pretty(&report).expect("report json"))?;
    }
    println!(
        "{} tier: {}/{} removed, {} unreachable, {} expansions, {:.1} ms",
        args.tier.name(),
        r.removed,
        r.remove_total,
        r.unreachable.len(),
        r.expansions,
        r.wall_ms
    );
    if r.valid == Some(false) {
        return Err(CliError::Invalid(format!("{} tier output failed replay", args.tier.name())));
    }
    Ok(if r.unreachable.is_empty() {
        Outcome::Complete
    } else {
        Outcome::Partial
    })
}

pub const BENCH_HEADER: &str = "tier,dim,voxel_count,block_count,reduction_pct,expansions,wall_ms,coverage";

pub fn bench(args: &BenchArgs) -> Result<Outcome, CliError> {
    let grids: Vec<VoxelGrid> = match (&args.input, args.shape) {
        (Some(path), _) => vec![load(path)?],
        (None, Some(shape)) => args
            .dims
            .iter()
            .map(|d| generate_shape(shape, *d))
            .collect::<Result<_, _>>()?,
        (None, None) => return Err(CliError::Usage("bench needs --shape or --input".into())),
    };
    let mut csv = String::from(BENCH_HEADER);
    csv.push('\n');
    println!("{BENCH_HEADER}");
    for grid in &grids {
        let stats = graph_stats(&build_octree(grid)?, grid);
        let tool = tool_model(&args.tool, grid.edge_len)?;
        for &tier in &args.tiers {
            let limits = Limits {
                max_expansions: args.max_expansions,
                max_seconds: Some(args.max_seconds),
            };
            let clock = std::time::Instant::now();
            let (expansions, wall_ms, coverage) = match run_tier(tier, grid, &tool, limits, false) {
                Ok(r) => (r.expansions.to_string(), r.wall_ms, format!("{:.6}", r.coverage())),
                Err(CliError::Limit { expansions }) => (
                    expansions.to_string(),
                    clock.elapsed().as_secs_f64() * 1e3,
                    "timeout".to_string(),
                ),
                Err(e) => {
                    eprintln!("{} at {}: {e}", tier.name(), grid.dim());
                    (String::new(), clock.elapsed().as_secs_f64() * 1e3, "error".to_string())
                }
            };
            let row = format!(
                "{},{},{},{},{:.3},{expansions},{wall_ms:.1},{coverage}",
                tier.name(),
                grid.dim(),
                stats.voxel_count,
                stats.block_count,
                stats.reduction_percent,
            );
            println!("{row}");
            writeln!(csv, "{row}").expect("string write");
        }
    }
    write(&args.csv, csv)?;
    Ok(Outcome::Complete)
}

/// Applies the removals listed in a trajectory or waypoint CSV.
fn apply_state(grid: &mut VoxelGrid, text: &str) -> Result<usize, CliError> {
    let header = text.lines().next().unwrap_or_default().trim();
    let removed: Vec<GridIndex> = if header == WAYPOINT_CSV_HEADER {
        parse_waypoint_csv(text)
            .map_err(CliError::Csv)?
            .into_iter()
            .filter(|(_, w)| w.removes)
            .map(|(_, w)| w.at)
            .collect()
    } else {
        parse_trajectory_csv(text)
            .map_err(CliError::Csv)?
            .into_iter()
            .filter_map(|(_, s)| s.removes)
            .collect()
    };
    for &i in &removed {
        if !grid.contains(i) || grid.get(i) != VoxelState::Remove {
            return Err(CliError::Csv(format!("removal of {i} which is not Remove")));
        }
        grid.free_voxel(i)?;
    }
    Ok(removed.len())
}

pub fn export_obj(input: &Path, state: Option<&Path>, out: &Path, include_remove: bool) -> Result<Outcome, CliError> {
    let mut grid = load(input)?;
    let applied = match state {
        Some(p) => {
            let bytes = read(p)?;
            let text = String::from_utf8(bytes).map_err(|e| CliError::Csv(e.to_string()))?;
            apply_state(&mut grid, &text)?
        }
        None => 0,
    };
    let (text, stats) = obj_text(&grid, include_remove);
    write(out, text)?;
    println!(
        "wrote {} ({} vertices, {} faces, {applied} removals applied)",
        out.display(),
        stats.vertices,
        stats.faces
    );
    Ok(Outcome::Complete)
}
