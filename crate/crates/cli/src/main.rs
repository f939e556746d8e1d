//! `sculpt` command-line entry point.
//!
//! Exit codes: 0 full coverage or success, 1 error, 2 partial coverage,
//! 3 search limit reached.

mod commands;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use sculpt_core::ShapeKind;

use commands::{CliError, Outcome};

#[derive(Debug, Parser)]
#[command(name = "sculpt", version, about = "Plan material removal over voxel grids")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Write a generated test shape as .binvox or .json.
    Gen {
        /// Shape name: sphere, vase, hollow_box, dead_end or solid.
        #[arg(long)]
        shape: ShapeKind,
        /// Grid side length, a power of two.
        #[arg(long)]
        dim: u32,
        /// Output path; the extension selects the format.
        #[arg(long)]
        out: PathBuf,
    },
    /// Plan one grid with one tier.
    Plan(PlanArgs),
    /// Run a tier by dimension matrix and write a CSV.
    Bench(BenchArgs),
    /// Export Keep (and optionally Remove) voxels as an OBJ mesh.
    ExportObj {
        /// Grid file (.binvox or .json).
        #[arg(long)]
        input: PathBuf,
        /// Trajectory or waypoint CSV whose removals are applied first.
        #[arg(long)]
        state: Option<PathBuf>,
        /// OBJ output path.
        #[arg(long)]
        out: PathBuf,
        /// Also mesh Remove voxels.
        #[arg(long)]
        include_remove: bool,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Tier {
    Voxel,
    Octree,
    Tool,
}

impl Tier {
    pub fn name(self) -> &'static str {
        match self {
            Tier::Voxel => "voxel",
            Tier::Octree => "octree",
            Tier::Tool => "tool",
        }
    }
}

/// Tool geometry in units of the voxel edge.
#[derive(Debug, Clone, Args)]
pub struct ToolArgs {
    /// Ball tip radius.
    #[arg(long, default_value_t = 0.45)]
    pub tip_radius: f64,
    /// Shaft radius, at most the tip radius.
    #[arg(long, default_value_t = 0.40)]
    pub shaft_radius: f64,
    /// Shaft length; unbounded when omitted.
    #[arg(long)]
    pub shaft_length: Option<f64>,
}

#[derive(Debug, Clone, Args)]
pub struct LimitArgs {
    /// Stop after this many search expansions (exit code 3).
    #[arg(long)]
    pub max_expansions: Option<u64>,
    /// Stop after this many seconds (exit code 3).
    #[arg(long)]
    pub max_seconds: Option<f64>,
}

#[derive(Debug, Args)]
pub struct PlanArgs {
    /// Grid file (.binvox or .json).
    #[arg(long)]
    pub input: PathBuf,
    /// Planner tier.
    #[arg(long, value_enum)]
    pub tier: Tier,
    /// Trajectory CSV output.
    #[arg(long)]
    pub traj: Option<PathBuf>,
    /// JSON report output.
    #[arg(long)]
    pub report: Option<PathBuf>,
    /// Replay the plan through the independent validator.
    #[arg(long)]
    pub validate: bool,
    #[command(flatten)]
    pub tool: ToolArgs,
    #[command(flatten)]
    pub limits: LimitArgs,
}

#[derive(Debug, Args)]
pub struct BenchArgs {
    /// Generated shape, planned at every `--dims` entry.
    #[arg(long, conflicts_with = "input")]
    pub shape: Option<ShapeKind>,
    /// A fixed grid; `--dims` is ignored.
    #[arg(long)]
    pub input: Option<PathBuf>,
    #[arg(long, value_enum, value_delimiter = ',', default_value = "voxel,octree")]
    pub tiers: Vec<Tier>,
    #[arg(long, value_delimiter = ',', default_value = "8,16,32")]
    pub dims: Vec<u32>,
    /// CSV output.
    #[arg(long)]
    pub csv: PathBuf,
    /// Per-cell wall-clock budget in seconds.
    #[arg(long, default_value_t = 60.0)]
    pub max_seconds: f64,
    /// Per-cell expansion budget.
    #[arg(long)]
    pub max_expansions: Option<u64>,
    #[command(flatten)]
    pub tool: ToolArgs,
}

fn run(cli: Cli) -> Result<Outcome, CliError> {
    match cli.command {
        Command::Gen { shape, dim, out } => commands::gen(shape, dim, &out),
        Command::Plan(args) => commands::plan(&args),
        Command::Bench(args) => commands::bench(&args),
        Command::ExportObj {
            input,
            state,
            out,
            include_remove,
        } => commands::export_obj(&input, state.as_deref(), &out, include_remove),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(Outcome::Complete) => ExitCode::SUCCESS,
        Ok(Outcome::Partial) => ExitCode::from(2),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
