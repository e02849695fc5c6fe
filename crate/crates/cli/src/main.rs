//! `cagewarp` command-line front end.

mod commands;
mod manifest;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Debug, Parser)]
#[command(
    name = "cagewarp",
    version,
    about = "Cage-based shape deformation with mean value coordinates"
)]
pub struct Cli {
    #[command(flatten)]
    pub global: GlobalArgs,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct GlobalArgs {
    /// JSON configuration file.
    #[arg(long, global = true, value_name = "PATH")]
    pub config: Option<PathBuf>,
    /// Seed for every random choice; overrides the config value (default 0).
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Worker threads (default: all available cores; 1 runs serially).
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    /// Output directory, created if missing.
    #[arg(long, global = true, value_name = "DIR", default_value = "out")]
    pub out: PathBuf,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Write a template cage fitted to a mesh's bounding box.
    MakeCage {
        #[arg(long)]
        mesh: PathBuf,
        #[arg(long, value_enum)]
        template: Option<Template>,
        /// Cage half-extent relative to the bounding-box half-extent.
        #[arg(long)]
        scale: Option<f64>,
    },
    /// Mean value coordinates of points with respect to a cage.
    ComputeMvc {
        #[arg(long)]
        cage: PathBuf,
        /// OBJ mesh or `x,y,z` CSV.
        #[arg(long)]
        points: PathBuf,
        #[arg(long, value_enum, default_value = "csv")]
        format: MatrixFormat,
    },
    /// Deform a source mesh towards a target by optimising a cage.
    Deform {
        #[arg(long)]
        source: PathBuf,
        #[arg(long)]
        target: PathBuf,
        /// Use the meshes as given instead of mapping each to the unit box.
        #[arg(long)]
        no_normalize: bool,
    },
    /// Fit a template cage to a novel shape through landmark coordinates.
    FitCage {
        /// Cage OBJ around the source shape.
        #[arg(long)]
        template: PathBuf,
        #[arg(long)]
        source: PathBuf,
        #[arg(long)]
        novel: PathBuf,
        /// CSV `src_index,dst_index`; identity pairs when omitted.
        #[arg(long)]
        landmarks: Option<PathBuf>,
    },
    /// Apply stored cage offsets to a fitted cage and deform a novel shape.
    Transfer {
        #[arg(long)]
        cage: PathBuf,
        /// CSV `dx,dy,dz` per cage vertex.
        #[arg(long)]
        offsets: PathBuf,
        #[arg(long)]
        novel: PathBuf,
    },
    /// Chamfer and cotangent-Laplacian metrics of a deformation.
    Eval {
        #[arg(long)]
        deformed: PathBuf,
        #[arg(long)]
        target: PathBuf,
        #[arg(long)]
        source: PathBuf,
        #[arg(long, default_value_t = cagewarp::losses::EVAL_SAMPLES)]
        samples: usize,
    },
    /// Finite-difference check of the analytic gradients.
    Gradcheck {
        /// Operation name, or `all`.
        #[arg(long, default_value = "all")]
        op: String,
        #[arg(long, default_value_t = 10)]
        n_configs: usize,
        /// Queries placed on cage vertices and faces per instance.
        #[arg(long, default_value_t = 0)]
        near_branch: usize,
    },
    /// Train the offset predictor on a synthetic axis-scale family.
    TrainToy {
        #[arg(long, value_enum, default_value = "ellipsoid")]
        shape: Shape,
        #[arg(long)]
        epochs: Option<usize>,
        /// Held-out descriptors for the evaluation section of the report.
        #[arg(long, default_value_t = 20)]
        holdout: usize,
    },
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum Template {
    Sphere42,
    Sphere162,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum MatrixFormat {
    Csv,
    Bin,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum Shape {
    Ellipsoid,
    Box,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = std::env::var("CAGEWARP_LOG").unwrap_or_else(|_| "error".into());
    env_logger::Builder::new()
        .parse_filters(&level)
        .format_timestamp(None)
        .init();

    if let Some(n) = cli.global.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new()
            .num_threads(n.max(1))
            .build_global()
        {
            eprintln!("error: cannot configure thread pool: {e}");
            return ExitCode::FAILURE;
        }
    }
    match commands::run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let msg = format!("{e:#}").replace('\n', " ");
            eprintln!("error: {msg}");
            ExitCode::FAILURE
        }
    }
}
