//! `rtmsim` command line: single-phantom simulation, cohort generation,
//! classifier evaluation and mesh inspection, driven by one TOML config.

pub mod commands;
pub mod config;
pub mod error;
pub mod output;

use std::io::Write;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use rtmsim_core::cohort::Group;
use rtmsim_core::radiometry::Backend;
use rtmsim_learn::Algorithm;

pub use config::{GeneratorKind, RunConfig, CONFIG_ENV};
pub use error::CliError;

#[derive(Debug, Parser)]
#[command(name = "rtmsim", version, about = "Breast thermometry simulation and classifier evaluation")]
pub struct Cli {
    /// TOML run configuration.
    #[arg(long, global = true, env = CONFIG_ENV)]
    pub config: Option<PathBuf>,
    /// Output directory (overrides `output_dir`).
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Global seed (overrides `seed`).
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Worker threads; 0 uses every core.
    #[arg(long, global = true, default_value_t = 0)]
    pub jobs: usize,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Simulate one phantom and write its fields and 18 features.
    Simulate(SimulateArgs),
    /// Simulate the model cohort and the surrogate original cohort.
    Generate(GenerateArgs),
    /// Train and score every classifier on every group split.
    Evaluate(EvaluateArgs),
    /// Mesh the configured phantom and report its statistics.
    MeshInfo(MeshInfoArgs),
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    /// Place a tumor under this measurement point (0..=8).
    #[arg(long)]
    pub tumor_point: Option<usize>,
    /// Tumor radius in metres; implies a tumor.
    #[arg(long)]
    pub tumor_radius: Option<f64>,
    /// Tumor centre depth below the skin in metres.
    #[arg(long)]
    pub tumor_depth: Option<f64>,
    /// Remove any tumor set in the config.
    #[arg(long, conflicts_with_all = ["tumor_point", "tumor_radius"])]
    pub healthy: bool,
    #[arg(long)]
    pub backend: Option<Backend>,
    #[arg(long)]
    pub mesh_edge: Option<f64>,
}

#[derive(Debug, Args)]
pub struct GenerateArgs {
    #[arg(long)]
    pub n_healthy: Option<usize>,
    #[arg(long)]
    pub n_cancer: Option<usize>,
    #[arg(long)]
    pub n_original_healthy: Option<usize>,
    #[arg(long)]
    pub n_original_cancer: Option<usize>,
    #[arg(long)]
    pub generator: Option<GeneratorKind>,
    #[arg(long)]
    pub mesh_edge: Option<f64>,
}

#[derive(Debug, Args)]
pub struct EvaluateArgs {
    /// Model cohort CSV (default `<out>/model.csv`).
    #[arg(long)]
    pub model: Option<PathBuf>,
    /// Original cohort CSV (default `<out>/original_surrogate.csv`).
    #[arg(long)]
    pub original: Option<PathBuf>,
    #[arg(long)]
    pub repeats: Option<usize>,
    /// Comma-separated classifier keys, e.g. `logistic_regression,svm`.
    #[arg(long, value_delimiter = ',')]
    pub classifiers: Option<Vec<Algorithm>>,
    /// Comma-separated groups, e.g. `C,D`.
    #[arg(long, value_delimiter = ',')]
    pub groups: Option<Vec<Group>>,
}

#[derive(Debug, Args)]
pub struct MeshInfoArgs {
    #[arg(long)]
    pub mesh_edge: Option<f64>,
    /// Also write the mesh with its tissue tags as legacy VTK.
    #[arg(long)]
    pub vtk: Option<PathBuf>,
}

/// Loads the config, applies global overrides and runs the command on a
/// pool of `--jobs` threads. Human-readable output goes to `out`.
pub fn run(cli: Cli, out: &mut (dyn Write + Send)) -> Result<(), CliError> {
    let mut cfg = RunConfig::resolve(cli.config.as_deref())?;
    if let Some(dir) = cli.out {
        cfg.output_dir = dir;
    }
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cli.jobs)
        .build()
        .map_err(|e| CliError::Usage(e.to_string()))?;
    pool.install(|| match cli.command {
        Command::Simulate(a) => commands::simulate(cfg, &a, out),
        Command::Generate(a) => commands::generate(cfg, &a, out),
        Command::Evaluate(a) => commands::evaluate(cfg, &a, out),
        Command::MeshInfo(a) => commands::mesh_info(cfg, &a, out),
    })
}
