use std::path::PathBuf;

use aftstab::simgen::CensoringScale;
use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Debug, Parser)]
#[command(
    name = "aftstab",
    version,
    about = "Penalized AFT regression with stability selection for censored survival data"
)]
pub struct Cli {
    /// Worker threads for data-parallel work (default: all cores).
    #[arg(long, global = true)]
    pub threads: Option<usize>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Simulate a censored AFT dataset and write it as CSV plus a JSON manifest.
    Simulate(SimulateArgs),
    /// Fit one penalized model at a fixed or cross-validated penalty.
    Fit(FitArgs),
    /// Estimate selection probabilities over a penalty grid by subsampling.
    Stabsel(StabselArgs),
    /// Run the simulation benchmark described by a JSON config.
    Benchmark(BenchmarkArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ScaleArg {
    Time,
    LogTime,
}

impl From<ScaleArg> for CensoringScale {
    fn from(s: ScaleArg) -> Self {
        match s {
            ScaleArg::Time => CensoringScale::Time,
            ScaleArg::LogTime => CensoringScale::LogTime,
        }
    }
}

#[derive(Debug, Clone, Args)]
pub struct SimulateArgs {
    #[arg(long)]
    pub n: usize,
    #[arg(long)]
    pub p: usize,
    /// Number of leading covariates with nonzero coefficients.
    #[arg(long)]
    pub q: usize,
    /// Value of every nonzero coefficient.
    #[arg(long, default_value_t = 5.0)]
    pub beta: f64,
    #[arg(long, default_value_t = 0.0)]
    pub beta0: f64,
    #[arg(long, default_value_t = 1.0)]
    pub sigma: f64,
    /// Pairwise covariate correlation.
    #[arg(long, default_value_t = 0.0)]
    pub r: f64,
    /// Target censoring proportion, used to calibrate the censoring bound.
    #[arg(long, default_value_t = 0.3)]
    pub censoring: f64,
    #[arg(long, value_enum, default_value_t = ScaleArg::Time)]
    pub censoring_scale: ScaleArg,
    /// Fixed upper bound of the censoring distribution (skips calibration).
    #[arg(long)]
    pub c_max: Option<f64>,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    /// Output CSV path.
    #[arg(long)]
    pub out: PathBuf,
    /// Manifest path (default: next to the CSV with a `.manifest.json` extension).
    #[arg(long)]
    pub manifest: Option<PathBuf>,
}

#[derive(Debug, Clone, Default, Args)]
pub struct SchemaArgs {
    /// Survival time column (default: `time`).
    #[arg(long)]
    pub time_col: Option<String>,
    /// Event indicator column, 1 = event, 0 = censored (default: `status`, then `event`).
    #[arg(long)]
    pub status_col: Option<String>,
    /// Comma-separated covariate columns (default: every other column).
    #[arg(long)]
    pub covariates: Option<String>,
    /// Categorical column coded by level order, as `COLUMN:LEVEL1,LEVEL2,...`. Repeatable.
    #[arg(long)]
    pub categorical: Vec<String>,
}

#[derive(Debug, Clone, Args)]
pub struct FitArgs {
    #[arg(long)]
    pub data: PathBuf,
    /// lasso, ridge or enet.
    #[arg(long, default_value = "lasso")]
    pub method: String,
    #[arg(long)]
    pub lambda1: Option<f64>,
    #[arg(long)]
    pub lambda2: Option<f64>,
    /// Choose the penalty by K-fold cross-validation over the grid.
    #[arg(long)]
    pub cv: bool,
    #[arg(long, default_value_t = 5)]
    pub folds: usize,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    #[arg(long, default_value_t = 50)]
    pub grid_count: usize,
    #[arg(long, default_value_t = 0.01)]
    pub grid_ratio: f64,
    /// Elastic-net λ2 as a fraction of λ_max when cross-validating.
    #[arg(long, default_value_t = 0.01)]
    pub enet_l2_ratio: f64,
    /// Ridge selection threshold on |β|.
    #[arg(long, default_value_t = 1.0)]
    pub tau: f64,
    /// Report path (default: stdout).
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[command(flatten)]
    pub schema: SchemaArgs,
}

#[derive(Debug, Clone, Args)]
pub struct StabselArgs {
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long, default_value = "lasso")]
    pub method: String,
    /// Number of half-size subsamples.
    #[arg(long = "subsamples", visible_alias = "B", default_value_t = 100)]
    pub subsamples: usize,
    #[arg(long, default_value_t = 0.6)]
    pub threshold: f64,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    #[arg(long, default_value_t = 50)]
    pub grid_count: usize,
    #[arg(long, default_value_t = 0.01)]
    pub grid_ratio: f64,
    /// Use the whole grid instead of stopping at the cross-validated penalty.
    #[arg(long)]
    pub full_grid: bool,
    #[arg(long, default_value_t = 5)]
    pub folds: usize,
    #[arg(long, default_value_t = 0.01)]
    pub enet_l2_ratio: f64,
    #[arg(long, default_value_t = 1.0)]
    pub tau: f64,
    /// JSON report path (default: stdout).
    #[arg(long)]
    pub report: Option<PathBuf>,
    /// Long-format CSV of probabilities per variable and grid point.
    #[arg(long)]
    pub table: Option<PathBuf>,
    #[command(flatten)]
    pub schema: SchemaArgs,
}

#[derive(Debug, Clone, Args)]
pub struct BenchmarkArgs {
    /// JSON benchmark config.
    #[arg(long)]
    pub config: PathBuf,
    /// Output directory (overrides `output_dir` in the config).
    #[arg(long)]
    pub out_dir: Option<PathBuf>,
}
