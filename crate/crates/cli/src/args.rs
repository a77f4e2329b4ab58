use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Debug, Parser)]
#[command(
    name = "tmax",
    version,
    about = "Space-time model for daily maximum temperatures"
)]
pub struct Cli {
    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    pub jobs: Option<usize>,

    /// More log output on stderr; repeat for debug.
    #[arg(short, long, action = clap::ArgAction::Count, global = true)]
    pub verbose: u8,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Fit the model and write draws, fit record and posterior summary.
    Fit(FitArgs),
    /// Posterior predictive series at a new location.
    Predict(PredictArgs),
    /// Predictive replicates for the missing days of a station.
    Impute(ImputeArgs),
    /// Leave-one-site-out comparison of model variants.
    Loocv(LoocvArgs),
    /// R-hat, effective sample sizes and acceptance rates of a fit.
    Diagnose(DiagnoseArgs),
    /// Simulate a synthetic panel.
    Simulate(SimulateArgs),
    /// Fit the single-station model.
    LocalFit(LocalFitArgs),
    /// Change in mean and spread between two year windows.
    ChangeSummary(ChangeArgs),
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum SiteFormatArg {
    /// `id,x_km,y_km,elev_m`
    Planar,
    /// `id,lon,lat,elev_m`
    Lonlat,
}

/// Input panel and run settings shared by the fitting commands.
#[derive(Debug, Args)]
pub struct DataArgs {
    /// Run configuration (TOML).
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub sites: Option<PathBuf>,
    #[arg(long)]
    pub observations: Option<PathBuf>,
    #[arg(long, value_enum)]
    pub site_format: Option<SiteFormatArg>,
}

/// Chain settings that override the configuration file.
#[derive(Debug, Args)]
pub struct ChainArgs {
    #[arg(long)]
    pub chains: Option<usize>,
    #[arg(long)]
    pub iterations: Option<usize>,
    #[arg(long)]
    pub burn_in: Option<usize>,
    #[arg(long)]
    pub thin: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
}

#[derive(Debug, Args)]
pub struct FitArgs {
    #[command(flatten)]
    pub data: DataArgs,
    #[command(flatten)]
    pub chain: ChainArgs,
    /// `M0`, `M4` or e.g. `M2:beta0,sigma`.
    #[arg(long)]
    pub variant: Option<String>,
    /// Output directory.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

/// Predictive sampling settings.
#[derive(Debug, Args)]
pub struct SampleArgs {
    /// Replicates (default: one per posterior draw).
    #[arg(long)]
    pub replicates: Option<usize>,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    /// Per-cell summary CSV (default: stdout).
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Also write every replicate, long format.
    #[arg(long)]
    pub replicates_out: Option<PathBuf>,
}

/// A location to predict at, in the planar coordinates of the fit.
#[derive(Debug, Args)]
pub struct LocationArgs {
    #[arg(long, allow_hyphen_values = true)]
    pub site_x: f64,
    #[arg(long, allow_hyphen_values = true)]
    pub site_y: f64,
    #[arg(long, allow_hyphen_values = true)]
    pub elev: f64,
    #[arg(long, default_value = "new")]
    pub site_id: String,
}

#[derive(Debug, Args)]
pub struct PredictArgs {
    /// Directory written by `fit`.
    #[arg(long)]
    pub fit: PathBuf,
    #[command(flatten)]
    pub location: LocationArgs,
    /// Calendar years to predict (default: every fitted year).
    #[arg(long, num_args = 1..)]
    pub year: Vec<i32>,
    /// Last day of the window to predict, 1-based (default: the whole window).
    #[arg(long)]
    pub through_day: Option<usize>,
    /// Day-1 values, one per predicted year; otherwise kriged from the panel.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    pub day1: Vec<f64>,
    #[command(flatten)]
    pub data: DataArgs,
    #[command(flatten)]
    pub sample: SampleArgs,
}

#[derive(Debug, Args)]
pub struct ImputeArgs {
    #[arg(long)]
    pub fit: PathBuf,
    #[arg(long)]
    pub site_id: String,
    #[command(flatten)]
    pub data: DataArgs,
    #[command(flatten)]
    pub sample: SampleArgs,
}

#[derive(Debug, Args)]
pub struct LoocvArgs {
    #[command(flatten)]
    pub data: DataArgs,
    #[command(flatten)]
    pub chain: ChainArgs,
    /// Variants to compare, e.g. `M0 M1:beta0 M4`.
    #[arg(long, num_args = 1.., conflicts_with = "lattice")]
    pub variants: Vec<String>,
    /// Compare the nine variants of the standard lattice.
    #[arg(long)]
    pub lattice: bool,
    #[arg(long)]
    pub replicates: Option<usize>,
    /// Metrics CSV (default: stdout).
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Full table with per-fold errors as JSON.
    #[arg(long)]
    pub json: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct DiagnoseArgs {
    #[arg(long)]
    pub fit: PathBuf,
    /// JSON report (default: stdout).
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Trace CSV of every monitored parameter.
    #[arg(long)]
    pub trace: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    /// Generator specification (TOML); defaults to a 10-site grid.
    #[arg(long)]
    pub spec: Option<PathBuf>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct LocalFitArgs {
    #[command(flatten)]
    pub data: DataArgs,
    #[command(flatten)]
    pub chain: ChainArgs,
    /// Station to fit (default: every complete station).
    #[arg(long)]
    pub site_id: Option<String>,
    /// Summary CSV (default: stdout).
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Compare interval overlap with a full fit in this directory.
    #[arg(long)]
    pub compare: Option<PathBuf>,
    /// Overlap CSV for `--compare` (default: stderr log only).
    #[arg(long, requires = "compare")]
    pub overlap_out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ChangeArgs {
    #[command(flatten)]
    pub data: DataArgs,
    /// First window, e.g. `1956-1985`.
    #[arg(long)]
    pub window1: String,
    #[arg(long)]
    pub window2: String,
    /// Summarize predictive replicates of a fit at a location instead of
    /// the observed series.
    #[arg(long, requires_all = ["site_x", "site_y", "elev"])]
    pub fit: Option<PathBuf>,
    #[arg(long, allow_hyphen_values = true)]
    pub site_x: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    pub site_y: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    pub elev: Option<f64>,
    #[arg(long)]
    pub replicates: Option<usize>,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    #[arg(long)]
    pub out: Option<PathBuf>,
}
