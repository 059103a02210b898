use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use egreg_core::estimators::Method;
use egreg_core::matrix::Scaling;

#[derive(Debug, Parser)]
#[command(name = "egreg", version, about = "Envelope-guided regularization and principal-component regression")]
pub struct Cli {
    /// Worker threads for replications and CV (default: all cores).
    #[arg(long, global = true, env = "EGREG_THREADS")]
    pub threads: Option<usize>,

    /// Where to write the run manifest (default: next to the main output).
    #[arg(long, global = true)]
    pub manifest: Option<PathBuf>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Fit one model and save it as JSON.
    Fit(FitArgs),
    /// Predict responses for new predictors with a saved model.
    Predict(PredictArgs),
    /// Tune a method by k-fold cross-validation.
    Cv(CvArgs),
    /// Test-set prediction error relative to a SIMPLS model.
    EvaluateRpe(RpeArgs),
    /// Limiting NIECE and EgReg risks over a grid of aspect ratios.
    Theory(TheoryArgs),
    /// Run a simulation study described by a TOML file.
    Simulate(SimulateArgs),
}

#[derive(Clone, Copy, Debug, ValueEnum)]
pub enum ScalingArg {
    Center,
    Standardize,
}

impl From<ScalingArg> for Scaling {
    fn from(s: ScalingArg) -> Self {
        match s {
            ScalingArg::Center => Scaling::Center,
            ScalingArg::Standardize => Scaling::Standardize,
        }
    }
}

#[derive(Debug, Args)]
pub struct DataArgs {
    /// Training CSV with a header row.
    #[arg(long)]
    pub data: PathBuf,

    /// Response column names (comma separated or repeated).
    #[arg(long, value_delimiter = ',', required = true)]
    pub response: Vec<String>,

    /// Predictor column names (default: every non-response column).
    #[arg(long, value_delimiter = ',')]
    pub predictors: Vec<String>,

    #[arg(long, value_enum, default_value = "center")]
    pub scaling: ScalingArg,
}

#[derive(Debug, Args)]
pub struct FitArgs {
    #[command(flatten)]
    pub data: DataArgs,

    /// pcr, ridge, niece, egreg or simpls.
    #[arg(long)]
    pub method: Method,

    #[arg(long)]
    pub lambda: Option<f64>,

    /// Number of leading principal components (PCR, SIMPLS, NIECE, EgReg).
    #[arg(long)]
    pub d: Option<usize>,

    /// Number of components kept by NIECE.
    #[arg(long)]
    pub u: Option<usize>,

    /// Output model file (JSON).
    #[arg(long, short)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct PredictArgs {
    #[arg(long)]
    pub model: PathBuf,

    /// CSV containing (at least) the model's predictor columns.
    #[arg(long)]
    pub data: PathBuf,

    #[arg(long, short)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct CvArgs {
    #[command(flatten)]
    pub data: DataArgs,

    #[arg(long)]
    pub method: Method,

    #[arg(long, default_value_t = 10)]
    pub folds: usize,

    #[arg(long, default_value_t = 1)]
    pub seed: u64,

    /// Fixed d for NIECE (default: all components).
    #[arg(long)]
    pub d: Option<usize>,

    /// d values: `a:b`, `a:b:step` or a comma list (default 1..r).
    #[arg(long)]
    pub grid_d: Option<String>,

    /// u values for NIECE, same syntax as --grid-d.
    #[arg(long)]
    pub grid_u: Option<String>,

    /// Explicit penalty values (overrides the log grid).
    #[arg(long, value_delimiter = ',')]
    pub grid_lambda: Vec<f64>,

    #[arg(long, default_value_t = 50)]
    pub grid_lambda_count: usize,

    /// Log-grid ends as multiples of the anchor: the top squared singular
    /// value for ridge, the top envelope score for EgReg.
    #[arg(long, default_value_t = 1e-4)]
    pub grid_lambda_min: f64,

    #[arg(long, default_value_t = 1e2)]
    pub grid_lambda_max: f64,

    /// CV table output.
    #[arg(long, short)]
    pub out: PathBuf,

    /// Also refit the selected parameters on all data and save the model.
    #[arg(long)]
    pub model_out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct RpeArgs {
    /// Test CSV.
    #[arg(long)]
    pub data: PathBuf,

    #[arg(long, value_delimiter = ',', required = true)]
    pub response: Vec<String>,

    /// Model files; the first SIMPLS model is the reference.
    #[arg(long = "model", required = true)]
    pub models: Vec<PathBuf>,

    #[arg(long, short)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct TheoryArgs {
    /// Explicit aspect ratios (overrides the linear grid).
    #[arg(long, value_delimiter = ',')]
    pub grid_gamma: Vec<f64>,

    #[arg(long, default_value_t = 0.05)]
    pub grid_gamma_min: f64,

    #[arg(long, default_value_t = 5.0)]
    pub grid_gamma_max: f64,

    #[arg(long, default_value_t = 400)]
    pub grid_gamma_count: usize,

    #[arg(long, default_value_t = 10.0)]
    pub c_sq: f64,

    #[arg(long, default_value_t = 10.0)]
    pub tr_sigma_eps: f64,

    #[arg(long, short)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    /// TOML study configuration.
    #[arg(long)]
    pub config: PathBuf,

    #[arg(long)]
    pub out_dir: PathBuf,

    /// Override the configured seed.
    #[arg(long)]
    pub seed: Option<u64>,

    /// Override the configured replication count.
    #[arg(long)]
    pub replications: Option<usize>,
}
