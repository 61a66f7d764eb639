//! Command line definitions. Flag names follow the estimator literature's
//! conventional parameter names in kebab-case (lambda-min, step, iaids,
//! value) as visible aliases next to the short forms.

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use ridgecond::condpath::CondNorm;
use ridgecond::estimators::EstimatorKind;

#[derive(Debug, Parser)]
#[command(
    name = "ridgecond",
    version,
    about = "Ridge covariance estimation with condition-number diagnostics for penalty selection"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Trace the condition number of a ridge estimator over a penalty grid.
    Cnplot(CnplotArgs),
    /// Propose a penalty: knee of the condition path, refined by
    /// cross-validated Gaussian likelihood.
    Select(SelectArgs),
    /// Write the ridge estimate and its precision matrix at one penalty.
    Estimate(EstimateArgs),
    /// Time the path computation over grids of dimension and step count.
    Bench(BenchArgs),
}

/// How to treat the first row of the input CSV.
#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum HeaderMode {
    /// Header if and only if some first-row cell is not numeric.
    Auto,
    Yes,
    No,
}

/// Condition number norm choice, named by the norm's index.
#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum NormArg {
    #[value(name = "2")]
    Spectral,
    #[value(name = "1")]
    One,
}

impl From<NormArg> for CondNorm {
    fn from(n: NormArg) -> CondNorm {
        match n {
            NormArg::Spectral => CondNorm::Spectral,
            NormArg::One => CondNorm::One,
        }
    }
}

fn parse_kind(text: &str) -> Result<EstimatorKind, String> {
    match text.to_ascii_lowercase().as_str() {
        "arch1" | "archi" => Ok(EstimatorKind::ArchI),
        "arch2" | "archii" => Ok(EstimatorKind::ArchII),
        "alt" => Ok(EstimatorKind::Alt),
        _ => Err(format!(
            "unknown estimator {text:?}; expected arch1, arch2, or alt"
        )),
    }
}

#[derive(Debug, Args)]
pub struct InputOpts {
    /// Input CSV file.
    #[arg(long, value_name = "PATH")]
    pub input: PathBuf,
    /// Treat the input as a precomputed symmetric matrix rather than an
    /// n x p dataset.
    #[arg(long)]
    pub as_matrix: bool,
    /// Work on the correlation scale.
    #[arg(long)]
    pub cor: bool,
    /// Header row handling for the input CSV.
    #[arg(long, value_enum, default_value_t = HeaderMode::Auto)]
    pub header: HeaderMode,
    /// Field delimiter for the input CSV.
    #[arg(long, default_value_t = ',')]
    pub delimiter: char,
}

/// Input flags for commands that require observation rows (no --as-matrix).
#[derive(Debug, Args)]
pub struct DatasetOpts {
    /// Input CSV file with one observation per row.
    #[arg(long, value_name = "PATH")]
    pub input: PathBuf,
    /// Work on the correlation scale (standardized columns).
    #[arg(long)]
    pub cor: bool,
    /// Header row handling for the input CSV.
    #[arg(long, value_enum, default_value_t = HeaderMode::Auto)]
    pub header: HeaderMode,
    /// Field delimiter for the input CSV.
    #[arg(long, default_value_t = ',')]
    pub delimiter: char,
}

#[derive(Debug, Args)]
pub struct ModelOpts {
    /// Estimator family: arch1 (convex combination), arch2 (diagonal
    /// inflation), alt (proper ridge).
    #[arg(long = "type", value_name = "KIND", value_parser = parse_kind, default_value = "alt")]
    pub kind: EstimatorKind,
    /// Shrinkage target: null, scalar:<phi>, dupv, depv, or file:<path>.
    #[arg(long, default_value = "depv")]
    pub target: String,
}

#[derive(Debug, Args)]
pub struct GridOpts {
    /// Smallest penalty on the grid.
    #[arg(long, visible_alias = "lambda-min", default_value_t = 1e-6)]
    pub lmin: f64,
    /// Largest penalty on the grid.
    #[arg(long, visible_alias = "lambda-max", default_value_t = 1e4)]
    pub lmax: f64,
    /// Number of log-equidistant grid points (at least 3).
    #[arg(long, visible_alias = "step", default_value_t = 200)]
    pub steps: usize,
}

#[derive(Debug, Args)]
pub struct KneeOpts {
    /// Relative per-step drop below which the path counts as flat.
    #[arg(long, default_value_t = 0.01)]
    pub knee_tol: f64,
    /// Steps that must stay flat in a row; default max(3, steps/100).
    #[arg(long)]
    pub knee_window: Option<usize>,
}

#[derive(Debug, Args)]
pub struct PlotOpts {
    /// Add digits-lost and acceleration panels beside the condition plot.
    #[arg(long, visible_alias = "iaids")]
    pub aids: bool,
    /// Vertical marks at these penalties (comma separated), drawn in red.
    #[arg(long, value_delimiter = ',', visible_alias = "value", value_name = "LAMBDA")]
    pub mark: Vec<f64>,
    /// Plot title.
    #[arg(long, default_value = "Condition number plot")]
    pub title: String,
    /// Figure width in pixels.
    #[arg(long, default_value_t = 900, value_parser = clap::value_parser!(u32).range(1..))]
    pub width: u32,
    /// Figure height in pixels.
    #[arg(long, default_value_t = 600, value_parser = clap::value_parser!(u32).range(1..))]
    pub height: u32,
    /// Ceiling at which infinite condition numbers are drawn (marker, not
    /// line); default ten times the largest finite value.
    #[arg(long)]
    pub y_clip: Option<f64>,
}

#[derive(Debug, Args)]
pub struct OutputOpts {
    /// Directory for output files (created if absent).
    #[arg(long, default_value = ".")]
    pub out: PathBuf,
    /// Worker threads for per-grid-point paths. Falls back to the
    /// RIDGECOND_THREADS environment variable, then to the machine's
    /// available parallelism.
    #[arg(long)]
    pub threads: Option<usize>,
}

#[derive(Debug, Args)]
pub struct CnplotArgs {
    #[command(flatten)]
    pub input: InputOpts,
    #[command(flatten)]
    pub model: ModelOpts,
    #[command(flatten)]
    pub grid: GridOpts,
    /// Condition number norm: 2 (spectral) or 1 (one-norm).
    #[arg(long, value_enum, default_value_t = NormArg::Spectral)]
    pub norm: NormArg,
    #[command(flatten)]
    pub knee: KneeOpts,
    #[command(flatten)]
    pub plot: PlotOpts,
    #[command(flatten)]
    pub output: OutputOpts,
}

#[derive(Debug, Args)]
pub struct SelectArgs {
    #[command(flatten)]
    pub input: DatasetOpts,
    #[command(flatten)]
    pub model: ModelOpts,
    #[command(flatten)]
    pub grid: GridOpts,
    #[command(flatten)]
    pub knee: KneeOpts,
    #[command(flatten)]
    pub plot: PlotOpts,
    #[command(flatten)]
    pub output: OutputOpts,
    /// Cross-validation folds; leave-one-out when omitted.
    #[arg(long)]
    pub folds: Option<usize>,
    /// Lower bound for the likelihood search, replacing the knee penalty.
    #[arg(long, value_name = "LAMBDA")]
    pub lmin_override: Option<f64>,
    /// Optimizer convergence tolerance, relative in ln lambda.
    #[arg(long, default_value_t = 1e-6)]
    pub tol: f64,
    /// Optimizer evaluation budget.
    #[arg(long, default_value_t = 200)]
    pub max_iter: usize,
    /// Shuffle seed for the K-fold assignment.
    #[arg(long)]
    pub seed: Option<u64>,
}

#[derive(Debug, Args)]
pub struct EstimateArgs {
    #[command(flatten)]
    pub input: InputOpts,
    #[command(flatten)]
    pub model: ModelOpts,
    /// Penalty value.
    #[arg(long)]
    pub lambda: f64,
    #[command(flatten)]
    pub output: OutputOpts,
}

/// Which estimator configurations the benchmark runs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum BenchMode {
    /// Scalar target: one decomposition per path.
    Eq,
    /// Non-scalar target: one decomposition per grid point.
    Noneq,
    Both,
}

#[derive(Debug, Args)]
pub struct BenchArgs {
    /// Matrix dimensions to benchmark (comma separated).
    #[arg(long, value_delimiter = ',', default_value = "250")]
    pub p_grid: Vec<usize>,
    /// Grid sizes to benchmark (comma separated).
    #[arg(long, value_delimiter = ',', default_value = "125,1000")]
    pub s_grid: Vec<usize>,
    /// Repetitions per cell; the median is reported.
    #[arg(long, default_value_t = 3)]
    pub reps: usize,
    /// Which configurations to run.
    #[arg(long, value_enum, default_value_t = BenchMode::Both)]
    pub mode: BenchMode,
    /// Seed for the synthetic inputs.
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    #[command(flatten)]
    pub output: OutputOpts,
}
