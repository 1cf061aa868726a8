use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

use cdom::io::SplitMode;
use cdom::kernels::MedianPairs;
use cdom::matcher::{InitKind, SignChoice};
use cdom::LambdaPlacement;

/// Cross-domain object matching by dependence maximization.
///
/// Set CDOM_THREADS to bound the number of worker threads.
#[derive(Debug, Parser)]
#[command(name = "cdom", version, about)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Find the pairing between two unpaired sample sets.
    Match(MatchArgs),
    /// Evaluate a dependence measure at a given pairing.
    Score(ScoreArgs),
    /// Solve a linear assignment problem from a profit CSV.
    Lap(LapArgs),
    /// Write a synthetic data set with its hidden pairing.
    Gen(GenArgs),
    /// Fit or apply a kernel ridge regressor.
    Regress(RegressArgs),
    /// Arrange feature vectors on a grid frame.
    Summarize(SummarizeArgs),
    /// Score a pairing against a reference pairing.
    Eval(EvalArgs),
    /// Convert PGM/PPM images into a feature CSV.
    Ingest(IngestArgs),
}

pub fn positive(s: &str) -> Result<f64, String> {
    match s.parse::<f64>() {
        Ok(v) if v.is_finite() && v > 0.0 => Ok(v),
        _ => Err(format!("expected a positive number, got {s:?}")),
    }
}

pub fn non_negative(s: &str) -> Result<f64, String> {
    match s.parse::<f64>() {
        Ok(v) if v.is_finite() && v >= 0.0 => Ok(v),
        _ => Err(format!("expected a non-negative number, got {s:?}")),
    }
}

fn step_size(s: &str) -> Result<f64, String> {
    match s.parse::<f64>() {
        Ok(v) if v > 0.0 && v <= 1.0 => Ok(v),
        _ => Err(format!("expected a step size in (0, 1], got {s:?}")),
    }
}

fn at_least_one(s: &str) -> Result<usize, String> {
    match s.parse::<usize>() {
        Ok(v) if v >= 1 => Ok(v),
        _ => Err(format!("expected an integer >= 1, got {s:?}")),
    }
}

fn at_least_two(s: &str) -> Result<usize, String> {
    match s.parse::<usize>() {
        Ok(v) if v >= 2 => Ok(v),
        _ => Err(format!("expected an integer >= 2, got {s:?}")),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Method {
    Hsic,
    Nocco,
    Lsom,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum InitArg {
    Eigen,
    Random,
    Identity,
}

impl From<InitArg> for InitKind {
    fn from(v: InitArg) -> Self {
        match v {
            InitArg::Eigen => InitKind::Eigen,
            InitArg::Random => InitKind::Random,
            InitArg::Identity => InitKind::Identity,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SignArg {
    Pos,
    Neg,
    Both,
}

impl From<SignArg> for SignChoice {
    fn from(v: SignArg) -> Self {
        match v {
            SignArg::Pos => SignChoice::Pos,
            SignArg::Neg => SignChoice::Neg,
            SignArg::Both => SignChoice::Both,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum PlacementArg {
    Inside,
    Outside,
}

impl From<PlacementArg> for LambdaPlacement {
    fn from(v: PlacementArg) -> Self {
        match v {
            PlacementArg::Inside => LambdaPlacement::Inside,
            PlacementArg::Outside => LambdaPlacement::Outside,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum MedianArg {
    AllOrdered,
    Distinct,
}

impl From<MedianArg> for MedianPairs {
    fn from(v: MedianArg) -> Self {
        match v {
            MedianArg::AllOrdered => MedianPairs::AllOrdered,
            MedianArg::Distinct => MedianPairs::Distinct,
        }
    }
}

/// Optimizer settings shared by `match` and `summarize`.
#[derive(Debug, Clone, Args)]
pub struct OptimizerArgs {
    /// Number of restarts; restart r initializes with multiplier c_(r mod len).
    #[arg(long, default_value_t = 10, value_parser = at_least_one)]
    pub restarts: usize,
    /// Iteration cap per restart.
    #[arg(long = "max-iter", default_value_t = 20, value_parser = at_least_one)]
    pub max_iter: usize,
    /// Step size in (0, 1]; values below 1 use a fractional linearization point.
    #[arg(long, default_value_t = 1.0, value_parser = step_size)]
    pub eta: f64,
    /// Seed for CV fold splits and random initializations.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Initial pairing of each restart.
    #[arg(long, value_enum, default_value_t = InitArg::Eigen)]
    pub init: InitArg,
    /// Eigenvector sign rule for the eigen initialization.
    #[arg(long, value_enum, default_value_t = SignArg::Pos)]
    pub sign: SignArg,
    /// Initialization width multipliers c, comma separated [default: √1,…,√10].
    #[arg(long = "init-widths", value_delimiter = ',', value_parser = positive)]
    pub init_widths: Vec<f64>,
    /// Which pairwise distances define the median width.
    #[arg(long = "median-pairs", value_enum, default_value_t = MedianArg::AllOrdered)]
    pub median_pairs: MedianArg,
}

/// Measure and hyperparameters for `match` and `summarize`.
#[derive(Debug, Clone, Args)]
pub struct ModelArgs {
    /// Dependence measure to maximize.
    #[arg(long, value_enum)]
    pub method: Method,
    /// x-side kernel width [default: arms at 1 and √10 times the median width].
    #[arg(long = "sigma-x", value_parser = positive, requires = "sigma_y")]
    pub sigma_x: Option<f64>,
    /// y-side kernel width; required with --sigma-x.
    #[arg(long = "sigma-y", value_parser = positive, requires = "sigma_x")]
    pub sigma_y: Option<f64>,
    /// NOCCO regularizer [default: arms at 0.01 and 0.05].
    #[arg(long, value_parser = positive)]
    pub epsilon: Option<f64>,
    /// Fixed LSMI ridge; without it LSOM selects widths and ridge by CV.
    #[arg(long, value_parser = non_negative, conflicts_with = "cv")]
    pub lambda: Option<f64>,
    /// Select LSMI widths and ridge by cross-validation (the LSOM default).
    #[arg(long)]
    pub cv: bool,
    /// CV ridge grid, comma separated.
    #[arg(long = "cv-lambdas", value_delimiter = ',', value_parser = positive, default_value = "0.1,0.01,0.001")]
    pub cv_lambdas: Vec<f64>,
    /// CV folds.
    #[arg(long, default_value_t = 2, value_parser = at_least_two)]
    pub folds: usize,
    /// Whether the LSMI ridge is scaled by 1/n² together with the data term.
    #[arg(long = "lambda-placement", value_enum, default_value_t = PlacementArg::Inside)]
    pub lambda_placement: PlacementArg,
}

#[derive(Debug, Args)]
pub struct MatchArgs {
    /// First-domain samples (CSV, one row per object).
    #[arg(long)]
    pub x: PathBuf,
    /// Second-domain samples (CSV, one row per object).
    #[arg(long)]
    pub y: PathBuf,
    #[command(flatten)]
    pub model: ModelArgs,
    #[command(flatten)]
    pub optimizer: OptimizerArgs,
    /// Reference pairing (one y-index per line) for reporting accuracy.
    #[arg(long)]
    pub truth: Option<PathBuf>,
    /// Result document (JSON).
    #[arg(long)]
    pub out: PathBuf,
    /// Also write the pairing, one y-index per line.
    #[arg(long = "pairing-out")]
    pub pairing_out: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Measure {
    Hsic,
    Nocco,
    Lsmi,
    Ksmi,
}

#[derive(Debug, Args)]
pub struct ScoreArgs {
    #[arg(long)]
    pub x: PathBuf,
    #[arg(long)]
    pub y: PathBuf,
    /// Pairing file, one y-index per line [default: identity].
    #[arg(long)]
    pub pairing: Option<PathBuf>,
    #[arg(long, value_enum)]
    pub measure: Measure,
    /// x-side kernel width [default: median width].
    #[arg(long = "sigma-x", value_parser = positive)]
    pub sigma_x: Option<f64>,
    /// y-side kernel width [default: median width].
    #[arg(long = "sigma-y", value_parser = positive)]
    pub sigma_y: Option<f64>,
    #[arg(long, default_value_t = 0.05, value_parser = positive)]
    pub epsilon: f64,
    #[arg(long, default_value_t = 0.1, value_parser = non_negative)]
    pub lambda: f64,
    #[arg(long = "lambda-placement", value_enum, default_value_t = PlacementArg::Inside)]
    pub lambda_placement: PlacementArg,
}

#[derive(Debug, Args)]
pub struct LapArgs {
    /// Square matrix CSV; entry (i, j) is the profit of giving row i column j.
    #[arg(long)]
    pub profit: PathBuf,
    /// Treat the matrix as costs and minimize.
    #[arg(long)]
    pub minimize: bool,
    /// Write the assignment, one column index per line.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Dataset {
    /// y = x³ with x uniform on (−1, 1).
    Cubic,
    /// Left and right halves of smooth random vectors.
    Split,
    /// Lab colors around random cluster centers (features only).
    Colors,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SplitArg {
    Halves,
    Mirror,
}

impl From<SplitArg> for SplitMode {
    fn from(v: SplitArg) -> Self {
        match v {
            SplitArg::Halves => SplitMode::Halves,
            SplitArg::Mirror => SplitMode::Mirror,
        }
    }
}

#[derive(Debug, Args)]
pub struct GenArgs {
    #[arg(value_enum)]
    pub dataset: Dataset,
    /// Number of objects per domain.
    #[arg(long, default_value_t = 100, value_parser = at_least_two)]
    pub n: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Vector length before splitting (split only).
    #[arg(long, default_value_t = 20)]
    pub dim: usize,
    /// Standard deviation of the noise added to y (split only).
    #[arg(long, default_value_t = 0.5, value_parser = non_negative)]
    pub noise: f64,
    /// How y is taken from each vector (split only).
    #[arg(long, value_enum, default_value_t = SplitArg::Mirror)]
    pub mode: SplitArg,
    /// Number of clusters (colors only).
    #[arg(long, default_value_t = 8, value_parser = at_least_one)]
    pub clusters: usize,
    /// Within-cluster standard deviation in Lab units (colors only).
    #[arg(long, default_value_t = 6.0, value_parser = non_negative)]
    pub spread: f64,
    /// Output directory; receives x.csv, y.csv and truth.txt, or
    /// features.csv and labels.txt.
    #[arg(long = "out-dir")]
    pub out_dir: PathBuf,
}

#[derive(Debug, Args)]
pub struct RegressArgs {
    #[command(subcommand)]
    pub action: RegressAction,
}

#[derive(Debug, Subcommand)]
pub enum RegressAction {
    /// Fit on matched pairs and save the model.
    Fit(RegressFitArgs),
    /// Predict outputs for new inputs.
    Predict(RegressPredictArgs),
}

#[derive(Debug, Args)]
pub struct RegressFitArgs {
    /// Inputs (CSV).
    #[arg(long)]
    pub x: PathBuf,
    /// Targets (CSV).
    #[arg(long)]
    pub y: PathBuf,
    /// Pairing of x_i with y_(p(i)) [default: row i with row i].
    #[arg(long)]
    pub pairing: Option<PathBuf>,
    /// Kernel width candidates, comma separated [default: median width].
    #[arg(long, value_delimiter = ',', value_parser = positive)]
    pub tau: Vec<f64>,
    /// Ridge candidates, comma separated.
    #[arg(long, value_delimiter = ',', value_parser = non_negative, default_value = "0.01")]
    pub delta: Vec<f64>,
    /// Folds for grid selection when more than one candidate is given.
    #[arg(long, default_value_t = 2, value_parser = at_least_two)]
    pub folds: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Model file (JSON).
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct RegressPredictArgs {
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long)]
    pub x: PathBuf,
    /// Predictions (CSV).
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct SummarizeArgs {
    /// Feature vectors, one row per object.
    #[arg(long)]
    pub features: PathBuf,
    /// Rectangular frame rows.
    #[arg(long, requires = "cols", conflicts_with = "mask")]
    pub rows: Option<usize>,
    /// Rectangular frame columns.
    #[arg(long, requires = "rows")]
    pub cols: Option<usize>,
    /// Mask frame: text grid where '#' marks a cell and '.' a gap.
    #[arg(long)]
    pub mask: Option<PathBuf>,
    /// Dependence measure used to place objects.
    #[arg(long, value_enum, default_value_t = Method::Hsic)]
    pub method: Method,
    #[command(flatten)]
    pub optimizer: OptimizerArgs,
    /// Random placements for the locality baseline.
    #[arg(long = "baseline-trials", default_value_t = 100)]
    pub baseline_trials: usize,
    /// Assignment CSV (cell_row, cell_col, feature_index).
    #[arg(long)]
    pub out: PathBuf,
    /// Source images in feature order, for the montage.
    #[arg(long, num_args = 1.., requires = "montage")]
    pub images: Vec<PathBuf>,
    /// Montage output (PPM).
    #[arg(long, requires = "images")]
    pub montage: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    /// Result document from `match`, or a pairing file.
    #[arg(long)]
    pub result: PathBuf,
    /// Reference pairing.
    #[arg(long)]
    pub truth: PathBuf,
}

#[derive(Debug, Args)]
pub struct IngestArgs {
    /// PGM/PPM images; each becomes one row.
    #[arg(required = true)]
    pub images: Vec<PathBuf>,
    /// Convert pixels to CIE Lab (D65) before flattening.
    #[arg(long)]
    pub lab: bool,
    /// Feature CSV.
    #[arg(long)]
    pub out: PathBuf,
}
