use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Parser, Debug)]
#[command(
    name = "dynamap",
    version,
    about = "Diffusion maps for data whose kernel changes over a parameter space"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Diffusion-map coordinates of each input, optionally rotated into a common basis.
    Embed(EmbedArgs),
    /// Cross-parameter diffusion distances between two inputs.
    Distance(DistanceArgs),
    /// Pairwise global diffusion distances between all inputs.
    Global(GlobalArgs),
    /// Graph of graphs built from a matrix of global distances.
    Metagraph(MetagraphArgs),
    /// The 31-torus pinching experiment, end to end.
    TorusExperiment(TorusArgs),
    /// Monte-Carlo convergence of sampled distances on a torus pair.
    Convergence(ConvergenceArgs),
    /// Change detection on synthetic multi-sensor image cubes.
    ChangeDetect(ChangeArgs),
    /// Writes synthetic datasets.
    GenData(GenDataArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum FileFormat {
    Csv,
    Bin,
}

impl From<FileFormat> for dynamap::io::Format {
    fn from(f: FileFormat) -> Self {
        match f {
            FileFormat::Csv => dynamap::io::Format::Csv,
            FileFormat::Bin => dynamap::io::Format::Binary,
        }
    }
}

#[derive(Args, Debug, Clone)]
pub struct OutputArgs {
    /// Directory for all output files.
    #[arg(long, default_value = ".")]
    pub output_dir: PathBuf,
    #[arg(long, value_enum, default_value = "csv")]
    pub format: FileFormat,
    /// File of `key = value` lines used for flags not given on the command line.
    #[arg(long)]
    pub config: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Time {
    Finite(u32),
    Infinite,
}

pub fn parse_time(s: &str) -> Result<Time, String> {
    match s.trim().to_ascii_lowercase().as_str() {
        "inf" | "infinity" => Ok(Time::Infinite),
        v => match v.parse::<u32>() {
            Ok(0) => Err("diffusion time must be at least 1".into()),
            Ok(t) => Ok(Time::Finite(t)),
            Err(_) => Err(format!("expected a positive integer or 'inf', got '{s}'")),
        },
    }
}

fn parse_list(s: &str) -> Result<Vec<usize>, String> {
    s.split(',')
        .map(|v| v.trim().parse::<usize>().map_err(|e| format!("'{v}': {e}")))
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum InputKind {
    /// One sample per row, one coordinate per column.
    Points,
    /// A symmetric nonnegative kernel matrix.
    Kernel,
}

#[derive(Args, Debug, Clone)]
#[group(id = "bandwidth", multiple = false)]
pub struct BandwidthArgs {
    /// Gaussian kernel bandwidth for point inputs.
    #[arg(long)]
    pub epsilon: Option<f64>,
    /// Use the median pairwise distance of each input as bandwidth (default).
    #[arg(long)]
    pub epsilon_median: bool,
    /// Tune each input's bandwidth so its second eigenvalue hits this value.
    #[arg(long)]
    pub target_lambda2: Option<f64>,
}

#[derive(Args, Debug, Clone)]
pub struct GraphArgs {
    /// Matrix file; repeat for several parameters.
    #[arg(long = "input", required = true)]
    pub inputs: Vec<PathBuf>,
    #[arg(long, value_enum, default_value = "points")]
    pub input_kind: InputKind,
    #[command(flatten)]
    pub bandwidth: BandwidthArgs,
    /// Tolerance on the second eigenvalue when calibrating.
    #[arg(long, default_value_t = 1e-3)]
    pub tol: f64,
    /// Number of eigenpairs kept; all of them by default.
    #[arg(long)]
    pub rank: Option<usize>,
}

#[derive(Args, Debug)]
pub struct EmbedArgs {
    #[command(flatten)]
    pub graph: GraphArgs,
    #[arg(long, default_value = "1", value_parser = parse_time)]
    pub t: Time,
    /// Rotate every embedding into the eigenbasis of this input (0-based).
    #[arg(long)]
    pub common_base: Option<usize>,
    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(Args, Debug)]
pub struct DistanceArgs {
    #[command(flatten)]
    pub graph: GraphArgs,
    /// Diffusion time, or `inf` for the long-time limit.
    #[arg(long, default_value = "1", value_parser = parse_time)]
    pub t: Time,
    /// Write every pair `(x, y)` instead of corresponding points only.
    #[arg(long)]
    pub full: bool,
    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(Args, Debug)]
pub struct GlobalArgs {
    #[command(flatten)]
    pub graph: GraphArgs,
    #[arg(long, default_value = "1", value_parser = parse_time)]
    pub t: Time,
    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(Args, Debug, Clone)]
#[group(id = "meta_bandwidth", multiple = false)]
pub struct MetaBandwidthArgs {
    /// Fixed bandwidth of the meta kernel.
    #[arg(long)]
    pub epsilon: Option<f64>,
    /// Median pairwise global distance as bandwidth (default).
    #[arg(long)]
    pub epsilon_median: bool,
}

#[derive(Args, Debug)]
pub struct MetagraphArgs {
    /// Square matrix of pairwise global distances.
    #[arg(long)]
    pub input: PathBuf,
    #[command(flatten)]
    pub bandwidth: MetaBandwidthArgs,
    /// Diffusion time at which the distances were computed; recorded only.
    #[arg(long, default_value_t = 1)]
    pub t: u32,
    /// Meta diffusion time; defaults to 1/(1 - second eigenvalue).
    #[arg(long)]
    pub s: Option<f64>,
    #[arg(long, default_value_t = 3)]
    pub dims: usize,
    /// Leave out the constant top eigenpair.
    #[arg(long)]
    pub drop_trivial: bool,
    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(Args, Debug)]
pub struct TorusArgs {
    /// Samples per torus.
    #[arg(long, default_value_t = 1000)]
    pub points: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 0.5)]
    pub target_lambda2: f64,
    #[arg(long, default_value_t = 10)]
    pub rank: usize,
    #[arg(long, default_value_t = 2)]
    pub t: u32,
    #[command(flatten)]
    pub bandwidth: MetaBandwidthArgs,
    #[arg(long)]
    pub s: Option<f64>,
    #[arg(long, default_value_t = 3)]
    pub dims: usize,
    #[arg(long)]
    pub drop_trivial: bool,
    #[arg(long, default_value_t = 1e-3)]
    pub tol: f64,
    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(Args, Debug)]
pub struct ConvergenceArgs {
    #[arg(long, default_value_t = 2)]
    pub t: u32,
    /// Fixed Gaussian bandwidth shared by every sample size.
    #[arg(long, default_value_t = dynamap::experiments::CONVERGENCE_EPSILON)]
    pub epsilon: f64,
    /// Comma-separated, strictly increasing sample sizes.
    #[arg(long, default_value = "100,200,400,800", value_parser = parse_list)]
    pub n_grid: ::std::vec::Vec<usize>,
    #[arg(long, default_value_t = 20)]
    pub trials: usize,
    #[arg(long, default_value_t = 4000)]
    pub reference_n: usize,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    /// Fail unless both fitted slopes lie within this distance of -0.5.
    #[arg(long)]
    pub band: Option<f64>,
    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(Args, Debug, Clone)]
pub struct SceneArgs {
    #[arg(long, default_value_t = 32)]
    pub width: usize,
    #[arg(long, default_value_t = 32)]
    pub height: usize,
    /// Bands per epoch, comma-separated; one epoch per entry.
    #[arg(long, default_value = "30,50,70", value_parser = parse_list)]
    pub bands: ::std::vec::Vec<usize>,
    #[arg(long, default_value_t = 0.01)]
    pub noise: f64,
    /// Scene seed; epoch `k` uses sensor seed `seed + 1 + k`.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 1)]
    pub change_epoch: usize,
    #[arg(long, default_value_t = 12)]
    pub change_row: usize,
    #[arg(long, default_value_t = 9)]
    pub change_col: usize,
    #[arg(long, default_value_t = 5)]
    pub change_size: usize,
    /// Generate epochs without a planted change.
    #[arg(long)]
    pub no_change: bool,
}

#[derive(Args, Debug)]
pub struct ChangeArgs {
    #[command(flatten)]
    pub scene: SceneArgs,
    #[arg(long, default_value_t = 0.97)]
    pub target_lambda2: f64,
    #[arg(long, default_value = "inf", value_parser = parse_time)]
    pub t: Time,
    /// Eigenpairs kept at finite `t`.
    #[arg(long, default_value_t = 20)]
    pub rank: usize,
    /// Number of top-scoring pixels checked against the planted change.
    #[arg(long, default_value_t = 50)]
    pub top: usize,
    #[arg(long, default_value_t = 1e-3)]
    pub tol: f64,
    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum DataKind {
    /// One torus, optionally pinched.
    Torus,
    /// The plain torus and its 30 pinched variants on shared angles.
    TorusFamily,
    /// Orbits of the standard map from a grid of initial conditions.
    StandardMap,
    /// Synthetic multi-sensor image cubes with a change mask.
    Cube,
}

#[derive(Args, Debug)]
pub struct GenDataArgs {
    #[arg(long, value_enum)]
    pub kind: DataKind,
    #[arg(long, default_value_t = dynamap::datasets::DEFAULT_TORUS_SAMPLES)]
    pub points: usize,
    /// Pinch angle in radians; needs --pinch-radius.
    #[arg(long, requires = "pinch_radius")]
    pub pinch_angle: Option<f64>,
    #[arg(long, requires = "pinch_angle")]
    pub pinch_radius: Option<f64>,
    #[arg(long, default_value_t = 1.0)]
    pub alpha: f64,
    /// Initial conditions per axis.
    #[arg(long, default_value_t = 10)]
    pub grid: usize,
    #[arg(long, default_value_t = 100)]
    pub steps: usize,
    #[command(flatten)]
    pub scene: SceneArgs,
    #[command(flatten)]
    pub output: OutputArgs,
}

impl Command {
    pub fn output(&self) -> &OutputArgs {
        match self {
            Command::Embed(a) => &a.output,
            Command::Distance(a) => &a.output,
            Command::Global(a) => &a.output,
            Command::Metagraph(a) => &a.output,
            Command::TorusExperiment(a) => &a.output,
            Command::Convergence(a) => &a.output,
            Command::ChangeDetect(a) => &a.output,
            Command::GenData(a) => &a.output,
        }
    }
}
