use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Debug, Parser)]
#[command(
    name = "conewalk",
    version,
    about = "Random walks conditioned to stay in cones"
)]
pub struct Cli {
    /// Worker threads; results do not depend on this value.
    #[arg(long, global = true, env = "CONEWALK_THREADS")]
    pub threads: Option<usize>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Simulate unconditioned walks and estimate the survival probability.
    Simulate(SimulateArgs),
    /// Solve for the discrete harmonic function V on a lattice window.
    EstimateV(EstimateVArgs),
    /// Draw conditioned paths (meander, h-transform or bridge).
    Sample(SampleArgs),
    /// Sample or tabulate the limiting processes.
    Reference(ReferenceArgs),
    /// Fit the survival exponent over a horizon grid.
    SurvivalExponent(SurvivalArgs),
    /// Conditioned walk against the Brownian meander.
    TestMeander(TestMeanderArgs),
    /// Harmonic-transformed walk against the Bessel process.
    TestHtransform(TestHtransformArgs),
    /// Bridge functionals against the reweighted meander.
    TestBridge(TestBridgeArgs),
    /// Run every experiment of a manifest.
    Suite(SuiteArgs),
}

#[derive(Debug, Clone, Args)]
pub struct WalkArgs {
    /// Cone: half-line, half-space:d, orthant:d, wedge:alpha, weyl-a:d, weyl-b:d.
    #[arg(long)]
    pub cone: String,
    /// Step law: gaussian, rademacher, sphere, lattice:srw, lattice:five-point, lattice:<file>.
    #[arg(long)]
    pub steps: String,
    /// Start point as comma-separated coordinates.
    #[arg(long)]
    pub start: String,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
}

/// Where a test writes its report, raw samples and plot.
#[derive(Debug, Clone, Args)]
pub struct ReportArgs {
    /// JSON report; printed to stdout when absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// CSV of raw functional samples.
    #[arg(long)]
    pub csv: Option<PathBuf>,
    /// SVG overlay of histograms and distribution functions.
    #[arg(long)]
    pub plot: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    #[command(flatten)]
    pub walk: WalkArgs,
    #[arg(long)]
    pub n: usize,
    #[arg(long, default_value_t = 10_000)]
    pub replicas: u64,
    /// Dump every path as CSV `replica,k,coord_1..coord_d,exited`.
    #[arg(long)]
    pub record_paths: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum InitArg {
    Zero,
    Anchor,
}

#[derive(Debug, Args)]
pub struct EstimateVArgs {
    #[arg(long)]
    pub cone: String,
    #[arg(long)]
    pub steps: String,
    /// Window radius R of the lattice box.
    #[arg(long)]
    pub window: f64,
    #[arg(long, default_value_t = 1e-13)]
    pub tol: f64,
    #[arg(long, value_enum, default_value_t = InitArg::Zero)]
    pub init: InitArg,
    #[arg(long)]
    pub max_sweeps: Option<usize>,
    /// Table CSV; the JSON sidecar is written next to it.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum LawArg {
    Meander,
    Htransform,
    Bridge,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum MethodArg {
    Guided,
    Rejection,
    Splitting,
}

#[derive(Debug, Args)]
pub struct SampleArgs {
    #[arg(long, value_enum)]
    pub law: LawArg,
    #[command(flatten)]
    pub walk: WalkArgs,
    #[arg(long)]
    pub n: usize,
    /// Bridge end point.
    #[arg(long)]
    pub end: Option<String>,
    /// Harmonic table written by estimate-v, for the h-transform.
    #[arg(long)]
    pub vtable: Option<PathBuf>,
    /// Window radius of a table built on the fly when no table is given.
    #[arg(long)]
    pub window: Option<f64>,
    #[arg(long, value_enum)]
    pub method: Option<MethodArg>,
    #[arg(long)]
    pub count: usize,
    /// Path CSV; the ensemble JSON sidecar is written next to it.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ObjectArg {
    Meander,
    HBm,
    Bessel,
    EntranceDensity,
    Kernel,
}

#[derive(Debug, Args)]
pub struct ReferenceArgs {
    #[arg(long, value_enum)]
    pub object: ObjectArg,
    #[arg(long)]
    pub cone: String,
    /// Start point (h-bm), comma-separated.
    #[arg(long)]
    pub start: Option<String>,
    /// Start radius (bessel) or source radius r1 (kernel).
    #[arg(long, default_value_t = 0.0)]
    pub r0: f64,
    /// Time horizon (h-bm), density time (entrance-density) or kernel step.
    #[arg(long, default_value_t = 1.0)]
    pub time: f64,
    /// Observation times for the Bessel process, comma-separated.
    #[arg(long, default_value = "0.25,0.5,1")]
    pub times: String,
    /// Radius grid `r_min:r_max:steps` for density queries.
    #[arg(long, default_value = "0:5:100")]
    pub grid: String,
    /// Grid steps m of the Brownian paths.
    #[arg(long, default_value_t = 4096)]
    pub m: usize,
    /// Start scale of the grid meander.
    #[arg(long, default_value_t = 0.01)]
    pub eps: f64,
    /// Keep paths on grid points only, without the bridge crossing correction.
    #[arg(long)]
    pub no_bridge_correction: bool,
    #[arg(long, default_value_t = 1000)]
    pub count: usize,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SourceArg {
    Exact,
    Mc,
}

#[derive(Debug, Args)]
pub struct SurvivalArgs {
    #[command(flatten)]
    pub walk: WalkArgs,
    /// `a:b:logK` (K points per decade), `a:b:K` (K points) or `a:b`.
    #[arg(long)]
    pub horizons: String,
    #[arg(long, value_enum, default_value_t = SourceArg::Exact)]
    pub source: SourceArg,
    #[arg(long, default_value_t = 100_000)]
    pub replicas: u64,
    /// Allowed distance between the fitted slope and -p/2.
    #[arg(long, default_value_t = 0.05)]
    pub tolerance: f64,
    #[command(flatten)]
    pub report: ReportArgs,
}

#[derive(Debug, Clone, Args)]
pub struct StatArgs {
    #[arg(long)]
    pub n: usize,
    #[arg(long, default_value_t = 10_000)]
    pub count: usize,
    #[arg(long, default_value_t = 0.01)]
    pub alpha: f64,
}

#[derive(Debug, Args)]
pub struct TestMeanderArgs {
    #[command(flatten)]
    pub walk: WalkArgs,
    #[command(flatten)]
    pub stat: StatArgs,
    /// Skip the unconditioned negative control.
    #[arg(long)]
    pub no_control: bool,
    #[arg(long, value_enum)]
    pub method: Option<MethodArg>,
    /// Grid meander paths for the max-norm and mid-radius comparisons.
    #[arg(long, default_value_t = 0)]
    pub reference_count: usize,
    #[arg(long, default_value_t = 4096)]
    pub m: usize,
    #[arg(long, default_value_t = 0.01)]
    pub eps: f64,
    #[command(flatten)]
    pub report: ReportArgs,
}

#[derive(Debug, Args)]
pub struct TestHtransformArgs {
    #[command(flatten)]
    pub walk: WalkArgs,
    #[command(flatten)]
    pub stat: StatArgs,
    /// Skip the unconditioned negative control.
    #[arg(long)]
    pub no_control: bool,
    #[arg(long)]
    pub vtable: Option<PathBuf>,
    #[arg(long)]
    pub window: Option<f64>,
    #[command(flatten)]
    pub report: ReportArgs,
}

#[derive(Debug, Args)]
pub struct TestBridgeArgs {
    #[command(flatten)]
    pub walk: WalkArgs,
    #[command(flatten)]
    pub stat: StatArgs,
    /// End point; defaults to the start point.
    #[arg(long)]
    pub end: Option<String>,
    #[arg(long, default_value_t = 0.5)]
    pub t: f64,
    #[arg(long, default_value_t = 20_000)]
    pub reference_count: usize,
    #[arg(long, default_value_t = 4096)]
    pub m: usize,
    #[arg(long, default_value_t = 0.01)]
    pub eps: f64,
    #[arg(long, value_enum)]
    pub method: Option<MethodArg>,
    #[command(flatten)]
    pub report: ReportArgs,
}

#[derive(Debug, Args)]
pub struct SuiteArgs {
    /// Manifest file, or the name of a bundled one (default.json, quick.json).
    #[arg(long, default_value = "default.json")]
    pub manifest: String,
    /// Directory for reports; overrides the manifest's output directory.
    #[arg(long)]
    pub out_dir: Option<PathBuf>,
    /// Run only these experiment ids.
    #[arg(long, value_delimiter = ',')]
    pub only: Vec<String>,
}
