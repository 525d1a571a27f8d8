//! `enf`: simulate, thin, summarise, infer and check nerve-tree patterns.

mod commands;
mod svg;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use enf_core::ErrorClass;

#[derive(Parser, Debug)]
#[command(name = "enf", version, about = "Nerve-tree point pattern analysis")]
struct Cli {
    /// Worker threads (default: available cores). Outputs do not depend on it.
    #[arg(long, global = true)]
    threads: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Simulate replicate patterns from a Poisson or Matérn cluster model.
    Simulate(SimulateArgs),
    /// Thin every sample of a pattern file.
    Thin(ThinArgs),
    /// Estimate a summary function of a pattern file or directory.
    Summarize(SummarizeArgs),
    /// Fit Matérn parameters by minimum contrast on the pooled K of end points.
    Fit(FitArgs),
    /// Build an ABC reference table and accept posterior draws per target.
    Infer(InferArgs),
    /// Posterior predictive global envelope test for one statistic.
    Envelope(EnvelopeArgs),
    /// Envelope tests for all statistics, one directory per experiment.
    Report(ReportArgs),
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq)]
pub enum Model {
    Poisson,
    Matern,
}

#[derive(Args, Debug)]
pub struct SimulateArgs {
    #[arg(value_enum)]
    pub model: Model,
    /// JSON parameters: `{"lambda": ...}` or `{"kappa", "R", "mu"}`.
    #[arg(long)]
    pub params: Option<PathBuf>,
    /// Window JSON; defaults to 330 x 432 microns.
    #[arg(long)]
    pub window: Option<PathBuf>,
    #[arg(long, default_value_t = 1)]
    pub n_reps: usize,
    #[arg(long)]
    pub seed: u64,
    #[arg(long, default_value = "healthy")]
    pub group: String,
    /// Prefix for sample and subject ids.
    #[arg(long, default_value = "sim")]
    pub prefix: String,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq)]
pub enum ThinModel {
    /// Keep each end point with probability p.
    PEnds,
    /// Keep each tree with probability p.
    PTrees,
    /// Keep a uniformly random subset of n_B trees.
    Count,
    /// Dependent thinning to n_B trees with parameter theta.
    Dependent,
}

#[derive(Args, Debug)]
pub struct ThinArgs {
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long, value_enum)]
    pub model: ThinModel,
    #[arg(long)]
    pub p: Option<f64>,
    #[arg(long = "n-b")]
    pub n_b: Option<usize>,
    #[arg(long)]
    pub theta: Option<f64>,
    #[arg(long)]
    pub seed: u64,
    /// Relabel the output samples with this group.
    #[arg(long)]
    pub group: Option<String>,
    /// Suffix appended to sample ids.
    #[arg(long, allow_hyphen_values = true)]
    pub suffix: Option<String>,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq)]
pub enum Function {
    K,
    L,
    F,
    Markcorr,
    /// Smallest grid r with F(r) >= 0.3, one line per sample.
    AbcSummary,
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq)]
pub enum Points {
    Bases,
    Ends,
}

#[derive(Args, Debug)]
pub struct SummarizeArgs {
    /// Pattern CSV or a directory of them.
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long, value_enum)]
    pub function: Function,
    #[arg(long, value_enum, default_value = "ends")]
    pub points: Points,
    #[arg(long, default_value_t = 100.0)]
    pub r_max: f64,
    #[arg(long, default_value_t = 1.0)]
    pub r_step: f64,
    /// Mark correlation bandwidth; rule of thumb when absent.
    #[arg(long)]
    pub bandwidth: Option<f64>,
    #[arg(long, default_value_t = 10_000)]
    pub f_points: usize,
    /// Needed for F and the ABC summary (random test points).
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Args, Debug)]
pub struct FitArgs {
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long, default_value_t = 1.0)]
    pub r_min: f64,
    #[arg(long, default_value_t = 100.0)]
    pub r_max: f64,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Args, Debug)]
pub struct InferArgs {
    /// Directory of healthy pattern CSVs.
    #[arg(long)]
    pub healthy: PathBuf,
    /// CSV `target_id,n_B,observed_summary`.
    #[arg(long, conflicts_with = "target_patterns", required_unless_present = "target_patterns")]
    pub targets: Option<PathBuf>,
    /// Directory of target pattern CSVs; summaries are computed from them.
    #[arg(long)]
    pub target_patterns: Option<PathBuf>,
    /// Prior, `exp:RATE`.
    #[arg(long, default_value = "exp:10")]
    pub prior: String,
    #[arg(long, default_value_t = 0.01)]
    pub trunc: f64,
    #[arg(long, default_value_t = 100_000)]
    pub n_sims: usize,
    #[arg(long, conflicts_with = "epsilon")]
    pub quantile: Option<f64>,
    #[arg(long)]
    pub epsilon: Option<f64>,
    #[arg(long, default_value_t = 10_000)]
    pub f_points: usize,
    #[arg(long)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Args, Debug, Clone)]
pub struct PredictiveArgs {
    #[arg(long)]
    pub healthy: PathBuf,
    /// Directory of observed target pattern CSVs.
    #[arg(long)]
    pub target_patterns: PathBuf,
    /// Posterior CSV `target_id,theta`.
    #[arg(long)]
    pub posterior: PathBuf,
    #[arg(long, default_value_t = 2500)]
    pub n_sim: usize,
    #[arg(long, default_value_t = 0.05)]
    pub alpha: f64,
    #[arg(long)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Args, Debug)]
pub struct EnvelopeArgs {
    /// One of L-ends, L-bases, markcorr, cluster-size-ecdf, territory-area-ecdf.
    #[arg(long)]
    pub statistic: String,
    #[command(flatten)]
    pub common: PredictiveArgs,
    /// Also write an SVG figure.
    #[arg(long)]
    pub svg: bool,
}

#[derive(Args, Debug)]
pub struct ReportArgs {
    #[command(flatten)]
    pub common: PredictiveArgs,
}

fn exit_code(class: ErrorClass) -> u8 {
    match class {
        ErrorClass::Usage => 2,
        ErrorClass::Data => 3,
        ErrorClass::Numeric => 4,
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    if let Some(n) = cli.threads {
        if n == 0 {
            eprintln!("error: --threads must be at least 1");
            return ExitCode::from(2);
        }
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("error: cannot configure thread pool: {e}");
            return ExitCode::from(2);
        }
    }
    let result = match cli.command {
        Command::Simulate(a) => commands::simulate(&a),
        Command::Thin(a) => commands::thin(&a),
        Command::Summarize(a) => commands::summarize(&a),
        Command::Fit(a) => commands::fit(&a),
        Command::Infer(a) => commands::infer(&a),
        Command::Envelope(a) => commands::envelope(&a),
        Command::Report(a) => commands::report(&a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(e.class()))
        }
    }
}
