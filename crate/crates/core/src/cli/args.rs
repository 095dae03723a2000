use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};

#[derive(Parser, Debug)]
#[command(
    name = "phasekaczmarz",
    version,
    about = "Phase-adapting randomized Kaczmarz for real phase retrieval"
)]
pub struct Cli {
    /// JSON file with parameters for the subcommand; flags override its values.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,

    /// Worker threads, a positive integer or `auto`. Falls back to PHASEKACZMARZ_THREADS.
    #[arg(long, global = true)]
    pub threads: Option<String>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Generate a random measurement system.
    Gen(GenArgs),
    /// Compute observations of a truth vector.
    Observe(ObserveArgs),
    /// Run the Kaczmarz iteration and write a trace.
    Solve(SolveArgs),
    /// Check the admissibility conditions of a system.
    Certify(CertifyArgs),
    /// Escape and decay experiment over many trials.
    Drift(DriftArgs),
    /// Exact one-step contraction ratios on error shells.
    Sweep(SweepArgs),
    /// Closed-form moments against Monte Carlo estimates.
    Moments(MomentsArgs),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DistArg {
    Sphere,
    Gaussian,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModeArg {
    Phase,
    Linear,
}

// Every field is optional so that flags can be layered over a config file.

#[derive(Args, Debug, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GenArgs {
    #[arg(long)]
    pub d: Option<usize>,
    #[arg(long)]
    pub m: Option<usize>,
    #[arg(long, value_enum)]
    pub dist: Option<DistArg>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args, Debug, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ObserveArgs {
    #[arg(long)]
    pub system: Option<PathBuf>,
    #[arg(long)]
    pub truth: Option<PathBuf>,
    /// Keep signs (for linear mode).
    #[arg(long)]
    #[serde(default, skip_serializing_if = "is_false")]
    pub signed: bool,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args, Debug, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolveArgs {
    #[arg(long)]
    pub system: Option<PathBuf>,
    /// Observation file. Without it, observations are computed from --truth.
    #[arg(long)]
    pub obs: Option<PathBuf>,
    #[arg(long)]
    pub truth: Option<PathBuf>,
    #[arg(long)]
    pub x0: Option<PathBuf>,
    /// Start at distance `init_error * ‖x‖` from the truth. Needs --truth.
    #[arg(long)]
    pub init_error: Option<f64>,
    #[arg(long, value_enum)]
    pub mode: Option<ModeArg>,
    #[arg(long)]
    pub steps: Option<usize>,
    #[arg(long)]
    pub stop_tol: Option<f64>,
    #[arg(long)]
    pub trace_every: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Trace CSV path.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Also write the final iterate as a vector file.
    #[arg(long = "final")]
    pub final_iterate: Option<PathBuf>,
}

#[derive(Args, Debug, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CertifyArgs {
    #[arg(long)]
    pub system: Option<PathBuf>,
    #[arg(long)]
    pub delta: Option<f64>,
    #[arg(long)]
    pub n_pairs: Option<usize>,
    #[arg(long)]
    pub n_dirs: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args, Debug, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DriftArgs {
    /// System file. Without it, a uniform system is drawn from --d, --m and the seed.
    #[arg(long)]
    pub system: Option<PathBuf>,
    #[arg(long)]
    pub d: Option<usize>,
    #[arg(long)]
    pub m: Option<usize>,
    /// Truth vector file. Without it, a unit vector is drawn from the seed.
    #[arg(long)]
    pub truth: Option<PathBuf>,
    #[arg(long)]
    pub delta: Option<f64>,
    #[arg(long)]
    pub eps: Option<f64>,
    #[arg(long)]
    pub n_trials: Option<usize>,
    #[arg(long)]
    pub horizon: Option<usize>,
    #[arg(long)]
    pub record_every: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// JSON report path.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// CSV path for the surviving-error curve.
    #[arg(long)]
    pub curve: Option<PathBuf>,
}

#[derive(Args, Debug, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepArgs {
    #[arg(long)]
    pub system: Option<PathBuf>,
    #[arg(long)]
    pub d: Option<usize>,
    #[arg(long)]
    pub m: Option<usize>,
    #[arg(long)]
    pub truth: Option<PathBuf>,
    /// Comma-separated shell radii.
    #[arg(long, value_delimiter = ',')]
    pub radii: Option<Vec<f64>>,
    #[arg(long)]
    pub n_states: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args, Debug, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MomentsArgs {
    #[arg(long)]
    pub d: Option<usize>,
    #[arg(long)]
    pub n: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

fn is_false(b: &bool) -> bool {
    !*b
}
