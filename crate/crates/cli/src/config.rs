use std::path::PathBuf;

use clap::{ArgGroup, Args, Parser, Subcommand, ValueEnum};
use ladderwalk::{ModelParams, TrapKind};
use serde::Serialize;

#[derive(Debug, Parser)]
#[command(name = "ladderwalk", version, about = "Biased random walk on a random ladder spanning tree")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Args, Serialize)]
#[command(group(ArgGroup::new("rung").args(["c", "alpha"]).multiple(false)))]
pub struct ModelArgs {
    /// Rung weight c > 0 (alpha is derived)
    #[arg(long)]
    pub c: Option<f64>,
    /// Gap parameter alpha in (0,1), instead of --c [default: c = 1]
    #[arg(long)]
    pub alpha: Option<f64>,
    /// Root seed
    #[arg(long, env = "LADDERWALK_SEED", default_value_t = 1)]
    pub seed: u64,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct RunArgs {
    /// Output file; stdout when omitted
    #[arg(long, short)]
    pub output: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = Format::Csv)]
    pub format: Format,
    /// Worker threads [default: available parallelism]
    #[arg(long)]
    pub jobs: Option<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Csv,
    Json,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
pub enum KindArg {
    A,
    B,
    C,
    All,
}

impl KindArg {
    pub fn kinds(self) -> Vec<TrapKind> {
        match self {
            KindArg::A => vec![TrapKind::A],
            KindArg::B => vec![TrapKind::B],
            KindArg::C => vec![TrapKind::C],
            KindArg::All => vec![TrapKind::A, TrapKind::B, TrapKind::C],
        }
    }
}

#[derive(Debug, Clone, Subcommand, Serialize)]
#[serde(tag = "command", rename_all = "kebab-case")]
pub enum Command {
    /// Speed against bias: closed form and Monte Carlo on a beta grid
    SpeedCurve {
        #[command(flatten)]
        model: ModelArgs,
        #[arg(long, default_value_t = 1.01)]
        beta_min: f64,
        #[arg(long, default_value_t = 3.7)]
        beta_max: f64,
        #[arg(long, default_value_t = 50)]
        beta_count: usize,
        #[arg(long, default_value_t = 100_000)]
        steps: u64,
        #[arg(long, default_value_t = 500)]
        replicas: u64,
        #[command(flatten)]
        run: RunArgs,
    },
    /// Closed-form speed against alpha at fixed bias
    SpeedVsAlpha {
        #[arg(long)]
        beta: f64,
        #[arg(long, default_value_t = 0.001)]
        alpha_min: f64,
        #[arg(long, default_value_t = 0.999)]
        alpha_max: f64,
        #[arg(long, default_value_t = 200)]
        alpha_count: usize,
        #[command(flatten)]
        run: RunArgs,
    },
    /// Invariant suite with a PASS/FAIL table; exit 3 if any check fails
    Verify {
        #[command(flatten)]
        model: ModelArgs,
        #[arg(long)]
        beta: f64,
        /// Reduced Monte Carlo sizes
        #[arg(long)]
        quick: bool,
        #[command(flatten)]
        run: RunArgs,
    },
    /// Endpoint sample for CLT histograms (quenched at beta = 1, annealed otherwise)
    CltHist {
        #[command(flatten)]
        model: ModelArgs,
        #[arg(long)]
        beta: f64,
        #[arg(long, default_value_t = 100_000)]
        steps: u64,
        #[arg(long, default_value_t = 1_000)]
        replicas: u64,
        #[command(flatten)]
        run: RunArgs,
    },
    /// Mean trap times: formula, linear solve and simulation
    TrapTimes {
        #[arg(long)]
        beta: f64,
        #[arg(long, value_enum, default_value_t = KindArg::All)]
        kind: KindArg,
        /// Largest arm length
        #[arg(long, default_value_t = 4)]
        max_arm: u32,
        #[arg(long, default_value_t = 10_000)]
        samples: u64,
        #[arg(long, env = "LADDERWALK_SEED", default_value_t = 1)]
        seed: u64,
        #[command(flatten)]
        run: RunArgs,
    },
    /// Text dump of a sampled tree window
    SampleTree {
        #[command(flatten)]
        model: ModelArgs,
        /// Blocks on each side of the origin
        #[arg(long, default_value_t = 20)]
        blocks: usize,
        #[command(flatten)]
        run: RunArgs,
    },
}

#[derive(Debug)]
pub struct UsageError(pub String);

impl ModelArgs {
    pub fn params(&self, beta: f64) -> Result<ModelParams, UsageError> {
        let p = match (self.c, self.alpha) {
            (Some(_), Some(_)) => return Err(UsageError("--c and --alpha are mutually exclusive".into())),
            (None, Some(a)) => ModelParams::from_alpha(a, beta, self.seed),
            (Some(c), None) => ModelParams::from_c(c, beta, self.seed),
            (None, None) => ModelParams::from_c(1.0, beta, self.seed),
        };
        p.map_err(|e| UsageError(format!("{}: {e}", self.flag_name())))
    }

    fn flag_name(&self) -> &'static str {
        if self.alpha.is_some() {
            "--alpha"
        } else {
            "--c/--beta"
        }
    }
}

fn grid(flag: &str, min: f64, max: f64, count: usize) -> Result<Vec<f64>, UsageError> {
    if count < 2 {
        return Err(UsageError(format!("--{flag}-count must be at least 2")));
    }
    if !(min.is_finite() && max.is_finite() && min < max) {
        return Err(UsageError(format!("--{flag}-min must be below --{flag}-max")));
    }
    Ok((0..count).map(|i| min + (max - min) * i as f64 / (count - 1) as f64).collect())
}

pub fn beta_grid(min: f64, max: f64, count: usize) -> Result<Vec<f64>, UsageError> {
    if min < 1.0 {
        return Err(UsageError("--beta-min must be at least 1".into()));
    }
    grid("beta", min, max, count)
}

pub fn alpha_grid(min: f64, max: f64, count: usize) -> Result<Vec<f64>, UsageError> {
    if !(min > 0.0 && max < 1.0) {
        return Err(UsageError("--alpha-min and --alpha-max must lie in (0,1)".into()));
    }
    grid("alpha", min, max, count)
}

impl Command {
    pub fn run_args(&self) -> &RunArgs {
        match self {
            Command::SpeedCurve { run, .. }
            | Command::SpeedVsAlpha { run, .. }
            | Command::Verify { run, .. }
            | Command::CltHist { run, .. }
            | Command::TrapTimes { run, .. }
            | Command::SampleTree { run, .. } => run,
        }
    }
}
