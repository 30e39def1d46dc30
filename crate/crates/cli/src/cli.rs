use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::output::Format;

#[derive(Debug, Parser)]
#[command(
    name = "dqps",
    version,
    about = "Secure key rates, tagging probabilities and Monte Carlo simulations for DQPS QKD"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Key rate at one operating point, or at the optimal mean photon number.
    Keyrate(KeyrateArgs),
    /// Optimal key rate over a grid of block sizes and channel losses.
    Sweep(SweepArgs),
    /// Photon-level simulation of the protocol.
    Simulate(SimulateArgs),
    /// Tagging probability, closed form and brute-force oracle.
    Rtag(RtagArgs),
    /// Off-line coincidence calibration of the source.
    Calibrate(CalibrateArgs),
}

impl Command {
    pub fn common(&self) -> &CommonArgs {
        match self {
            Self::Keyrate(a) => &a.common,
            Self::Sweep(a) => &a.common,
            Self::Simulate(a) => &a.common,
            Self::Rtag(a) => &a.common,
            Self::Calibrate(a) => &a.common,
        }
    }
}

#[derive(Debug, Args)]
pub struct CommonArgs {
    /// Output format [default: csv for sweep, jsonl otherwise].
    #[arg(long, value_enum)]
    pub format: Option<Format>,
    /// Output file; relative paths resolve against $DQPS_OUTPUT_DIR when set.
    #[arg(long)]
    pub output: Option<PathBuf>,
    /// Worker threads for parallel sections.
    #[arg(long)]
    pub threads: Option<usize>,
    /// Flat key=value file supplying default flag values.
    #[arg(long)]
    pub config: Option<PathBuf>,
}

#[derive(Debug, Args)]
#[group(required = true, multiple = false)]
pub struct EtaArg {
    /// Channel transmission including detector efficiency.
    #[arg(long)]
    pub eta: Option<f64>,
    /// Channel loss in dB, eta = 10^(-dB/10).
    #[arg(long = "eta-db")]
    pub eta_db: Option<f64>,
}

impl EtaArg {
    pub fn value(&self) -> f64 {
        match (self.eta, self.eta_db) {
            (Some(eta), _) => eta,
            (None, Some(db)) => dqps_core::optimizer::db_to_eta(db),
            (None, None) => unreachable!("clap enforces the group"),
        }
    }
}

#[derive(Debug, Args)]
#[group(required = true, multiple = false)]
pub struct MuChoice {
    #[arg(long)]
    pub mu: Option<f64>,
    /// Maximize the rate over mu.
    #[arg(long)]
    pub optimize: bool,
}

#[derive(Debug, Args)]
#[command(args_override_self = true, allow_negative_numbers = true)]
pub struct KeyrateArgs {
    /// Pulses per block.
    #[arg(long = "L")]
    pub block_len: usize,
    #[command(flatten)]
    pub eta: EtaArg,
    /// Bit error rate in both bases.
    #[arg(long = "error-rate", default_value_t = 0.03)]
    pub error_rate: f64,
    #[command(flatten)]
    pub mu: MuChoice,
    /// Probability of the data basis.
    #[arg(long, default_value_t = 1.0)]
    pub p0: f64,
    /// Error-correction inefficiency relative to the Shannon limit.
    #[arg(long, default_value_t = 1.0)]
    pub fec: f64,
    #[command(flatten)]
    pub common: CommonArgs,
}

#[derive(Debug, Args)]
#[command(args_override_self = true, allow_negative_numbers = true)]
pub struct SweepArgs {
    /// Comma-separated block sizes.
    #[arg(long = "L-list", value_delimiter = ',', required = true)]
    pub block_sizes: Vec<usize>,
    /// Loss grid in dB as lo:hi:step.
    #[arg(long = "eta-db-range")]
    pub eta_db_range: String,
    #[arg(long = "error-rate", default_value_t = 0.03)]
    pub error_rate: f64,
    #[arg(long, default_value_t = 1.0)]
    pub p0: f64,
    #[arg(long, default_value_t = 1.0)]
    pub fec: f64,
    #[command(flatten)]
    pub common: CommonArgs,
}

#[derive(Debug, Args)]
#[command(args_override_self = true, allow_negative_numbers = true)]
pub struct SimulateArgs {
    #[arg(long = "L")]
    pub block_len: usize,
    #[arg(long)]
    pub mu: f64,
    #[command(flatten)]
    pub eta: EtaArg,
    /// Number of blocks sent.
    #[arg(long)]
    pub blocks: u64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Probability of the check basis.
    #[arg(long, default_value_t = 0.5)]
    pub p1: f64,
    /// Dark-click probability per detector and valid timing.
    #[arg(long = "p-dark", default_value_t = 0.0)]
    pub p_dark: f64,
    /// Interferometer misalignment phase in radians.
    #[arg(long, conflicts_with = "bitflip")]
    pub delta: Option<f64>,
    /// Probability of flipping Bob's bit after detection.
    #[arg(long)]
    pub bitflip: Option<f64>,
    #[command(flatten)]
    pub common: CommonArgs,
}

#[derive(Debug, Args)]
#[command(args_override_self = true, allow_negative_numbers = true)]
pub struct RtagArgs {
    #[arg(long = "L", required_unless_present = "source")]
    pub block_len: Option<usize>,
    #[arg(long, required_unless_present = "source")]
    pub mu: Option<f64>,
    /// Also run the brute-force enumeration.
    #[arg(long)]
    pub oracle: bool,
    /// Largest photon number per pulse enumerated by the oracle.
    #[arg(long, default_value_t = dqps_core::tagging::DEFAULT_PHOTON_CAP)]
    pub cap: u32,
    /// Largest number of configurations the oracle may enumerate.
    #[arg(long = "work-limit", default_value_t = 1e8)]
    pub work_limit: f64,
    /// Photon-number distribution file, one "m_0 ... m_{L-1} probability" per line.
    #[arg(long, conflicts_with_all = ["mu", "oracle"])]
    pub source: Option<PathBuf>,
    #[command(flatten)]
    pub common: CommonArgs,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum CalibModeArg {
    #[value(name = "2det")]
    TwoDetector,
    #[value(name = "3det")]
    ThreeDetector,
}

#[derive(Debug, Args)]
#[command(args_override_self = true, allow_negative_numbers = true)]
pub struct CalibrateArgs {
    #[arg(long, value_enum)]
    pub mode: CalibModeArg,
    #[arg(long = "L", required_unless_present = "source")]
    pub block_len: Option<usize>,
    #[arg(long, default_value_t = 0.0)]
    pub mu: f64,
    /// Number of test trains.
    #[arg(long = "n-test", alias = "trains", default_value_t = 1_000_000)]
    pub n_test: u64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Beam-splitter transmittance (2det).
    #[arg(long, default_value_t = 0.5)]
    pub t: f64,
    /// Beam-splitter reflectance (2det) [default: 1 - t].
    #[arg(long)]
    pub r: Option<f64>,
    /// Absorber transmittance (3det).
    #[arg(long = "abs", default_value_t = 1.0)]
    pub absorber: f64,
    /// First splitter transmittance (3det); 1 - t1 goes to detector 3.
    #[arg(long, default_value_t = 2.0 / 3.0)]
    pub t1: f64,
    /// Second splitter transmittance (3det); 1 - t2 goes to detector 2.
    #[arg(long, default_value_t = 0.5)]
    pub t2: f64,
    #[arg(long, default_value_t = 1.0)]
    pub eff1: f64,
    #[arg(long, default_value_t = 1.0)]
    pub eff2: f64,
    #[arg(long, default_value_t = 1.0)]
    pub eff3: f64,
    /// Declared lower bound on the detector-1 path efficiency [default: exact].
    #[arg(long)]
    pub eta1: Option<f64>,
    #[arg(long)]
    pub eta2: Option<f64>,
    #[arg(long)]
    pub eta3: Option<f64>,
    #[arg(long = "eta-abs")]
    pub eta_abs: Option<f64>,
    /// Pulse slots a detector stays blind after a click (3det).
    #[arg(long = "dead-time", default_value_t = 1)]
    pub dead_time: usize,
    /// Photon-number distribution file (2det only).
    #[arg(long)]
    pub source: Option<PathBuf>,
    /// Write a per-train event log to this file.
    #[arg(long)]
    pub events: Option<PathBuf>,
    #[command(flatten)]
    pub common: CommonArgs,
}
