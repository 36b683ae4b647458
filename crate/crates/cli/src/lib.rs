//! Command-line front end: argument model, subcommands and CSV emission.

pub mod commands;
pub mod config;

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use ctflood_core::airtime::PhyMode;

/// Failure classes, each with its own process exit code.
#[derive(Debug, thiserror::Error, PartialEq)]
pub enum CliError {
    #[error("usage error: {0}")]
    Usage(String),
    #[error("input file error: {0}")]
    Input(String),
    #[error("internal invariant violated: {0}")]
    Invariant(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Input(_) => 3,
            CliError::Invariant(_) => 4,
        }
    }
}

impl From<ctflood_core::Error> for CliError {
    fn from(e: ctflood_core::Error) -> Self {
        use ctflood_core::Error as E;
        match e {
            E::InvalidInput(_) | E::OutOfRange(_) => CliError::Usage(e.to_string()),
            E::Parse { .. } | E::Io(_) | E::MissingSurface(_) | E::MalformedFrame(_) => CliError::Input(e.to_string()),
            _ => CliError::Invariant(e.to_string()),
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "ctflood", version, about = "Concurrent-transmission flooding experiments over Bluetooth 5")]
pub struct Cli {
    /// Directory for output files; CSV goes to stdout when omitted.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// RNG seed; drawn from entropy and reported when omitted.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Plain key=value file; flags take precedence over it.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    #[arg(long, global = true)]
    pub mode: Option<PhyMode>,
    /// Count coded and 802.15.4 frames by the letter of the standards.
    #[arg(long, global = true)]
    pub strict_ble: bool,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Analytic and Monte Carlo BER for one vs. two concurrent transmitters.
    Ber(BerArgs),
    /// PER sweep over power delta, time delta and beat ratio.
    Per(PerArgs),
    /// Air time and slot length per mode.
    Airtime(AirtimeArgs),
    /// Slot-level flooding simulation.
    Flood(FloodArgs),
    /// Monte Carlo link table for the uncoded modes.
    Calibrate(CalibrateArgs),
}

#[derive(Debug, Args, Default)]
pub struct BerArgs {
    #[arg(long)]
    pub from_db: Option<f64>,
    #[arg(long)]
    pub to_db: Option<f64>,
    #[arg(long)]
    pub step_db: Option<f64>,
    /// Simulated bits per point.
    #[arg(long)]
    pub bits: Option<usize>,
    #[arg(long)]
    pub packet_bits: Option<usize>,
    /// Beat ratio of the two-transmitter Monte Carlo run.
    #[arg(long)]
    pub beat_ratio: Option<f64>,
    /// Skip the Monte Carlo columns.
    #[arg(long)]
    pub analytic_only: bool,
}

#[derive(Debug, Args, Default)]
pub struct PerArgs {
    /// Per-sample SNR in dB.
    #[arg(long)]
    pub snr_db: Option<f64>,
    /// E_b/N_0 in dB; overrides --snr-db.
    #[arg(long)]
    pub ebn0_db: Option<f64>,
    #[arg(long)]
    pub packet_bits: Option<usize>,
    #[arg(long)]
    pub replicas: Option<usize>,
    /// Comma-separated power deltas, dB.
    #[arg(long)]
    pub delta_p: Option<String>,
    /// Comma-separated time deltas, fractions of the symbol period.
    #[arg(long)]
    pub delta_t: Option<String>,
    #[arg(long)]
    pub beat_ratios: Option<String>,
    /// Only same-data runs (no different-data rows).
    #[arg(long)]
    pub same_data_only: bool,
}

#[derive(Debug, Args, Default)]
pub struct AirtimeArgs {
    #[arg(long)]
    pub pdu: Option<usize>,
    /// Inclusive PDU range `a:b`, one row per length and mode.
    #[arg(long)]
    pub pdu_sweep: Option<String>,
    #[arg(long)]
    pub guard_us: Option<f64>,
}

#[derive(Debug, Args, Default)]
pub struct FloodArgs {
    /// Edge list CSV `src,dst,gain_db`.
    #[arg(long)]
    pub edges: Option<PathBuf>,
    /// Node table CSV `id,cfo_hz|ppm_seed,is_initiator`.
    #[arg(long)]
    pub nodes: Option<PathBuf>,
    /// Built-in line topology of this many nodes when no files are given.
    #[arg(long)]
    pub line: Option<usize>,
    #[arg(long)]
    pub n_tx: Option<u32>,
    #[arg(long)]
    pub diameter: Option<u32>,
    #[arg(long)]
    pub rounds: Option<u32>,
    #[arg(long)]
    pub round_period: Option<f64>,
    /// Link table CSV; the built-in measured table when omitted.
    #[arg(long)]
    pub link_table: Option<PathBuf>,
    #[arg(long)]
    pub tx_power_dbm: Option<f64>,
    #[arg(long)]
    pub noise_floor_dbm: Option<f64>,
    #[arg(long)]
    pub fading_std_db: Option<f64>,
    #[arg(long)]
    pub ppm_std: Option<f64>,
    /// Comma-separated channel hopping sequence.
    #[arg(long)]
    pub channels: Option<String>,
    #[arg(long)]
    pub resync_rounds: Option<u32>,
    /// Non-initiators boot scanning instead of knowing the schedule.
    #[arg(long)]
    pub boot_scanning: bool,
}

#[derive(Debug, Args, Default)]
pub struct CalibrateArgs {
    #[arg(long)]
    pub delta_p: Option<String>,
    #[arg(long)]
    pub delta_t: Option<String>,
    #[arg(long)]
    pub beat_ratios: Option<String>,
    #[arg(long)]
    pub ebn0_db: Option<f64>,
    #[arg(long)]
    pub packet_bits: Option<usize>,
    #[arg(long)]
    pub replicas: Option<usize>,
}

/// One file produced by a subcommand.
#[derive(Debug, Clone, PartialEq)]
pub struct OutputFile {
    pub name: String,
    pub contents: String,
}

/// Runs a parsed command line, writing to `--out` or returning the files.
pub fn execute(cli: &Cli) -> Result<Vec<OutputFile>, CliError> {
    let files = commands::dispatch(cli)?;
    if let Some(dir) = &cli.out {
        std::fs::create_dir_all(dir).map_err(|e| CliError::Input(format!("cannot create {}: {e}", dir.display())))?;
        for f in &files {
            let path = dir.join(&f.name);
            std::fs::write(&path, &f.contents)
                .map_err(|e| CliError::Input(format!("cannot write {}: {e}", path.display())))?;
        }
    }
    Ok(files)
}
