//! `dpsqkd`: reproduce key-creation-efficiency sweeps, Monte Carlo sessions,
//! secure-rate reports and source fits from the command line.
//!
//! Exit codes: 0 success, 2 configuration or parse error, 3 I/O error,
//! 4 numeric or fit failure.

pub mod commands;
pub mod config;
pub mod error;
pub mod output;

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

pub use config::RunConfig;
pub use error::{CliError, CliResult};

#[derive(Debug, Parser)]
#[command(name = "dpsqkd", version, about = "DPS-QKD simulation toolkit")]
pub struct Cli {
    #[command(flatten)]
    pub global: GlobalArgs,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct GlobalArgs {
    /// TOML run configuration.
    #[arg(long, global = true, value_name = "PATH", conflicts_with = "preset")]
    pub config: Option<PathBuf>,
    /// Built-in configuration: paper-field-test (default) or fig1-theory.
    #[arg(long, global = true, value_name = "NAME")]
    pub preset: Option<String>,
    /// Overrides `run.seed`.
    #[arg(long, global = true, value_name = "U64")]
    pub seed: Option<u64>,
    /// Overrides `run.n_trials`.
    #[arg(long, global = true, value_name = "N")]
    pub trials: Option<u64>,
    /// Output file (standard output when omitted). Overrides `run.out`.
    #[arg(long, global = true, value_name = "PATH")]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Analytic KCE and intrinsic QBER per envelope and bin count, as CSV.
    KceSweep {
        /// Comma-separated bin counts; an empty list writes the header only.
        #[arg(long, default_value = "2,3,4,5,10,20,50,100", value_name = "LIST")]
        n_bins: String,
        /// Comma-separated envelope kinds, `all`, or `config` for the
        /// configured envelope and span.
        #[arg(long, default_value = "all", value_name = "LIST")]
        envelopes: String,
    },
    /// Monte Carlo protocol session; prints SessionStats as JSON.
    Simulate {
        /// Also write every detection as CSV. Overrides `run.detections_csv`.
        #[arg(long, value_name = "PATH")]
        detections: Option<PathBuf>,
    },
    /// Secure key rates from a `simulate` JSON (or any JSON with
    /// `sifted_rate_bps` and `qber`).
    SecureRate {
        #[arg(value_name = "STATS_JSON")]
        stats: PathBuf,
    },
    /// Fit a coincidence histogram (CSV `tau_ns,counts`) with the
    /// double-exponential correlation function.
    FitSource {
        #[arg(value_name = "CSV")]
        histogram: PathBuf,
    },
}

impl GlobalArgs {
    /// Loads the configuration and applies flag overrides.
    pub fn resolve(&self) -> CliResult<RunConfig> {
        let mut config = match (&self.config, &self.preset) {
            (Some(path), _) => RunConfig::load(path)?,
            (None, Some(name)) => RunConfig::preset(name)?,
            (None, None) => config::default_config(),
        };
        if let Some(seed) = self.seed {
            config.run.seed = seed;
        }
        if let Some(trials) = self.trials {
            config.run.n_trials = trials;
        }
        if let Some(out) = &self.out {
            config.run.out = Some(out.clone());
        }
        Ok(config)
    }
}

pub fn run(cli: Cli) -> CliResult<()> {
    let config = cli.global.resolve()?;
    match cli.command {
        Command::KceSweep { n_bins, envelopes } => commands::kce_sweep(&config, &n_bins, &envelopes),
        Command::Simulate { detections } => commands::simulate(&config, detections),
        Command::SecureRate { stats } => commands::secure_rate(&config, &stats),
        Command::FitSource { histogram } => commands::fit_source(&config, &histogram),
    }
}
