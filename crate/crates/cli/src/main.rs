mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use config::CliConfig;

/// Traffic load estimation for sleeping small base stations.
#[derive(Debug, Parser)]
#[command(name = "sbs-load", version)]
struct Cli {
    /// TOML configuration; every key is optional.
    #[arg(long, global = true, value_name = "PATH")]
    config: Option<PathBuf>,
    /// Overrides the configured seed.
    #[arg(long, global = true, value_name = "U64")]
    seed: Option<u64>,
    /// Overrides the configured output directory.
    #[arg(long, global = true, value_name = "DIR")]
    out: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Generate a synthetic grid and write it as CDR CSV.
    Synth {
        #[arg(long, default_value = "synthetic.csv")]
        file: String,
    },
    /// Estimate the load of sleeping target cells and score it against the withheld truth.
    Estimate {
        #[arg(long, value_enum)]
        method: Method,
        /// Comma-separated cell ids.
        #[arg(long, value_delimiter = ',', required = true)]
        targets: Vec<u32>,
        /// Time-of-day slot.
        #[arg(long)]
        slot: usize,
        /// Neighbor count N for spatial methods.
        #[arg(long, default_value_t = 10)]
        neighbors: usize,
        /// Weighting exponent n for idw and random-idw.
        #[arg(long, default_value_t = 3.0)]
        exponent: f64,
        /// MLC layer count.
        #[arg(long, default_value_t = 7)]
        layers: usize,
        /// LSTM input window.
        #[arg(long, default_value_t = 12)]
        window: usize,
        /// Save each trained LSTM as JSON in the output directory.
        #[arg(long)]
        save_model: bool,
    },
    /// Run one experiment sweep and write its CSVs.
    Experiment {
        #[arg(value_enum)]
        figure: Figure,
    },
    /// Network power for the loads in a `role,load` CSV.
    Power {
        #[arg(long, value_name = "PATH")]
        loads: PathBuf,
        /// Also write power.csv to the output directory.
        #[arg(long)]
        csv: bool,
    },
    /// Ingest a CDR file and print a summary.
    IngestCheck {
        #[arg(long, value_name = "PATH")]
        input: PathBuf,
    },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Method {
    Mean,
    Idw,
    Random,
    RandomIdw,
    Mlc,
    Lstm,
}

impl Method {
    pub fn name(self) -> &'static str {
        match self {
            Method::Mean => "mean",
            Method::Idw => "idw",
            Method::Random => "random",
            Method::RandomIdw => "random-idw",
            Method::Mlc => "mlc",
            Method::Lstm => "lstm",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Figure {
    Fig2,
    Fig3,
    Fig7,
}

fn run(cli: Cli) -> anyhow::Result<()> {
    let cfg = CliConfig::load(cli.config.as_deref())?.resolve(cli.seed, cli.out)?;
    match cli.command {
        Command::Synth { file } => commands::synth(&cfg, &file),
        Command::Estimate {
            method,
            targets,
            slot,
            neighbors,
            exponent,
            layers,
            window,
            save_model,
        } => commands::estimate(
            &cfg,
            &commands::EstimateArgs {
                method,
                targets,
                slot,
                neighbors,
                exponent,
                layers,
                window,
                save_model,
            },
        ),
        Command::Experiment { figure } => commands::experiment(&cfg, figure),
        Command::Power { loads, csv } => commands::power(&cfg, &loads, csv),
        Command::IngestCheck { input } => commands::ingest_check(&cfg, &input),
    }
}

fn main() -> ExitCode {
    // clap exits with status 2 on usage errors
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
