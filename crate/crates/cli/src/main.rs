//! `dess`: bound tables, optimizer sweeps, figure data, pilot campaigns,
//! the acceptance suite and the game service from one binary.

mod commands;
mod output;
mod serve;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Debug, Parser)]
#[command(name = "dess", version, about = "Speed/accuracy tradeoffs in delayed, rate-limited control loops")]
pub struct Cli {
    #[command(flatten)]
    pub common: Common,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Args)]
pub struct Common {
    /// Base seed for everything random.
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,
    /// Directory for output files; tables go to stdout when absent.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    #[arg(long, global = true, value_enum, default_value_t = Format::Csv)]
    pub format: Format,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Csv,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Worst-case and mean-square bounds over a (T, R) grid.
    Bounds(commands::BoundsArgs),
    /// Optimal signaling delay across net delays.
    Optimize(commands::OptimizeArgs),
    /// Diverse versus uniform layered compositions and their frontiers.
    Dess(commands::DessArgs),
    /// Run an adversary against the optimal single-loop or layered controller.
    Simulate(commands::SimulateArgs),
    /// Simulated-pilot campaigns.
    Experiment(commands::ExperimentArgs),
    /// Data behind one of the plots.
    Figure(commands::FigureArgs),
    /// WebSocket game service.
    Serve(serve::ServeArgs),
    /// Re-run a session log and check it reproduces bit for bit.
    Replay(commands::ReplayArgs),
    /// Export a stored session.
    Export(commands::ExportArgs),
    /// Run the acceptance suite; exits non-zero if any criterion fails.
    Accept(commands::AcceptArgs),
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match commands::run(cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::FAILURE,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
