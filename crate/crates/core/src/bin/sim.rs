//! Command-line front end. Exit codes: 0 success, 2 configuration error,
//! 3 I/O error.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use linksim::harness::{run_scenario, Scenario, SimulationConfig};
use linksim::Error;

#[derive(Parser)]
#[command(
    name = "sim",
    version,
    about = "Link-level simulator for short-range low-latency radio links"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Bit error rate versus Eb/N0 or SNR.
    BerSweep(RunArgs),
    /// Packet error rate versus Eb/N0 or SNR.
    PerSweep(RunArgs),
    /// Mux and dual-modem discrete-event simulation.
    MuxSim(RunArgs),
    /// Echo ranging trials.
    Ranging(RunArgs),
    /// Per-stage latency of one codeword.
    LatencyBudget(RunArgs),
}

#[derive(Args)]
struct RunArgs {
    /// JSON configuration file.
    #[arg(long)]
    config: PathBuf,
    /// Overrides the master seed in the config.
    #[arg(long)]
    seed: Option<u64>,
    /// Output CSV path. Defaults to the config's `output`, then `<scenario>.csv`.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Worker threads for Monte Carlo trials.
    #[arg(long)]
    threads: Option<usize>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (scenario, args) = match cli.command {
        Command::BerSweep(a) => (Scenario::BerSweep, a),
        Command::PerSweep(a) => (Scenario::PerSweep, a),
        Command::MuxSim(a) => (Scenario::MuxSim, a),
        Command::Ranging(a) => (Scenario::Ranging, a),
        Command::LatencyBudget(a) => (Scenario::LatencyBudget, a),
    };
    match run(scenario, args) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("sim: {e}");
            match e {
                Error::Io { .. } => ExitCode::from(3),
                _ => ExitCode::from(2),
            }
        }
    }
}

fn run(scenario: Scenario, args: RunArgs) -> linksim::Result<()> {
    let mut cfg = SimulationConfig::load(&args.config)?;
    if let Some(seed) = args.seed {
        cfg.seed = seed;
    }
    let out = args
        .out
        .or_else(|| cfg.output.clone())
        .unwrap_or_else(|| PathBuf::from(format!("{scenario}.csv")));
    let outcome = run_scenario(scenario, &cfg, &out, args.threads)?;
    for p in &outcome.outputs {
        eprintln!("wrote {}", p.display());
    }
    eprintln!("wrote {}", outcome.manifest.display());
    eprintln!("{}", outcome.summary);
    Ok(())
}
