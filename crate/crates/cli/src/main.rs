//! `multiplex-cli`: tables and checks for multiplex network diffusion.

mod commands;
mod input;
mod output;
mod verify;

use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Result;
use clap::{Parser, Subcommand};

#[derive(Parser, Debug)]
#[command(name = "multiplex-cli", version, about = "Multiplex network diffusion: measures, simulations and checks")]
struct Cli {
    /// Directory for output tables and the run manifest. Replaced as a whole
    /// once every file is written. Tables go to stdout either way.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Suppress table output on stdout.
    #[arg(long, short, global = true)]
    quiet: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Per-layer degree statistics and cross-layer correlations.
    Stats(commands::StatsArgs),
    /// Multiplexing scores and the total multiplexity index.
    Mpx(commands::MpxArgs),
    /// Diffusion centrality of one layer.
    Centrality(commands::CentralityArgs),
    /// Principal-component backbone of a village's layers.
    Backbone(commands::BackboneArgs),
    /// Threshold SIS contagion on a multilayer graph.
    Simulate(commands::SimulateArgs),
    /// Paired more- versus less-multiplexed contagion over a (q, delta) grid.
    Grid(commands::GridArgs),
    /// Mean-field steady state of a neighbor-profile distribution.
    Meanfield(commands::MeanfieldArgs),
    /// Numerical checks of the multiplexing orderings.
    Verify(verify::VerifyArgs),
    /// Synthetic seeding experiments analysed with preconditioned LASSO.
    SynthRct(commands::SynthRctArgs),
}

fn run(cli: Cli) -> Result<ExitCode> {
    let report = match cli.command {
        Command::Stats(a) => commands::stats(a)?,
        Command::Mpx(a) => commands::mpx(a)?,
        Command::Centrality(a) => commands::centrality(a)?,
        Command::Backbone(a) => commands::backbone_cmd(a)?,
        Command::Simulate(a) => commands::simulate_cmd(a)?,
        Command::Grid(a) => commands::grid(a)?,
        Command::Meanfield(a) => commands::meanfield(a)?,
        Command::Verify(a) => verify::verify(a)?,
        Command::SynthRct(a) => commands::synth_rct_cmd(a)?,
    };
    if !cli.quiet {
        print!("{}", report.stdout);
    }
    if let Some(dir) = &cli.out {
        output::commit(&report, dir)?;
        eprintln!("wrote {} files and manifest.txt to {}", report.files.len(), dir.display());
    }
    if report.failures > 0 {
        eprintln!("error: {} checks failed", report.failures);
        return Ok(ExitCode::FAILURE);
    }
    Ok(ExitCode::SUCCESS)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match run(Cli::parse()) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
