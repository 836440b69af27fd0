use std::path::PathBuf;
use std::process::ExitCode;

use aco_core::output::{load_scenario, run, EmitFlags, RunManifest};
use aco_core::scenario::defaults_toml;
use anyhow::Context;
use clap::{Parser, Subcommand};

/// Cluster-scale coverage optimization simulator.
///
/// Log verbosity follows `RUST_LOG` (default `warn`).
#[derive(Debug, Parser)]
#[command(name = "aco", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Simulate a scenario and write KPI, action-log and optional artifacts.
    Run {
        #[arg(long)]
        scenario: PathBuf,
        #[arg(long, default_value_t = 2, value_parser = clap::value_parser!(u64).range(1..))]
        rounds: u64,
        /// Overrides the scenario's master seed.
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: PathBuf,
        /// Also write RSRP heatmaps (PGM and CSV) per round.
        #[arg(long)]
        emit_heatmaps: bool,
        /// Also write per-cell coverage maps per round.
        #[arg(long)]
        emit_maps: bool,
        /// Also write one Capon spectrum per cell per round.
        #[arg(long)]
        emit_spectra: bool,
        /// Skip the action log.
        #[arg(long)]
        no_action_log: bool,
        /// Warn on unknown scenario keys instead of failing.
        #[arg(long)]
        lenient: bool,
    },
    /// Parse and check a scenario without running it.
    Validate {
        #[arg(long)]
        scenario: PathBuf,
        #[arg(long)]
        lenient: bool,
    },
    /// Print every default as a scenario file.
    Defaults,
}

fn execute(cli: Cli) -> anyhow::Result<()> {
    match cli.command {
        Command::Run {
            scenario,
            rounds,
            seed,
            out,
            emit_heatmaps,
            emit_maps,
            emit_spectra,
            no_action_log,
            lenient,
        } => {
            let mut manifest = RunManifest::new(scenario, out, rounds);
            manifest.seed = seed;
            manifest.lenient = lenient;
            manifest.emit = EmitFlags {
                heatmaps: emit_heatmaps,
                spectra: emit_spectra,
                maps: emit_maps,
                action_log: !no_action_log,
            };
            let summary = run(&manifest).context("run failed")?;
            for w in &summary.warnings {
                eprintln!("warning: {w}");
            }
            print!("{}", summary.table());
            log::info!("wrote {} files to {}", summary.files.len(), manifest.out_dir.display());
        }
        Command::Validate { scenario, lenient } => {
            let (s, warnings) = load_scenario(&scenario, lenient)?;
            for w in &warnings {
                eprintln!("warning: {w}");
            }
            println!(
                "{}: ok ({} cells, {} faults)",
                scenario.display(),
                s.config.network.cells,
                s.faults.len()
            );
        }
        Command::Defaults => print!("{}", defaults_toml()),
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match execute(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
