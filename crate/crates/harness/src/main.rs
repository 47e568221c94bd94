use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use sdentropy_harness::config::parse_list;
use sdentropy_harness::output::write_meta;
use sdentropy_harness::{
    run_experiment, sweep_convergence, CsvSink, ExperimentConfig, HarnessError, Registry, RunOptions, SweepParam,
};

#[derive(Debug, Parser)]
#[command(name = "sdentropy", version, about = "Entropy and mutual information of large Gaussian mixtures")]
struct Cli {
    /// Worker threads (1 forces serial execution).
    #[arg(long, global = true, env = "SDENTROPY_THREADS")]
    threads: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run every configured method at every SNR point.
    Run {
        #[arg(long)]
        config: PathBuf,
        /// Output CSV; defaults to the config's `output`.
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
        /// Comma-separated SNR list in dB, replacing the config's.
        #[arg(long, allow_hyphen_values = true)]
        snr_db: Option<String>,
        /// Comma-separated method names to keep.
        #[arg(long)]
        method: Option<String>,
        /// Record per-row wall time (makes output non-reproducible).
        #[arg(long)]
        wall_clock: bool,
    },
    /// Bounds along a grid of alpha or K at the config's single SNR point.
    Sweep {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        param: SweepParam,
        /// Comma-separated grid; `inf` allowed.
        #[arg(long)]
        grid: String,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long, allow_hyphen_values = true)]
        snr_db: Option<String>,
    },
}

fn output_path(out: Option<PathBuf>, config: &ExperimentConfig) -> Result<PathBuf, HarnessError> {
    out.or_else(|| config.output.clone())
        .ok_or_else(|| HarnessError::Config("no output path: pass --out or set `output`".into()))
}

fn snr_override(s: Option<String>) -> Result<Option<Vec<f64>>, HarnessError> {
    s.map(|s| parse_list(&s)).transpose()
}

fn execute(cli: Cli) -> Result<(), HarnessError> {
    let registry = Registry::default();
    match cli.command {
        Command::Run {
            config,
            out,
            seed,
            snr_db,
            method,
            wall_clock,
        } => {
            let cfg = ExperimentConfig::load(&config)?;
            let opts = RunOptions {
                threads: cli.threads,
                seed,
                snr_db: snr_override(snr_db)?,
                methods: method.map(|m| m.split(',').map(|s| s.trim().to_string()).filter(|s| !s.is_empty()).collect()),
                wall_clock,
            };
            let out = output_path(out, &cfg)?;
            let mut sink = CsvSink::create(&out)?;
            let rows = run_experiment(&cfg, &registry, &opts, &mut |r| sink.write(r))?;
            write_meta(&out, &opts.apply(&cfg))?;
            eprintln!("wrote {} rows to {}", rows.len(), out.display());
        }
        Command::Sweep {
            config,
            param,
            grid,
            out,
            seed,
            snr_db,
        } => {
            let cfg = ExperimentConfig::load(&config)?;
            let opts = RunOptions {
                threads: cli.threads,
                seed,
                snr_db: snr_override(snr_db)?,
                ..RunOptions::default()
            };
            let grid = parse_list(&grid)?;
            let out = output_path(out, &cfg)?;
            let mut sink = CsvSink::create(&out)?;
            let rows = sweep_convergence(&cfg, param, &grid, &opts, &mut |r| sink.write(r))?;
            write_meta(&out, &opts.apply(&cfg))?;
            eprintln!("wrote {} rows to {}", rows.len(), out.display());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
