use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::Parser;
use ito_bench::config::{Experiment, Overrides, Preset, RunConfig};

/// Benchmarks and parameter sweeps for ITO propagation and Krotov control.
#[derive(Debug, Parser)]
#[command(version)]
struct Cli {
    #[command(subcommand)]
    experiment: Experiment,
    /// TOML config; omitted keys take the preset defaults
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory [default: runs/<experiment>]
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Worker threads; 0 uses every core
    #[arg(long, global = true, default_value_t = 0)]
    threads: usize,
    /// Master seed (overrides the config)
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Default parameter set (overrides the config)
    #[arg(long, global = true, value_enum)]
    preset: Option<Preset>,
}

fn main_inner() -> Result<bool> {
    let cli = Cli::parse();
    let text = match &cli.config {
        Some(p) => std::fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?,
        None => String::new(),
    };
    let overrides = Overrides {
        preset: cli.preset,
        seed: cli.seed,
    };
    let cfg = RunConfig::resolve(cli.experiment, &text, overrides)?;
    let out = cli
        .out
        .unwrap_or_else(|| PathBuf::from("runs").join(cli.experiment.name()));
    let m = ito_bench::execute(&cfg, &out, cli.threads)?;
    eprintln!(
        "{}: {} cells, {} failed, {:.1} s -> {}",
        m.experiment,
        m.cells,
        m.failed_cells,
        m.wall_time_s,
        out.display()
    );
    if let Some(e) = &m.error {
        eprintln!("error: {e}");
    }
    Ok(m.error.is_none())
}

fn main() -> ExitCode {
    match main_inner() {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::FAILURE,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
