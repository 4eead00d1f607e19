//! Reproducible sweeps over the ITO propagator, Krotov optimization and the
//! qudit gate analysis. Every run writes its resolved config, CSV tables
//! with a metadata header, and a JSON manifest into one directory.

pub mod config;
pub mod experiments;
pub mod output;
pub mod sweep;

use std::path::Path;
use std::time::Instant;

use anyhow::{Context, Result};

use config::RunConfig;
use output::{write_manifest, write_table, Header, Manifest, CODE_VERSION};

pub const CONFIG_FILE: &str = "config.toml";

/// Runs `cfg` on `threads` workers (0: all cores) and writes everything into
/// `out_dir`. A failure inside the experiment is reported in the manifest,
/// with whatever tables were obtained; only I/O and setup errors abort.
pub fn execute(cfg: &RunConfig, out_dir: &Path, threads: usize) -> Result<Manifest> {
    std::fs::create_dir_all(out_dir).with_context(|| format!("creating {}", out_dir.display()))?;
    std::fs::write(out_dir.join(CONFIG_FILE), cfg.to_toml()).context("writing the resolved config")?;
    let pool = sweep::pool(threads)?;
    let start = Instant::now();
    let report = experiments::run(cfg, &pool).unwrap_or_else(|e| experiments::Report {
        error: Some(format!("{e:#}")),
        ..Default::default()
    });
    let header = Header::of(cfg);
    let mut outputs = Vec::new();
    for t in &report.tables {
        let path = write_table(out_dir, &header, t)?;
        outputs.push(path.file_name().expect("file path").to_string_lossy().into_owned());
    }
    let manifest = Manifest {
        experiment: header.experiment,
        preset: format!("{:?}", cfg.preset).to_lowercase(),
        seed: cfg.seed,
        config_hash: header.config_hash,
        code_version: CODE_VERSION.into(),
        threads: pool.current_num_threads(),
        config_file: CONFIG_FILE.into(),
        outputs,
        cells: report.cells,
        failed_cells: report.failed,
        wall_time_s: start.elapsed().as_secs_f64(),
        status: if report.error.is_some() { "error" } else { "ok" }.into(),
        error: report.error,
    };
    write_manifest(out_dir, &manifest)?;
    Ok(manifest)
}
