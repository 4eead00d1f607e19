//! Qudit population dynamics under the Pythagorean drive in several frames.
//! Populations are frame independent, so every form is compared with the
//! first one on the shared sampling grid.

use std::time::Instant;

use anyhow::Result;
use ito_core::generator::Generator;
use ito_core::models::{interaction_generator, population_mismatch};
use ito_core::propagators::{propagate, Observers, Trajectory};
use ito_core::quantum::QuantumState;
use rayon::ThreadPool;

use super::{qudit_lab, Report};
use crate::config::{DynamicsConfig, Frame};
use crate::output::{num, Table};
use crate::sweep::{run_cells, status};

#[derive(Debug)]
pub struct Run {
    pub form: Frame,
    pub result: Result<Trajectory>,
    pub wall_time: f64,
}

fn dynamics(cfg: &DynamicsConfig, form: Frame) -> Result<(Generator, QuantumState)> {
    let model = cfg.model.model();
    let drive = model.drive();
    let psi0 = QuantumState::basis(model.n_levels, 0);
    Ok(match form {
        Frame::Lab => return qudit_lab(&model, cfg.dissipative),
        Frame::Interaction => (interaction_generator(&model, &drive, false)?, psi0),
        Frame::Rwa => (interaction_generator(&model, &drive, true)?, psi0),
        Frame::Ideal => (
            Generator::schrodinger(&drive.h_inf(model.n_levels).matrix, Vec::new())?,
            psi0,
        ),
    })
}

pub fn trajectory(cfg: &DynamicsConfig, form: Frame) -> Result<Trajectory> {
    let (g, psi0) = dynamics(cfg, form)?;
    let p = &cfg.propagator;
    let obs = Observers {
        populations: true,
        every: p.n_t / cfg.samples,
        ..Observers::default()
    };
    Ok(propagate(&g, 0.0, cfg.t_final, p.n_t, p.method(), &psi0, &obs)?)
}

pub fn run(cfg: &DynamicsConfig, pool: &ThreadPool) -> Vec<Run> {
    run_cells(pool, cfg.forms.len(), |i| {
        let start = Instant::now();
        let result = trajectory(cfg, cfg.forms[i]);
        Run {
            form: cfg.forms[i],
            result,
            wall_time: start.elapsed().as_secs_f64(),
        }
    })
}

/// `(mean, max)` population mismatch of `run` against `reference`.
pub fn mismatch(reference: &Trajectory, run: &Trajectory) -> Result<(f64, f64)> {
    let (per_time, mean) = population_mismatch(&reference.populations, &run.populations)?;
    Ok((mean, per_time.iter().fold(0.0, |a: f64, &b| a.max(b))))
}

pub fn report(cfg: &DynamicsConfig, runs: &[Run]) -> Report {
    let n = cfg.model.n_levels;
    let mut summary = Table::new(
        "dynamics",
        &[
            "form",
            "reference",
            "mean_mismatch",
            "max_mismatch",
            "mean_iterations",
            "matvecs",
            "wall_time_s",
            "status",
        ],
    );
    let mut tables = Vec::new();
    let reference = runs[0].result.as_ref().ok();
    for r in runs {
        let columns: Vec<String> = std::iter::once("t".to_string())
            .chain((0..n).map(|k| format!("p{k}")))
            .collect();
        let columns: Vec<&str> = columns.iter().map(String::as_str).collect();
        let mut pops = Table::new(format!("populations_{}", r.form.name()), &columns);
        let compared = r.result.as_ref().map_err(|e| anyhow::anyhow!("{e:#}")).and_then(|tr| {
            for (t, p) in tr.times.iter().zip(&tr.populations) {
                pops.push(std::iter::once(num(*t)).chain(p.iter().map(|&x| num(x))).collect());
            }
            let reference = reference.ok_or_else(|| anyhow::anyhow!("reference form failed"))?;
            Ok((mismatch(reference, tr)?, tr.stats))
        });
        let row = match &compared {
            Ok(((mean, max), stats)) => [num(*mean), num(*max), num(stats.mean_iterations()), stats.matvecs.to_string()],
            Err(_) => [num(f64::NAN), num(f64::NAN), num(f64::NAN), String::new()],
        };
        summary.push(
            [r.form.name().into(), runs[0].form.name().into()]
                .into_iter()
                .chain(row)
                .chain([num(r.wall_time), status(&compared)])
                .collect(),
        );
        tables.push(pops);
    }
    tables.insert(0, summary);
    Report {
        cells: runs.len(),
        failed: runs.iter().filter(|r| r.result.is_err()).count(),
        tables,
        error: None,
    }
}
