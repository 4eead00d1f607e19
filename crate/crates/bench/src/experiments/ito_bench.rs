//! Driven oscillator against its closed-form solution: accuracy and cost of
//! ITO over `(n_t, M)` and of PWC over `n_t`.

use std::time::Instant;

use anyhow::Result;
use ito_core::models::driven_ho_analytic;
use ito_core::propagators::{propagate, ExpBackend, ItoConfig, Method, Observers};
use rayon::ThreadPool;

use super::Report;
use crate::config::{ItoBenchConfig, MethodKind};
use crate::output::{num, Table};
use crate::sweep::{run_cells, status};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Cell {
    pub method: MethodKind,
    pub n_t: usize,
    /// ITO order; `None` for PWC.
    pub m: Option<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Measurement {
    pub mean_iterations: f64,
    pub matvecs: usize,
    /// Largest deviation of `⟨x⟩`, `⟨p⟩` from the closed form over the
    /// sampled times.
    pub global_error: f64,
    pub max_eps_m: f64,
}

#[derive(Debug)]
pub struct Row {
    pub cell: Cell,
    pub result: Result<Measurement>,
    pub wall_time: f64,
}

pub fn cells(cfg: &ItoBenchConfig) -> Vec<Cell> {
    let mut cells = Vec::new();
    for &n_t in &cfg.n_t {
        for &m in &cfg.m {
            cells.push(Cell {
                method: MethodKind::Ito,
                n_t,
                m: Some(m),
            });
        }
    }
    cells.extend(cfg.pwc_n_t.iter().map(|&n_t| Cell {
        method: MethodKind::Pwc,
        n_t,
        m: None,
    }));
    cells
}

pub fn measure(cfg: &ItoBenchConfig, cell: Cell) -> Result<Measurement> {
    let model = cfg.model.model();
    let g = model.generator()?;
    let (x, p) = model.observables()?;
    let every = cell.n_t.div_ceil(cfg.max_samples).max(1);
    let method = match cell.m {
        Some(m) => Method::Ito(ItoConfig::new(m, 1.0).with_tol(cfg.tol)),
        None => Method::Pwc(ExpBackend::Polynomial),
    };
    let obs = Observers::expectations(vec![x, p], every);
    let tr = propagate(&g, 0.0, model.horizon, cell.n_t, method, &model.ground_state(), &obs)?;
    let mut err: f64 = 0.0;
    for (t, e) in tr.times.iter().zip(&tr.expectations) {
        let (xa, pa) = driven_ho_analytic(&model, *t);
        err = err.max((e[0].re - xa).abs()).max((e[1].re - pa).abs());
    }
    Ok(Measurement {
        mean_iterations: tr.stats.mean_iterations(),
        matvecs: tr.stats.matvecs,
        global_error: err,
        max_eps_m: tr.stats.max_eps_m,
    })
}

pub fn run(cfg: &ItoBenchConfig, pool: &ThreadPool) -> Vec<Row> {
    let cells = cells(cfg);
    run_cells(pool, cells.len(), |i| {
        let start = Instant::now();
        let result = measure(cfg, cells[i]);
        Row {
            cell: cells[i],
            result,
            wall_time: start.elapsed().as_secs_f64(),
        }
    })
}

pub fn report(rows: &[Row]) -> Report {
    let mut t = Table::new(
        "ito_bench",
        &[
            "method",
            "n_t",
            "m",
            "mean_iterations",
            "matvecs",
            "global_error",
            "max_eps_m",
            "wall_time_s",
            "status",
        ],
    );
    for r in rows {
        let (it, mv, err, em) = match &r.result {
            Ok(m) => (num(m.mean_iterations), m.matvecs.to_string(), num(m.global_error), num(m.max_eps_m)),
            Err(_) => (num(f64::NAN), String::new(), num(f64::NAN), num(f64::NAN)),
        };
        t.push(vec![
            r.cell.method.name().into(),
            r.cell.n_t.to_string(),
            r.cell.m.map_or_else(String::new, |m| m.to_string()),
            it,
            mv,
            err,
            em,
            num(r.wall_time),
            status(&r.result),
        ]);
    }
    Report {
        cells: rows.len(),
        failed: rows.iter().filter(|r| r.result.is_err()).count(),
        tables: vec![t],
        error: None,
    }
}
