//! PWC step-count sweep against a single ITO reference trajectory, scored by
//! the time-averaged maximal population mismatch.

use std::time::Instant;

use anyhow::Result;
use ito_core::models::population_mismatch;
use ito_core::propagators::{propagate, Method, Observers, Trajectory};
use rayon::ThreadPool;

use super::{qudit_lab, Report};
use crate::config::{CompareConfig, MethodKind, PropagatorParams};
use crate::output::{num, Table};
use crate::sweep::{run_cells, status};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Mismatch {
    pub mean: f64,
    pub max: f64,
    pub matvecs: usize,
}

#[derive(Debug)]
pub struct Row {
    pub params: PropagatorParams,
    pub result: Result<Mismatch>,
    pub wall_time: f64,
}

#[derive(Debug)]
pub struct Comparison {
    /// The reference compared with itself comes first.
    pub rows: Vec<Row>,
}

fn trajectory(cfg: &CompareConfig, params: &PropagatorParams) -> Result<Trajectory> {
    let (g, rho0) = qudit_lab(&cfg.model.model(), cfg.dissipative)?;
    let obs = Observers {
        populations: true,
        every: params.n_t / cfg.samples,
        ..Observers::default()
    };
    Ok(propagate(&g, 0.0, cfg.t_final, params.n_t, params.method(), &rho0, &obs)?)
}

fn score(reference: &Trajectory, other: &Trajectory) -> Result<Mismatch> {
    let (per_time, mean) = population_mismatch(&reference.populations, &other.populations)?;
    Ok(Mismatch {
        mean,
        max: per_time.iter().fold(0.0, |a: f64, &b| a.max(b)),
        matvecs: other.stats.matvecs,
    })
}

/// Fails only if the reference run fails.
pub fn run(cfg: &CompareConfig, pool: &ThreadPool) -> Result<Comparison> {
    let start = Instant::now();
    let reference = pool.install(|| trajectory(cfg, &cfg.reference))?;
    let mut rows = vec![Row {
        params: cfg.reference.clone(),
        result: score(&reference, &reference),
        wall_time: start.elapsed().as_secs_f64(),
    }];
    let pwc: Vec<PropagatorParams> = cfg
        .pwc_n_t
        .iter()
        .map(|&n_t| PropagatorParams {
            method: MethodKind::Pwc,
            n_t,
            ..cfg.reference.clone()
        })
        .collect();
    rows.extend(run_cells(pool, pwc.len(), |i| {
        let start = Instant::now();
        let result = trajectory(cfg, &pwc[i]).and_then(|tr| score(&reference, &tr));
        Row {
            params: pwc[i].clone(),
            result,
            wall_time: start.elapsed().as_secs_f64(),
        }
    }));
    Ok(Comparison { rows })
}

pub fn report(c: &Comparison) -> Report {
    let mut t = Table::new(
        "compare",
        &["method", "n_t", "m", "mean_mismatch", "max_mismatch", "matvecs", "wall_time_s", "status"],
    );
    for r in &c.rows {
        let (mean, max, mv) = match &r.result {
            Ok(m) => (num(m.mean), num(m.max), m.matvecs.to_string()),
            Err(_) => (num(f64::NAN), num(f64::NAN), String::new()),
        };
        let m = match r.params.method() {
            Method::Ito(c) => c.m_order.to_string(),
            Method::Pwc(_) => String::new(),
        };
        t.push(vec![
            r.params.method.name().into(),
            r.params.n_t.to_string(),
            m,
            mean,
            max,
            mv,
            num(r.wall_time),
            status(&r.result),
        ]);
    }
    Report {
        cells: c.rows.len(),
        failed: c.rows.iter().filter(|r| r.result.is_err()).count(),
        tables: vec![t],
        error: None,
    }
}
