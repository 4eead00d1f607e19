//! Optimization of Haar-random gates on the qudit over gate duration and
//! anharmonicity: where the targets become reachable.

use std::time::Instant;

use anyhow::Result;
use ito_core::gates::haar_random;
use ito_core::krotov::{optimize, ControlField, ControlProblem, KrotovConfig, KrotovPropagator, OptimizationFunctional, ShapeFunction};
use ito_core::models::pythagorean_field;
use ito_core::quantum::QuantumState;
use rayon::ThreadPool;

use super::Report;
use crate::config::QslConfig;
use crate::output::{num, Table};
use crate::sweep::{cell_seed, run_cells, status};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Outcome {
    /// Updates performed.
    pub iterations: usize,
    pub final_j_t: f64,
    pub success: bool,
}

#[derive(Debug)]
pub struct TargetRun {
    pub t_final: f64,
    pub beta_ghz: f64,
    pub cell: usize,
    pub target: usize,
    pub seed: u64,
    pub result: Result<Outcome>,
    pub wall_time: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CellSummary {
    pub t_final: f64,
    pub beta_ghz: f64,
    pub n_random: usize,
    pub successes: usize,
    /// Targets whose optimization raised an error (counted as unsuccessful).
    pub errors: usize,
    pub success_fraction: f64,
    /// Over successful targets; NaN if there are none.
    pub mean_iterations: f64,
}

/// PWC Krotov on one random target; the guess is the Pythagorean field with
/// linear switch-on and switch-off.
pub fn optimize_target(cfg: &QslConfig, t: f64, beta_ghz: f64, seed: u64) -> Result<Outcome> {
    let mut params = cfg.model.clone();
    params.beta_ghz = beta_ghz;
    let m = params.model();
    let n = m.n_levels;
    let nt = (t / cfg.dt).round() as usize;
    let energies: Vec<f64> = (0..n).map(|k| m.level_energy(k)).collect();
    let f = pythagorean_field(&m);
    let ramp = cfg.guess_ramp * t;
    let guess = ControlField::from_fn(move |s| f(s) * (s / ramp).min(1.0).min((t - s) / ramp), t, nt)?;
    let target = haar_random(seed).entries;
    let func = OptimizationFunctional::gate_in_frame(&target, n, Some((&energies, t)))?;
    let init = (0..4).map(|k| QuantumState::basis(n, k).amplitudes).collect();
    let problem = ControlProblem::schrodinger(&m.drift().matrix, &m.coupling().matrix, init, func, t, nt)?;
    let mut k = KrotovConfig::new(cfg.lambda_a, KrotovPropagator::Pwc);
    k.shape = ShapeFunction::FlatTop { rise: cfg.rise };
    k.max_iter = cfg.max_iter;
    k.stop_tol = cfg.success_tol;
    let r = optimize(&problem, &guess, &k)?;
    let final_j_t = r.final_j_t();
    Ok(Outcome {
        iterations: r.records.len() - 1,
        final_j_t,
        success: final_j_t < cfg.success_tol,
    })
}

/// Every `(T, β, target)` triple is one task; cells are row-major over `T`
/// (outer) and `β` (inner).
pub fn run(cfg: &QslConfig, master_seed: u64, pool: &ThreadPool) -> Vec<TargetRun> {
    let nb = cfg.beta_ghz.len();
    let k = cfg.n_random;
    run_cells(pool, cfg.t_final.len() * nb * k, |i| {
        let (cell, target) = (i / k, i % k);
        let (t, beta) = (cfg.t_final[cell / nb], cfg.beta_ghz[cell % nb]);
        let seed = cell_seed(master_seed, cell as u64, target as u64);
        let start = Instant::now();
        let result = optimize_target(cfg, t, beta, seed);
        TargetRun {
            t_final: t,
            beta_ghz: beta,
            cell,
            target,
            seed,
            result,
            wall_time: start.elapsed().as_secs_f64(),
        }
    })
}

pub fn summarize(cfg: &QslConfig, runs: &[TargetRun]) -> Vec<CellSummary> {
    runs.chunks(cfg.n_random)
        .map(|chunk| {
            let ok: Vec<&Outcome> = chunk.iter().filter_map(|r| r.result.as_ref().ok()).collect();
            let its: Vec<f64> = ok.iter().filter(|o| o.success).map(|o| o.iterations as f64).collect();
            CellSummary {
                t_final: chunk[0].t_final,
                beta_ghz: chunk[0].beta_ghz,
                n_random: chunk.len(),
                successes: its.len(),
                errors: chunk.len() - ok.len(),
                success_fraction: its.len() as f64 / chunk.len() as f64,
                mean_iterations: if its.is_empty() {
                    f64::NAN
                } else {
                    its.iter().sum::<f64>() / its.len() as f64
                },
            }
        })
        .collect()
}

pub fn report(cfg: &QslConfig, runs: &[TargetRun]) -> Report {
    let mut cells = Table::new(
        "qsl_map",
        &[
            "t_final",
            "beta_ghz",
            "n_random",
            "successes",
            "errors",
            "success_fraction",
            "mean_iterations",
            "wall_time_s",
        ],
    );
    let summaries = summarize(cfg, runs);
    for (s, chunk) in summaries.iter().zip(runs.chunks(cfg.n_random)) {
        cells.push(vec![
            num(s.t_final),
            num(s.beta_ghz),
            s.n_random.to_string(),
            s.successes.to_string(),
            s.errors.to_string(),
            num(s.success_fraction),
            num(s.mean_iterations),
            num(chunk.iter().map(|r| r.wall_time).sum()),
        ]);
    }
    let mut targets = Table::new(
        "qsl_targets",
        &[
            "t_final",
            "beta_ghz",
            "target",
            "seed",
            "iterations",
            "final_j_t",
            "success",
            "wall_time_s",
            "status",
        ],
    );
    for r in runs {
        let (it, j, ok) = match &r.result {
            Ok(o) => (o.iterations.to_string(), num(o.final_j_t), o.success),
            Err(_) => (String::new(), num(f64::NAN), false),
        };
        targets.push(vec![
            num(r.t_final),
            num(r.beta_ghz),
            r.target.to_string(),
            r.seed.to_string(),
            it,
            j,
            ok.to_string(),
            num(r.wall_time),
            status(&r.result),
        ]);
    }
    Report {
        cells: runs.len(),
        failed: runs.iter().filter(|r| r.result.is_err()).count(),
        tables: vec![cells, targets],
        error: None,
    }
}
