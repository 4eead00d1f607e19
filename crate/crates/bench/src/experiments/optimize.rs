//! Krotov optimization of one control problem with each configured
//! propagation scheme: iteration log and final field.

use anyhow::Result;
use ito_core::krotov::{
    optimize_with, ControlField, ControlProblem, IterationRecord, KrotovConfig, KrotovPropagator,
    OptimizationFunctional,
};
use ito_core::models::{pythagorean_field, FreqHoModel};
use ito_core::propagators::ItoConfig;
use ito_core::quantum::{CMatrix, QuantumState, ONE, ZERO};
use rayon::ThreadPool;

use super::Report;
use crate::config::{MethodKind, OptimizeConfig, Problem};
use crate::output::{num, opt_num, Table};
use crate::sweep::{run_cells, status};

/// CNOT on `|0⟩..|3⟩`, control on the first virtual qubit.
pub fn cnot() -> CMatrix {
    let mut o = CMatrix::identity(4, 4);
    o[(2, 2)] = ZERO;
    o[(3, 3)] = ZERO;
    o[(2, 3)] = ONE;
    o[(3, 2)] = ONE;
    o
}

pub fn problem(cfg: &OptimizeConfig) -> Result<(ControlProblem, ControlField)> {
    let (t, nt) = (cfg.t_final, cfg.n_t);
    Ok(match cfg.problem {
        Problem::HoFreq => {
            let m = FreqHoModel { n_trunc: cfg.ho.n_trunc };
            let (h0, h1) = m.hamiltonians();
            let target = m.ground_state(cfg.ho.target_omega)?.amplitudes;
            let init = QuantumState::basis(cfg.ho.n_trunc, 0).amplitudes;
            let func = OptimizationFunctional::StateToState { target };
            (
                ControlProblem::schrodinger(&h0, &h1, vec![init], func, t, nt)?,
                ControlField::from_fn(|_| 1.0, t, nt)?,
            )
        }
        Problem::QuditState | Problem::QuditCnot => {
            let m = cfg.qudit.model();
            let n = m.n_levels;
            let (init, func) = if cfg.problem == Problem::QuditState {
                let target = QuantumState::basis(n, 2).amplitudes;
                (
                    vec![QuantumState::basis(n, 0).amplitudes],
                    OptimizationFunctional::StateToState { target },
                )
            } else {
                let e: Vec<f64> = (0..n).map(|k| m.level_energy(k)).collect();
                (
                    (0..4).map(|k| QuantumState::basis(n, k).amplitudes).collect(),
                    OptimizationFunctional::gate_in_frame(&cnot(), n, Some((&e, t)))?,
                )
            };
            (
                ControlProblem::schrodinger(&m.drift().matrix, &m.coupling().matrix, init, func, t, nt)?,
                ControlField::from_fn(pythagorean_field(&m), t, nt)?,
            )
        }
    })
}

pub fn krotov_config(cfg: &OptimizeConfig, method: MethodKind) -> KrotovConfig {
    let propagator = match method {
        MethodKind::Pwc => KrotovPropagator::Pwc,
        MethodKind::Ito => KrotovPropagator::Ito(ItoConfig::new(cfg.m, 0.0)),
    };
    let mut k = KrotovConfig::new(cfg.lambda_a, propagator);
    k.shape = cfg.shape();
    k.max_iter = cfg.max_iter;
    k.stop_tol = cfg.stop_tol;
    k.reference = (cfg.reference_m != 0).then(|| ItoConfig::new(cfg.reference_m, 0.0));
    k
}

#[derive(Debug)]
pub struct Run {
    pub method: MethodKind,
    /// Every completed iteration, record 0 being the guess.
    pub records: Vec<IterationRecord>,
    /// Last completed iterate.
    pub field: Option<ControlField>,
    pub converged: bool,
    /// Set if an iteration failed; the log and field stop before it.
    pub outcome: Result<()>,
}

pub fn run_method(cfg: &OptimizeConfig, method: MethodKind) -> Run {
    let mut records = Vec::new();
    let mut last = None;
    let outcome = problem(cfg).and_then(|(p, guess)| {
        let r = optimize_with(&p, &guess, &krotov_config(cfg, method), |rec, field| {
            records.push(*rec);
            last = Some(field.clone());
        })?;
        Ok((r.field, r.converged))
    });
    match outcome {
        Ok((field, converged)) => Run {
            method,
            records,
            field: Some(field),
            converged,
            outcome: Ok(()),
        },
        Err(e) => Run {
            method,
            records,
            field: last,
            converged: false,
            outcome: Err(e),
        },
    }
}

/// One cell per method.
pub fn run(cfg: &OptimizeConfig, pool: &ThreadPool) -> Vec<Run> {
    run_cells(pool, cfg.methods.len(), |i| run_method(cfg, cfg.methods[i]))
}

pub fn report(runs: &[Run]) -> Report {
    let mut summary = Table::new(
        "optimize",
        &["method", "iterations", "final_j_t", "converged", "matvecs", "wall_time_s", "status"],
    );
    let mut tables = Vec::new();
    for r in runs {
        let name = r.method.name();
        let mut log = Table::new(
            format!("log_{name}"),
            &[
                "i",
                "j_t",
                "j_total",
                "j_t_reference",
                "field_change_norm",
                "matvecs",
                "wall_time_s",
            ],
        );
        for rec in &r.records {
            log.push(vec![
                rec.i.to_string(),
                num(rec.j_t),
                num(rec.j_total),
                opt_num(rec.j_t_reference),
                num(rec.field_change_norm),
                rec.matvecs.to_string(),
                num(rec.wall_time),
            ]);
        }
        let last = r.records.last();
        summary.push(vec![
            name.into(),
            last.map_or(0, |l| l.i).to_string(),
            num(last.map_or(f64::NAN, |l| l.j_t)),
            r.converged.to_string(),
            last.map_or_else(String::new, |l| l.matvecs.to_string()),
            num(last.map_or(0.0, |l| l.wall_time)),
            status(&r.outcome),
        ]);
        tables.push(log);
        if let Some(f) = &r.field {
            tables.push(Table::field(format!("field_{name}"), f));
        }
    }
    tables.insert(0, summary);
    let failed: Vec<String> = runs
        .iter()
        .filter_map(|r| r.outcome.as_ref().err().map(|e| format!("{}: {e:#}", r.method.name())))
        .collect();
    Report {
        cells: runs.len(),
        failed: failed.len(),
        tables,
        error: (!failed.is_empty()).then(|| failed.join("; ")),
    }
}
