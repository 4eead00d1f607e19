//! Final populations, entanglement and gate character over the `(p, q)`
//! plane of the Pythagorean drive.
//!
//! States and gates are taken in the frame rotating with the drift, where
//! the ideal (infinite-anharmonicity) dynamics is static. Entropy comes from
//! the final state of `|0⟩` restricted to the lowest four levels and
//! renormalized; gate quantities come from the closest unitary to the
//! leakage-reduced 4×4 block.

use std::time::Instant;

use anyhow::{ensure, Result};
use ito_core::gates::{
    closest_unitary, extract_gate, gate_concurrence, makhlin_invariants, von_neumann_entropy, EquivalenceCatalog,
    LocalInvariants,
};
use ito_core::models::QuditModel;
use ito_core::propagators::{expm_dense, propagate, Observers};
use ito_core::quantum::{CVector, QuantumState, C64, I};
use rayon::ThreadPool;

use super::{qudit_lab, Report};
use crate::config::{MapConfig, Variant};
use crate::output::{num, Table};
use crate::sweep::{run_cells, status};

#[derive(Debug, Clone, PartialEq)]
pub struct GateResult {
    /// `1 − ‖G‖²_F/4` of the raw block.
    pub mean_leakage: f64,
    pub unitarity_defect: f64,
    pub concurrence: f64,
    pub invariants: LocalInvariants,
    pub class: Option<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CellResult {
    /// `P₀..P₃` starting from `|0⟩`.
    pub populations: [f64; 4],
    pub leakage: f64,
    /// `None` for mixed-state (dissipative) dynamics.
    pub entropy: Option<f64>,
    pub gate: Option<GateResult>,
}

#[derive(Debug)]
pub struct Row {
    pub p: f64,
    pub q: f64,
    /// `V₀₁/Ω_rabi = (p² + q²)/2`, the largest drive amplitude.
    pub v01_over_rabi: f64,
    pub result: Result<CellResult>,
    pub wall_time: f64,
}

/// Rotating-frame final states of the first `inputs` basis states.
fn final_states(cfg: &MapConfig, model: &QuditModel, inputs: usize) -> Result<Vec<CVector>> {
    let n = model.n_levels;
    let t = cfg.t_final;
    if cfg.variant == Variant::Ideal {
        let h = model.drive().h_inf(n).matrix;
        let u = expm_dense(&(h * (-I * t)))?;
        return Ok((0..inputs).map(|k| u.column(k).into_owned()).collect());
    }
    let (g, _) = qudit_lab(model, false)?;
    let p = &cfg.propagator;
    (0..inputs)
        .map(|k| {
            let tr = propagate(&g, 0.0, t, p.n_t, p.method(), &QuantumState::basis(n, k), &Observers::default())?;
            let mut v = tr.final_state.amplitudes;
            for (j, c) in v.iter_mut().enumerate() {
                *c *= C64::from_polar(1.0, model.level_energy(j) * t);
            }
            Ok(v)
        })
        .collect()
}

fn entropy_on_l(state: &CVector) -> Result<f64> {
    let block = state.rows(0, 4).into_owned();
    let norm = block.norm();
    ensure!(norm > 1e-6, "no population left in the lowest four levels");
    Ok(von_neumann_entropy(&(block / C64::new(norm, 0.0)))?)
}

fn gate_of(finals: &[CVector], catalog: &EquivalenceCatalog) -> Result<GateResult> {
    let raw = extract_gate(finals)?;
    let u = closest_unitary(&raw)?;
    let invariants = makhlin_invariants(&u)?;
    Ok(GateResult {
        mean_leakage: 1.0 - raw.entries.norm_squared() / 4.0,
        unitarity_defect: raw.unitarity_defect(),
        concurrence: gate_concurrence(&u)?,
        class: catalog.classify(&invariants).map(str::to_string),
        invariants,
    })
}

pub fn evaluate(cfg: &MapConfig, p: f64, q: f64, gate: bool, catalog: &EquivalenceCatalog) -> Result<CellResult> {
    let mut params = cfg.model.clone();
    params.p = p;
    params.q = q;
    let model = params.model();
    if cfg.variant == Variant::FullDissipative {
        let (g, rho0) = qudit_lab(&model, true)?;
        let pr = &cfg.propagator;
        let tr = propagate(&g, 0.0, cfg.t_final, pr.n_t, pr.method(), &rho0, &Observers::default())?;
        let pops = tr.final_state.populations();
        let populations = [pops[0], pops[1], pops[2], pops[3]];
        return Ok(CellResult {
            populations,
            leakage: 1.0 - populations.iter().sum::<f64>(),
            entropy: None,
            gate: None,
        });
    }
    let finals = final_states(cfg, &model, if gate { 4 } else { 1 })?;
    let populations = [0, 1, 2, 3].map(|k| finals[0][k].norm_sqr());
    Ok(CellResult {
        populations,
        leakage: 1.0 - populations.iter().sum::<f64>(),
        entropy: Some(entropy_on_l(&finals[0])?),
        gate: if gate { Some(gate_of(&finals, catalog)?) } else { None },
    })
}

/// Row-major over `p` (outer) and `q` (inner).
pub fn run(cfg: &MapConfig, gate: bool, pool: &ThreadPool) -> Vec<Row> {
    let catalog = EquivalenceCatalog::builtin();
    let nq = cfg.q.len();
    run_cells(pool, cfg.p.len() * nq, |i| {
        let (p, q) = (cfg.p[i / nq], cfg.q[i % nq]);
        let start = Instant::now();
        let result = evaluate(cfg, p, q, gate, &catalog);
        Row {
            p,
            q,
            v01_over_rabi: 0.5 * (p * p + q * q),
            result,
            wall_time: start.elapsed().as_secs_f64(),
        }
    })
}

pub fn report(rows: &[Row], gate: bool) -> Report {
    let mut columns = vec!["p", "q", "v01_over_rabi", "p0", "p1", "p2", "p3", "leakage", "entropy"];
    if gate {
        columns.extend([
            "gate_leakage",
            "unitarity_defect",
            "concurrence",
            "g1",
            "g2",
            "g3",
            "class",
        ]);
    }
    columns.extend(["wall_time_s", "status"]);
    let mut t = Table::new(if gate { "gate_map" } else { "pop_map" }, &columns);
    // data columns between the coordinates and the trailing time/status
    let width = columns.len() - 5;
    for r in rows {
        let mut row = vec![num(r.p), num(r.q), num(r.v01_over_rabi)];
        match &r.result {
            Ok(c) => {
                row.extend(c.populations.iter().map(|&x| num(x)));
                row.push(num(c.leakage));
                row.push(num(c.entropy.unwrap_or(f64::NAN)));
                if let Some(g) = &c.gate {
                    row.extend([
                        num(g.mean_leakage),
                        num(g.unitarity_defect),
                        num(g.concurrence),
                        num(g.invariants.g1),
                        num(g.invariants.g2),
                        num(g.invariants.g3),
                        g.class.clone().unwrap_or_default(),
                    ]);
                }
            }
            Err(_) => row.extend(
                (0..width - usize::from(gate))
                    .map(|_| num(f64::NAN))
                    .chain(gate.then(String::new)),
            ),
        }
        row.extend([num(r.wall_time), status(&r.result)]);
        t.push(row);
    }
    Report {
        cells: rows.len(),
        failed: rows.iter().filter(|r| r.result.is_err()).count(),
        tables: vec![t],
        error: None,
    }
}
