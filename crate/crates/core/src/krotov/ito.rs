use std::borrow::Cow;

use crate::error::{invalid, Error, Result};
use crate::propagators::{solve_interval, BlockDiagonal, IntervalSource, ItoConfig, ItoWorkspace, LinearOperator};
use crate::quantum::{CVector, C64};
use crate::spectral::cgl_nodes;

use super::field::lobatto_interpolate;
use super::{costate_terminal, stack, unstack, ControlField, ControlProblem, KrotovConfig, Update};

/// Inhomogeneity `(ε(τ) − ε̄)·B u` for a known field on one interval. With
/// `reversed`, node `j` of the backward sweep is node `M−1−j` of the forward
/// grid (the CGL nodes are symmetric).
struct KnownField<'a> {
    control: &'a BlockDiagonal,
    eps: &'a [f64],
    nodes: &'a [f64],
    dt: f64,
    anchor: f64,
    reversed: bool,
}

impl KnownField<'_> {
    fn inhomogeneity(&self, e: f64, u: &CVector, s: &mut CVector) -> usize {
        self.control.apply(u, s);
        *s *= C64::new(e - self.anchor, 0.0);
        self.control.weight()
    }
}

impl IntervalSource for KnownField<'_> {
    fn sample(&mut self, j: usize, _tau: f64, u: &CVector, s: &mut CVector) -> Result<usize> {
        let m = self.eps.len();
        let e = if self.reversed { self.eps[m - 1 - j] } else { self.eps[j] };
        Ok(self.inhomogeneity(e, u, s))
    }

    fn sample_off_grid(&mut self, tau: f64, u: &CVector, s: &mut CVector) -> Option<Result<usize>> {
        let x = if self.reversed { self.dt - tau } else { tau };
        let e = lobatto_interpolate(self.nodes, self.eps, x);
        Some(Ok(self.inhomogeneity(e, u, s)))
    }
}

/// Field re-evaluated from the current state iterate at every node, so that
/// field and state converge together.
struct JointUpdate<'a> {
    control: &'a BlockDiagonal,
    chi: &'a [CVector],
    old: &'a [f64],
    shape: Vec<f64>,
    lambda_a: f64,
    anchor: f64,
    one_shot: bool,
    field: Vec<f64>,
    prev: Vec<f64>,
    fixed: Vec<bool>,
    last_residual: f64,
}

impl IntervalSource for JointUpdate<'_> {
    fn sample(&mut self, j: usize, _tau: f64, u: &CVector, s: &mut CVector) -> Result<usize> {
        self.control.apply(u, s);
        if !(self.one_shot && self.fixed[j]) {
            let grad = self.chi[j].dotc(s).re;
            let e = self.old[j] + self.shape[j] / self.lambda_a * grad;
            if !e.is_finite() {
                return Err(Error::NonFinite { context: "field update" });
            }
            self.field[j] = e;
            self.fixed[j] = true;
        }
        *s *= C64::new(self.field[j] - self.anchor, 0.0);
        Ok(self.control.weight())
    }

    fn aux_residual(&mut self) -> f64 {
        let scale = self.field.iter().fold(0.0f64, |a, e| a.max(e.abs()));
        let change = self
            .field
            .iter()
            .zip(&self.prev)
            .fold(0.0f64, |a, (e, p)| a.max((e - p).abs()));
        self.prev.clone_from(&self.field);
        self.last_residual = if scale > 0.0 { change / scale } else { change };
        self.last_residual
    }
}

fn with_sub_grid(field: &ControlField, m: usize) -> Result<Cow<'_, ControlField>> {
    if field.sub_order() == Some(m) {
        Ok(Cow::Borrowed(field))
    } else {
        Ok(Cow::Owned(field.refined(m)?))
    }
}

fn ito_cfg(problem: &ControlProblem, cfg: &KrotovConfig) -> Result<ItoConfig> {
    cfg.ito_config(problem.dt())
        .ok_or_else(|| invalid("propagator", "ITO configuration required"))
}

/// Trapezoidal weights on the (non-uniform) nodes.
fn trapezoid_weights(nodes: &[f64]) -> Vec<f64> {
    let m = nodes.len();
    (0..m)
        .map(|j| {
            let left = if j > 0 { nodes[j] - nodes[j - 1] } else { 0.0 };
            let right = if j + 1 < m { nodes[j + 1] - nodes[j] } else { 0.0 };
            0.5 * (left + right)
        })
        .collect()
}

/// ITO propagation of all initial states (stacked) under the sub-grid field.
pub fn forward_ito(problem: &ControlProblem, field: &ControlField, cfg: &ItoConfig) -> Result<(Vec<CVector>, usize)> {
    let dt = problem.dt();
    let cfg = ItoConfig { dt, ..*cfg };
    let field = with_sub_grid(field, cfg.m_order)?;
    let sub = field.sub_values.as_ref().expect("refined");
    let nodes = cgl_nodes(cfg.m_order, dt)?.nodes;
    let k = problem.initial.len();
    let control = BlockDiagonal {
        block: problem.control.clone(),
        copies: k,
    };
    let mut ws = ItoWorkspace::new();
    let mut u = stack(&problem.initial);
    let mut matvecs = 0;
    for eps in sub.iter() {
        let anchor = lobatto_interpolate(&nodes, eps, 0.5 * dt);
        let g0 = BlockDiagonal {
            block: problem.generator_at(anchor),
            copies: k,
        };
        let mut src = KnownField {
            control: &control,
            eps,
            nodes: &nodes,
            dt,
            anchor,
            reversed: false,
        };
        let sol = solve_interval(&g0, &u, &cfg, &mut src, &mut ws)?;
        sol.report.check()?;
        matvecs += sol.report.matvecs;
        u = sol.end().clone();
    }
    Ok((unstack(&u, k), matvecs))
}

/// Stacked costates at the CGL nodes of every interval, `chi[n][j]` at
/// `t_n + τ_j`, from the ITO solution of the adjoint equation backwards in time.
pub fn backward_costate_ito(
    problem: &ControlProblem,
    field: &ControlField,
    finals: &[CVector],
    cfg: &KrotovConfig,
) -> Result<(Vec<Vec<CVector>>, usize)> {
    let icfg = ito_cfg(problem, cfg)?;
    let dt = icfg.dt;
    let m = icfg.m_order;
    let field = with_sub_grid(field, m)?;
    let sub = field.sub_values.as_ref().expect("refined");
    let nodes = cgl_nodes(m, dt)?.nodes;
    let k = finals.len();
    let drift_adj = problem.drift.adjoint();
    let control = BlockDiagonal {
        block: problem.control.adjoint(),
        copies: k,
    };
    let mut ws = ItoWorkspace::new();
    let mut u = stack(&costate_terminal(&problem.functional, finals)?);
    let mut chi = vec![Vec::new(); problem.n_steps];
    let mut matvecs = 0;
    for n in (0..problem.n_steps).rev() {
        let eps = &sub[n];
        let anchor = lobatto_interpolate(&nodes, eps, 0.5 * dt);
        let g0 = BlockDiagonal {
            block: &drift_adj + &control.block * C64::new(anchor, 0.0),
            copies: k,
        };
        let mut src = KnownField {
            control: &control,
            eps,
            nodes: &nodes,
            dt,
            anchor,
            reversed: true,
        };
        let sol = solve_interval(&g0, &u, &icfg, &mut src, &mut ws)?;
        sol.report.check()?;
        matvecs += sol.report.matvecs;
        u = sol.end().clone();
        chi[n] = sol.nodes.into_iter().rev().collect();
    }
    Ok((chi, matvecs))
}

/// Krotov update with the field and the new state converged jointly inside
/// every interval.
pub fn ito_update(
    problem: &ControlProblem,
    old: &ControlField,
    chi: &[Vec<CVector>],
    cfg: &KrotovConfig,
) -> Result<Update> {
    let icfg = ito_cfg(problem, cfg)?;
    let dt = icfg.dt;
    let m = icfg.m_order;
    let old = with_sub_grid(old, m)?;
    let old_sub = old.sub_values.as_ref().expect("refined");
    let nodes = cgl_nodes(m, dt)?.nodes;
    let weights = trapezoid_weights(&nodes);
    let k = problem.initial.len();
    let control = BlockDiagonal {
        block: problem.control.clone(),
        copies: k,
    };
    let mut ws = ItoWorkspace::new();
    let mut u = stack(&problem.initial);
    let mut new_sub = Vec::with_capacity(problem.n_steps);
    let (mut matvecs, mut running, mut norm2) = (0, 0.0, 0.0);
    for n in 0..problem.n_steps {
        let t_n = n as f64 * dt;
        let eps_old = &old_sub[n];
        let anchor = lobatto_interpolate(&nodes, eps_old, 0.5 * dt);
        let g0 = BlockDiagonal {
            block: problem.generator_at(anchor),
            copies: k,
        };
        let mut src = JointUpdate {
            control: &control,
            chi: &chi[n],
            old: eps_old,
            shape: nodes.iter().map(|&tau| cfg.shape.eval(t_n + tau, problem.t_final)).collect(),
            lambda_a: cfg.lambda_a,
            anchor,
            one_shot: cfg.one_shot_field,
            field: eps_old.clone(),
            prev: eps_old.clone(),
            fixed: vec![false; m],
            last_residual: 0.0,
        };
        let sol = solve_interval(&g0, &u, &icfg, &mut src, &mut ws)?;
        matvecs += sol.report.matvecs;
        if !sol.report.converged {
            return Err(Error::JointLoopDiverged {
                interval: n,
                iterations: sol.report.n_iter,
                state_residual: sol.report.eps_iter,
                field_residual: src.last_residual,
            });
        }
        for j in 0..m {
            let d = src.field[j] - eps_old[j];
            norm2 += weights[j] * d * d;
            if src.shape[j] > 0.0 {
                running += cfg.lambda_a * weights[j] * d * d / src.shape[j];
            }
        }
        new_sub.push(src.field);
        u = sol.end().clone();
    }
    let mut field = ControlField {
        t_final: problem.t_final,
        grid_values: vec![0.0; problem.n_steps + 1],
        sub_values: Some(new_sub),
        piecewise_constant: false,
        iteration: old.iteration,
    };
    field.sync_grid();
    Ok(Update {
        field,
        finals: unstack(&u, k),
        matvecs,
        running_cost: running,
        field_change_norm: norm2.sqrt(),
    })
}
