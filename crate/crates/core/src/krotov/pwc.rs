use crate::error::{Error, Result};
use crate::propagators::{expm_apply_with, CoeffCache, ExpBackend};
use crate::quantum::{matvec_into, CVector, C64};

use super::{costate_terminal, ControlField, ControlProblem, KrotovConfig, Update};

/// Field held on `[t_n, t_{n+1})`; a field that is not piecewise constant
/// contributes its interval-midpoint value.
fn interval_value(field: &ControlField, n: usize) -> f64 {
    field.value_in(n, 0.5 * field.dt())
}

/// Propagates every initial state under the piecewise-constant field.
pub fn forward_pwc(problem: &ControlProblem, field: &ControlField) -> Result<(Vec<CVector>, usize)> {
    let dt = problem.dt();
    let mut cache = CoeffCache::new();
    let mut states = problem.initial.clone();
    let mut matvecs = 0;
    for n in 0..problem.n_steps {
        let g = problem.generator_at(interval_value(field, n));
        for psi in states.iter_mut() {
            let (next, mv) = expm_apply_with(&g, dt, psi, ExpBackend::Polynomial, &mut cache)?;
            *psi = next;
            matvecs += mv;
        }
    }
    Ok((states, matvecs))
}

/// `χ(t_n)` for `n = 0..=N` (outer index `n`, inner index target), from
/// `χ(t_n) = exp(G_n† δt) χ(t_{n+1})`.
pub fn backward_costate(
    problem: &ControlProblem,
    field: &ControlField,
    finals: &[CVector],
) -> Result<(Vec<Vec<CVector>>, usize)> {
    let dt = problem.dt();
    let drift_adj = problem.drift.adjoint();
    let control_adj = problem.control.adjoint();
    let mut cache = CoeffCache::new();
    let mut chi = vec![Vec::new(); problem.n_steps + 1];
    chi[problem.n_steps] = costate_terminal(&problem.functional, finals)?;
    let mut matvecs = 0;
    for n in (0..problem.n_steps).rev() {
        let g = &drift_adj + &control_adj * C64::new(interval_value(field, n), 0.0);
        let mut prev = Vec::with_capacity(finals.len());
        for c in &chi[n + 1] {
            let (v, mv) = expm_apply_with(&g, dt, c, ExpBackend::Polynomial, &mut cache)?;
            matvecs += mv;
            prev.push(v);
        }
        chi[n] = prev;
    }
    Ok((chi, matvecs))
}

/// Sequential first-order update of a piecewise-constant field: the value of
/// interval `n` is corrected from `χ^{(i)}(t_n)` and the already known new
/// state `ψ^{(i+1)}(t_n)`, then the state is advanced one step under it.
pub fn pwc_update(
    problem: &ControlProblem,
    old: &ControlField,
    chi: &[Vec<CVector>],
    cfg: &KrotovConfig,
) -> Result<Update> {
    let dt = problem.dt();
    let nt = problem.n_steps;
    let mut cache = CoeffCache::new();
    let mut states = problem.initial.clone();
    let mut field = old.to_piecewise_constant();
    let mut bpsi = CVector::zeros(problem.dim());
    let (mut matvecs, mut running, mut norm2) = (0, 0.0, 0.0);
    for n in 0..nt {
        let s = cfg.shape.eval((n as f64 + 0.5) * dt, problem.t_final);
        let mut delta = 0.0;
        if s > 0.0 {
            let mut grad = 0.0;
            for (c, psi) in chi[n].iter().zip(&states) {
                matvec_into(&problem.control, psi, &mut bpsi);
                grad += c.dotc(&bpsi).re;
            }
            matvecs += states.len();
            delta = s / cfg.lambda_a * grad;
            if !delta.is_finite() {
                return Err(Error::NonFinite { context: "field update" });
            }
            running += cfg.lambda_a * delta * delta / s * dt;
        }
        norm2 += delta * delta * dt;
        field.grid_values[n] += delta;
        let g = problem.generator_at(field.grid_values[n]);
        for psi in states.iter_mut() {
            let (next, mv) = expm_apply_with(&g, dt, psi, ExpBackend::Polynomial, &mut cache)?;
            *psi = next;
            matvecs += mv;
        }
    }
    field.grid_values[nt] = field.grid_values[nt - 1];
    Ok(Update {
        field,
        finals: states,
        matvecs,
        running_cost: running,
        field_change_norm: norm2.sqrt(),
    })
}
