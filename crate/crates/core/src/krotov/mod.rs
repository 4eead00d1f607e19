//! Krotov's method with first-order update, in two flavours: the sequential
//! PWC scheme (field from the known state at `t_n`) and the ITO scheme where
//! field and state are converged jointly inside every interval.

mod field;
mod functional;
mod ito;
mod pwc;

pub use field::{ControlField, ShapeFunction};
pub use functional::{costate_terminal, functional_value, OptimizationFunctional};
pub use ito::{backward_costate_ito, forward_ito, ito_update};
pub use pwc::{backward_costate, forward_pwc, pwc_update};

use std::time::Instant;

use crate::error::{invalid, Error, Result};
use crate::propagators::ItoConfig;
use crate::quantum::{CMatrix, CVector, I};

/// `G(ε) = drift + ε·control` acting on the initial states.
#[derive(Debug, Clone)]
pub struct ControlProblem {
    pub drift: CMatrix,
    pub control: CMatrix,
    pub initial: Vec<CVector>,
    pub functional: OptimizationFunctional,
    pub t_final: f64,
    pub n_steps: usize,
}

impl ControlProblem {
    pub fn new(
        drift: CMatrix,
        control: CMatrix,
        initial: Vec<CVector>,
        functional: OptimizationFunctional,
        t_final: f64,
        n_steps: usize,
    ) -> Result<Self> {
        let dim = drift.nrows();
        if drift.ncols() != dim || control.shape() != (dim, dim) {
            return Err(Error::DimensionMismatch {
                expected: dim,
                got: control.nrows(),
            });
        }
        if initial.len() != functional.n_states() {
            return Err(Error::StateCount {
                expected: functional.n_states(),
                got: initial.len(),
            });
        }
        if let Some(v) = initial.iter().find(|v| v.len() != dim) {
            return Err(Error::DimensionMismatch { expected: dim, got: v.len() });
        }
        if !(t_final > 0.0 && t_final.is_finite()) || n_steps == 0 {
            return Err(invalid("grid", "need T > 0 and at least one step"));
        }
        Ok(Self {
            drift,
            control,
            initial,
            functional,
            t_final,
            n_steps,
        })
    }

    /// `H = H₀ + ε H₁` under the Schrödinger equation.
    pub fn schrodinger(
        h0: &CMatrix,
        h1: &CMatrix,
        initial: Vec<CVector>,
        functional: OptimizationFunctional,
        t_final: f64,
        n_steps: usize,
    ) -> Result<Self> {
        Self::new(h0 * (-I), h1 * (-I), initial, functional, t_final, n_steps)
    }

    pub fn dim(&self) -> usize {
        self.drift.nrows()
    }

    pub fn dt(&self) -> f64 {
        self.t_final / self.n_steps as f64
    }

    pub fn generator_at(&self, eps: f64) -> CMatrix {
        &self.drift + &self.control * crate::quantum::C64::new(eps, 0.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum KrotovPropagator {
    Pwc,
    /// `dt` is overridden by the problem's grid.
    Ito(ItoConfig),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KrotovConfig {
    pub lambda_a: f64,
    pub shape: ShapeFunction,
    pub max_iter: usize,
    /// Stop once `J_T ≤ stop_tol`.
    pub stop_tol: f64,
    pub propagator: KrotovPropagator,
    /// Debug: evaluate each interval's field once from the state guess and
    /// keep it fixed while the state converges.
    pub one_shot_field: bool,
    /// Also evaluate `J_T` by an ITO propagation of the continuous field
    /// (not counted in `matvecs`).
    pub reference: Option<ItoConfig>,
}

impl KrotovConfig {
    pub fn new(lambda_a: f64, propagator: KrotovPropagator) -> Self {
        Self {
            lambda_a,
            shape: ShapeFunction::SinSquared,
            max_iter: 100,
            stop_tol: 0.0,
            propagator,
            one_shot_field: false,
            reference: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.lambda_a > 0.0 && self.lambda_a.is_finite()) {
            return Err(invalid("lambda_a", "must be positive and finite"));
        }
        if !(self.stop_tol >= 0.0) {
            return Err(invalid("stop_tol", "must be non-negative"));
        }
        if let KrotovPropagator::Ito(c) = self.propagator {
            ItoConfig { dt: 1.0, ..c }.validate()?;
        }
        if let Some(c) = self.reference {
            ItoConfig { dt: 1.0, ..c }.validate()?;
        }
        Ok(())
    }

    pub(crate) fn ito_config(&self, dt: f64) -> Option<ItoConfig> {
        match self.propagator {
            KrotovPropagator::Ito(c) => Some(ItoConfig { dt, ..c }),
            KrotovPropagator::Pwc => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IterationRecord {
    pub i: usize,
    /// `J_T + λ_a ∫ Δε²/S dt`.
    pub j_total: f64,
    pub j_t: f64,
    /// `J_T` from the reference propagation, if requested.
    pub j_t_reference: Option<f64>,
    /// `(∫ Δε² dt)^{1/2}`.
    pub field_change_norm: f64,
    /// Cumulative matrix–vector products.
    pub matvecs: usize,
    /// Cumulative seconds.
    pub wall_time: f64,
}

/// Result of one control iteration.
#[derive(Debug, Clone)]
pub struct Update {
    pub field: ControlField,
    pub finals: Vec<CVector>,
    pub matvecs: usize,
    /// `λ_a ∫ Δε²/S dt`.
    pub running_cost: f64,
    pub field_change_norm: f64,
}

#[derive(Debug, Clone)]
pub struct OptimizationResult {
    pub records: Vec<IterationRecord>,
    pub field: ControlField,
    pub finals: Vec<CVector>,
    pub converged: bool,
}

impl OptimizationResult {
    pub fn final_j_t(&self) -> f64 {
        self.records.last().map_or(f64::NAN, |r| r.j_t)
    }
}

/// Forward propagation of all initial states under `field`.
pub fn propagate_field(problem: &ControlProblem, field: &ControlField, cfg: &KrotovConfig) -> Result<(Vec<CVector>, usize)> {
    match cfg.ito_config(problem.dt()) {
        None => forward_pwc(problem, field),
        Some(c) => forward_ito(problem, field, &c),
    }
}

/// Runs control iterations from `guess` until `J_T ≤ stop_tol` or
/// `max_iter` updates. Record 0 is the guess.
///
/// A failing iteration aborts with its error; the caller keeps whatever it
/// logged through `on_iteration`.
pub fn optimize_with(
    problem: &ControlProblem,
    guess: &ControlField,
    cfg: &KrotovConfig,
    mut on_iteration: impl FnMut(&IterationRecord, &ControlField),
) -> Result<OptimizationResult> {
    cfg.validate()?;
    if guess.n_steps() != problem.n_steps || (guess.t_final - problem.t_final).abs() > 1e-12 * problem.t_final {
        return Err(invalid("guess", "field grid does not match the problem"));
    }
    let start = Instant::now();
    let mut field = match cfg.propagator {
        KrotovPropagator::Ito(c) if guess.sub_order() != Some(c.m_order) => guess.refined(c.m_order)?,
        KrotovPropagator::Pwc => guess.to_piecewise_constant(),
        _ => guess.clone(),
    };
    let (mut finals, mut matvecs) = propagate_field(problem, &field, cfg)?;
    let reference = |field: &ControlField| -> Result<Option<f64>> {
        match cfg.reference {
            None => Ok(None),
            Some(c) => {
                let (f, _) = forward_ito(problem, field, &c)?;
                Ok(Some(functional_value(&problem.functional, &f)?))
            }
        }
    };
    let j0 = functional_value(&problem.functional, &finals)?;
    let rec0 = IterationRecord {
        i: 0,
        j_total: j0,
        j_t: j0,
        j_t_reference: reference(&field)?,
        field_change_norm: 0.0,
        matvecs,
        wall_time: start.elapsed().as_secs_f64(),
    };
    on_iteration(&rec0, &field);
    let mut records = vec![rec0];
    let mut converged = j0 <= cfg.stop_tol;
    while !converged && records.len() <= cfg.max_iter {
        let up = match cfg.propagator {
            KrotovPropagator::Pwc => {
                let (chi, mv) = backward_costate(problem, &field, &finals)?;
                matvecs += mv;
                pwc_update(problem, &field, &chi, cfg)?
            }
            KrotovPropagator::Ito(_) => {
                let (chi, mv) = backward_costate_ito(problem, &field, &finals, cfg)?;
                matvecs += mv;
                ito_update(problem, &field, &chi, cfg)?
            }
        };
        matvecs += up.matvecs;
        let j_t = functional_value(&problem.functional, &up.finals)?;
        if !j_t.is_finite() {
            return Err(Error::NonFinite { context: "functional" });
        }
        field = up.field;
        field.iteration = records.len();
        finals = up.finals;
        let rec = IterationRecord {
            i: records.len(),
            j_total: j_t + up.running_cost,
            j_t,
            j_t_reference: reference(&field)?,
            field_change_norm: up.field_change_norm,
            matvecs,
            wall_time: start.elapsed().as_secs_f64(),
        };
        on_iteration(&rec, &field);
        records.push(rec);
        converged = j_t <= cfg.stop_tol;
    }
    if records.len() == 1 {
        // no update ran: hand back the guess in its own representation
        field = guess.clone();
    }
    Ok(OptimizationResult {
        records,
        field,
        finals,
        converged,
    })
}

pub fn optimize(problem: &ControlProblem, guess: &ControlField, cfg: &KrotovConfig) -> Result<OptimizationResult> {
    optimize_with(problem, guess, cfg, |_, _| {})
}

/// Concatenates the states of all targets.
pub(crate) fn stack(vs: &[CVector]) -> CVector {
    let n = vs[0].len();
    let mut out = CVector::zeros(n * vs.len());
    for (k, v) in vs.iter().enumerate() {
        out.rows_mut(k * n, n).copy_from(v);
    }
    out
}

pub(crate) fn unstack(v: &CVector, k: usize) -> Vec<CVector> {
    let n = v.len() / k;
    (0..k).map(|i| v.rows(i * n, n).into_owned()).collect()
}
