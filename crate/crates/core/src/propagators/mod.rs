//! Piecewise-constant (PWC) and iterative time-ordering (ITO) propagation.

mod funcs;
mod ito;

pub use funcs::{
    expm_apply, expm_apply_with, expm_dense, f_m_apply, fm_scalar, BlockDiagonal, CoeffCache, ExpBackend, FmExpansion,
    LinearOperator, SegmentKey, SpectralSegment, EXPANSION_CAP, SERIES_TERM_CAP,
};
pub use ito::{
    initial_guess, ito_step, solve_interval, Guess, IntervalSolution, IntervalSource, ItoConfig, ItoWorkspace,
    StepReport, MAX_ORDER,
};

use crate::error::{invalid, Error, Result};
use crate::generator::Dynamics;
use crate::quantum::{expectation, CVector, Operator, QuantumState, C64};

/// `exp(G(t_mid) δt) state`.
pub fn pwc_step<D: Dynamics + ?Sized>(
    dynamics: &D,
    t_mid: f64,
    dt: f64,
    state: &CVector,
    backend: ExpBackend,
    cache: &mut CoeffCache,
) -> Result<(CVector, usize)> {
    expm_apply_with(&dynamics.generator(t_mid), dt, state, backend, cache)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Method {
    Pwc(ExpBackend),
    Ito(ItoConfig),
}

/// What to record along the global grid, every `every`-th step (the initial
/// and final states are always sampled).
#[derive(Debug, Clone)]
pub struct Observers {
    pub operators: Vec<Operator>,
    pub every: usize,
    pub populations: bool,
    pub states: bool,
}

impl Default for Observers {
    fn default() -> Self {
        Self {
            operators: Vec::new(),
            every: 1,
            populations: false,
            states: false,
        }
    }
}

impl Observers {
    pub fn expectations(operators: Vec<Operator>, every: usize) -> Self {
        Self {
            operators,
            every,
            ..Self::default()
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct PropagationStats {
    pub steps: usize,
    pub iterations: usize,
    pub matvecs: usize,
    pub max_eps_iter: f64,
    pub max_eps_m: f64,
    pub max_eps_fm: f64,
}

impl PropagationStats {
    pub fn mean_iterations(&self) -> f64 {
        if self.steps == 0 {
            0.0
        } else {
            self.iterations as f64 / self.steps as f64
        }
    }

    fn absorb(&mut self, r: &StepReport) {
        self.steps += 1;
        self.iterations += r.n_iter;
        self.matvecs += r.matvecs;
        self.max_eps_iter = self.max_eps_iter.max(r.eps_iter);
        if r.eps_m.is_finite() {
            self.max_eps_m = self.max_eps_m.max(r.eps_m);
        }
        self.max_eps_fm = self.max_eps_fm.max(r.eps_fm);
    }
}

#[derive(Debug, Clone)]
pub struct Trajectory {
    pub times: Vec<f64>,
    /// `expectations[k][i]`: operator `i` at `times[k]`.
    pub expectations: Vec<Vec<C64>>,
    pub populations: Vec<Vec<f64>>,
    pub states: Vec<QuantumState>,
    pub final_state: QuantumState,
    pub stats: PropagationStats,
}

fn record(obs: &Observers, t: f64, state: &QuantumState, traj: &mut Trajectory) -> Result<()> {
    traj.times.push(t);
    if !obs.operators.is_empty() {
        let vals = obs
            .operators
            .iter()
            .map(|op| expectation(op, state))
            .collect::<Result<Vec<_>>>()?;
        traj.expectations.push(vals);
    }
    if obs.populations {
        traj.populations.push(state.populations());
    }
    if obs.states {
        traj.states.push(state.clone());
    }
    Ok(())
}

/// Propagates `state0` from `t0` to `t_end` on `n_steps` equal steps.
///
/// For ITO the step size in `cfg` is replaced by the global grid spacing and
/// an unconverged step aborts with `MaxIterExceeded`.
pub fn propagate<D: Dynamics + ?Sized>(
    dynamics: &D,
    t0: f64,
    t_end: f64,
    n_steps: usize,
    method: Method,
    state0: &QuantumState,
    observers: &Observers,
) -> Result<Trajectory> {
    if n_steps == 0 {
        return Err(invalid("n_steps", "must be at least 1"));
    }
    if !(t_end > t0) {
        return Err(invalid("t_end", "must exceed t0"));
    }
    if state0.len() != dynamics.dim() {
        return Err(Error::DimensionMismatch {
            expected: dynamics.dim(),
            got: state0.len(),
        });
    }
    let every = observers.every.max(1);
    let dt = (t_end - t0) / n_steps as f64;
    let space = state0.space;
    let mut u = state0.amplitudes.clone();
    let mut traj = Trajectory {
        times: Vec::new(),
        expectations: Vec::new(),
        populations: Vec::new(),
        states: Vec::new(),
        final_state: state0.clone(),
        stats: PropagationStats::default(),
    };
    record(observers, t0, state0, &mut traj)?;

    let mut cache = CoeffCache::new();
    let mut ws = ItoWorkspace::new();
    let cfg = match method {
        Method::Ito(c) => {
            let c = ItoConfig { dt, ..c };
            c.validate()?;
            Some(c)
        }
        Method::Pwc(_) => None,
    };
    for n in 0..n_steps {
        let t_n = t0 + n as f64 * dt;
        match (method, &cfg) {
            (Method::Pwc(backend), _) => {
                let (next, mv) = pwc_step(dynamics, t_n + 0.5 * dt, dt, &u, backend, &mut cache)?;
                traj.stats.absorb(&StepReport {
                    n_iter: 1,
                    matvecs: mv,
                    converged: true,
                    ..StepReport::default()
                });
                u = next;
            }
            (Method::Ito(_), Some(cfg)) => {
                let (next, report) = ito_step(dynamics, t_n, cfg, &u, &mut ws)?;
                report.check()?;
                traj.stats.absorb(&report);
                u = next;
            }
            _ => unreachable!(),
        }
        if !u.iter().all(|c| c.re.is_finite() && c.im.is_finite()) {
            return Err(Error::NonFinite { context: "propagation" });
        }
        if (n + 1) % every == 0 || n + 1 == n_steps {
            let st = QuantumState {
                amplitudes: u.clone(),
                space,
            };
            record(observers, t0 + (n + 1) as f64 * dt, &st, &mut traj)?;
        }
    }
    traj.final_state = QuantumState { amplitudes: u, space };
    Ok(traj)
}
