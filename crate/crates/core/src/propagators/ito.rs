//! Self-consistent iterative time-ordering on one interval.

use crate::error::{invalid, Error, Result};
use crate::generator::Dynamics;
use crate::quantum::{CVector, C64, ZERO};
use crate::spectral::{cgl_nodes, divided_differences, interp_error_estimate, newton_to_monomial, LocalGrid, MonomialPoly};

use super::funcs::{CoeffCache, FmExpansion, LinearOperator};

pub const MAX_ORDER: usize = 16;

/// How the first iterate on each interval is formed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Guess {
    /// `u(t_n)` at every node.
    ConstantPrevious,
    /// `exp(G₀ τ_j) u(t_n)`.
    HomogeneousSolve,
    /// Previous interval's solution evaluated at `δt + τ_j`.
    #[default]
    Extrapolate,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ItoConfig {
    pub m_order: usize,
    pub dt: f64,
    pub tol_iter: f64,
    pub max_iter: usize,
    pub guess: Guess,
    /// Spend one extra inhomogeneity evaluation per step on `eps_m`.
    pub estimate_error: bool,
}

impl ItoConfig {
    pub fn new(m_order: usize, dt: f64) -> Self {
        Self {
            m_order,
            dt,
            tol_iter: 1e-12,
            max_iter: 20,
            guess: Guess::Extrapolate,
            estimate_error: true,
        }
    }

    pub fn with_guess(mut self, guess: Guess) -> Self {
        self.guess = guess;
        self
    }

    pub fn with_tol(mut self, tol: f64) -> Self {
        self.tol_iter = tol;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(2..=MAX_ORDER).contains(&self.m_order) {
            return Err(invalid("m_order", format!("{} not in [2, {MAX_ORDER}]", self.m_order)));
        }
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return Err(invalid("dt", "must be positive and finite"));
        }
        if !(self.tol_iter > 0.0) {
            return Err(invalid("tol_iter", "must be positive"));
        }
        if self.max_iter == 0 {
            return Err(invalid("max_iter", "must be at least 1"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct StepReport {
    pub n_iter: usize,
    pub eps_iter: f64,
    pub eps_m: f64,
    pub eps_fm: f64,
    pub matvecs: usize,
    pub converged: bool,
}

impl StepReport {
    /// `Err(MaxIterExceeded)` for an unconverged step.
    pub fn check(&self) -> Result<()> {
        if self.converged {
            Ok(())
        } else {
            Err(Error::MaxIterExceeded {
                iterations: self.n_iter,
                eps_iter: self.eps_iter,
            })
        }
    }
}

/// Per-propagation scratch data. Owned by a single propagation.
#[derive(Debug, Clone, Default)]
pub struct ItoWorkspace {
    pub v_vectors: Vec<CVector>,
    pub s_monomial: Option<MonomialPoly>,
    /// Expansion of `f_M(G₀, ·) v_M` valid up to `2δt` when extrapolating.
    pub fm_cache: Option<FmExpansion>,
    pub last_report: Option<StepReport>,
    pub coeffs: CoeffCache,
    grid: Option<LocalGrid>,
    prev_dt: f64,
    prev_valid: bool,
}

impl ItoWorkspace {
    pub fn new() -> Self {
        Self::default()
    }

    /// Forget the previous interval (e.g. after a discontinuity).
    pub fn reset(&mut self) {
        self.prev_valid = false;
        self.v_vectors.clear();
        self.s_monomial = None;
        self.fm_cache = None;
    }

    pub fn grid(&mut self, m: usize, dt: f64) -> Result<LocalGrid> {
        match &self.grid {
            Some(g) if g.m_order == m && g.dt == dt => Ok(g.clone()),
            _ => {
                let g = cgl_nodes(m, dt)?;
                self.grid = Some(g.clone());
                Ok(g)
            }
        }
    }

    /// Evaluates the stored previous-interval solution at offset `τ` from
    /// that interval's start.
    pub fn evaluate_previous(&mut self, tau: f64) -> Result<CVector> {
        let fm = self
            .fm_cache
            .as_ref()
            .ok_or_else(|| invalid("workspace", "no previous interval stored"))?;
        let (mut u, _) = fm.apply(tau, &mut self.coeffs)?;
        add_taylor(&mut u, &self.v_vectors, tau);
        Ok(u)
    }

    fn can_extrapolate(&self, dt: f64) -> bool {
        self.prev_valid
            && self.prev_dt == dt
            && self.fm_cache.as_ref().is_some_and(|f| f.tau_max() >= 2.0 * dt * (1.0 - 1e-12))
    }
}

/// `u += Σ_{m<M} τ^m/m! v_m`.
fn add_taylor(u: &mut CVector, v: &[CVector], tau: f64) {
    let m = v.len() - 1;
    let mut c = 1.0;
    for (k, vk) in v.iter().take(m).enumerate() {
        if k > 0 {
            c *= tau / k as f64;
        }
        let cc = C64::new(c, 0.0);
        u.zip_apply(vk, |a, x| *a += cc * x);
    }
}

/// Source of inhomogeneity samples for one interval.
pub trait IntervalSource {
    /// `s` at node `j` (offset `τ`) for the state `u` there; returns matvecs used.
    fn sample(&mut self, j: usize, tau: f64, u: &CVector, s: &mut CVector) -> Result<usize>;

    /// `s` at an arbitrary offset, if the source supports it.
    fn sample_off_grid(&mut self, _tau: f64, _u: &CVector, _s: &mut CVector) -> Option<Result<usize>> {
        None
    }

    /// Extra residual that must also fall below tolerance (0 if none).
    fn aux_residual(&mut self) -> f64 {
        0.0
    }
}

pub(crate) struct DynamicsSource<'a, D: Dynamics + ?Sized> {
    pub dynamics: &'a D,
    pub t_n: f64,
    pub anchor: f64,
}

impl<D: Dynamics + ?Sized> IntervalSource for DynamicsSource<'_, D> {
    fn sample(&mut self, _j: usize, tau: f64, u: &CVector, s: &mut CVector) -> Result<usize> {
        Ok(self.dynamics.inhomogeneity(self.t_n + tau, self.anchor, u, s))
    }

    fn sample_off_grid(&mut self, tau: f64, u: &CVector, s: &mut CVector) -> Option<Result<usize>> {
        Some(self.sample(usize::MAX, tau, u, s))
    }
}

/// Converged (or best) node states of one interval.
#[derive(Debug, Clone)]
pub struct IntervalSolution {
    pub nodes: Vec<CVector>,
    pub report: StepReport,
}

impl IntervalSolution {
    pub fn end(&self) -> &CVector {
        self.nodes.last().expect("at least two nodes")
    }
}

/// First iterate at the grid nodes.
pub fn initial_guess<O: LinearOperator + ?Sized>(
    g0: &O,
    grid: &LocalGrid,
    u0: &CVector,
    guess: Guess,
    ws: &mut ItoWorkspace,
) -> Result<(Vec<CVector>, usize)> {
    let guess = match guess {
        Guess::Extrapolate if !ws.can_extrapolate(grid.dt) => Guess::HomogeneousSolve,
        g => g,
    };
    let mut nodes = Vec::with_capacity(grid.nodes.len());
    let mut matvecs = 0;
    match guess {
        Guess::ConstantPrevious => nodes.resize(grid.nodes.len(), u0.clone()),
        Guess::HomogeneousSolve => {
            let ex = FmExpansion::build(g0, u0, 0, grid.dt, &mut ws.coeffs)?;
            matvecs += ex.matvecs;
            for &tau in &grid.nodes {
                nodes.push(if tau == 0.0 { u0.clone() } else { ex.apply(tau, &mut ws.coeffs)?.0 });
            }
        }
        Guess::Extrapolate => {
            for &tau in &grid.nodes {
                nodes.push(if tau == 0.0 { u0.clone() } else { ws.evaluate_previous(grid.dt + tau)? });
            }
        }
    }
    Ok((nodes, matvecs))
}

fn finite(v: &CVector) -> bool {
    v.iter().all(|c| c.re.is_finite() && c.im.is_finite())
}

/// Solves `du/dτ = G₀ u + s(u, τ)` on `[0, δt]` from `u0` by fixed-point
/// iteration of the Duhamel solution.
///
/// Never fails on non-convergence: the best iterate is returned with
/// `report.converged == false`.
pub fn solve_interval<O: LinearOperator + ?Sized, S: IntervalSource + ?Sized>(
    g0: &O,
    u0: &CVector,
    cfg: &ItoConfig,
    src: &mut S,
    ws: &mut ItoWorkspace,
) -> Result<IntervalSolution> {
    cfg.validate()?;
    let m = cfg.m_order;
    let dim = u0.len();
    if g0.dim() != dim {
        return Err(Error::DimensionMismatch {
            expected: g0.dim(),
            got: dim,
        });
    }
    let grid = ws.grid(m, cfg.dt)?;
    let fm_span = if cfg.guess == Guess::Extrapolate { 2.0 * cfg.dt } else { cfg.dt };
    let (mut nodes, mut matvecs) = initial_guess(g0, &grid, u0, cfg.guess, ws)?;

    let mut samples = vec![CVector::zeros(dim); m];
    matvecs += src.sample(0, 0.0, u0, &mut samples[0])?;
    let mut report = StepReport::default();
    let mut best: Option<(f64, Vec<CVector>, Vec<CVector>, FmExpansion, MonomialPoly)> = None;
    let mut last_interp = None;
    let mut tmp = CVector::zeros(dim);

    for k in 1..=cfg.max_iter {
        for j in 1..m {
            matvecs += src.sample(j, grid.nodes[j], &nodes[j], &mut samples[j])?;
        }
        let zero_inhomogeneity = samples.iter().all(|s| s.iter().all(|c| *c == ZERO));
        let interp = divided_differences(&samples, &grid)?;
        let mono = newton_to_monomial(&interp);

        // v_0 = u0, v_m = G₀ v_{m−1} + s_{m−1}
        let mut v = Vec::with_capacity(m + 1);
        v.push(u0.clone());
        for i in 1..=m {
            g0.apply(&v[i - 1], &mut tmp);
            tmp += &mono.coeffs[i - 1];
            v.push(tmp.clone());
        }
        matvecs += m * g0.weight();
        let fm = FmExpansion::build(g0, &v[m], m, fm_span, &mut ws.coeffs)?;
        matvecs += fm.matvecs;

        let mut new_nodes = Vec::with_capacity(m);
        new_nodes.push(u0.clone());
        let mut eps_fm: f64 = 0.0;
        for &tau in &grid.nodes[1..] {
            let (mut u, r) = fm.apply(tau, &mut ws.coeffs)?;
            add_taylor(&mut u, &v, tau);
            eps_fm = eps_fm.max(r);
            new_nodes.push(u);
        }
        let end_new = &new_nodes[m - 1];
        if !finite(end_new) {
            return Err(Error::NonFinite { context: "ITO iterate" });
        }
        let nn = end_new.norm();
        let diff = (end_new - &nodes[m - 1]).norm();
        let eps_iter = if zero_inhomogeneity {
            0.0
        } else if nn > 0.0 {
            diff / nn
        } else {
            diff
        };
        let aux = src.aux_residual();
        nodes = new_nodes;
        report.n_iter = k;
        report.eps_iter = eps_iter;
        report.eps_fm = eps_fm;
        let score = eps_iter.max(aux);
        if best.as_ref().is_none_or(|b| score <= b.0) {
            best = Some((score, nodes.clone(), v, fm, mono));
        }
        last_interp = Some(interp);
        if eps_iter <= cfg.tol_iter && aux <= cfg.tol_iter {
            report.converged = true;
            break;
        }
    }

    let (score, best_nodes, v, fm, mono) = best.expect("at least one iteration");
    if !report.converged {
        report.eps_iter = score;
    }
    let interp = last_interp.expect("at least one iteration");
    report.eps_m = if cfg.estimate_error {
        let tau_p = grid.probe_offset();
        let (mut up, _) = fm.apply(tau_p, &mut ws.coeffs)?;
        add_taylor(&mut up, &v, tau_p);
        let mut sp = CVector::zeros(dim);
        match src.sample_off_grid(tau_p, &up, &mut sp) {
            Some(r) => {
                matvecs += r?;
                interp_error_estimate(&interp, Some((tau_p, &sp)), cfg.dt)
            }
            None => interp_error_estimate(&interp, None, cfg.dt),
        }
    } else {
        f64::NAN
    };
    let scale = best_nodes[m - 1].norm();
    if scale > 0.0 && report.eps_m.is_finite() {
        report.eps_m /= scale;
    }
    report.matvecs = matvecs;
    ws.v_vectors = v;
    ws.s_monomial = Some(mono);
    ws.fm_cache = Some(fm);
    ws.prev_dt = cfg.dt;
    ws.prev_valid = true;
    ws.last_report = Some(report);
    Ok(IntervalSolution {
        nodes: best_nodes,
        report,
    })
}

/// One ITO step `t_n → t_n + δt` with `G₀ = G(t_n + δt/2)`.
///
/// A step that exhausts `max_iter` still returns its best iterate; the
/// report has `converged == false` and [`StepReport::check`] turns it into
/// `MaxIterExceeded`.
pub fn ito_step<D: Dynamics + ?Sized>(
    dynamics: &D,
    t_n: f64,
    cfg: &ItoConfig,
    state: &CVector,
    ws: &mut ItoWorkspace,
) -> Result<(CVector, StepReport)> {
    if state.len() != dynamics.dim() {
        return Err(Error::DimensionMismatch {
            expected: dynamics.dim(),
            got: state.len(),
        });
    }
    let anchor = t_n + 0.5 * cfg.dt;
    let g0 = dynamics.generator(anchor);
    let mut src = DynamicsSource {
        dynamics,
        t_n,
        anchor,
    };
    let sol = solve_interval(&g0, state, cfg, &mut src, ws)?;
    let end = sol.end().clone();
    Ok((end, sol.report))
}
