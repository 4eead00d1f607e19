//! Time-dependent generators `G(t)` of `du/dt = G(t) u`.
//!
//! All prefactors (`−i` for Schrödinger dynamics, the Liouvillian for open
//! systems) are absorbed at construction, so propagators only ever see
//! `G(t) = A + Σ_k c_k(t) B_k`.

use std::sync::Arc;

use crate::error::{Error, Result};
use crate::quantum::{
    commutator_superop, dissipator_superop, matvec_into, CMatrix, CVector, Space, C64, I,
};

pub type CoeffFn = Arc<dyn Fn(f64) -> C64 + Send + Sync>;

/// Right-hand side of an inhomogeneous evolution equation with a splitting
/// `G(t) = G_0 + G_td(t)` anchored at a chosen time.
///
/// `inhomogeneity` may depend non-linearly on the state; only the anchor
/// generator has to be linear.
pub trait Dynamics: Send + Sync {
    fn space(&self) -> Space;

    fn dim(&self) -> usize {
        self.space().vector_len()
    }

    /// Dense `G(t)`.
    fn generator(&self, t: f64) -> CMatrix;

    /// `s(u, t) = G(t) u − G(anchor) u`, accumulated into `out`.
    /// Returns the number of operator applications used.
    fn inhomogeneity(&self, t: f64, anchor: f64, u: &CVector, out: &mut CVector) -> usize;
}

/// `G(t) = A + Σ_k c_k(t) B_k`.
#[derive(Clone)]
pub struct Generator {
    pub drift: CMatrix,
    pub terms: Vec<(CMatrix, CoeffFn)>,
    pub space: Space,
}

impl std::fmt::Debug for Generator {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Generator")
            .field("space", &self.space)
            .field("terms", &self.terms.len())
            .finish()
    }
}

pub fn real_coeff(f: impl Fn(f64) -> f64 + Send + Sync + 'static) -> CoeffFn {
    Arc::new(move |t| C64::new(f(t), 0.0))
}

impl Generator {
    pub fn new(drift: CMatrix, terms: Vec<(CMatrix, CoeffFn)>, space: Space) -> Result<Self> {
        let n = space.vector_len();
        let bad = |m: &CMatrix| m.nrows() != n || m.ncols() != n;
        if bad(&drift) {
            return Err(Error::DimensionMismatch {
                expected: n,
                got: drift.nrows(),
            });
        }
        if let Some((m, _)) = terms.iter().find(|(m, _)| bad(m)) {
            return Err(Error::DimensionMismatch {
                expected: n,
                got: m.nrows(),
            });
        }
        Ok(Self {
            drift,
            terms,
            space,
        })
    }

    /// Schrödinger generator `−i (H_0 + Σ_k f_k(t) H_k)`.
    pub fn schrodinger(h0: &CMatrix, controls: Vec<(CMatrix, CoeffFn)>) -> Result<Self> {
        let n = h0.nrows();
        let terms = controls.into_iter().map(|(h, f)| (h * (-I), f)).collect();
        Self::new(h0 * (-I), terms, Space::Hilbert(n))
    }

    /// Liouvillian `−i[H_0 + Σ f_k(t) H_k, ·] + Σ γ_j D[L_j]` on column-stacked density matrices.
    pub fn lindblad(
        h0: &CMatrix,
        controls: Vec<(CMatrix, CoeffFn)>,
        lindblad_ops: &[(CMatrix, f64)],
    ) -> Result<Self> {
        let n = h0.nrows();
        let mut drift = commutator_superop(h0);
        for (l, rate) in lindblad_ops {
            if *rate < 0.0 {
                return Err(crate::error::invalid("rate", "rates must be non-negative"));
            }
            drift += dissipator_superop(l, *rate);
        }
        let terms = controls
            .into_iter()
            .map(|(h, f)| (commutator_superop(&h), f))
            .collect();
        Self::new(drift, terms, Space::Liouville(n))
    }

    pub fn at(&self, t: f64) -> CMatrix {
        let mut g = self.drift.clone();
        for (b, c) in &self.terms {
            let ct = c(t);
            if ct != C64::new(0.0, 0.0) {
                g.zip_apply(b, |gi, bi| *gi += ct * bi);
            }
        }
        g
    }

    /// `G_td(t) = G(t) − G(anchor)`.
    pub fn g_td(&self, t: f64, anchor: f64) -> CMatrix {
        let n = self.drift.nrows();
        let mut g = CMatrix::zeros(n, n);
        for (b, c) in &self.terms {
            let d = c(t) - c(anchor);
            g.zip_apply(b, |gi, bi| *gi += d * bi);
        }
        g
    }

    /// Generator of the costate equation run forward in `s = t_final − t`:
    /// `dχ/ds = G(t_final − s)† χ`.
    pub fn adjoint_reversed(&self, t_final: f64) -> Generator {
        let terms = self
            .terms
            .iter()
            .map(|(b, c)| {
                let c = c.clone();
                let f: CoeffFn = Arc::new(move |s| c(t_final - s).conj());
                (b.adjoint(), f)
            })
            .collect();
        Generator {
            drift: self.drift.adjoint(),
            terms,
            space: self.space,
        }
    }
}

impl Dynamics for Generator {
    fn space(&self) -> Space {
        self.space
    }

    fn generator(&self, t: f64) -> CMatrix {
        self.at(t)
    }

    fn inhomogeneity(&self, t: f64, anchor: f64, u: &CVector, out: &mut CVector) -> usize {
        out.fill(C64::new(0.0, 0.0));
        let mut tmp = CVector::zeros(u.len());
        let mut count = 0;
        for (b, c) in &self.terms {
            let d = c(t) - c(anchor);
            if d == C64::new(0.0, 0.0) {
                continue;
            }
            matvec_into(b, u, &mut tmp);
            out.zip_apply(&tmp, |o, x| *o += d * x);
            count += 1;
        }
        count
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quantum::max_abs;

    fn pauli_x() -> CMatrix {
        CMatrix::from_row_slice(2, 2, &[C64::new(0.0, 0.0), C64::new(1.0, 0.0), C64::new(1.0, 0.0), C64::new(0.0, 0.0)])
    }

    #[test]
    fn anchor_splitting_vanishes_at_anchor() {
        let h0 = CMatrix::from_diagonal(&CVector::from_vec(vec![C64::new(0.0, 0.0), C64::new(1.0, 0.0)]));
        let g = Generator::schrodinger(&h0, vec![(pauli_x(), real_coeff(|t| (3.0 * t).cos()))]).unwrap();
        let tm = 0.37;
        assert!(max_abs(&g.g_td(tm, tm)) <= 1e-15);
        assert!(max_abs(&(g.at(tm) + g.g_td(0.5, tm) - g.at(0.5))) < 1e-15);
    }

    #[test]
    fn inhomogeneity_matches_dense_correction() {
        let h0 = CMatrix::from_diagonal(&CVector::from_vec(vec![C64::new(0.0, 0.0), C64::new(1.0, 0.0)]));
        let g = Generator::schrodinger(&h0, vec![(pauli_x(), real_coeff(|t| t * t))]).unwrap();
        let u = CVector::from_vec(vec![C64::new(0.6, 0.1), C64::new(-0.2, 0.7)]);
        let mut out = CVector::zeros(2);
        g.inhomogeneity(1.3, 0.4, &u, &mut out);
        let dense = g.g_td(1.3, 0.4) * &u;
        assert!((out - dense).camax() < 1e-15);
    }

    #[test]
    fn dimension_checked() {
        let bad = Generator::new(CMatrix::zeros(2, 2), vec![], Space::Hilbert(3));
        assert!(bad.is_err());
    }
}
