use crate::error::{invalid, Error, Result};
use crate::quantum::{CMatrix, CVector, C64, I};

/// Final-time functional `J_T`.
#[derive(Debug, Clone, PartialEq)]
pub enum OptimizationFunctional {
    /// `1 − |⟨ψ_tgt|ψ(T)⟩|²`.
    StateToState { target: CVector },
    /// `1 − ¼ Re Σ_n ⟨τ_n|Ψ_n(T)⟩` with `τ_n = O|n⟩`. Phase sensitive.
    Gate { targets: Vec<CVector> },
}

impl OptimizationFunctional {
    /// Gate functional for a 4×4 target acting on the lowest four levels of a
    /// `dim`-level system.
    pub fn gate(o: &CMatrix, dim: usize) -> Result<Self> {
        Self::gate_in_frame(o, dim, None)
    }

    /// As [`gate`](Self::gate), with the target defined in the frame rotating
    /// with a diagonal drift: `τ_n = e^{−iE T} O|n⟩` for `energies_t = (E, T)`.
    pub fn gate_in_frame(o: &CMatrix, dim: usize, energies_t: Option<(&[f64], f64)>) -> Result<Self> {
        if o.nrows() != 4 || o.ncols() != 4 {
            return Err(invalid("target", "gate target must be 4×4"));
        }
        if dim < 4 {
            return Err(invalid("dim", "need at least four levels"));
        }
        if let Some((e, _)) = energies_t {
            if e.len() < 4 {
                return Err(invalid("energies", "need the four lowest energies"));
            }
        }
        let targets = (0..4)
            .map(|n| {
                let mut v = CVector::zeros(dim);
                for m in 0..4 {
                    let phase = energies_t.map_or(C64::new(1.0, 0.0), |(e, t)| (-I * e[m] * t).exp());
                    v[m] = phase * o[(m, n)];
                }
                v
            })
            .collect();
        Ok(Self::Gate { targets })
    }

    pub fn n_states(&self) -> usize {
        match self {
            Self::StateToState { .. } => 1,
            Self::Gate { targets } => targets.len(),
        }
    }

    fn check(&self, finals: &[CVector]) -> Result<()> {
        if finals.len() != self.n_states() {
            return Err(Error::StateCount {
                expected: self.n_states(),
                got: finals.len(),
            });
        }
        let dim = match self {
            Self::StateToState { target } => target.len(),
            Self::Gate { targets } => targets[0].len(),
        };
        for f in finals {
            if f.len() != dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    got: f.len(),
                });
            }
        }
        Ok(())
    }
}

pub fn functional_value(f: &OptimizationFunctional, finals: &[CVector]) -> Result<f64> {
    f.check(finals)?;
    Ok(match f {
        OptimizationFunctional::StateToState { target } => 1.0 - target.dotc(&finals[0]).norm_sqr(),
        OptimizationFunctional::Gate { targets } => {
            let s: C64 = targets.iter().zip(finals).map(|(t, p)| t.dotc(p)).sum();
            1.0 - 0.25 * s.re
        }
    })
}

/// `χ(T) = −∇_⟨ψ| J_T` up to the positive factor absorbed in `λ_a`.
pub fn costate_terminal(f: &OptimizationFunctional, finals: &[CVector]) -> Result<Vec<CVector>> {
    f.check(finals)?;
    Ok(match f {
        OptimizationFunctional::StateToState { target } => {
            vec![target * target.dotc(&finals[0])]
        }
        OptimizationFunctional::Gate { targets } => targets.iter().map(|t| t * C64::new(0.25, 0.0)).collect(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quantum::ONE;

    fn basis(n: usize, k: usize) -> CVector {
        let mut v = CVector::zeros(n);
        v[k] = ONE;
        v
    }

    fn cnot() -> CMatrix {
        let mut c = CMatrix::zeros(4, 4);
        c[(0, 0)] = ONE;
        c[(1, 1)] = ONE;
        c[(2, 3)] = ONE;
        c[(3, 2)] = ONE;
        c
    }

    #[test]
    fn state_to_state_extremes() {
        let t = basis(3, 1);
        let f = OptimizationFunctional::StateToState { target: t.clone() };
        assert_eq!(functional_value(&f, std::slice::from_ref(&t)).unwrap(), 0.0);
        assert_eq!(functional_value(&f, &[basis(3, 0)]).unwrap(), 1.0);
        assert_eq!(costate_terminal(&f, std::slice::from_ref(&t)).unwrap()[0], t);
        assert_eq!(costate_terminal(&f, &[basis(3, 2)]).unwrap()[0], CVector::zeros(3));
    }

    #[test]
    fn gate_values() {
        let f = OptimizationFunctional::gate(&cnot(), 6).unwrap();
        let exact: Vec<CVector> = (0..4).map(|n| cnot().column(n).into_owned().insert_rows(4, 2, C64::new(0.0, 0.0))).collect();
        assert!(functional_value(&f, &exact).unwrap().abs() < 1e-15);
        let ident: Vec<CVector> = (0..4).map(|n| basis(6, n)).collect();
        // Re tr(CNOT) = 2: only |00⟩ and |01⟩ are fixed
        assert!((functional_value(&f, &ident).unwrap() - 0.5).abs() < 1e-15);

        let id = OptimizationFunctional::gate(&CMatrix::identity(4, 4), 6).unwrap();
        let chi = costate_terminal(&id, &ident).unwrap();
        for n in 0..4 {
            assert_eq!(chi[n], basis(6, n) * C64::new(0.25, 0.0));
        }
        assert!(matches!(functional_value(&id, &ident[..3]), Err(Error::StateCount { .. })));
    }

    #[test]
    fn rotating_frame_targets_carry_dynamic_phases() {
        let e = [0.0, 1.0, 2.0, 3.0];
        let f = OptimizationFunctional::gate_in_frame(&CMatrix::identity(4, 4), 4, Some((&e, 0.5))).unwrap();
        let OptimizationFunctional::Gate { targets } = f else { unreachable!() };
        assert!((targets[3][3] - (-I * 1.5).exp()).norm() < 1e-15);
    }
}
