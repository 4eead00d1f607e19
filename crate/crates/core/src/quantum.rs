//! Dense complex linear algebra for states, operators and Lindblad generators.
//!
//! Density matrices are vectorized by stacking columns, which matches the
//! column-major storage of [`nalgebra::DMatrix`]. With this convention
//! `vec(A ρ B) = (Bᵀ ⊗ A) vec(ρ)`, so the Liouvillian of a Lindblad equation is
//!
//! ```text
//! 𝓛 = −i (I ⊗ H − Hᵀ ⊗ I) + Σ_k γ_k ( L̄_k ⊗ L_k − ½ I ⊗ L_k†L_k − ½ (L_k†L_k)ᵀ ⊗ I ).
//! ```

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::error::{invalid, Error, Result};

pub type C64 = Complex64;
pub type CMatrix = DMatrix<C64>;
pub type CVector = DVector<C64>;

pub const I: C64 = C64::new(0.0, 1.0);
pub const ONE: C64 = C64::new(1.0, 0.0);
pub const ZERO: C64 = C64::new(0.0, 0.0);

/// Which space a state vector lives in. The payload is the Hilbert-space
/// dimension `N`; Liouville vectors have length `N²`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Space {
    Hilbert(usize),
    Liouville(usize),
}

impl Space {
    pub fn hilbert_dim(&self) -> usize {
        match *self {
            Space::Hilbert(n) | Space::Liouville(n) => n,
        }
    }

    pub fn vector_len(&self) -> usize {
        match *self {
            Space::Hilbert(n) => n,
            Space::Liouville(n) => n * n,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct QuantumState {
    pub amplitudes: CVector,
    pub space: Space,
}

impl QuantumState {
    pub fn new(amplitudes: CVector, space: Space) -> Result<Self> {
        if amplitudes.len() != space.vector_len() {
            return Err(Error::DimensionMismatch {
                expected: space.vector_len(),
                got: amplitudes.len(),
            });
        }
        Ok(Self { amplitudes, space })
    }

    pub fn hilbert(amplitudes: CVector) -> Self {
        let n = amplitudes.len();
        Self {
            amplitudes,
            space: Space::Hilbert(n),
        }
    }

    /// Basis state `|k⟩` of an `n`-dimensional Hilbert space.
    pub fn basis(n: usize, k: usize) -> Self {
        let mut v = CVector::zeros(n);
        v[k] = ONE;
        Self::hilbert(v)
    }

    /// Pure-state density matrix `|ψ⟩⟨ψ|` in vectorized form.
    pub fn to_density(&self) -> Result<QuantumState> {
        match self.space {
            Space::Hilbert(_) => {
                let psi = &self.amplitudes;
                vectorize(&(psi * psi.adjoint()))
            }
            Space::Liouville(_) => Ok(self.clone()),
        }
    }

    pub fn len(&self) -> usize {
        self.amplitudes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.amplitudes.is_empty()
    }

    pub fn norm(&self) -> f64 {
        self.amplitudes.norm()
    }

    /// Level populations: `|c_n|²` for Hilbert states, `Re ρ_nn` for density matrices.
    pub fn populations(&self) -> Vec<f64> {
        match self.space {
            Space::Hilbert(_) => self.amplitudes.iter().map(|c| c.norm_sqr()).collect(),
            Space::Liouville(n) => (0..n).map(|k| self.amplitudes[k * n + k].re).collect(),
        }
    }

    /// Trace of the devectorized density matrix (Liouville) or `⟨ψ|ψ⟩` (Hilbert).
    pub fn trace(&self) -> C64 {
        match self.space {
            Space::Hilbert(_) => C64::new(self.amplitudes.norm_squared(), 0.0),
            Space::Liouville(n) => (0..n).map(|k| self.amplitudes[k * n + k]).sum(),
        }
    }
}

/// Dense operator with an optional, verified Hermiticity flag.
#[derive(Debug, Clone, PartialEq)]
pub struct Operator {
    pub matrix: CMatrix,
    hermitian: bool,
}

/// Tolerance on `max |A − A†|` for an operator to be flagged Hermitian.
pub const HERMITIAN_TOL: f64 = 1e-13;

impl Operator {
    pub fn new(matrix: CMatrix) -> Result<Self> {
        if !matrix.is_square() {
            return Err(invalid("operator", "matrix must be square"));
        }
        Ok(Self {
            matrix,
            hermitian: false,
        })
    }

    /// Builds an operator flagged Hermitian; fails if `max |A − A†| > 1e-13`.
    pub fn hermitian(matrix: CMatrix) -> Result<Self> {
        if !matrix.is_square() {
            return Err(invalid("operator", "matrix must be square"));
        }
        let defect = hermiticity_defect(&matrix);
        if defect > HERMITIAN_TOL {
            return Err(invalid(
                "operator",
                format!("not Hermitian: max |A - A†| = {defect:e}"),
            ));
        }
        Ok(Self {
            matrix,
            hermitian: true,
        })
    }

    pub fn from_real_diagonal(diag: &[f64]) -> Self {
        let m = CMatrix::from_diagonal(&CVector::from_iterator(
            diag.len(),
            diag.iter().map(|&d| C64::new(d, 0.0)),
        ));
        Self {
            matrix: m,
            hermitian: true,
        }
    }

    pub fn identity(n: usize) -> Self {
        Self {
            matrix: CMatrix::identity(n, n),
            hermitian: true,
        }
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn is_hermitian(&self) -> bool {
        self.hermitian
    }

    pub fn adjoint(&self) -> Operator {
        Operator {
            matrix: self.matrix.adjoint(),
            hermitian: self.hermitian,
        }
    }
}

pub fn hermiticity_defect(m: &CMatrix) -> f64 {
    let mut worst = 0.0f64;
    for j in 0..m.ncols() {
        for i in 0..m.nrows() {
            worst = worst.max((m[(i, j)] - m[(j, i)].conj()).norm());
        }
    }
    worst
}

/// Column-stacks an `N×N` matrix into a Liouville-space state.
pub fn vectorize(rho: &CMatrix) -> Result<QuantumState> {
    if !rho.is_square() {
        return Err(Error::DimensionMismatch {
            expected: rho.nrows(),
            got: rho.ncols(),
        });
    }
    let n = rho.nrows();
    Ok(QuantumState {
        amplitudes: CVector::from_column_slice(rho.as_slice()),
        space: Space::Liouville(n),
    })
}

/// Inverse of [`vectorize`].
pub fn devectorize(state: &QuantumState) -> Result<CMatrix> {
    match state.space {
        Space::Liouville(n) => {
            if state.amplitudes.len() != n * n {
                return Err(Error::DimensionMismatch {
                    expected: n * n,
                    got: state.amplitudes.len(),
                });
            }
            Ok(CMatrix::from_column_slice(n, n, state.amplitudes.as_slice()))
        }
        Space::Hilbert(n) => Err(Error::DimensionMismatch {
            expected: n * n,
            got: n,
        }),
    }
}

/// Superoperator of `ρ ↦ −i[H, ρ]`.
pub fn commutator_superop(h: &CMatrix) -> CMatrix {
    let n = h.nrows();
    let id = CMatrix::identity(n, n);
    (id.kronecker(h) - h.transpose().kronecker(&id)) * (-I)
}

/// Superoperator of `ρ ↦ γ (L ρ L† − ½{L†L, ρ})`.
pub fn dissipator_superop(l: &CMatrix, rate: f64) -> CMatrix {
    let n = l.nrows();
    let id = CMatrix::identity(n, n);
    let ldl = l.adjoint() * l;
    let sandwich = l.map(|c| c.conj()).kronecker(l);
    let anti = id.kronecker(&ldl) + ldl.transpose().kronecker(&id);
    (sandwich - anti * C64::new(0.5, 0.0)) * C64::new(rate, 0.0)
}

/// Lindblad master equation `dρ/dt = −i[H(t), ρ] + Σ γ_k (L_k ρ L_k† − ½{L_k†L_k, ρ})`.
pub struct LindbladSpec {
    pub hamiltonian: Box<dyn Fn(f64) -> CMatrix + Send + Sync>,
    pub lindblad_ops: Vec<(CMatrix, f64)>,
}

impl LindbladSpec {
    pub fn dim(&self) -> usize {
        (self.hamiltonian)(0.0).nrows()
    }
}

/// Assembles the Liouvillian `𝓛(t)` acting on column-stacked density matrices.
pub fn build_liouvillian(spec: &LindbladSpec, t: f64) -> Result<Operator> {
    let h = (spec.hamiltonian)(t);
    if !h.is_square() {
        return Err(invalid("hamiltonian", "must be square"));
    }
    let n = h.nrows();
    let mut l = commutator_superop(&h);
    for (op, rate) in &spec.lindblad_ops {
        if *rate < 0.0 || !rate.is_finite() {
            return Err(invalid("rate", format!("rates must be >= 0, got {rate}")));
        }
        if op.nrows() != n || op.ncols() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                got: op.nrows(),
            });
        }
        l += dissipator_superop(op, *rate);
    }
    Operator::new(l)
}

/// `⟨ψ|A|ψ⟩` for Hilbert states, `tr(A ρ)` for vectorized density matrices.
pub fn expectation(op: &Operator, state: &QuantumState) -> Result<C64> {
    let n = op.dim();
    match state.space {
        Space::Hilbert(d) => {
            if d != n || state.amplitudes.len() != n {
                return Err(Error::DimensionMismatch {
                    expected: n,
                    got: state.amplitudes.len(),
                });
            }
            let av = &op.matrix * &state.amplitudes;
            Ok(state.amplitudes.dotc(&av))
        }
        Space::Liouville(d) => {
            if d != n || state.amplitudes.len() != n * n {
                return Err(Error::DimensionMismatch {
                    expected: n * n,
                    got: state.amplitudes.len(),
                });
            }
            // tr(Aρ) = Σ_ij A_ij ρ_ji, ρ_ji stored at i*n + j
            let rho = &state.amplitudes;
            let mut acc = ZERO;
            for i in 0..n {
                for j in 0..n {
                    acc += op.matrix[(i, j)] * rho[i * n + j];
                }
            }
            Ok(acc)
        }
    }
}

/// `y ← A x` written out for column-major storage.
#[inline]
pub fn matvec_into(a: &CMatrix, x: &CVector, y: &mut CVector) {
    let n = a.nrows();
    let data = a.as_slice();
    y.fill(ZERO);
    let ys = y.as_mut_slice();
    for (j, &xj) in x.iter().enumerate() {
        if xj == ZERO {
            continue;
        }
        let col = &data[j * n..(j + 1) * n];
        for (yi, &aij) in ys.iter_mut().zip(col) {
            *yi += aij * xj;
        }
    }
}

pub fn matvec(a: &CMatrix, x: &CVector) -> CVector {
    let mut y = CVector::zeros(a.nrows());
    matvec_into(a, x, &mut y);
    y
}

/// Max absolute row sum `‖A‖_∞`.
pub fn max_row_sum(a: &CMatrix) -> f64 {
    (0..a.nrows())
        .map(|i| a.row(i).iter().map(|c| c.norm()).sum::<f64>())
        .fold(0.0, f64::max)
}

/// Largest absolute entry.
pub fn max_abs(a: &CMatrix) -> f64 {
    a.iter().map(|c| c.norm()).fold(0.0, f64::max)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn random_hermitian(n: usize, seed: u64) -> CMatrix {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let a = CMatrix::from_fn(n, n, |_, _| {
            C64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5)
        });
        (&a + a.adjoint()) * C64::new(0.5, 0.0)
    }

    fn random_density(n: usize, seed: u64) -> CMatrix {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let a = CMatrix::from_fn(n, n, |_, _| {
            C64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5)
        });
        let rho = &a * a.adjoint();
        let tr = rho.trace();
        rho / tr
    }

    #[test]
    fn vectorize_maximally_mixed_qubit() {
        let rho = CMatrix::identity(2, 2) * C64::new(0.5, 0.0);
        let v = vectorize(&rho).unwrap();
        let expected = [0.5, 0.0, 0.0, 0.5];
        for (a, e) in v.amplitudes.iter().zip(expected) {
            assert_eq!(*a, C64::new(e, 0.0));
        }
        assert_eq!(v.space, Space::Liouville(2));
    }

    #[test]
    fn vectorize_projector() {
        let mut rho = CMatrix::zeros(2, 2);
        rho[(0, 0)] = ONE;
        let v = vectorize(&rho).unwrap();
        assert_eq!(v.amplitudes.as_slice(), &[ONE, ZERO, ZERO, ZERO]);
    }

    #[test]
    fn vectorize_is_column_stacking() {
        let rho = CMatrix::from_fn(3, 3, |i, j| C64::new(i as f64, j as f64));
        let v = vectorize(&rho).unwrap();
        for i in 0..3 {
            for j in 0..3 {
                assert_eq!(v.amplitudes[j * 3 + i], rho[(i, j)]);
            }
        }
    }

    #[test]
    fn vectorize_round_trip_exact() {
        for n in 1..=16 {
            let rho = random_hermitian(n, n as u64);
            let back = devectorize(&vectorize(&rho).unwrap()).unwrap();
            assert_eq!(back, rho);
        }
    }

    #[test]
    fn vectorize_rejects_non_square() {
        let m = CMatrix::zeros(2, 3);
        assert!(matches!(vectorize(&m), Err(Error::DimensionMismatch { .. })));
    }

    #[test]
    fn hermitian_flag_is_verified() {
        let mut m = CMatrix::zeros(2, 2);
        m[(0, 1)] = ONE;
        assert!(Operator::hermitian(m.clone()).is_err());
        m[(1, 0)] = ONE;
        assert!(Operator::hermitian(m).unwrap().is_hermitian());
    }

    fn direct_lindblad_rhs(h: &CMatrix, ops: &[(CMatrix, f64)], rho: &CMatrix) -> CMatrix {
        let mut out = (h * rho - rho * h) * (-I);
        for (l, g) in ops {
            let ld = l.adjoint();
            let ldl = &ld * l;
            out += (l * rho * &ld - (&ldl * rho + rho * &ldl) * C64::new(0.5, 0.0))
                * C64::new(*g, 0.0);
        }
        out
    }

    #[test]
    fn liouvillian_matches_direct_evaluation() {
        let n = 4;
        let h = random_hermitian(n, 11);
        let l1 = CMatrix::from_fn(n, n, |i, j| {
            if j == i + 1 {
                C64::new((j as f64).sqrt(), 0.0)
            } else {
                ZERO
            }
        });
        let hh = h.clone();
        let spec = LindbladSpec {
            hamiltonian: Box::new(move |_| hh.clone()),
            lindblad_ops: vec![(l1.clone(), 0.3)],
        };
        let liou = build_liouvillian(&spec, 0.0).unwrap();
        let rho = random_density(n, 5);
        let lhs = devectorize(&QuantumState {
            amplitudes: &liou.matrix * vectorize(&rho).unwrap().amplitudes,
            space: Space::Liouville(n),
        })
        .unwrap();
        let rhs = direct_lindblad_rhs(&h, &[(l1, 0.3)], &rho);
        assert!(max_abs(&(lhs - rhs)) < 1e-13);
    }

    #[test]
    fn liouvillian_preserves_trace_and_is_linear() {
        let n = 5;
        let h = random_hermitian(n, 3);
        let la = random_hermitian(n, 4) + CMatrix::from_fn(n, n, |i, j| C64::new((i * j) as f64 * 0.1, 0.0));
        let lb = CMatrix::from_fn(n, n, |i, j| if i + 1 == j { ONE } else { ZERO });
        let hh = h.clone();
        let spec = LindbladSpec {
            hamiltonian: Box::new(move |_| hh.clone()),
            lindblad_ops: vec![(la, 0.7), (lb, 1.3)],
        };
        let liou = build_liouvillian(&spec, 0.0).unwrap();
        for seed in 0..10 {
            let rho = random_density(n, 100 + seed);
            let out = QuantumState {
                amplitudes: &liou.matrix * vectorize(&rho).unwrap().amplitudes,
                space: Space::Liouville(n),
            };
            assert!(out.trace().norm() < 1e-11);
        }
        let r1 = vectorize(&random_density(n, 1)).unwrap().amplitudes;
        let r2 = vectorize(&random_density(n, 2)).unwrap().amplitudes;
        let (a, b) = (C64::new(0.3, -1.2), C64::new(2.0, 0.5));
        let lhs = &liou.matrix * (&r1 * a + &r2 * b);
        let rhs = (&liou.matrix * &r1) * a + (&liou.matrix * &r2) * b;
        assert!((lhs - rhs).camax() < 1e-13);
    }

    #[test]
    fn diagonal_hamiltonian_leaves_populations_static() {
        let h = CMatrix::from_diagonal(&CVector::from_vec(vec![
            C64::new(0.0, 0.0),
            C64::new(1.3, 0.0),
            C64::new(2.1, 0.0),
        ]));
        let spec = LindbladSpec {
            hamiltonian: Box::new(move |_| h.clone()),
            lindblad_ops: vec![],
        };
        let liou = build_liouvillian(&spec, 0.0).unwrap();
        let rho = random_density(3, 9);
        let d = &liou.matrix * vectorize(&rho).unwrap().amplitudes;
        for k in 0..3 {
            assert!(d[k * 3 + k].norm() < 1e-15);
        }
    }

    #[test]
    fn negative_rate_rejected() {
        let spec = LindbladSpec {
            hamiltonian: Box::new(|_| CMatrix::identity(2, 2)),
            lindblad_ops: vec![(CMatrix::identity(2, 2), -1.0)],
        };
        assert!(build_liouvillian(&spec, 0.0).is_err());
    }

    #[test]
    fn expectation_values() {
        let psi = QuantumState::basis(3, 0);
        let id = Operator::identity(3);
        assert!((expectation(&id, &psi).unwrap() - ONE).norm() < 1e-15);
        let mut p1 = CMatrix::zeros(3, 3);
        p1[(1, 1)] = ONE;
        let p1 = Operator::hermitian(p1).unwrap();
        assert_eq!(expectation(&p1, &psi).unwrap(), ZERO);

        // number operator against direct Σ n |c_n|²
        let n = 8;
        let amps: Vec<C64> = (0..n)
            .map(|k| C64::new(0.7f64.powi(k), 0.1 * k as f64))
            .collect();
        let mut v = CVector::from_vec(amps);
        v /= C64::new(v.norm(), 0.0);
        let state = QuantumState::hilbert(v.clone());
        let num = Operator::from_real_diagonal(&(0..n).map(|k| k as f64).collect::<Vec<_>>());
        let direct: f64 = v.iter().enumerate().map(|(k, c)| k as f64 * c.norm_sqr()).sum();
        let e = expectation(&num, &state).unwrap();
        assert!((e.re - direct).abs() < 1e-14);
        assert!(e.im.abs() < 1e-10);

        // Liouville route agrees with the Hilbert one for a pure state
        let rho = state.to_density().unwrap();
        let e2 = expectation(&num, &rho).unwrap();
        assert!((e2 - e).norm() < 1e-14);
    }

    #[test]
    fn expectation_dimension_mismatch() {
        let psi = QuantumState::basis(3, 0);
        assert!(expectation(&Operator::identity(2), &psi).is_err());
    }

    #[test]
    fn matvec_agrees_with_nalgebra() {
        let a = random_hermitian(7, 1) + CMatrix::from_fn(7, 7, |i, j| C64::new(0.0, (i + 2 * j) as f64));
        let x = CVector::from_fn(7, |i, _| C64::new(i as f64, 1.0));
        assert!((matvec(&a, &x) - &a * &x).camax() < 1e-13);
    }
}
