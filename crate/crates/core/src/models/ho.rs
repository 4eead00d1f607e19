//! Harmonic oscillators in the truncated number basis.

use crate::error::{invalid, Result};
use crate::generator::{real_coeff, Generator};
use crate::quantum::{CMatrix, CVector, Operator, QuantumState, C64, I, ZERO};

/// Position, momentum and `H₀ = p²/2m + mω²x²/2` in the lowest `n` number states.
///
/// Phase convention: `a` has real positive entries, `x = (a + a†)/√(2mω)`,
/// `p = i√(mω/2)(a† − a)`, so `⟨0|x|1⟩ = 1/√(2mω)` and `⟨1|p|0⟩ = i√(mω/2)`.
pub fn ho_operators_scaled(n: usize, mass: f64, omega: f64) -> Result<(Operator, Operator, Operator)> {
    if n < 2 {
        return Err(invalid("n_trunc", "need at least two levels"));
    }
    let mut a = CMatrix::zeros(n, n);
    for k in 1..n {
        a[(k - 1, k)] = C64::new((k as f64).sqrt(), 0.0);
    }
    let ad = a.adjoint();
    let x = (&a + &ad) * C64::new(1.0 / (2.0 * mass * omega).sqrt(), 0.0);
    let p = (&ad - &a) * (I * (0.5 * mass * omega).sqrt());
    let h0: Vec<f64> = (0..n).map(|k| omega * (k as f64 + 0.5)).collect();
    Ok((
        Operator::hermitian(x)?,
        Operator::hermitian(p)?,
        Operator::from_real_diagonal(&h0),
    ))
}

/// [`ho_operators_scaled`] with `m = ω = 1`.
pub fn ho_operators(n: usize) -> Result<(Operator, Operator, Operator)> {
    ho_operators_scaled(n, 1.0, 1.0)
}

/// Exact number-basis matrix elements of `x²` and `p²` (`m = ω = 1`), not
/// products of truncated matrices.
pub fn ho_quadratures_squared(n: usize) -> (CMatrix, CMatrix) {
    let mut x2 = CMatrix::zeros(n, n);
    let mut p2 = CMatrix::zeros(n, n);
    for k in 0..n {
        let d = C64::new(k as f64 + 0.5, 0.0);
        x2[(k, k)] = d;
        p2[(k, k)] = d;
        if k + 2 < n {
            let o = 0.5 * (((k + 1) * (k + 2)) as f64).sqrt();
            x2[(k, k + 2)] = C64::new(o, 0.0);
            x2[(k + 2, k)] = C64::new(o, 0.0);
            p2[(k, k + 2)] = C64::new(-o, 0.0);
            p2[(k + 2, k)] = C64::new(-o, 0.0);
        }
    }
    (x2, p2)
}

/// `H(t) = p²/2m + mω²x²/2 + E(t) x` with `E(t) = E₀ sin²(πt/T) cos(ω_L t)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DrivenHoModel {
    pub mass: f64,
    pub omega: f64,
    pub e0: f64,
    pub omega_l: f64,
    pub horizon: f64,
    pub n_trunc: usize,
}

impl DrivenHoModel {
    /// Unit oscillator, `E₀ = 1e-3`, `ω_L = 5`, `T = 100`.
    pub fn standard() -> Self {
        Self {
            mass: 1.0,
            omega: 1.0,
            e0: 1e-3,
            omega_l: 5.0,
            horizon: 100.0,
            n_trunc: 16,
        }
    }

    /// Near-resonant long-horizon variant (`ω_L = 1.001`, `T = 1000`).
    pub fn near_resonant() -> Self {
        Self {
            omega_l: 1.001,
            horizon: 1000.0,
            ..Self::standard()
        }
    }

    pub fn field(&self, t: f64) -> f64 {
        let s = (std::f64::consts::PI * t / self.horizon).sin();
        self.e0 * s * s * (self.omega_l * t).cos()
    }

    pub fn generator(&self) -> Result<Generator> {
        let (x, _, h0) = ho_operators_scaled(self.n_trunc, self.mass, self.omega)?;
        let m = *self;
        Generator::schrodinger(&h0.matrix, vec![(x.matrix, real_coeff(move |t| m.field(t)))])
    }

    pub fn ground_state(&self) -> QuantumState {
        QuantumState::basis(self.n_trunc, 0)
    }

    /// Position and momentum operators for observers.
    pub fn observables(&self) -> Result<(Operator, Operator)> {
        let (x, p, _) = ho_operators_scaled(self.n_trunc, self.mass, self.omega)?;
        Ok((x, p))
    }
}

/// `(e^w − 1)/w` without cancellation for small `w`.
fn phi1(w: C64) -> C64 {
    if w.norm() < 0.1 {
        let mut term = C64::new(1.0, 0.0);
        let mut sum = term;
        for k in 2..20 {
            term *= w / k as f64;
            sum += term;
        }
        sum
    } else {
        (w.exp() - 1.0) / w
    }
}

/// `z(t) = −e^{iωt} ∫₀ᵗ E(τ) e^{−iωτ} dτ` in closed form.
pub fn driven_ho_z(model: &DrivenHoModel, t: f64) -> C64 {
    // sin²(πτ/T) cos(ω_L τ) = ¼(e^{iω_Lτ} + c.c.) − ⅛ Σ_± (e^{i(ω_L ± Ω)τ} + c.c.), Ω = 2π/T
    let w = model.omega;
    let wl = model.omega_l;
    let big = 2.0 * std::f64::consts::PI / model.horizon;
    let terms = [
        (0.25, wl),
        (0.25, -wl),
        (-0.125, wl + big),
        (-0.125, -(wl + big)),
        (-0.125, wl - big),
        (-0.125, -(wl - big)),
    ];
    let mut integral = ZERO;
    for (a, nu) in terms {
        let kappa = nu - w;
        integral += a * t * phi1(I * kappa * t);
    }
    -(I * w * t).exp() * integral * model.e0
}

/// Closed-form `(⟨x⟩, ⟨p⟩)` from the undriven ground state:
/// `⟨x⟩ = Im z/(mω)`, `⟨p⟩ = Re z`.
pub fn driven_ho_analytic(model: &DrivenHoModel, t: f64) -> (f64, f64) {
    let z = driven_ho_z(model, t);
    (z.im / (model.mass * model.omega), z.re)
}

/// `H(t) = p²/2 + ε(t) x²/2` (`m = ω = 1`), a frequency-controlled oscillator.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FreqHoModel {
    pub n_trunc: usize,
}

impl FreqHoModel {
    /// Drift `p²/2` and control operator `∂H/∂ε = x²/2`.
    pub fn hamiltonians(&self) -> (CMatrix, CMatrix) {
        let (x2, p2) = ho_quadratures_squared(self.n_trunc);
        (p2 * C64::new(0.5, 0.0), x2 * C64::new(0.5, 0.0))
    }

    /// Ground state of `p²/2 + ω'²x²/2` expanded in the unit-frequency basis:
    /// `c_{2k} = √sech r · tanh^k r · √((2k)!)/(2^k k!)`, `tanh r = (1 − ω')/(1 + ω')`.
    pub fn ground_state(&self, omega_prime: f64) -> Result<QuantumState> {
        if !(omega_prime > 0.0) {
            return Err(invalid("omega", "must be positive"));
        }
        let th = (1.0 - omega_prime) / (1.0 + omega_prime);
        let sech = 2.0 * omega_prime.sqrt() / (1.0 + omega_prime);
        let mut v = CVector::zeros(self.n_trunc);
        // c_{2k} ratio: c_{2k+2}/c_{2k} = th √((2k+1)(2k+2)) / (2(k+1))
        let mut c = sech.sqrt();
        let mut k = 0;
        while 2 * k < self.n_trunc {
            v[2 * k] = C64::new(c, 0.0);
            c *= th * (((2 * k + 1) * (2 * k + 2)) as f64).sqrt() / (2.0 * (k + 1) as f64);
            k += 1;
        }
        let n = v.norm();
        Ok(QuantumState::hilbert(v / C64::new(n, 0.0)))
    }
}
