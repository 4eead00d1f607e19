//! Anharmonic ladder (transmon-like qudit) under a three-tone Pythagorean drive.

use std::f64::consts::PI;
use std::sync::Arc;

use crate::error::{invalid, Error, Result};
use crate::generator::{real_coeff, CoeffFn, Generator};
use crate::quantum::{CMatrix, Operator, C64, I, ZERO};

/// Angular frequencies in rad/ns, times in ns.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuditModel {
    pub n_levels: usize,
    pub omega0: f64,
    pub beta: f64,
    pub t1: f64,
    pub t2_star: f64,
    pub omega_rabi: f64,
    pub p: f64,
    pub q: f64,
}

impl QuditModel {
    /// ω₀/2π = 6.73 GHz, β/2π = 0.12 GHz, T₁ = 230 ns, T₂* = 120 ns,
    /// Ω/2π = 47.6 MHz, p = q = 0.86, ten levels.
    pub fn default_device() -> Self {
        Self {
            n_levels: 10,
            omega0: 2.0 * PI * 6.73,
            beta: 2.0 * PI * 0.12,
            t1: 230.0,
            t2_star: 120.0,
            omega_rabi: 2.0 * PI * 0.0476,
            p: 0.86,
            q: 0.86,
        }
    }

    pub fn with_pq(self, p: f64, q: f64) -> Self {
        Self { p, q, ..self }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_levels < 2 {
            return Err(invalid("n_levels", "need at least two levels"));
        }
        if !(self.omega0.is_finite() && self.beta.is_finite() && self.omega_rabi.is_finite()) {
            return Err(Error::NonFinite { context: "qudit parameters" });
        }
        Ok(())
    }

    /// `ε_n = nω₀ − (β/2) n(n−1)`.
    pub fn level_energy(&self, n: usize) -> f64 {
        let n = n as f64;
        n * self.omega0 - 0.5 * self.beta * n * (n - 1.0)
    }

    /// `ω_{n,n+1} = ε_{n+1} − ε_n = ω₀ − nβ`.
    pub fn transition(&self, n: usize) -> f64 {
        self.level_energy(n + 1) - self.level_energy(n)
    }

    pub fn drift(&self) -> Operator {
        let e: Vec<f64> = (0..self.n_levels).map(|n| self.level_energy(n)).collect();
        Operator::from_real_diagonal(&e)
    }

    /// `H₁/ε = Σ √(n+1)(|n⟩⟨n+1| + h.c.)`.
    pub fn coupling(&self) -> Operator {
        let n = self.n_levels;
        let mut h = CMatrix::zeros(n, n);
        for k in 0..n - 1 {
            let c = C64::new(((k + 1) as f64).sqrt(), 0.0);
            h[(k, k + 1)] = c;
            h[(k + 1, k)] = c;
        }
        Operator::hermitian(h).expect("Hermitian by construction")
    }

    pub fn drive(&self) -> PythagoreanDrive {
        PythagoreanDrive::new(self)
    }

    /// Lab-frame Schrödinger generator under `field`.
    pub fn hamiltonian_generator(&self, field: CoeffFn) -> Result<Generator> {
        self.validate()?;
        Generator::schrodinger(&self.drift().matrix, vec![(self.coupling().matrix, field)])
    }

    /// Lab-frame Liouvillian under `field` with the relaxation/dephasing channels.
    pub fn lindblad_generator(&self, field: CoeffFn) -> Result<Generator> {
        self.validate()?;
        let ops: Vec<(CMatrix, f64)> = lindblad_ops(self)?.into_iter().map(|l| (l.matrix, 1.0)).collect();
        Generator::lindblad(&self.drift().matrix, vec![(self.coupling().matrix, field)], &ops)
    }
}

/// Three tones resonant with the 0–1, 1–2, 2–3 transitions.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PythagoreanDrive {
    /// `(V₀₁, V₁₂, V₂₃)`.
    pub amplitudes: [f64; 3],
    /// `(ω₀₁, ω₁₂, ω₂₃)`.
    pub carriers: [f64; 3],
}

impl PythagoreanDrive {
    /// `(V₀₁, V₁₂, V₂₃) = Ω((p²+q²)/2, pq, (p²−q²)/2)`.
    pub fn new(model: &QuditModel) -> Self {
        let (p, q) = (model.p, model.q);
        let o = model.omega_rabi;
        Self {
            amplitudes: [o * 0.5 * (p * p + q * q), o * p * q, o * 0.5 * (p * p - q * q)],
            carriers: [model.transition(0), model.transition(1), model.transition(2)],
        }
    }

    /// `ε(t) = Σ_k V_k/√k cos(ω_k t)`, `k = 1, 2, 3`.
    pub fn field(&self, t: f64) -> f64 {
        (0..3)
            .map(|k| self.amplitudes[k] / ((k + 1) as f64).sqrt() * (self.carriers[k] * t).cos())
            .sum()
    }

    pub fn coeff(&self) -> CoeffFn {
        let d = *self;
        real_coeff(move |t| d.field(t))
    }

    /// Static resonant part: tridiagonal `V/2` on the lowest four levels.
    pub fn h_inf(&self, n_levels: usize) -> Operator {
        let mut h = CMatrix::zeros(n_levels, n_levels);
        for k in 0..3.min(n_levels - 1) {
            let v = C64::new(0.5 * self.amplitudes[k], 0.0);
            h[(k, k + 1)] = v;
            h[(k + 1, k)] = v;
        }
        Operator::hermitian(h).expect("Hermitian by construction")
    }
}

/// Pythagorean field of the model's `(p, q)`.
pub fn pythagorean_field(model: &QuditModel) -> impl Fn(f64) -> f64 + Send + Sync + Clone {
    let d = model.drive();
    move |t| d.field(t)
}

/// Coefficient of `√(n+1)|n⟩⟨n+1|` in the interaction picture `e^{iH₀t} H₁(t) e^{−iH₀t}`.
fn interaction_coeff(model: &QuditModel, drive: &PythagoreanDrive, n: usize, t: f64, rwa: bool) -> C64 {
    let wn = model.transition(n);
    let mut c = ZERO;
    for k in 0..3 {
        let a = 0.5 * drive.amplitudes[k] / ((k + 1) as f64).sqrt();
        c += a * (I * (drive.carriers[k] - wn) * t).exp();
        if !rwa {
            c += a * (-I * (drive.carriers[k] + wn) * t).exp();
        }
    }
    c
}

/// Interaction-picture Hamiltonian, complete (`rwa = false`) or with the
/// counter-rotating terms dropped (`rwa = true`).
pub fn interaction_hamiltonian(model: &QuditModel, drive: &PythagoreanDrive, t: f64, rwa: bool) -> Operator {
    let n = model.n_levels;
    let mut h = CMatrix::zeros(n, n);
    for k in 0..n - 1 {
        let c = interaction_coeff(model, drive, k, t, rwa) * ((k + 1) as f64).sqrt();
        h[(k, k + 1)] = c;
        h[(k + 1, k)] = c.conj();
    }
    Operator::hermitian(h).expect("Hermitian by construction")
}

/// Interaction-picture generator `−i H_int(t)`, one coefficient per ladder rung.
pub fn interaction_generator(model: &QuditModel, drive: &PythagoreanDrive, rwa: bool) -> Result<Generator> {
    model.validate()?;
    let n = model.n_levels;
    let mut terms: Vec<(CMatrix, CoeffFn)> = Vec::with_capacity(2 * (n - 1));
    for k in 0..n - 1 {
        let s = ((k + 1) as f64).sqrt();
        let mut up = CMatrix::zeros(n, n);
        up[(k, k + 1)] = -I * s;
        let mut down = CMatrix::zeros(n, n);
        down[(k + 1, k)] = -I * s;
        let (m1, d1) = (*model, *drive);
        let (m2, d2) = (*model, *drive);
        terms.push((up, Arc::new(move |t| interaction_coeff(&m1, &d1, k, t, rwa))));
        terms.push((down, Arc::new(move |t| interaction_coeff(&m2, &d2, k, t, rwa).conj())));
    }
    Generator::new(CMatrix::zeros(n, n), terms, crate::quantum::Space::Hilbert(n))
}

/// `L₁ = Σ √((n+1)/T₁)|n⟩⟨n+1|`, `L₂ = Σ √(2n²/T₂*)|n⟩⟨n|` (unit rates).
pub fn lindblad_ops(model: &QuditModel) -> Result<Vec<Operator>> {
    if !(model.t1 > 0.0) || !(model.t2_star > 0.0) {
        return Err(invalid("T1/T2*", "relaxation times must be positive"));
    }
    let n = model.n_levels;
    let mut l1 = CMatrix::zeros(n, n);
    let mut l2 = CMatrix::zeros(n, n);
    for k in 0..n {
        if k + 1 < n {
            l1[(k, k + 1)] = C64::new(((k + 1) as f64 / model.t1).sqrt(), 0.0);
        }
        l2[(k, k)] = C64::new((2.0 * (k * k) as f64 / model.t2_star).sqrt(), 0.0);
    }
    Ok(vec![Operator::new(l1)?, Operator::new(l2)?])
}

/// Pointwise `max_n |P_n^a(t) − P_n^b(t)|` and its time average.
pub fn population_mismatch(a: &[Vec<f64>], b: &[Vec<f64>]) -> Result<(Vec<f64>, f64)> {
    if a.len() != b.len() {
        return Err(Error::DimensionMismatch {
            expected: a.len(),
            got: b.len(),
        });
    }
    if a.is_empty() {
        return Err(invalid("trajectory", "no samples"));
    }
    let mut pointwise = Vec::with_capacity(a.len());
    for (pa, pb) in a.iter().zip(b) {
        if pa.len() != pb.len() {
            return Err(Error::DimensionMismatch {
                expected: pa.len(),
                got: pb.len(),
            });
        }
        pointwise.push(pa.iter().zip(pb).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max));
    }
    let avg = pointwise.iter().sum::<f64>() / pointwise.len() as f64;
    Ok((pointwise, avg))
}
