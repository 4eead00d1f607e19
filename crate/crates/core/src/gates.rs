//! Effective two-qubit gates on the four lowest qudit levels.
//!
//! The qudit levels `|0⟩..|3⟩` are identified with the Bell states of two
//! virtual qubits, in the order `Φ⁺, Φ⁻, Ψ⁺, Ψ⁻`. The Bell basis carries the
//! magic-basis phases
//!
//! ```text
//! |0⟩ ↦ Φ⁺ = (|00⟩ + |11⟩)/√2      |1⟩ ↦ iΦ⁻ = i(|00⟩ − |11⟩)/√2
//! |2⟩ ↦ iΨ⁺ = i(|01⟩ + |10⟩)/√2    |3⟩ ↦ Ψ⁻ = (|01⟩ − |10⟩)/√2
//! ```
//!
//! so local gates `k₁⊗k₂ ∈ SU(2)⊗SU(2)` are real orthogonal in this basis and
//! a qudit gate is already the Bell-basis matrix of the two-qubit gate.
//!
//! Local invariants follow Makhlin: with `U_B` the Bell-basis matrix scaled
//! into SU(4) and `m = U_Bᵀ U_B`,
//!
//! ```text
//! g₁ + i g₂ = tr²(m)/16,    g₃ = (tr²(m) − tr(m²))/4.
//! ```
//!
//! The gate concurrence follows Kraus and Cirac: with `e^{2iθ_k}` the
//! eigenvalues of `m`, `C = 1` when their convex hull contains the origin,
//! otherwise `C = max_{k,l} |sin(θ_k − θ_l)|`.

use std::f64::consts::{FRAC_1_SQRT_2, PI};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{invalid, Error, Result};
use crate::propagators::expm_dense;
use crate::quantum::{CMatrix, CVector, C64, I, ONE, ZERO};

/// Singular values below this make the unitary polar factor meaningless.
pub const RANK_TOLERANCE: f64 = 1e-10;
/// Largest `‖U†U − I‖_max` accepted as unitary.
pub const UNITARITY_TOLERANCE: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GateBasis {
    Computational,
    /// The magic Bell basis; qudit levels map here one-to-one.
    Bell,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GateMatrix {
    pub entries: CMatrix,
    pub basis: GateBasis,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LocalInvariants {
    pub g1: f64,
    pub g2: f64,
    pub g3: f64,
}

impl LocalInvariants {
    pub fn distance(&self, other: &LocalInvariants) -> f64 {
        ((self.g1 - other.g1).powi(2) + (self.g2 - other.g2).powi(2) + (self.g3 - other.g3).powi(2)).sqrt()
    }
}

/// Columns are the Bell states in computational coordinates.
pub fn bell_basis() -> CMatrix {
    let s = C64::new(FRAC_1_SQRT_2, 0.0);
    let is = I * FRAC_1_SQRT_2;
    #[rustfmt::skip]
    let q = CMatrix::from_row_slice(4, 4, &[
        s,    is,  ZERO, ZERO,
        ZERO, ZERO, is,   s,
        ZERO, ZERO, is,  -s,
        s,   -is,  ZERO, ZERO,
    ]);
    q
}

impl GateMatrix {
    pub fn new(entries: CMatrix, basis: GateBasis) -> Result<Self> {
        if entries.shape() != (4, 4) {
            return Err(Error::DimensionMismatch {
                expected: 4,
                got: entries.nrows(),
            });
        }
        Ok(Self { entries, basis })
    }

    pub fn computational(entries: CMatrix) -> Result<Self> {
        Self::new(entries, GateBasis::Computational)
    }

    /// `‖U†U − I‖` (max entry).
    pub fn unitarity_defect(&self) -> f64 {
        let d = self.entries.adjoint() * &self.entries - CMatrix::identity(4, 4);
        d.iter().fold(0.0, |a, z| a.max(z.norm()))
    }

    pub fn to_bell_basis(&self) -> GateMatrix {
        match self.basis {
            GateBasis::Bell => self.clone(),
            GateBasis::Computational => {
                let q = bell_basis();
                GateMatrix {
                    entries: q.adjoint() * &self.entries * q,
                    basis: GateBasis::Bell,
                }
            }
        }
    }

    pub fn to_computational(&self) -> GateMatrix {
        match self.basis {
            GateBasis::Computational => self.clone(),
            GateBasis::Bell => {
                let q = bell_basis();
                GateMatrix {
                    entries: &q * &self.entries * q.adjoint(),
                    basis: GateBasis::Computational,
                }
            }
        }
    }

    fn require_unitary(&self) -> Result<()> {
        let defect = self.unitarity_defect();
        if defect.is_nan() || defect > UNITARITY_TOLERANCE {
            return Err(Error::NotUnitary { defect });
        }
        Ok(())
    }
}

/// `⟨m|Ψ_n(T)⟩` for `m, n < 4`, with `finals[n]` the propagated `|n⟩`. The
/// result is tagged as a Bell-basis gate (levels ↔ Bell states).
pub fn extract_gate(finals: &[CVector]) -> Result<GateMatrix> {
    if finals.len() != 4 {
        return Err(Error::StateCount {
            expected: 4,
            got: finals.len(),
        });
    }
    if let Some(v) = finals.iter().find(|v| v.len() < 4) {
        return Err(Error::DimensionMismatch { expected: 4, got: v.len() });
    }
    GateMatrix::new(CMatrix::from_fn(4, 4, |m, n| finals[n][m]), GateBasis::Bell)
}

/// Unitary polar factor `W = U V†` of `G = U Σ V†`, the unitary closest to
/// `G` in Frobenius norm.
pub fn closest_unitary(g: &GateMatrix) -> Result<GateMatrix> {
    let svd = g.entries.clone().svd(true, true);
    let smallest = svd.singular_values.iter().fold(f64::INFINITY, |a, &s| a.min(s));
    if !(smallest >= RANK_TOLERANCE) {
        return Err(Error::RankDeficient { smallest });
    }
    let (u, v_t) = (svd.u.expect("requested"), svd.v_t.expect("requested"));
    Ok(GateMatrix {
        entries: u * v_t,
        basis: g.basis,
    })
}

/// Magic-basis matrix divided by `det^{1/4}` (principal branch).
fn special_bell(g: &GateMatrix) -> CMatrix {
    let ub = g.to_bell_basis().entries;
    let det = ub.determinant();
    ub / det.powf(0.25)
}

pub fn makhlin_invariants(g: &GateMatrix) -> Result<LocalInvariants> {
    g.require_unitary()?;
    let ub = special_bell(g);
    let m = ub.transpose() * &ub;
    let tr = m.trace();
    let tr2 = (&m * &m).trace();
    let g12 = tr * tr / 16.0;
    let g3 = (tr * tr - tr2) / 4.0;
    Ok(LocalInvariants {
        g1: g12.re,
        g2: g12.im,
        g3: g3.re,
    })
}

/// Maximal concurrence producible from a product input.
pub fn gate_concurrence(g: &GateMatrix) -> Result<f64> {
    g.require_unitary()?;
    let ub = special_bell(g);
    let m = ub.transpose() * &ub;
    let eig = symmetric_unitary_eigenvalues(&m)?;
    let mut phases: Vec<f64> = eig.iter().map(|z| z.arg()).collect();
    phases.sort_by(f64::total_cmp);
    let max_gap = phases
        .windows(2)
        .map(|w| w[1] - w[0])
        .fold(2.0 * PI - (phases[3] - phases[0]), f64::max);
    // origin inside the convex hull of points on the unit circle
    if max_gap <= PI + 1e-12 {
        return Ok(1.0);
    }
    let mut c: f64 = 0.0;
    for a in 0..4 {
        for b in a + 1..4 {
            c = c.max((eig[a] - eig[b]).norm() / 2.0);
        }
    }
    Ok(c.min(1.0))
}

/// Eigenvalues of a symmetric unitary `m = O D Oᵀ`: `Re m` and `Im m` are
/// commuting real symmetric matrices sharing the orthogonal `O`, found from
/// a generic combination of the two.
fn symmetric_unitary_eigenvalues(m: &CMatrix) -> Result<Vec<C64>> {
    let re = m.map(|z| z.re);
    let im = m.map(|z| z.im);
    for mix in [std::f64::consts::SQRT_2, 0.618_033_988_749_895, std::f64::consts::E] {
        let o = (&re + &im * mix).symmetric_eigen().eigenvectors;
        let oc = o.map(C64::from);
        let d = oc.transpose() * m * &oc;
        let off = (0..4)
            .flat_map(|a| (0..4).map(move |b| (a, b)))
            .filter(|(a, b)| a != b)
            .fold(0.0f64, |acc, (a, b)| acc.max(d[(a, b)].norm()));
        if off < 1e-9 {
            return Ok(d.diagonal().iter().copied().collect());
        }
    }
    Err(Error::NonFinite { context: "gate spectrum" })
}

/// Two-qubit state (computational basis) of a qudit state on `L`.
pub fn qudit_to_qubits(state: &CVector) -> Result<CVector> {
    if state.len() != 4 {
        return Err(Error::DimensionMismatch {
            expected: 4,
            got: state.len(),
        });
    }
    Ok(bell_basis() * state)
}

/// Entanglement entropy (bits) between the two virtual qubits.
pub fn von_neumann_entropy(state: &CVector) -> Result<f64> {
    let psi = qudit_to_qubits(state)?;
    let deviation = (psi.norm() - 1.0).abs();
    if !(deviation <= 1e-8) {
        return Err(Error::NotNormalized { deviation });
    }
    // ρ_A = M M† with M_ab = ψ_{2a+b}
    let r00 = psi[0].norm_sqr() + psi[1].norm_sqr();
    let r11 = psi[2].norm_sqr() + psi[3].norm_sqr();
    let r01 = psi[0] * psi[2].conj() + psi[1] * psi[3].conj();
    let mean = 0.5 * (r00 + r11);
    let half_gap = (0.25 * (r00 - r11).powi(2) + r01.norm_sqr()).sqrt();
    Ok([mean + half_gap, mean - half_gap]
        .iter()
        .filter(|&&p| p > 0.0)
        .map(|&p| -p * p.log2())
        .sum())
}

#[derive(Debug, Clone, PartialEq)]
pub struct EquivalenceClass {
    pub name: String,
    /// Canonical coordinates `(c₁, c₂, c₃)` of the defining gate
    /// `exp(i/2 (c₁ XX + c₂ YY + c₃ ZZ))`.
    pub coords: [f64; 3],
    pub invariants: LocalInvariants,
}

impl EquivalenceClass {
    /// The defining gate, in the computational basis.
    pub fn gate(&self) -> Result<GateMatrix> {
        canonical_gate(self.coords)
    }
}

pub fn canonical_gate(c: [f64; 3]) -> Result<GateMatrix> {
    let x = CMatrix::from_row_slice(2, 2, &[ZERO, ONE, ONE, ZERO]);
    let y = CMatrix::from_row_slice(2, 2, &[ZERO, -I, I, ZERO]);
    let z = CMatrix::from_row_slice(2, 2, &[ONE, ZERO, ZERO, -ONE]);
    let h = x.kronecker(&x) * C64::from(c[0]) + y.kronecker(&y) * C64::from(c[1]) + z.kronecker(&z) * C64::from(c[2]);
    GateMatrix::computational(expm_dense(&(h * (0.5 * I)))?)
}

/// Named local-equivalence classes with a match radius.
#[derive(Debug, Clone, PartialEq)]
pub struct EquivalenceCatalog {
    pub classes: Vec<EquivalenceClass>,
    pub radius: f64,
}

const BUILTIN_CATALOG: &str = include_str!("../data/equivalence_classes.txt");

impl EquivalenceCatalog {
    pub fn builtin() -> Self {
        Self::parse(BUILTIN_CATALOG).expect("shipped catalog parses")
    }

    /// One class per line: `name c1 c2 c3 g1 g2 g3`, coordinates in units of
    /// π; `#` starts a comment.
    pub fn parse(text: &str) -> Result<Self> {
        let mut classes = Vec::new();
        for line in text.lines() {
            let line = line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let mut parts = line.split_whitespace();
            let name = parts.next().expect("non-empty line").to_string();
            let nums: Vec<f64> = parts
                .map(|s| s.parse::<f64>())
                .collect::<std::result::Result<_, _>>()
                .map_err(|e| invalid("catalog", format!("class `{name}`: {e}")))?;
            if nums.len() != 6 {
                return Err(invalid("catalog", format!("class `{name}`: expected 6 numbers, got {}", nums.len())));
            }
            classes.push(EquivalenceClass {
                name,
                coords: [nums[0] * PI, nums[1] * PI, nums[2] * PI],
                invariants: LocalInvariants {
                    g1: nums[3],
                    g2: nums[4],
                    g3: nums[5],
                },
            });
        }
        Ok(Self { classes, radius: 0.1 })
    }

    /// Nearest class within the match radius; ties go to the earlier entry.
    pub fn classify(&self, inv: &LocalInvariants) -> Option<&str> {
        let mut best: Option<(&EquivalenceClass, f64)> = None;
        for c in &self.classes {
            let d = c.invariants.distance(inv);
            if d <= self.radius && best.is_none_or(|(_, b)| d < b) {
                best = Some((c, d));
            }
        }
        best.map(|(c, _)| c.name.as_str())
    }
}

/// Haar-random `dim × dim` unitary (QR of a complex Ginibre matrix with the
/// phases of `R`'s diagonal divided out).
pub fn haar_unitary(dim: usize, rng: &mut impl Rng) -> CMatrix {
    let z = CMatrix::from_fn(dim, dim, |_, _| {
        let re: f64 = rng.sample(StandardNormal);
        let im: f64 = rng.sample(StandardNormal);
        C64::new(re, im) * FRAC_1_SQRT_2
    });
    let qr = z.qr();
    let (mut q, r) = (qr.q(), qr.r());
    for k in 0..dim {
        let d = r[(k, k)];
        let phase = if d.norm() > 0.0 { d / d.norm() } else { ONE };
        let mut col = q.column_mut(k);
        col *= phase;
    }
    q
}

/// Deterministic Haar-random two-qubit gate (computational basis).
pub fn haar_random(seed: u64) -> GateMatrix {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    GateMatrix {
        entries: haar_unitary(4, &mut rng),
        basis: GateBasis::Computational,
    }
}
