//! Matrix functions applied to vectors: `exp(A) v` and the remainder
//! functions `f_M(G₀, τ) v = G₀^{−M} (exp(G₀τ) − Σ_{m<M} (G₀τ)^m/m!) v`.

use std::collections::HashMap;

use crate::error::{invalid, Error, Result};
use crate::quantum::{matvec_into, max_row_sum, CMatrix, CVector, C64, ONE};

/// Hard cap on scalar series terms; hitting it means `|zτ|` is absurd for the grid.
pub const SERIES_TERM_CAP: usize = 4000;
/// Hard cap on polynomial expansion degree.
pub const EXPANSION_CAP: usize = 20_000;

const SERIES_TOL: f64 = 1e-17;

/// Scalar `f_M(z, τ)`; `M = 0` is `exp(zτ)`.
pub fn fm_scalar(z: C64, tau: f64, m: usize) -> Result<C64> {
    let w = z * tau;
    if m == 0 {
        return Ok(w.exp());
    }
    if w.norm() <= (m as f64).max(1.0) {
        // Σ_k τ^{M+k} z^k / (M+k)!, no cancellation
        let mut term = C64::new(tau.powi(m as i32) / factorial(m), 0.0);
        let mut sum = term;
        for k in 1..SERIES_TERM_CAP {
            term *= w / (m + k) as f64;
            sum += term;
            if term.norm() <= SERIES_TOL * sum.norm() {
                return Ok(sum);
            }
        }
        return Err(Error::SeriesNotConverged {
            terms: SERIES_TERM_CAP,
        });
    }
    // τ^M (e^w − Σ_{m'<M} w^{m'}/m'!) / w^M
    let mut head = ONE;
    let mut term = ONE;
    for k in 1..m {
        term *= w / k as f64;
        head += term;
    }
    let num = w.exp() - head;
    let val = num * C64::new(tau.powi(m as i32), 0.0) / w.powu(m as u32);
    if val.re.is_finite() && val.im.is_finite() {
        Ok(val)
    } else {
        Err(Error::NonFinite { context: "f_M" })
    }
}

fn factorial(n: usize) -> f64 {
    (1..=n).map(|k| k as f64).product()
}

/// Dense `exp(A)` by Padé-13 scaling and squaring.
pub fn expm_dense(a: &CMatrix) -> Result<CMatrix> {
    const B: [f64; 14] = [
        64764752532480000.0,
        32382376266240000.0,
        7771770303897600.0,
        1187353796428800.0,
        129060195264000.0,
        10559470521600.0,
        670442572800.0,
        33522128640.0,
        1323241920.0,
        40840800.0,
        960960.0,
        16380.0,
        182.0,
        1.0,
    ];
    const THETA13: f64 = 5.371920351148152;
    if !a.iter().all(|c| c.re.is_finite() && c.im.is_finite()) {
        return Err(Error::NonFinite { context: "expm" });
    }
    let n = a.nrows();
    let norm1 = (0..n)
        .map(|j| a.column(j).iter().map(|c| c.norm()).sum::<f64>())
        .fold(0.0, f64::max);
    let s = if norm1 > THETA13 {
        (norm1 / THETA13).log2().ceil() as i32
    } else {
        0
    };
    let a = a * C64::new(2f64.powi(-s), 0.0);
    let id = CMatrix::identity(n, n);
    let a2 = &a * &a;
    let a4 = &a2 * &a2;
    let a6 = &a4 * &a2;
    let r = |x: f64| C64::new(x, 0.0);
    let u_inner = &a6 * (&a6 * r(B[13]) + &a4 * r(B[11]) + &a2 * r(B[9]))
        + &a6 * r(B[7])
        + &a4 * r(B[5])
        + &a2 * r(B[3])
        + &id * r(B[1]);
    let u = &a * u_inner;
    let v = &a6 * (&a6 * r(B[12]) + &a4 * r(B[10]) + &a2 * r(B[8]))
        + &a6 * r(B[6])
        + &a4 * r(B[4])
        + &a2 * r(B[2])
        + &id * r(B[0]);
    let p = &v + &u;
    let q = &v - &u;
    let mut e = q
        .lu()
        .solve(&p)
        .ok_or(Error::NonFinite { context: "expm Padé solve" })?;
    for _ in 0..s {
        e = &e * &e;
    }
    Ok(e)
}

/// Segment `c + h·x`, `x ∈ [−1, 1]`, enclosing the spectrum, with a
/// perpendicular half-thickness `b·|h|`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpectralSegment {
    pub center: C64,
    pub half: C64,
    pub thickness: f64,
}

pub type SegmentKey = (i64, i64, i64, i64, i32, bool);

impl SpectralSegment {
    /// Encloses the numerical range of `a` using Gershgorin discs of its
    /// Hermitian and anti-Hermitian parts; the result is snapped outward to a
    /// coarse grid so that slowly varying generators share expansion data.
    pub fn enclosing(a: &CMatrix) -> (Self, SegmentKey) {
        let n = a.nrows();
        let (mut re_lo, mut re_hi) = (f64::INFINITY, f64::NEG_INFINITY);
        let (mut im_lo, mut im_hi) = (f64::INFINITY, f64::NEG_INFINITY);
        for i in 0..n {
            let (mut rr, mut ri) = (0.0, 0.0);
            for j in 0..n {
                if i == j {
                    continue;
                }
                // Hermitian part (A + A†)/2, anti-Hermitian part (A − A†)/(2i)
                let h = 0.5 * (a[(i, j)] + a[(j, i)].conj());
                let k = 0.5 * (a[(i, j)] - a[(j, i)].conj());
                rr += h.norm();
                ri += k.norm();
            }
            let d = a[(i, i)];
            re_lo = re_lo.min(d.re - rr);
            re_hi = re_hi.max(d.re + rr);
            im_lo = im_lo.min(d.im - ri);
            im_hi = im_hi.max(d.im + ri);
        }
        let re_half = 0.5 * (re_hi - re_lo);
        let im_half = 0.5 * (im_hi - im_lo);
        let along_imag = im_half >= re_half;
        let (len, wid) = if along_imag {
            (im_half, re_half)
        } else {
            (re_half, im_half)
        };
        let len = len.max(1e-300);
        let exp = len.log2().floor() as i32 - 4;
        let q = 2f64.powi(exp);
        let cr = (0.5 * (re_hi + re_lo) / q).round();
        let ci = (0.5 * (im_hi + im_lo) / q).round();
        let hl = (len / q).ceil() + 1.0;
        let wl = (wid / q).ceil() + if wid > 0.0 { 1.0 } else { 0.0 };
        let center = C64::new(cr * q, ci * q);
        let half = if along_imag {
            C64::new(0.0, hl * q)
        } else {
            C64::new(hl * q, 0.0)
        };
        let seg = Self {
            center,
            half,
            thickness: wl / hl,
        };
        (seg, (cr as i64, ci as i64, hl as i64, wl as i64, exp, along_imag))
    }

    /// Bernstein ellipse parameter for the enclosing box.
    pub fn rho(&self) -> f64 {
        let b = self.thickness;
        if b == 0.0 {
            return 1.0;
        }
        let s = 0.5 * (b * b + (b.powi(4) + 4.0 * b * b).sqrt());
        s.sqrt() + (1.0 + s).sqrt()
    }
}

/// Linear operator `G₀` as seen by the expansions: products, a norm bound and
/// a spectral enclosure.
pub trait LinearOperator {
    fn dim(&self) -> usize;
    /// `y ← G₀ x`.
    fn apply(&self, x: &CVector, y: &mut CVector);
    /// `‖G₀‖_∞`.
    fn norm_inf(&self) -> f64;
    fn enclosing(&self) -> (SpectralSegment, SegmentKey);
    /// Matrix–vector products of the underlying system per [`apply`](Self::apply).
    fn weight(&self) -> usize {
        1
    }
}

impl LinearOperator for CMatrix {
    fn dim(&self) -> usize {
        self.nrows()
    }

    fn apply(&self, x: &CVector, y: &mut CVector) {
        matvec_into(self, x, y);
    }

    fn norm_inf(&self) -> f64 {
        max_row_sum(self)
    }

    fn enclosing(&self) -> (SpectralSegment, SegmentKey) {
        SpectralSegment::enclosing(self)
    }
}

/// `I_K ⊗ B`: the same generator acting on `K` stacked states.
#[derive(Debug, Clone)]
pub struct BlockDiagonal {
    pub block: CMatrix,
    pub copies: usize,
}

impl LinearOperator for BlockDiagonal {
    fn dim(&self) -> usize {
        self.block.nrows() * self.copies
    }

    fn apply(&self, x: &CVector, y: &mut CVector) {
        let n = self.block.nrows();
        let mut yk = CVector::zeros(n);
        for k in 0..self.copies {
            let xk = x.rows(k * n, n).into_owned();
            matvec_into(&self.block, &xk, &mut yk);
            y.rows_mut(k * n, n).copy_from(&yk);
        }
    }

    fn norm_inf(&self) -> f64 {
        max_row_sum(&self.block)
    }

    fn enclosing(&self) -> (SpectralSegment, SegmentKey) {
        SpectralSegment::enclosing(&self.block)
    }

    fn weight(&self) -> usize {
        self.copies
    }
}

/// Chebyshev coefficients of `x ↦ f_M(c + h x, τ)` on `[−1, 1]`, truncated
/// where `|c_k| ρ^k` drops below round-off.
fn chebyshev_coefficients(seg: &SpectralSegment, tau: f64, m: usize) -> Result<Vec<C64>> {
    let rho = seg.rho();
    let a = seg.half.norm() * tau * rho;
    let kmax = (1.3 * a + 30.0 + m as f64).ceil() as usize;
    if kmax > EXPANSION_CAP {
        return Err(Error::SeriesNotConverged { terms: kmax });
    }
    let n = kmax + 1;
    // T_k(x_j) = cos(k(2j+1)π/2n); the integer angle is reduced exactly
    let angle = |i: usize| (std::f64::consts::PI * (i % (4 * n)) as f64 / (2 * n) as f64).cos();
    let samples = (0..n)
        .map(|j| fm_scalar(seg.center + seg.half * angle(2 * j + 1), tau, m))
        .collect::<Result<Vec<_>>>()?;
    let coeffs: Vec<C64> = (0..n)
        .map(|k| {
            let acc: C64 = samples.iter().enumerate().map(|(j, s)| s * angle(k * (2 * j + 1))).sum();
            acc * (2.0 / n as f64)
        })
        .collect();
    let mut coeffs = coeffs;
    coeffs[0] *= 0.5;
    let peak = coeffs.iter().map(|c| c.norm()).fold(0.0, f64::max);
    let mut last = 0;
    let mut w = 1.0;
    for (k, c) in coeffs.iter().enumerate() {
        if c.norm() * w > 1e-17 * peak {
            last = k;
        }
        w *= rho;
    }
    coeffs.truncate(last + 2);
    Ok(coeffs)
}

/// Memoized Chebyshev coefficient sets keyed by (segment, τ, M).
#[derive(Debug, Default, Clone)]
pub struct CoeffCache {
    map: HashMap<(SegmentKey, u64, usize), Vec<C64>>,
}

impl CoeffCache {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.map.len()
    }

    pub fn is_empty(&self) -> bool {
        self.map.is_empty()
    }

    fn get(&mut self, key: SegmentKey, seg: &SpectralSegment, tau: f64, m: usize) -> Result<&[C64]> {
        // bound memory for long sweeps over many distinct generators
        if self.map.len() > 4096 {
            self.map.clear();
        }
        let k = (key, tau.to_bits(), m);
        if let std::collections::hash_map::Entry::Vacant(e) = self.map.entry(k) {
            e.insert(chebyshev_coefficients(seg, tau, m)?);
        }
        Ok(&self.map[&k])
    }
}

#[derive(Debug, Clone)]
enum Basis {
    /// `G₀^k v`.
    Taylor,
    /// `T_k(X) v`, `X = (G₀ − c)/h`.
    Chebyshev { seg: SpectralSegment, key: SegmentKey },
}

/// Expansion vectors for `f_M(G₀, τ) v` shared by every `τ ≤ tau_max`.
#[derive(Debug, Clone)]
pub struct FmExpansion {
    basis: Basis,
    vecs: Vec<CVector>,
    m_order: usize,
    tau_max: f64,
    pub matvecs: usize,
}

impl FmExpansion {
    /// Uses the direct series when `‖G₀‖_∞ τ_max < 1`, Chebyshev otherwise.
    pub fn build<O: LinearOperator + ?Sized>(
        g0: &O,
        v: &CVector,
        m_order: usize,
        tau_max: f64,
        cache: &mut CoeffCache,
    ) -> Result<Self> {
        if g0.dim() != v.len() {
            return Err(Error::DimensionMismatch {
                expected: g0.dim(),
                got: v.len(),
            });
        }
        if !(tau_max >= 0.0) {
            return Err(invalid("tau", "must be non-negative"));
        }
        let norm = g0.norm_inf();
        if !norm.is_finite() {
            return Err(Error::NonFinite { context: "f_M generator" });
        }
        let x = norm * tau_max;
        if x < 1.0 {
            Self::build_taylor(g0, v, m_order, tau_max, x)
        } else {
            Self::build_chebyshev(g0, v, m_order, tau_max, cache)
        }
    }

    fn build_taylor<O: LinearOperator + ?Sized>(g0: &O, v: &CVector, m: usize, tau_max: f64, x: f64) -> Result<Self> {
        // bound of the k-th term relative to the leading one: x^k M!/(M+k)!
        let mut vecs = vec![v.clone()];
        let mut bound = 1.0;
        let mut k = 0;
        while bound > SERIES_TOL && k < 200 {
            k += 1;
            bound *= x / (m + k) as f64;
            let mut next = CVector::zeros(v.len());
            g0.apply(&vecs[k - 1], &mut next);
            vecs.push(next);
        }
        Ok(Self {
            basis: Basis::Taylor,
            matvecs: (vecs.len() - 1) * g0.weight(),
            vecs,
            m_order: m,
            tau_max,
        })
    }

    fn build_chebyshev<O: LinearOperator + ?Sized>(
        g0: &O,
        v: &CVector,
        m: usize,
        tau_max: f64,
        cache: &mut CoeffCache,
    ) -> Result<Self> {
        let (seg, key) = g0.enclosing();
        let nterms = cache.get(key, &seg, tau_max, m)?.len();
        let inv_h = ONE / seg.half;
        let mut vecs = Vec::with_capacity(nterms);
        vecs.push(v.clone());
        let mut tmp = CVector::zeros(v.len());
        let apply_x = |u: &CVector, out: &mut CVector| {
            out.zip_apply(u, |o, ui| *o = (*o - seg.center * ui) * inv_h);
        };
        if nterms > 1 {
            g0.apply(v, &mut tmp);
            apply_x(v, &mut tmp);
            vecs.push(tmp.clone());
        }
        for k in 2..nterms {
            g0.apply(&vecs[k - 1], &mut tmp);
            apply_x(&vecs[k - 1], &mut tmp);
            let prev = &vecs[k - 2];
            tmp.zip_apply(prev, |t, p| *t = 2.0 * *t - p);
            vecs.push(tmp.clone());
        }
        Ok(Self {
            basis: Basis::Chebyshev { seg, key },
            matvecs: nterms.saturating_sub(1) * g0.weight(),
            vecs,
            m_order: m,
            tau_max,
        })
    }

    pub fn tau_max(&self) -> f64 {
        self.tau_max
    }

    pub fn is_chebyshev(&self) -> bool {
        matches!(self.basis, Basis::Chebyshev { .. })
    }

    /// `f_M(G₀, τ) v` and a relative truncation-residual estimate.
    pub fn apply(&self, tau: f64, cache: &mut CoeffCache) -> Result<(CVector, f64)> {
        if tau < 0.0 || tau > self.tau_max * (1.0 + 1e-12) {
            return Err(invalid("tau", format!("{tau} outside [0, {}]", self.tau_max)));
        }
        let dim = self.vecs[0].len();
        let mut out = CVector::zeros(dim);
        let mut last = 0.0;
        match &self.basis {
            Basis::Taylor => {
                let m = self.m_order;
                let mut c = tau.powi(m as i32) / factorial(m);
                for (k, v) in self.vecs.iter().enumerate() {
                    if k > 0 {
                        c *= tau / (m + k) as f64;
                    }
                    let cc = C64::new(c, 0.0);
                    out.zip_apply(v, |o, x| *o += cc * x);
                    last = c.abs() * v.norm();
                }
            }
            Basis::Chebyshev { seg, key } => {
                let coeffs = cache.get(*key, seg, tau, self.m_order)?;
                for (c, v) in coeffs.iter().zip(&self.vecs) {
                    out.zip_apply(v, |o, x| *o += c * x);
                }
                let k = coeffs.len().min(self.vecs.len()) - 1;
                last = coeffs[k].norm() * self.vecs[k].norm();
            }
        }
        if !out.iter().all(|c| c.re.is_finite() && c.im.is_finite()) {
            return Err(Error::NonFinite { context: "f_M application" });
        }
        let n = out.norm();
        Ok((out, if n > 0.0 { last / n } else { last }))
    }
}

/// Selects how `exp(G₀ δt) v` is evaluated.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ExpBackend {
    /// Padé-13 scaling and squaring on the dense matrix.
    #[default]
    Dense,
    /// Series/Chebyshev expansion built from matrix–vector products only.
    Polynomial,
}

/// `exp(G₀ δt) v` from the joint product `G₀ δt`. Returns the number of
/// matrix–vector products used (zero for the dense backend).
pub fn expm_apply_with(
    g0: &CMatrix,
    dt: f64,
    v: &CVector,
    backend: ExpBackend,
    cache: &mut CoeffCache,
) -> Result<(CVector, usize)> {
    if g0.ncols() != v.len() {
        return Err(Error::DimensionMismatch {
            expected: g0.ncols(),
            got: v.len(),
        });
    }
    let a = g0 * C64::new(dt, 0.0);
    match backend {
        ExpBackend::Dense => Ok((expm_dense(&a)? * v, 0)),
        ExpBackend::Polynomial => {
            let ex = FmExpansion::build(&a, v, 0, 1.0, cache)?;
            let (out, _) = ex.apply(1.0, cache)?;
            Ok((out, ex.matvecs))
        }
    }
}

/// `exp(G₀ δt) v` with the dense backend.
pub fn expm_apply(g0: &CMatrix, dt: f64, v: &CVector) -> Result<CVector> {
    expm_apply_with(g0, dt, v, ExpBackend::Dense, &mut CoeffCache::new()).map(|r| r.0)
}

/// `f_M(G₀, τ) v`.
pub fn f_m_apply(g0: &CMatrix, m_order: usize, tau: f64, v: &CVector) -> Result<CVector> {
    let mut cache = CoeffCache::new();
    let ex = FmExpansion::build(g0, v, m_order, tau, &mut cache)?;
    ex.apply(tau, &mut cache).map(|r| r.0)
}
