//! Local Chebyshev-Gauss-Lobatto grids and vector-valued Newton interpolation.
//!
//! Divided differences are computed on nodes mapped to `[−2, 2]` (a domain of
//! length four, capacity one). The Newton form is then re-expanded into the
//! Taylor-like basis `Σ s_m τ^m / m!` about the left end of the interval, with
//! the `4/δt` factor folded back into the coefficients.

use crate::error::{invalid, Error, Result};
use crate::quantum::{CVector, C64};

/// Length of the normalized interpolation domain.
pub const DOMAIN_LENGTH: f64 = 4.0;

#[derive(Debug, Clone, PartialEq)]
pub struct LocalGrid {
    pub m_order: usize,
    pub dt: f64,
    /// Offsets `τ_j ∈ [0, δt]`, strictly increasing, `τ_1 = 0`, `τ_M = δt`.
    pub nodes: Vec<f64>,
}

/// CGL sampling offsets `τ_j = (δt/2)(1 − cos((j−1)π/(M−1)))`, `j = 1..M`.
pub fn cgl_nodes(m_order: usize, dt: f64) -> Result<LocalGrid> {
    if m_order < 2 {
        return Err(invalid("m_order", format!("need M >= 2, got {m_order}")));
    }
    if !(dt > 0.0) || !dt.is_finite() {
        return Err(invalid("dt", format!("need dt > 0, got {dt}")));
    }
    let denom = (m_order - 1) as f64;
    let mut nodes: Vec<f64> = (0..m_order)
        .map(|j| 0.5 * dt * (1.0 - (j as f64 * std::f64::consts::PI / denom).cos()))
        .collect();
    // pin the endpoints so that τ_1 = 0 and τ_M = δt hold bit-exactly
    nodes[0] = 0.0;
    nodes[m_order - 1] = dt;
    Ok(LocalGrid {
        m_order,
        dt,
        nodes,
    })
}

impl LocalGrid {
    pub fn scale(&self) -> f64 {
        DOMAIN_LENGTH / self.dt
    }

    /// Maps an offset `τ ∈ [0, δt]` to the centered domain `[−2, 2]`.
    pub fn to_scaled(&self, tau: f64) -> f64 {
        (tau - 0.5 * self.dt) * self.scale()
    }

    pub fn scaled_nodes(&self) -> Vec<f64> {
        self.nodes.iter().map(|&t| self.to_scaled(t)).collect()
    }

    /// Offset used to probe the interpolation error: midpoint of the widest gap.
    pub fn probe_offset(&self) -> f64 {
        let (k, _) = self
            .nodes
            .windows(2)
            .enumerate()
            .map(|(k, w)| (k, w[1] - w[0]))
            .fold((0, f64::MIN), |best, cur| if cur.1 > best.1 + 1e-15 * self.dt { cur } else { best });
        0.5 * (self.nodes[k] + self.nodes[k + 1])
    }
}

/// Newton interpolant with vector-valued coefficients on the scaled domain.
#[derive(Debug, Clone, PartialEq)]
pub struct NewtonInterpolant {
    pub scaled_nodes: Vec<f64>,
    pub coeffs: Vec<CVector>,
    /// `4/δt`.
    pub scale: f64,
    pub dt: f64,
}

/// Divided-difference table for samples taken at the grid nodes.
pub fn divided_differences(samples: &[CVector], grid: &LocalGrid) -> Result<NewtonInterpolant> {
    if samples.len() != grid.m_order {
        return Err(Error::StateCount {
            expected: grid.m_order,
            got: samples.len(),
        });
    }
    let dim = samples[0].len();
    if samples.iter().any(|s| s.len() != dim) {
        return Err(invalid("samples", "all samples must have equal length"));
    }
    let x = grid.scaled_nodes();
    let m = x.len();
    let mut a: Vec<CVector> = samples.to_vec();
    for k in 1..m {
        for j in (k..m).rev() {
            let h = x[j] - x[j - k];
            if h == 0.0 {
                return Err(invalid("nodes", "duplicate interpolation nodes"));
            }
            let inv = C64::new(1.0 / h, 0.0);
            let (lo, hi) = a.split_at_mut(j);
            let prev = &lo[j - 1];
            let cur = &mut hi[0];
            cur.zip_apply(prev, |c, p| *c = (*c - p) * inv);
        }
    }
    Ok(NewtonInterpolant {
        scaled_nodes: x,
        coeffs: a,
        scale: grid.scale(),
        dt: grid.dt,
    })
}

impl NewtonInterpolant {
    pub fn order(&self) -> usize {
        self.coeffs.len()
    }

    /// Evaluates at an offset `τ` (original, unscaled time from the interval start).
    pub fn eval(&self, tau: f64) -> CVector {
        let x = (tau - 0.5 * self.dt) * self.scale;
        let m = self.coeffs.len();
        let mut p = self.coeffs[m - 1].clone();
        for n in (0..m - 1).rev() {
            let f = C64::new(x - self.scaled_nodes[n], 0.0);
            p.zip_apply(&self.coeffs[n], |pi, an| *pi = an + f * *pi);
        }
        p
    }

    /// `max_{x ∈ [−2,2]} |Π_{i<k} (x − x_i)|`, estimated on a dense sampling.
    fn node_polynomial_max(&self, k: usize) -> f64 {
        let samples = 400;
        (0..=samples)
            .map(|s| {
                let x = -2.0 + DOMAIN_LENGTH * s as f64 / samples as f64;
                self.scaled_nodes[..k].iter().map(|xi| (x - xi).abs()).product::<f64>()
            })
            .fold(0.0, f64::max)
    }
}

/// Coefficients `s_m` of `s(τ) ≈ Σ_{m<M} s_m τ^m / m!` in original time.
#[derive(Debug, Clone, PartialEq)]
pub struct MonomialPoly {
    pub coeffs: Vec<CVector>,
}

impl MonomialPoly {
    pub fn eval(&self, tau: f64) -> CVector {
        let m = self.coeffs.len();
        let mut acc = self.coeffs[m - 1].clone();
        for k in (0..m - 1).rev() {
            // acc ← s_k + (τ/(k+1)) acc
            let f = C64::new(tau / (k + 1) as f64, 0.0);
            acc.zip_apply(&self.coeffs[k], |a, s| *a = s + f * *a);
        }
        acc
    }
}

/// Transformation matrix `q_{n,m}` with `R_n(y) = Σ_m q_{n,m} y^m/m!` for
/// `R_n(y) = Π_{i<n}(y − y_i)`.
pub fn newton_monomial_table(nodes: &[f64]) -> Vec<Vec<f64>> {
    let m = nodes.len();
    let mut q = vec![vec![0.0; m]; m];
    q[0][0] = 1.0;
    for n in 0..m.saturating_sub(1) {
        let tn = nodes[n];
        q[n + 1][0] = -tn * q[n][0];
        for k in 1..=n {
            q[n + 1][k] = k as f64 * q[n][k - 1] - tn * q[n][k];
        }
        q[n + 1][n + 1] = (n + 1) as f64 * q[n][n];
    }
    q
}

/// Re-expands a Newton interpolant in the Taylor-like basis about `τ = 0`:
/// `s_m = (4/δt)^m Σ_{n≥m} q_{n,m} a_n` with the nodes shifted to `[0, 4]`.
pub fn newton_to_monomial(interp: &NewtonInterpolant) -> MonomialPoly {
    let m = interp.coeffs.len();
    let dim = interp.coeffs[0].len();
    // shift nodes so that y = 0 corresponds to τ = 0
    let shifted: Vec<f64> = interp.scaled_nodes.iter().map(|x| x + 0.5 * DOMAIN_LENGTH).collect();
    let q = newton_monomial_table(&shifted);
    let mut coeffs = Vec::with_capacity(m);
    let mut factor = 1.0;
    for k in 0..m {
        let mut s = CVector::zeros(dim);
        for (n, a) in interp.coeffs.iter().enumerate().skip(k) {
            let w = C64::new(q[n][k] * factor, 0.0);
            s.zip_apply(a, |si, ai| *si += w * ai);
        }
        coeffs.push(s);
        factor *= interp.scale;
    }
    MonomialPoly { coeffs }
}

/// Interpolation error estimate `ε_M = ‖Δs‖ δt`.
///
/// `‖Δs‖` is the next-order Newton term: the `M`-th divided difference formed
/// with one extra `probe` sample `(τ_p, s(τ_p))`, times the maximum of the node
/// polynomial on the scaled domain. Without a probe, the last term of the
/// existing expansion is used instead.
pub fn interp_error_estimate(
    interp: &NewtonInterpolant,
    probe: Option<(f64, &CVector)>,
    dt: f64,
) -> f64 {
    let m = interp.order();
    let delta_s = match probe {
        Some((tau, value)) => {
            let x = (tau - 0.5 * interp.dt) * interp.scale;
            let w: f64 = interp.scaled_nodes.iter().map(|xi| x - xi).product();
            if w == 0.0 {
                return 0.0;
            }
            let resid = (value - interp.eval(tau)).norm();
            resid / w.abs() * interp.node_polynomial_max(m)
        }
        None => interp.coeffs[m - 1].norm() * interp.node_polynomial_max(m - 1),
    };
    delta_s * dt
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};

    fn scalar(v: f64) -> CVector {
        CVector::from_element(1, C64::new(v, 0.0))
    }

    #[test]
    fn cgl_small_cases() {
        let g = cgl_nodes(3, 2.0).unwrap();
        assert_eq!(g.nodes[0], 0.0);
        assert!((g.nodes[1] - 1.0).abs() < 1e-15);
        assert_eq!(g.nodes[2], 2.0);
        assert_eq!(cgl_nodes(2, 1.0).unwrap().nodes, vec![0.0, 1.0]);
    }

    #[test]
    fn cgl_fig1_grid() {
        let dt = 100.0 / 900.0;
        let g = cgl_nodes(8, dt).unwrap();
        assert_eq!(g.nodes[0], 0.0);
        assert_eq!(g.nodes[7], dt);
        for w in g.nodes.windows(2) {
            assert!(w[1] > w[0]);
        }
        for j in 0..8 {
            assert!((g.nodes[j] + g.nodes[7 - j] - dt).abs() < 1e-16);
        }
        // clustering at the ends
        assert!(g.nodes[1] - g.nodes[0] < g.nodes[4] - g.nodes[3]);
    }

    #[test]
    fn cgl_rejects_low_order() {
        assert!(cgl_nodes(1, 1.0).is_err());
        assert!(cgl_nodes(4, 0.0).is_err());
    }

    #[test]
    fn constant_samples() {
        let g = cgl_nodes(6, 0.3).unwrap();
        let c = CVector::from_vec(vec![C64::new(1.5, -0.5), C64::new(0.0, 2.0)]);
        let interp = divided_differences(&vec![c.clone(); 6], &g).unwrap();
        assert_eq!(interp.coeffs[0], c);
        for a in &interp.coeffs[1..] {
            assert!(a.norm() < 1e-14);
        }
        assert_eq!(interp_error_estimate(&interp, Some((g.probe_offset(), &c)), g.dt), 0.0);
    }

    #[test]
    fn line_reproduced_off_node() {
        let g = cgl_nodes(5, 0.7).unwrap();
        let samples: Vec<_> = g.nodes.iter().map(|&t| scalar(t)).collect();
        let interp = divided_differences(&samples, &g).unwrap();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(1);
        for _ in 0..50 {
            let t = rng.random::<f64>() * 0.7;
            assert!((interp.eval(t)[0].re - t).abs() < 1e-14);
        }
    }

    fn horner(c: &[f64], t: f64) -> f64 {
        c.iter().rev().fold(0.0, |acc, &a| acc * t + a)
    }

    #[test]
    fn polynomial_reproduction_degree_m_minus_one() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        let m = 6;
        let dt = 0.9;
        let coef: Vec<f64> = (0..m).map(|_| rng.random::<f64>() * 2.0 - 1.0).collect();
        let g = cgl_nodes(m, dt).unwrap();
        let samples: Vec<_> = g.nodes.iter().map(|&t| scalar(horner(&coef, t))).collect();
        let interp = divided_differences(&samples, &g).unwrap();
        let norm = samples.iter().map(|s| s.norm()).fold(0.0, f64::max);
        for _ in 0..50 {
            let t = rng.random::<f64>() * dt;
            assert!((interp.eval(t)[0].re - horner(&coef, t)).abs() <= 1e-12 * norm.max(1.0));
        }
        let probe = g.probe_offset();
        let eps = interp_error_estimate(&interp, Some((probe, &scalar(horner(&coef, probe)))), dt);
        assert!(eps <= 1e-12 * norm, "eps {eps}");
    }

    #[test]
    fn sample_count_mismatch() {
        let g = cgl_nodes(4, 1.0).unwrap();
        assert!(matches!(
            divided_differences(&vec![scalar(1.0); 3], &g),
            Err(Error::StateCount { .. })
        ));
    }

    #[test]
    fn monomial_table_first_steps() {
        let q = newton_monomial_table(&[0.3, 1.1, 2.0]);
        assert_eq!(q[0][0], 1.0);
        assert_eq!(q[1][0], -0.3);
        assert_eq!(q[1][1], 1.0);
    }

    fn random_samples(rng: &mut rand_chacha::ChaCha8Rng, m: usize) -> Vec<CVector> {
        (0..m)
            .map(|_| {
                CVector::from_fn(3, |_, _| {
                    C64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5)
                })
            })
            .collect()
    }

    /// `max_j Σ_k |c_k| y_j^k`: sensitivity of the Taylor form about the left end.
    fn taylor_condition(mono: &MonomialPoly, g: &LocalGrid) -> f64 {
        g.nodes
            .iter()
            .map(|&tau| {
                let mut term = 1.0;
                mono.coeffs
                    .iter()
                    .enumerate()
                    .map(|(k, c)| {
                        if k > 0 {
                            term *= tau / k as f64;
                        }
                        c.camax() * term
                    })
                    .sum::<f64>()
            })
            .fold(0.0, f64::max)
    }

    #[test]
    fn monomial_round_trip_random_data() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        for m in 4..=8 {
            for _ in 0..20 {
                let dt = 0.05 + rng.random::<f64>();
                let g = cgl_nodes(m, dt).unwrap();
                let samples = random_samples(&mut rng, m);
                let mono = newton_to_monomial(&divided_differences(&samples, &g).unwrap());
                for (tau, s) in g.nodes.iter().zip(&samples) {
                    let err = (mono.eval(*tau) - s).camax();
                    assert!(err <= 1e-11, "M={m} err={err:e}");
                }
            }
        }
    }

    #[test]
    fn monomial_round_trip_random_data_high_order_is_conditioning_limited() {
        // Random data at M ≥ 9 makes the endpoint Taylor form ill-conditioned
        // (condition numbers up to ~1e7 at M = 12); the round trip is then
        // accurate to a small multiple of condition × machine epsilon.
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(5);
        for m in 9..=12 {
            for _ in 0..20 {
                let dt = 0.05 + rng.random::<f64>();
                let g = cgl_nodes(m, dt).unwrap();
                let samples = random_samples(&mut rng, m);
                let mono = newton_to_monomial(&divided_differences(&samples, &g).unwrap());
                let kappa = taylor_condition(&mono, &g);
                for (tau, s) in g.nodes.iter().zip(&samples) {
                    let err = (mono.eval(*tau) - s).camax();
                    assert!(err <= 64.0 * kappa * f64::EPSILON, "M={m} err={err:e} kappa={kappa:e}");
                }
            }
        }
    }

    #[test]
    fn monomial_round_trip_smooth_data() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(9);
        for m in 4..=12 {
            let dt = 0.05 + rng.random::<f64>();
            let g = cgl_nodes(m, dt).unwrap();
            let (w1, w2) = (rng.random::<f64>() * 6.0, rng.random::<f64>() * 6.0);
            let samples: Vec<CVector> = g
                .nodes
                .iter()
                .map(|&t| {
                    CVector::from_vec(vec![
                        C64::new((w1 * t).cos(), (w2 * t).sin()),
                        C64::new((-t).exp(), t * t),
                    ])
                })
                .collect();
            let mono = newton_to_monomial(&divided_differences(&samples, &g).unwrap());
            for (tau, s) in g.nodes.iter().zip(&samples) {
                let err = (mono.eval(*tau) - s).camax();
                assert!(err <= 1e-11, "M={m} err={err:e}");
            }
        }
    }

    #[test]
    fn monomial_conversion_is_linear() {
        let g = cgl_nodes(7, 0.4).unwrap();
        let f = |k: f64| -> Vec<CVector> { g.nodes.iter().map(|&t| scalar((k * t).sin())).collect() };
        let (a, b) = (f(3.0), f(-1.7));
        let sum: Vec<CVector> = a.iter().zip(&b).map(|(x, y)| x * C64::new(2.0, 0.0) + y).collect();
        let ma = newton_to_monomial(&divided_differences(&a, &g).unwrap());
        let mb = newton_to_monomial(&divided_differences(&b, &g).unwrap());
        let ms = newton_to_monomial(&divided_differences(&sum, &g).unwrap());
        for k in 0..7 {
            let lhs = &ms.coeffs[k];
            let rhs = &ma.coeffs[k] * C64::new(2.0, 0.0) + &mb.coeffs[k];
            assert!((lhs - rhs).camax() <= 1e-9 * (1.0 + lhs.camax()));
        }
    }

    #[test]
    fn translation_invariance_of_coefficients() {
        // the same function sampled on [t0, t0+δt] with recentering gives identical
        // divided differences on the scaled domain
        let g = cgl_nodes(6, 0.5).unwrap();
        let f = |t: f64| (2.0 * t).cos();
        let t0 = 3.7;
        let shifted: Vec<CVector> = g.nodes.iter().map(|&t| scalar(f(t0 + t))).collect();
        let direct: Vec<CVector> = g.nodes.iter().map(|&t| scalar((2.0 * (t + t0)).cos())).collect();
        let a = divided_differences(&shifted, &g).unwrap();
        let b = divided_differences(&direct, &g).unwrap();
        for (x, y) in a.coeffs.iter().zip(&b.coeffs) {
            assert!((x - y).camax() < 1e-13);
        }
    }

    fn dense_max_error(m: usize, dt: f64, omega: f64) -> (f64, f64) {
        let g = cgl_nodes(m, dt).unwrap();
        let samples: Vec<_> = g.nodes.iter().map(|&t| scalar((omega * t).sin())).collect();
        let interp = divided_differences(&samples, &g).unwrap();
        let true_max = (0..=1000)
            .map(|k| {
                let t = dt * k as f64 / 1000.0;
                (interp.eval(t)[0].re - (omega * t).sin()).abs()
            })
            .fold(0.0, f64::max);
        let p = g.probe_offset();
        let est = interp_error_estimate(&interp, Some((p, &scalar((omega * p).sin()))), dt);
        (est, true_max * dt)
    }

    #[test]
    fn error_estimate_decreases_with_order() {
        let (e4, t4) = dense_max_error(4, 0.5, 3.0);
        let (e8, t8) = dense_max_error(8, 0.5, 3.0);
        assert!(e8 * 10.0 < e4, "{e4:e} -> {e8:e}");
        assert!(t8 * 10.0 < t4);
        // estimator tracks the dense-grid error within an order of magnitude
        for (e, t) in [(e4, t4), (e8, t8)] {
            assert!(e / t < 10.0 && t / e < 10.0, "est {e:e} true {t:e}");
        }
    }

    #[test]
    fn error_estimate_monotone_up_to_fourteen() {
        let mut last = f64::INFINITY;
        for m in 3..=14 {
            let (e, _) = dense_max_error(m, 0.4, 2.0);
            assert!(e < last || e < 1e-16, "M={m}: {e:e} !< {last:e}");
            last = e;
        }
    }
}
