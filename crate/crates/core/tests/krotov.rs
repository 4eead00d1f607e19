use ito_core::krotov::*;
use ito_core::models::{pythagorean_field, FreqHoModel, QuditModel};
use ito_core::propagators::{expm_dense, Guess, ItoConfig};
use ito_core::quantum::{CMatrix, CVector, QuantumState, C64};
use ito_core::Error;

fn toy(n_steps: usize) -> (ControlProblem, ControlField) {
    let mut h0 = CMatrix::zeros(3, 3);
    h0[(1, 1)] = C64::new(1.0, 0.0);
    h0[(2, 2)] = C64::new(2.3, 0.0);
    let mut h1 = CMatrix::zeros(3, 3);
    for (a, b, v) in [(0, 1, 1.0), (1, 2, 0.7), (0, 2, 0.2)] {
        h1[(a, b)] = C64::new(v, 0.0);
        h1[(b, a)] = C64::new(v, 0.0);
    }
    let init = QuantumState::basis(3, 0).amplitudes;
    let target = QuantumState::basis(3, 2).amplitudes;
    let t = 3.0;
    let p = ControlProblem::schrodinger(&h0, &h1, vec![init], OptimizationFunctional::StateToState { target }, t, n_steps)
        .unwrap();
    let f = ControlField::from_fn(|s| 0.4 + 0.6 * (1.7 * s).sin(), t, n_steps).unwrap();
    (p, f)
}

fn ho_problem() -> (ControlProblem, ControlField) {
    let m = FreqHoModel { n_trunc: 30 };
    let (h0, h1) = m.hamiltonians();
    let target = m.ground_state(0.5).unwrap().amplitudes;
    let init = QuantumState::basis(30, 0).amplitudes;
    let p = ControlProblem::schrodinger(&h0, &h1, vec![init], OptimizationFunctional::StateToState { target }, 2.0, 200)
        .unwrap();
    (p, ControlField::from_fn(|_| 1.0, 2.0, 200).unwrap())
}

fn j_of(p: &ControlProblem, f: &ControlField) -> f64 {
    functional_value(&p.functional, &forward_pwc(p, f).unwrap().0).unwrap()
}

#[test]
fn gradient_matches_central_differences() {
    // the update samples χ and ψ at the left end of each interval, which is
    // first order in δt; the grid must be fine enough for the 1e-5 check
    let nt = 500_000;
    let (p, _) = toy(nt);
    let f = ControlField::from_fn_pwc(|s| 0.4 + 0.6 * (1.7 * s).sin(), p.t_final, nt).unwrap();
    let dt = p.dt();
    let dir: Vec<f64> = (0..nt)
        .map(|n| {
            let t = (n as f64 + 0.5) * dt;
            (std::f64::consts::PI * t / p.t_final).sin() * (2.0 * t).cos()
        })
        .collect();
    let h = 1e-4;
    let shifted = |s: f64| {
        let mut g = f.clone();
        for (e, d) in g.grid_values.iter_mut().zip(&dir) {
            *e += s * d;
        }
        g
    };
    let fd = (j_of(&p, &shifted(h)) - j_of(&p, &shifted(-h))) / (2.0 * h);

    // Δε = (S/λ) Re⟨χ|∂G/∂ε|ψ⟩ and dJ/dε_n = −2 Re⟨χ|∂G/∂ε|ψ⟩ δt, so
    // δJ = −Σ (2λ/S) Δε δε δt in the frozen-field limit
    let lambda = 1e10;
    let mut cfg = KrotovConfig::new(lambda, KrotovPropagator::Pwc);
    cfg.shape = ShapeFunction::Constant;
    let (finals, _) = forward_pwc(&p, &f).unwrap();
    let (chi, _) = backward_costate(&p, &f, &finals).unwrap();
    let up = pwc_update(&p, &f, &chi, &cfg).unwrap();
    let predicted: f64 = (0..nt)
        .map(|n| -2.0 * lambda * (up.field.grid_values[n] - f.grid_values[n]) * dir[n] * dt)
        .sum();
    assert!(fd.abs() > 1e-3, "degenerate direction: {fd}");
    assert!(((predicted - fd) / fd).abs() < 1e-5, "fd {fd:e} predicted {predicted:e}");
}

#[test]
fn costate_is_norm_preserving_and_inverts_the_forward_run() {
    let (p0, f) = toy(400);
    let (finals, _) = forward_pwc(&p0, &f).unwrap();
    // χ(T) = ψ(T) when the target is the final state itself
    let p = ControlProblem {
        functional: OptimizationFunctional::StateToState { target: finals[0].clone() },
        ..p0.clone()
    };
    let (chi, _) = backward_costate(&p, &f, &finals).unwrap();
    for c in &chi {
        assert!((c[0].norm() - 1.0).abs() < 1e-12);
    }
    assert!((&chi[0][0] - &p.initial[0]).norm() < 1e-12);

    // ⟨χ(t_n)|ψ(t_n)⟩ is constant; ψ from dense step exponentials
    let target = QuantumState::basis(3, 1).amplitudes;
    let p = ControlProblem {
        functional: OptimizationFunctional::StateToState { target },
        ..p0
    };
    let (chi, _) = backward_costate(&p, &f, &finals).unwrap();
    let mut psi = p.initial[0].clone();
    let overlap0 = chi[0][0].dotc(&psi);
    for n in 0..p.n_steps {
        let e = 0.5 * (f.grid_values[n] + f.grid_values[n + 1]);
        psi = expm_dense(&(p.generator_at(e) * C64::new(p.dt(), 0.0))).unwrap() * psi;
        assert!((chi[n + 1][0].dotc(&psi) - overlap0).norm() < 1e-10, "n = {n}");
    }
}

#[test]
fn ito_costate_inverts_the_forward_run() {
    let (p0, f) = toy(200);
    let cfg = KrotovConfig::new(1.0, KrotovPropagator::Ito(ItoConfig::new(6, 0.0)));
    let ic = ItoConfig::new(6, 0.0);
    let (finals, _) = forward_ito(&p0, &f, &ic).unwrap();
    let p = ControlProblem {
        functional: OptimizationFunctional::StateToState { target: finals[0].clone() },
        ..p0
    };
    let (chi, _) = backward_costate_ito(&p, &f, &finals, &cfg).unwrap();
    assert_eq!(chi.len(), p.n_steps);
    assert_eq!(chi[0].len(), 6);
    for nodes in &chi {
        for c in nodes {
            assert!((c.norm() - 1.0).abs() < 1e-11);
        }
    }
    assert!((&chi[0][0] - &p.initial[0]).norm() < 1e-11);
}

#[test]
fn frozen_field_limit() {
    let (p, f) = toy(300);
    for prop in [KrotovPropagator::Pwc, KrotovPropagator::Ito(ItoConfig::new(5, 0.0))] {
        let mut cfg = KrotovConfig::new(1e12, prop);
        cfg.max_iter = 1;
        let r = optimize(&p, &f, &cfg).unwrap();
        assert_eq!(r.records.len(), 2);
        assert!(r.records[1].field_change_norm <= 1e-9);
        assert!((r.records[1].j_t - r.records[0].j_t).abs() <= 1e-9);
    }
}

#[test]
fn field_change_scales_inversely_with_lambda() {
    let (p, f) = ho_problem();
    for prop in [KrotovPropagator::Pwc, KrotovPropagator::Ito(ItoConfig::new(5, 0.0))] {
        let norm = |lambda: f64| {
            let mut cfg = KrotovConfig::new(lambda, prop);
            cfg.max_iter = 1;
            optimize(&p, &f, &cfg).unwrap().records[1].field_change_norm
        };
        let ratio = norm(5.0) / norm(10.0);
        assert!(ratio >= 1.8, "{prop:?}: ratio {ratio}");
    }
}

#[test]
fn guess_meeting_tolerance_returns_immediately() {
    let (p, f) = toy(50);
    let mut cfg = KrotovConfig::new(1.0, KrotovPropagator::Pwc);
    cfg.stop_tol = 1.0;
    let r = optimize(&p, &f, &cfg).unwrap();
    assert_eq!(r.records.len(), 1);
    assert!(r.converged);
    assert_eq!(r.field, f);
}

#[test]
fn ho_frequency_control_is_monotone_for_both_schemes() {
    let (p, f) = ho_problem();
    for prop in [KrotovPropagator::Pwc, KrotovPropagator::Ito(ItoConfig::new(5, 0.0))] {
        let mut cfg = KrotovConfig::new(0.2, prop);
        cfg.max_iter = 25;
        let r = optimize(&p, &f, &cfg).unwrap();
        for w in r.records.windows(2) {
            assert!(w[1].j_t <= w[0].j_t + 1e-12, "{prop:?}: {} -> {}", w[0].j_t, w[1].j_t);
            assert!(w[1].matvecs > w[0].matvecs);
        }
        assert!(r.final_j_t() < 1e-8, "{prop:?}: {}", r.final_j_t());
    }
}

#[test]
fn one_shot_field_estimate_does_not_converge() {
    let (p, f) = ho_problem();
    let ito = KrotovPropagator::Ito(ItoConfig::new(5, 0.0).with_guess(Guess::ConstantPrevious));
    let mut cfg = KrotovConfig::new(0.2, ito);
    cfg.max_iter = 30;
    let joint = optimize(&p, &f, &cfg).unwrap();
    cfg.one_shot_field = true;
    let one_shot = optimize(&p, &f, &cfg).unwrap();
    assert!(joint.final_j_t() < 1e-10, "joint {}", joint.final_j_t());
    assert!(one_shot.final_j_t() > 1e3 * joint.final_j_t(), "one-shot {}", one_shot.final_j_t());
}

#[test]
fn too_small_lambda_breaks_the_joint_loop() {
    let (p, f) = ho_problem();
    let mut cfg = KrotovConfig::new(1e-4, KrotovPropagator::Ito(ItoConfig::new(5, 0.0)));
    cfg.max_iter = 3;
    match optimize(&p, &f, &cfg) {
        Err(Error::JointLoopDiverged {
            interval, iterations, ..
        }) => {
            assert!(interval < p.n_steps);
            assert_eq!(iterations, 20);
        }
        other => panic!("expected a joint-loop failure, got {:?}", other.map(|r| r.final_j_t())),
    }
}

#[test]
fn gate_problem_bookkeeping() {
    let (p, f) = toy(10);
    let bad = ControlProblem::new(
        p.drift.clone(),
        p.control.clone(),
        vec![CVector::zeros(3)],
        OptimizationFunctional::gate(&CMatrix::identity(4, 4), 4).unwrap(),
        1.0,
        10,
    );
    assert!(matches!(bad, Err(Error::StateCount { expected: 4, got: 1 })));
    let mut cfg = KrotovConfig::new(-1.0, KrotovPropagator::Pwc);
    assert!(optimize(&p, &f, &cfg).is_err());
    cfg.lambda_a = 1.0;
    let short = ControlField::from_fn(|_| 0.0, 3.0, 7).unwrap();
    assert!(optimize(&p, &short, &cfg).is_err());
}

#[test]
fn reported_functional_belongs_to_the_returned_field() {
    let (p, f) = toy(300);
    for prop in [KrotovPropagator::Pwc, KrotovPropagator::Ito(ItoConfig::new(5, 0.0))] {
        let mut cfg = KrotovConfig::new(0.5, prop);
        cfg.max_iter = 4;
        let r = optimize(&p, &f, &cfg).unwrap();
        let (finals, _) = propagate_field(&p, &r.field, &cfg).unwrap();
        let j = functional_value(&p.functional, &finals).unwrap();
        assert!((j - r.final_j_t()).abs() < 1e-10, "{prop:?}: {j} vs {}", r.final_j_t());
    }
}

#[test]
fn qudit_population_inversion_is_monotone() {
    let m = QuditModel::default_device().with_pq(0.5, 0.5);
    let n = m.n_levels;
    let (t, nt) = (150.0, 150_000);
    let p = ControlProblem::schrodinger(
        &m.drift().matrix,
        &m.coupling().matrix,
        vec![QuantumState::basis(n, 0).amplitudes],
        OptimizationFunctional::StateToState {
            target: QuantumState::basis(n, 2).amplitudes,
        },
        t,
        nt,
    )
    .unwrap();
    let guess = ControlField::from_fn(pythagorean_field(&m), t, nt).unwrap();
    let mut cfg = KrotovConfig::new(5.0, KrotovPropagator::Pwc);
    cfg.max_iter = 3;
    let r = optimize(&p, &guess, &cfg).unwrap();
    for w in r.records.windows(2) {
        assert!(w[1].j_t <= w[0].j_t + 1e-12);
    }
    assert!(r.final_j_t() < 1e-2 * r.records[0].j_t);
}
