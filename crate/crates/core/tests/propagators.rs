use ito_core::generator::{real_coeff, Generator};
use ito_core::models::{driven_ho_analytic, DrivenHoModel, QuditModel};
use ito_core::propagators::*;
use ito_core::quantum::{devectorize, hermiticity_defect, CMatrix, CVector, QuantumState, C64, I};
use ito_core::Error;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn ito(m: usize) -> Method {
    Method::Ito(ItoConfig::new(m, 1.0))
}

fn pwc() -> Method {
    Method::Pwc(ExpBackend::Dense)
}

/// Max deviation of `⟨x⟩, ⟨p⟩` from the closed form over every grid point.
fn ho_error(model: &DrivenHoModel, n_t: usize, method: Method) -> (f64, PropagationStats) {
    let g = model.generator().unwrap();
    let (x, p) = model.observables().unwrap();
    let tr = propagate(&g, 0.0, model.horizon, n_t, method, &model.ground_state(), &Observers::expectations(vec![x, p], 1)).unwrap();
    let mut err: f64 = 0.0;
    for (t, e) in tr.times.iter().zip(&tr.expectations) {
        let (xa, pa) = driven_ho_analytic(model, *t);
        err = err.max((e[0].re - xa).abs()).max((e[1].re - pa).abs());
    }
    (err, tr.stats)
}

fn random_hermitian(n: usize, rng: &mut ChaCha8Rng) -> CMatrix {
    let a = CMatrix::from_fn(n, n, |_, _| C64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5));
    (&a + a.adjoint()) * C64::new(0.5, 0.0)
}

fn qudit_field(model: &QuditModel) -> ito_core::generator::CoeffFn {
    model.drive().coeff()
}

#[test]
fn zero_inhomogeneity_is_one_exact_step() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let h = random_hermitian(6, &mut rng);
    let g = Generator::schrodinger(&h, Vec::new()).unwrap();
    let v = QuantumState::basis(6, 2).amplitudes;
    let cfg = ItoConfig { dt: 0.3, ..ItoConfig::new(6, 0.3) };
    let (u, r) = ito_step(&g, 0.0, &cfg, &v, &mut ItoWorkspace::new()).unwrap();
    assert_eq!(r.n_iter, 1);
    assert!(r.converged);
    let exact = expm_apply(&(&h * (-I)), 0.3, &v).unwrap();
    assert!((u - exact).camax() <= 1e-12);
}

#[test]
fn zero_generator_keeps_the_state() {
    let g = Generator::schrodinger(&CMatrix::zeros(3, 3), Vec::new()).unwrap();
    let s = QuantumState::hilbert(CVector::from_vec(vec![C64::new(0.6, 0.0), C64::new(0.0, 0.8), C64::new(0.0, 0.0)]));
    for m in [pwc(), ito(5)] {
        let obs = Observers {
            states: true,
            ..Observers::default()
        };
        let tr = propagate(&g, 0.0, 2.0, 10, m, &s, &obs).unwrap();
        assert_eq!(tr.states.len(), 11);
        for st in &tr.states {
            assert!((&st.amplitudes - &s.amplitudes).camax() <= 1e-15);
        }
    }
}

#[test]
fn driven_oscillator_matches_the_closed_form() {
    let model = DrivenHoModel::standard();
    let (err, stats) = ho_error(&model, 900, ito(8));
    assert!(err <= 1e-12, "{err:e}");
    assert_eq!(stats.steps, 900);
    assert!(stats.max_eps_iter <= 1e-12);
}

#[test]
fn iterations_per_step_stay_between_one_and_three() {
    let model = DrivenHoModel::standard();
    let mut last = f64::INFINITY;
    for n_t in [500, 900, 1500, 2100, 3000] {
        let (_, stats) = ho_error(&model, n_t, ito(8));
        let it = stats.mean_iterations();
        assert!((1.0..=3.0).contains(&it), "n_t={n_t}: {it}");
        assert!(it <= last, "n_t={n_t}: {it} > {last}");
        last = it;
    }
}

#[test]
fn extrapolated_guess_never_costs_more_iterations() {
    let model = DrivenHoModel::standard();
    for n_t in [500, 1500] {
        let (e1, s1) = ho_error(&model, n_t, Method::Ito(ItoConfig::new(8, 1.0)));
        let constant = ItoConfig::new(8, 1.0).with_guess(Guess::ConstantPrevious);
        let (e2, s2) = ho_error(&model, n_t, Method::Ito(constant));
        assert!(s1.mean_iterations() <= s2.mean_iterations(), "{} > {}", s1.mean_iterations(), s2.mean_iterations());
        assert!(e1 <= 1e-11 && e2 <= 1e-11);
    }
}

#[test]
fn interpolation_error_falls_with_order() {
    let model = DrivenHoModel::standard();
    let mut last = f64::INFINITY;
    for m in 4..=12 {
        let (_, s) = ho_error(&model, 900, ito(m));
        // until it reaches roundoff
        assert!(s.max_eps_m <= last || s.max_eps_m <= 1e-15, "M={m}: {:e} > {last:e}", s.max_eps_m);
        last = s.max_eps_m;
    }
    assert!(ItoConfig::new(17, 1.0).validate().is_err());
    assert!(ItoConfig::new(1, 1.0).validate().is_err());
}

#[test]
fn near_resonance_separates_ito_from_pwc() {
    let model = DrivenHoModel::near_resonant();
    let (ito_err, _) = ho_error(&model, 4000, ito(8));
    assert!(ito_err < 1e-13, "{ito_err:e}");
    let errs: Vec<f64> = [1000, 10_000, 100_000].iter().map(|&n| ho_error(&model, n, pwc()).0).collect();
    assert!(errs.windows(2).all(|w| w[1] < w[0]), "{errs:?}");
    assert!(errs[2] > 1e-12);
}

#[test]
fn two_half_steps_beat_one_on_a_ramp() {
    // G(t) = −i (H₀ + t H₁), reference from a very fine ITO run
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let (h0, h1) = (random_hermitian(5, &mut rng), random_hermitian(5, &mut rng));
    let g = Generator::schrodinger(&h0, vec![(h1, real_coeff(|t| t))]).unwrap();
    let s = QuantumState::basis(5, 0);
    let t = 0.8;
    let reference = propagate(&g, 0.0, t, 400, ito(10), &s, &Observers::default()).unwrap().final_state.amplitudes;
    let err = |n| {
        let f = propagate(&g, 0.0, t, n, pwc(), &s, &Observers::default()).unwrap().final_state.amplitudes;
        (f - &reference).norm()
    };
    assert!(err(2) < err(1), "{} >= {}", err(2), err(1));
}

#[test]
fn backends_agree_for_pwc() {
    let model = DrivenHoModel::standard();
    let (a, _) = ho_error(&model, 2000, pwc());
    let (b, s) = ho_error(&model, 2000, Method::Pwc(ExpBackend::Polynomial));
    assert!((a - b).abs() <= 1e-12, "{a:e} {b:e}");
    assert!(s.matvecs > 0);
}

#[test]
fn norm_is_conserved_per_thousand_steps() {
    let model = QuditModel::default_device();
    let g = model.hamiltonian_generator(qudit_field(&model)).unwrap();
    let s = QuantumState::basis(model.n_levels, 0);
    // ITO is not unitary by construction: its norm drift is bounded by the
    // interpolation error, so M must resolve the step
    let runs = [
        (10.0, 1000, pwc()),
        (10.0, 1000, Method::Pwc(ExpBackend::Polynomial)),
        (10.0, 1000, ito(10)),
        (150.0, 10_000, ito(10)),
    ];
    for (t, n, m) in runs {
        let tr = propagate(&g, 0.0, t, n, m, &s, &Observers::default()).unwrap();
        assert!((tr.final_state.norm() - 1.0).abs() <= 1e-12, "{m:?}: {:e}", tr.final_state.norm() - 1.0);
    }
    let ho = DrivenHoModel::standard();
    let tr = propagate(&ho.generator().unwrap(), 0.0, ho.horizon, 900, ito(8), &ho.ground_state(), &Observers::default()).unwrap();
    assert!((tr.final_state.norm() - 1.0).abs() <= 1e-12);
}

#[test]
fn lindblad_propagation_keeps_a_valid_density_matrix() {
    let model = QuditModel::default_device();
    let g = model.lindblad_generator(qudit_field(&model)).unwrap();
    let rho0 = QuantumState::basis(model.n_levels, 0).to_density().unwrap();
    for m in [pwc(), ito(8)] {
        let obs = Observers {
            every: 100,
            states: true,
            ..Observers::default()
        };
        let tr = propagate(&g, 0.0, 20.0, 2000, m, &rho0, &obs).unwrap();
        for st in &tr.states {
            assert!((st.trace() - 1.0).norm() <= 1e-10, "{m:?}: {}", st.trace());
            let rho = devectorize(st).unwrap();
            assert!(hermiticity_defect(&rho) <= 1e-10);
            assert!(st.populations().iter().all(|&p| p >= -1e-12));
        }
    }
}

#[test]
fn ito_matches_pwc_on_the_qudit_in_the_fine_step_limit() {
    let model = QuditModel::default_device();
    let g = model.hamiltonian_generator(qudit_field(&model)).unwrap();
    let s = QuantumState::basis(model.n_levels, 0);
    let a = propagate(&g, 0.0, 5.0, 500, ito(10), &s, &Observers::default()).unwrap().final_state;
    let b = propagate(&g, 0.0, 5.0, 50_000, pwc(), &s, &Observers::default()).unwrap().final_state;
    assert!((a.amplitudes - b.amplitudes).norm() <= 1e-6);
}

#[test]
fn unconverged_steps_abort_the_propagation() {
    let model = DrivenHoModel::standard();
    let g = model.generator().unwrap();
    let cfg = ItoConfig::new(8, 1.0).with_tol(1e-16);
    let r = propagate(&g, 0.0, model.horizon, 50, Method::Ito(cfg), &model.ground_state(), &Observers::default());
    assert!(matches!(r, Err(Error::MaxIterExceeded { iterations: 20, .. })), "{r:?}");
}

#[test]
fn arguments_are_checked() {
    let model = DrivenHoModel::standard();
    let g = model.generator().unwrap();
    let s = model.ground_state();
    let o = Observers::default();
    assert!(propagate(&g, 0.0, 1.0, 0, pwc(), &s, &o).is_err());
    assert!(propagate(&g, 1.0, 1.0, 5, pwc(), &s, &o).is_err());
    let wrong = QuantumState::basis(3, 0);
    assert!(matches!(propagate(&g, 0.0, 1.0, 5, ito(5), &wrong, &o), Err(Error::DimensionMismatch { .. })));
    assert!(propagate(&g, 0.0, 1.0, 5, ito(20), &s, &o).is_err());
}

#[test]
fn observers_sample_every_kth_step_and_the_end() {
    let model = DrivenHoModel::standard();
    let g = model.generator().unwrap();
    let obs = Observers {
        every: 7,
        populations: true,
        ..Observers::default()
    };
    let tr = propagate(&g, 0.0, 2.0, 20, ito(6), &model.ground_state(), &obs).unwrap();
    let expect = [0.0, 0.7, 1.4, 2.0];
    assert_eq!(tr.times.len(), 4);
    for (t, e) in tr.times.iter().zip(expect) {
        assert!((t - e).abs() < 1e-12);
    }
    assert_eq!(tr.populations.len(), 4);
    assert_eq!(tr.populations[0][0], 1.0);
}
