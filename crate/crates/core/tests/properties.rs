//! Property tests for the invariants of each stage.

use bvqpco_core::bayes_opt::{
    bo_loop, expected_improvement, gp_fit, maximize_unit, BoConfig, FitConfig, NoisyEi, Observation,
};
use bvqpco_core::design_objective::{
    build_phi, classical_state, design_cost_classical, ratio_from_state, ratio_from_vector, rhs_circuit,
};
use bvqpco_core::error_bounds::{
    condition_number, gamma_threshold, generator_norm, kappa_bound_explicit, kappa_bound_implicit, levels_for,
    spectral_norm, stacked_matrix, trace_l2_identity_check,
};
use bvqpco_core::pauli_lcu::{decompose_sliced, decompose_trace, recombine, reconstruct, PauliWord, SeparableLcu};
use bvqpco_core::pde_model::{
    assemble, assemble_parts, classical_solve, classical_time_march, DesignPoint, HeatProblem, InitialProfile, Scheme,
};
use bvqpco_core::quantum_kernel::{ansatz, hadamard_expectation, run_circuit, AnsatzSpec, StateVector};
use bvqpco_core::vqls::{CostVariant, Vqls, VqlsConfig, VqlsProblem};
use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use proptest::prelude::*;

fn reference() -> HeatProblem {
    HeatProblem::reference()
}

fn design() -> impl Strategy<Value = DesignPoint> {
    (2.0f64..=4.0, 0.2f64..=0.3).prop_map(|(l, a)| DesignPoint::new(l, a))
}

fn unit_vec(dim: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-1.0f64..1.0, dim).prop_filter_map("zero vector", |v| {
        let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        (n > 1e-3).then(|| v.into_iter().map(|x| x / n).collect())
    })
}

fn real_matrix(dim: usize) -> impl Strategy<Value = DMatrix<f64>> {
    prop::collection::vec(-2.0f64..2.0, dim * dim).prop_map(move |v| DMatrix::from_vec(dim, dim, v))
}

fn vqls_problem(d: &DesignPoint) -> VqlsProblem {
    let p = reference();
    let cache = SeparableLcu::for_problem(&p, Scheme::Implicit).unwrap();
    VqlsProblem::new(recombine(&cache, &p, d), rhs_circuit(&p, d).unwrap()).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn time_march_equals_stacked_solve(d in design()) {
        let p = reference();
        let u = classical_solve(&assemble(&p, &d, Scheme::Implicit).unwrap()).unwrap();
        let flat = classical_time_march(&p, &d, Scheme::Implicit).unwrap().flatten();
        let scale = u.amax();
        prop_assert!((u - flat).amax() <= 1e-10 * scale);
    }

    #[test]
    fn schemes_share_rhs_and_split_affinely(d in design()) {
        // Coarser grid keeps the explicit scheme stable over the whole box.
        let p = reference().with_grid(4, 4);
        let imp = assemble(&p, &d, Scheme::Implicit).unwrap();
        if let Ok(exp) = assemble(&p, &d, Scheme::Explicit) {
            prop_assert_eq!(&exp.rhs, &imp.rhs);
        }
        let (chain, diffusion) = assemble_parts(p.n_x, p.n_t, Scheme::Implicit).unwrap();
        let c = p.diffusion_number(&d);
        prop_assert_eq!(imp.matrix, chain - diffusion * c);
    }

    #[test]
    fn explicit_march_conserves_heat_without_flux(temps in prop::collection::vec(0.0f64..500.0, 8), a in 0.2f64..0.3) {
        let mut p = reference();
        p.flux = vec![0.0; p.n_t - 1];
        p.initial_profile = InitialProfile::Values { temps };
        // l = 4 keeps the diffusion number under the stability limit
        let traj = classical_time_march(&p, &DesignPoint::new(4.0, a), Scheme::Explicit).unwrap();
        let total0: f64 = traj.values.row(0).sum();
        for k in 1..p.n_t {
            let total: f64 = traj.values.row(k).sum();
            prop_assert!((total - total0).abs() <= 1e-12 * total0.max(1.0));
        }
    }

    #[test]
    fn lcu_roundtrip_and_methods_agree(m in (0usize..3).prop_flat_map(|k| real_matrix(4 << k))) {
        let sliced = decompose_sliced(&m).unwrap();
        let trace = decompose_trace(&m).unwrap();
        prop_assert_eq!(sliced.len(), trace.len());
        for (a, b) in sliced.terms.iter().zip(&trace.terms) {
            prop_assert_eq!(&a.word, &b.word);
            prop_assert!((a.coeff - b.coeff).norm() <= 1e-12);
        }
        let back = reconstruct(&sliced);
        for (x, y) in back.iter().zip(m.iter()) {
            prop_assert!((x.re - y).abs() <= 1e-12);
            prop_assert!(x.im.abs() <= 1e-12);
        }
        for t in &sliced.terms {
            if t.word.y_count() % 2 == 0 {
                prop_assert!(t.coeff.im.abs() <= 1e-12);
            } else {
                prop_assert!(t.coeff.re.abs() <= 1e-12);
            }
        }
    }

    #[test]
    fn assembled_systems_roundtrip(d in design(), nx in prop::sample::select(vec![2usize, 4, 8]), nt in prop::sample::select(vec![2usize, 4, 8])) {
        let p = reference().with_grid(nx, nt);
        let m = assemble(&p, &d, Scheme::Implicit).unwrap().matrix;
        let back = reconstruct(&decompose_sliced(&m).unwrap());
        for (x, y) in back.iter().zip(m.iter()) {
            prop_assert!((x - Complex64::new(*y, 0.0)).norm() <= 1e-12);
        }
    }

    #[test]
    fn ansatz_is_unitary_and_real(theta in prop::collection::vec(0.0f64..6.3, 15), psi in unit_vec(32)) {
        let c = ansatz(&theta, 5, 2).unwrap();
        let input = StateVector::from_real(&DVector::from_vec(psi)).unwrap();
        let out = run_circuit(&c, &input).unwrap();
        prop_assert!((out.norm() - 1.0).abs() <= 1e-10);
        prop_assert!(out.max_imag() <= 1e-12);
    }

    #[test]
    fn hadamard_expectation_matches_inner_product(theta in prop::collection::vec(0.0f64..6.3, 9), word in 0usize..64) {
        let prep = AnsatzSpec::new(3, 2).circuit(&theta).unwrap();
        let w = PauliWord::all(3).nth(word).unwrap();
        let u = bvqpco_core::quantum_kernel::pauli_circuit(&w);
        let got = hadamard_expectation(&u, &prep).unwrap();
        let psi = prep.run_zero().unwrap();
        let v = DVector::from_column_slice(psi.amplitudes());
        let want = (v.adjoint() * u.unitary().unwrap() * &v)[(0, 0)];
        prop_assert!((got - want).norm() <= 1e-12);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn cost_variants_nonnegative_and_ordered(d in design(), seed in 0u64..1000) {
        let vp = vqls_problem(&d);
        let cfg = VqlsConfig { rng_seed: seed, ..VqlsConfig::default() };
        let v = Vqls::new(&vp, cfg).unwrap();
        let theta = v.initial_theta();
        let n = vp.n_qubits() as f64;
        let c = |k| v.cost_variant(&theta, k).unwrap();
        let (ug, g, ul, l) = (c(CostVariant::Ug), c(CostVariant::G), c(CostVariant::Ul), c(CostVariant::L));
        for x in [ug, g, ul, l] {
            prop_assert!(x >= -1e-12);
        }
        prop_assert!(ul <= ug + 1e-10 && ug <= n * ul + 1e-10);
        prop_assert!(l <= g + 1e-10 && g <= n * l + 1e-10);
    }

    #[test]
    fn costs_vanish_together_at_the_solution(d in design()) {
        let p = reference();
        let vp = vqls_problem(&d);
        let psi = classical_state(&p, &d).unwrap();
        let amps = psi.amplitudes();
        let a_psi = vp.apply(amps);
        let norm: f64 = a_psi.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        let overlap: Complex64 = vp.b_state().amplitudes().iter().zip(&a_psi).map(|(b, x)| b.conj() * x).sum();
        let c_g = 1.0 - overlap.norm_sqr() / (norm * norm);
        prop_assert!(c_g.abs() <= 1e-10);
    }

    #[test]
    fn best_so_far_is_monotone(seed in 0u64..1000) {
        let vp = vqls_problem(&DesignPoint::new(3.0, 0.25));
        let cfg = VqlsConfig { rng_seed: seed, max_iters: 20, gamma: 1e-9, ..VqlsConfig::default() };
        let res = Vqls::new(&vp, cfg).unwrap().solve().unwrap();
        let best = res.best_so_far();
        prop_assert!(best.windows(2).all(|w| w[1] <= w[0]));
    }

    #[test]
    fn ratio_invariant_to_scaling(d in design(), c in prop::sample::select(vec![-7.5, -1.0, 1e-3, 2.0, 1e4])) {
        let p = reference();
        let spec = build_phi(&p);
        let u = classical_solve(&assemble(&p, &d, Scheme::Implicit).unwrap()).unwrap();
        let r = ratio_from_vector(&u, &spec).unwrap();
        let rc = ratio_from_vector(&(&u * c), &spec).unwrap();
        prop_assert!((r - rc).abs() <= 1e-12 * r.abs());
        let psi = classical_state(&p, &d).unwrap();
        prop_assert!((ratio_from_state(&psi, &spec).unwrap() - r).abs() <= 1e-10 * r.abs());
    }

    #[test]
    fn selector_overlap_matches_dense_dot(d in design()) {
        let p = reference();
        let spec = build_phi(&p);
        let psi = classical_state(&p, &d).unwrap();
        let phi = StateVector::from_real(&spec.phi_d).unwrap();
        let sim = phi.inner(&psi);
        let dense: f64 = spec.phi_d.iter().zip(psi.amplitudes()).map(|(a, b)| a * b.re).sum::<f64>() / spec.phi_d.norm();
        prop_assert!((sim.re - dense).abs() <= 1e-12 && sim.im.abs() <= 1e-12);
    }

    #[test]
    fn design_cost_is_lipschitz_on_the_box(d in design()) {
        let p = reference();
        let h = [1e-4, 1e-6];
        let f0 = design_cost_classical(&d, &p).unwrap();
        let dl = DesignPoint::new((d.l + h[0]).min(4.0), d.alpha);
        let da = DesignPoint::new(d.l, (d.alpha + h[1]).min(0.3));
        let gl = (design_cost_classical(&dl, &p).unwrap() - f0) / h[0];
        let ga = (design_cost_classical(&da, &p).unwrap() - f0) / h[1];
        prop_assert!(f0.is_finite());
        prop_assert!(gl.abs() < 50.0 && ga.abs() < 500.0, "{gl} {ga}");
    }

    #[test]
    fn kappa_within_bounds_on_heat_family(d in design()) {
        let p = reference();
        let nu = generator_norm(&p, &d).unwrap();
        let t = p.horizon();
        let mf = levels_for(&p, nu, 2.0);
        let hf = t / (mf - 1) as f64;
        let af = stacked_matrix(&p, &d, Scheme::Explicit, mf).unwrap();
        prop_assert!(condition_number(&af) <= kappa_bound_explicit(nu, t, hf).unwrap());
        prop_assert!(spectral_norm(&af) <= 2.0 + hf * nu + 1e-12);
        let mb = levels_for(&p, nu, 0.5);
        let hb = t / (mb - 1) as f64;
        let ab = stacked_matrix(&p, &d, Scheme::Implicit, mb).unwrap();
        prop_assert!(condition_number(&ab) <= kappa_bound_implicit(nu, t, hb, true).unwrap());
    }

    #[test]
    fn bo_points_stay_in_the_box(seed in 0u64..1000) {
        let bounds = [(2.0, 4.0), (0.2, 0.3)];
        let cfg = BoConfig { n_init: 4, iterations: 4, n_mc: 32, acquisition_starts: 4, seed, ..BoConfig::default() };
        let mut f = |x: &[f64], _: usize| Ok(Observation { mean: (x[0] - 2.9).powi(2) + 100.0 * (x[1] - 0.28).powi(2), stderr: 1e-3 });
        let state = bo_loop(&mut f, &bounds, &cfg).unwrap();
        prop_assert_eq!(state.records.len(), 8);
        for r in &state.records {
            prop_assert!(r.x[0] >= 2.0 && r.x[0] <= 4.0 && r.x[1] >= 0.2 && r.x[1] <= 0.3);
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn trace_identity_on_real_pairs(a in unit_vec(16), b in unit_vec(16)) {
        let to_c = |v: Vec<f64>| v.into_iter().map(|x| Complex64::new(x, 0.0)).collect::<Vec<_>>();
        prop_assert!(trace_l2_identity_check(&to_c(a), &to_c(b)) <= 1e-12);
    }

    #[test]
    fn bounds_monotone(nu in 0.1f64..5.0, t in 0.1f64..3.0, frac in 0.05f64..0.9) {
        let h = frac * 0.5 / nu;
        let e = kappa_bound_explicit(nu, t, h).unwrap();
        prop_assert!(kappa_bound_explicit(nu, 2.0 * t, h).unwrap() > e);
        prop_assert!(kappa_bound_explicit(nu, t, h / 2.0).unwrap() > e);
        for contraction in [true, false] {
            let b = kappa_bound_implicit(nu, t, h, contraction).unwrap();
            prop_assert!(kappa_bound_implicit(nu, 2.0 * t, h, contraction).unwrap() > b);
            prop_assert!(kappa_bound_implicit(nu, t, h / 2.0, contraction).unwrap() > b);
        }
    }

    #[test]
    fn gamma_shrinks_with_system_size(eps in 0.01f64..0.99, k in 1usize..6) {
        let n = 1usize << k;
        prop_assert!(gamma_threshold(eps, 0.1, 1.0, 2 * n, 4).unwrap() < gamma_threshold(eps, 0.1, 1.0, n, 4).unwrap());
        let g = gamma_threshold(eps, 0.1, 1.0, n, 4).unwrap();
        prop_assert!(g > 0.0 && g < 1.0);
    }
}

#[test]
fn noiseless_noisy_ei_picks_the_ei_point() {
    let x: Vec<Vec<f64>> = vec![
        vec![0.1, 0.2],
        vec![0.8, 0.3],
        vec![0.4, 0.9],
        vec![0.6, 0.6],
        vec![0.2, 0.7],
        vec![0.9, 0.9],
    ];
    let y: Vec<f64> = x
        .iter()
        .map(|p| (p[0] - 0.45).powi(2) + (p[1] - 0.35).powi(2))
        .collect();
    let model = gp_fit(&x, &y, &[0.0; 6], &FitConfig::default()).unwrap();
    let f_star = model.best_observed();
    let (u_ei, _) = maximize_unit(&|p| expected_improvement(&model, p, f_star), 2, 32, 5);
    let nei = NoisyEi::new(&model, 1, 5).unwrap();
    let (u_nei, _) = maximize_unit(&|p| nei.value(p), 2, 32, 5);
    let cell = 1.0 / 40.0;
    assert!(
        (u_ei[0] - u_nei[0]).abs() <= cell && (u_ei[1] - u_nei[1]).abs() <= cell,
        "{u_ei:?} vs {u_nei:?}"
    );
}
