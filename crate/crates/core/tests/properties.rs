use nalgebra::Complex;
use proptest::prelude::*;

use stoqlift::division::{environment_division_scenario, theorem1_check};
use stoqlift::dynamics::{
    channel, ck_checklist, generator_from_family, gksl_superoperator, short_time_kraus, trace_annihilation_residual,
    SuperOperatorFamily, DEFAULT_CK_TOLERANCE, DEFAULT_FD_STEP,
};
use stoqlift::kernels::{
    c_divisibility_check, check_ck_family, compose, dtmc_to_ctmc_scaling, log_log_slope, short_time_derivatives,
    theta_markov_triviality_demo, validate_kernel, KernelFamily,
};
use stoqlift::lifts::{
    barandes_column_lift, canonical_lift, check_cptp, dephase, embed_diagonal, induced_kernel, q_divisibility_check,
    readout, superop_kernel_extract, theta_conjugation_lift, LeftRightMap, LinearMap,
};
use stoqlift::linalg::{self, gates};
use stoqlift::memory::{modified_readout_kernel, mod_square, two_step_kernel};
use stoqlift::random::Sampler;
use stoqlift::{CMatrix, KrausMap, RMatrix, StochasticKernel, SuperOperator, Tolerances};

fn tol() -> Tolerances {
    Tolerances::default()
}

fn kernel(s: &mut Sampler, n: usize) -> StochasticKernel {
    StochasticKernel::new(s.stochastic_matrix(n), &tol()).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn compose_stays_stochastic(seed in any::<u64>(), n in 2usize..=6) {
        let mut s = Sampler::new(seed);
        let a = kernel(&mut s, n);
        let b = kernel(&mut s, n);
        let c = compose(&a, &b, &tol()).unwrap();
        let v = validate_kernel(c.matrix(), &tol()).unwrap();
        prop_assert!(v.max_column_deviation <= 1e-10 * n as f64);
    }

    #[test]
    fn composite_kernels_are_divisible(seed in any::<u64>(), n in 2usize..=4) {
        let mut s = Sampler::new(seed);
        let gamma = kernel(&mut s, n);
        // diagonally dominant, hence well conditioned
        let g0 = StochasticKernel::new(
            (RMatrix::identity(n, n) + s.stochastic_matrix::<f64>(n)) * 0.5,
            &tol(),
        ).unwrap();
        let g20 = StochasticKernel::new(gamma.matrix() * g0.matrix(), &tol()).unwrap();
        let v = c_divisibility_check(&g20, &g0, 1e-9, &tol()).unwrap();
        let w = v.witness().expect("divisible");
        prop_assert!(linalg::max_abs(&(w.matrix() - gamma.matrix())) <= 1e-9);
    }

    #[test]
    fn ck_families_divide_at_interior_times(seed in any::<u64>(), n in 2usize..=4) {
        let mut s = Sampler::new(seed);
        let r = s.rate_matrix::<f64>(n, 1.0);
        let fam = KernelFamily::ctmc(vec![0.0, 0.3, 0.8, 1.5], r).unwrap();
        prop_assert!(check_ck_family(&fam, 1e-10).unwrap().pass);
        let g = fam.grid().to_vec();
        for &t1 in &g[1..g.len() - 1] {
            let v = c_divisibility_check(&fam.kernel(g[3], g[0]).unwrap(), &fam.kernel(t1, g[0]).unwrap(), 1e-9, &tol())
                .unwrap();
            prop_assert!(v.is_divisible());
        }
    }

    #[test]
    fn short_time_rate_estimate_is_second_order(seed in any::<u64>(), n in 2usize..=4) {
        let mut s = Sampler::new(seed);
        let r = s.rate_matrix::<f64>(n, 1.0);
        let exact = r.matrix().clone();
        let fam = KernelFamily::ctmc(vec![0.0, 1.0], r).unwrap();
        let err = |h: f64| {
            let rep = short_time_derivatives(&fam, 0.0, &[h, 10.0 * h]).unwrap();
            linalg::max_abs(&(rep.r_estimate - &exact))
        };
        let (e1, e2) = (err(2e-2), err(1e-2));
        prop_assert!(e1 / e2 > 3.0 && e1 / e2 < 5.0, "ratio {}", e1 / e2);
    }

    #[test]
    fn induced_kernel_matches_superoperator_extraction(seed in any::<u64>(), n in 2usize..=4) {
        let mut s = Sampler::new(seed);
        let k = s.index(1, 3);
        let kraus = s.kraus_map::<f64>(n, k, &tol()).unwrap();
        let lr = LeftRightMap::new(
            vec![s.complex_gaussian(n, n), s.complex_gaussian(n, n)],
            vec![s.complex_gaussian(n, n), s.complex_gaussian(n, n)],
        ).unwrap();
        let sup = kraus.superoperator();
        let maps: [&dyn LinearMap<f64>; 3] = [&kraus, &lr, &sup];
        for m in maps {
            let direct = induced_kernel(m, &tol()).unwrap().matrix;
            let extracted = superop_kernel_extract(&m.superoperator());
            prop_assert!(linalg::max_abs(&(direct - extracted)) <= 1e-12);
        }
    }

    #[test]
    fn canonical_lift_is_cptp(seed in any::<u64>(), n in 2usize..=6) {
        let mut s = Sampler::new(seed);
        let lift = canonical_lift(&kernel(&mut s, n), &tol());
        prop_assert!(check_cptp(&lift, &tol()).is_cptp());
    }

    #[test]
    fn barandes_and_theta_lifts_agree_on_diagonals(seed in any::<u64>(), n in 2usize..=5) {
        let mut s = Sampler::new(seed);
        let u = s.unitary::<f64>(n);
        let b = barandes_column_lift(&u, &tol()).unwrap();
        let t = theta_conjugation_lift(&u, &tol()).unwrap();
        for i in 0..n {
            let p = linalg::basis_projector::<f64>(n, i);
            prop_assert!(linalg::max_abs_c(&(b.apply(&p).unwrap() - t.map.apply(&p).unwrap())) <= 1e-12);
        }
    }

    #[test]
    fn dephase_and_embedding_laws(seed in any::<u64>(), n in 2usize..=6) {
        let mut s = Sampler::new(seed);
        let rho = s.density_operator::<f64>(n);
        let d = dephase(&rho);
        prop_assert_eq!(&dephase(&d), &d);
        prop_assert!((d.matrix().trace() - rho.matrix().trace()).norm() <= 1e-14);
        let p = s.probability_vector::<f64>(n);
        prop_assert_eq!(readout(&embed_diagonal(&p), true, &tol()).unwrap(), p);
    }

    #[test]
    fn unitary_factors_are_recovered(seed in any::<u64>(), n in 2usize..=3) {
        let mut s = Sampler::new(seed);
        let a = SuperOperator::conjugation(&s.unitary::<f64>(n)).unwrap();
        let b = SuperOperator::conjugation(&s.unitary::<f64>(n)).unwrap();
        let v = q_divisibility_check(&a.after(&b).unwrap(), &b, 1e-9, &tol()).unwrap();
        let w = v.witness().expect("divisible");
        prop_assert!(linalg::max_abs_c(&(w.matrix() - a.matrix())) <= 1e-10);
    }

    #[test]
    fn generators_annihilate_trace_and_generate_channels(seed in any::<u64>(), n in 2usize..=3) {
        let mut s = Sampler::new(seed);
        let jumps = s.index(0, 3);
        let gen = s.gksl_generator::<f64>(n, jumps, 0.7);
        prop_assert!(trace_annihilation_residual(&gksl_superoperator(&gen)) <= 1e-12);
        for t in [0.1, 1.0, 10.0] {
            prop_assert!(check_cptp(&channel(&gen, t).unwrap(), &tol()).is_cptp());
        }
    }

    #[test]
    fn semigroup_and_unitary_families_pass_checklist(seed in any::<u64>(), n in 2usize..=3) {
        let mut s = Sampler::new(seed);
        let gen = s.gksl_generator::<f64>(n, 2, 0.5);
        let fam = SuperOperatorFamily::from_generator(vec![0.0, 0.4, 1.0], &gen).unwrap();
        prop_assert!(ck_checklist(&fam, DEFAULT_FD_STEP, DEFAULT_CK_TOLERANCE).unwrap().pass);
        let h = s.hermitian::<f64>(n, 1.0);
        let fam = SuperOperatorFamily::unitary(vec![0.0, 0.4, 1.0], h).unwrap();
        prop_assert!(ck_checklist(&fam, DEFAULT_FD_STEP, DEFAULT_CK_TOLERANCE).unwrap().pass);
    }

    #[test]
    fn unistochastic_kernels_are_bistochastic(seed in any::<u64>(), n in 2usize..=6) {
        let m = mod_square(&Sampler::new(seed).unitary::<f64>(n));
        for i in 0..n {
            prop_assert!((m.row(i).sum() - 1.0).abs() <= 1e-12);
            prop_assert!((m.column(i).sum() - 1.0).abs() <= 1e-12);
        }
    }

    #[test]
    fn readout_of_unitaries_is_mod_square_of_product(seed in any::<u64>(), n in 2usize..=4) {
        let mut s = Sampler::new(seed);
        let u = s.unitary::<f64>(n);
        let w = s.unitary::<f64>(n);
        let k = modified_readout_kernel(
            &KrausMap::unitary(u.clone(), &tol()).unwrap(),
            &KrausMap::unitary(w.clone(), &tol()).unwrap(),
            &tol(),
        ).unwrap();
        prop_assert!(linalg::max_abs(&(k.matrix() - mod_square(&(u * w)))) <= 1e-12);
    }

    #[test]
    fn record_form_implies_divisibility(seed in any::<u64>(), n_s in 2usize..=3, n_e in 2usize..=3) {
        let mut s = Sampler::new(seed);
        // system-controlled environment unitaries write a record
        let mut u = CMatrix::zeros(n_s * n_e, n_s * n_e);
        for i in 0..n_s {
            u += linalg::kron(&linalg::basis_projector::<f64>(n_s, i), &s.unitary::<f64>(n_e));
        }
        let interaction = SuperOperator::conjugation(&u).unwrap();
        let post_sys = s.kraus_map::<f64>(n_s, 2, &tol()).unwrap().superoperator();
        let post_env = s.kraus_map::<f64>(n_e, 2, &tol()).unwrap().superoperator();
        let p_env = s.probability_vector::<f64>(n_e);
        let r = environment_division_scenario(&p_env, &interaction, &post_sys, &post_env, 1e-9, &tol()).unwrap();
        prop_assert!(r.record_form);
        prop_assert!(r.c_divisible);
        prop_assert!(r.post_system_residual <= 1e-10);
    }

    #[test]
    fn theorem_one_holds_on_diagonal_first_legs(seed in any::<u64>(), n in 2usize..=3) {
        let mut s = Sampler::new(seed);
        let r = s.rate_matrix::<f64>(n, 1.0);
        let e10 = channel(&stoqlift::dynamics::ctmc_embedding(&r, None).unwrap(), 0.7).unwrap();
        let e20 = s.kraus_map::<f64>(n, 2, &tol()).unwrap().superoperator().after(&e10).unwrap();
        let v = theorem1_check(&e10, &e20, 1e-8, &tol()).unwrap();
        prop_assert!(v.theorem_applies && v.c_divisible);
    }
}

#[test]
fn scaling_errors_decrease_strictly() {
    let mut s = Sampler::new(77);
    for _ in 0..10 {
        let r = s.rate_matrix::<f64>(3, 1.0);
        let t = dtmc_to_ctmc_scaling(&r, 1.0, 1.0, &[0.2, 0.1, 0.05, 0.025], &tol()).unwrap();
        assert!(t.rows.windows(2).all(|w| w[1].error < w[0].error));
    }
}

#[test]
fn triviality_demo_matches_closed_form() {
    // for H = X: Γ_h = [[cos²h, sin²h], [sin²h, cos²h]], so
    // ‖Γ_h^n − I‖_max = (1 − cos(2h)^n) / 2 and α(h) = sin²h
    let x = gates::pauli_x::<f64>();
    let ns = [1, 3, 10, 30, 100, 300, 1000];
    let rows = theta_markov_triviality_demo(|h| gates::evolution(&x, h), 2.0, &ns, &tol()).unwrap();
    for r in &rows {
        let h = 2.0 / f64::from(r.n);
        let expected = (1.0 - (2.0 * h).cos().powi(r.n as i32)) / 2.0;
        assert!((r.product_distance - expected).abs() <= 1e-12);
        assert!((r.alpha - h.sin().powi(2)).abs() <= 1e-14);
    }
    let tail: Vec<(f64, f64)> = rows[2..].iter().map(|r| (f64::from(r.n), r.bound)).collect();
    let slope = log_log_slope(&tail).unwrap();
    assert!((slope + 1.0).abs() < 0.02, "slope {slope}");
}

#[test]
fn short_time_kraus_residual_exponent() {
    let mut s = Sampler::new(5);
    for _ in 0..5 {
        let gen = s.gksl_generator::<f64>(2, 2, 0.5);
        let rho = s.density_operator::<f64>(2);
        let l = gksl_superoperator(&gen);
        let pts: Vec<(f64, f64)> = [1e-2, 1e-3, 1e-4]
            .iter()
            .map(|&dt| {
                let k = short_time_kraus(&gen, dt, &tol()).unwrap();
                let linear = rho.matrix() + l.apply(rho.matrix()).unwrap() * Complex::new(dt, 0.0);
                (dt, linalg::max_abs_c(&(k.apply(rho.matrix()).unwrap() - linear)))
            })
            .collect();
        let slope = log_log_slope(&pts).unwrap();
        assert!((slope - 2.0).abs() <= 0.1, "slope {slope}");
    }
}

#[test]
fn generator_estimate_error_quarters_when_step_halves() {
    let mut s = Sampler::new(8);
    let gen = s.gksl_generator::<f64>(2, 1, 0.5);
    let exact = gksl_superoperator(&gen);
    let fam = SuperOperatorFamily::from_generator(vec![0.0, 1.0], &gen).unwrap();
    let err = |h: f64| linalg::max_abs_c(&(generator_from_family(&fam, 0.3, h).unwrap().matrix() - exact.matrix()));
    let ratio = err(4e-2) / err(2e-2);
    assert!((ratio - 4.0).abs() < 0.3, "ratio {ratio}");
}

#[test]
fn two_step_kernels_fail_to_compose() {
    let mut s = Sampler::new(99);
    let mut nonzero = 0;
    for _ in 0..100 {
        let v = s.unitary::<f64>(2);
        let u = s.unitary::<f64>(2);
        let gap = linalg::max_abs(&(two_step_kernel(&v, &u, &tol()).unwrap() - mod_square(&v) * mod_square(&u)));
        nonzero += usize::from(gap > 1e-9);
    }
    assert!(nonzero >= 95, "{nonzero}/100");
}

#[test]
fn partial_trace_preserves_trace_and_positivity() {
    let mut s = Sampler::new(31);
    for _ in 0..20 {
        let rho = s.density_operator::<f64>(6);
        let reduced = linalg::partial_trace_second(rho.matrix(), 2, 3);
        assert!((reduced.trace() - rho.matrix().trace()).norm() < 1e-13);
        assert!(linalg::hermitian_eigenvalues(&reduced)[0] > -1e-13);
    }
}

#[test]
fn hadamard_counter_instance_is_excluded() {
    let h = SuperOperator::conjugation(&gates::hadamard::<f64>()).unwrap();
    let v = theorem1_check(&h, &SuperOperator::identity(2), 1e-8, &tol()).unwrap();
    assert!(v.q_divisible && !v.theorem_applies && !v.c_divisible);
}
