use proptest::prelude::*;
use qprob::calculus::{boxtimes, change_of_measure_residual, change_of_variables_residual, rn_derivative};
use qprob::conditional::{cond_expectation, tower_residual};
use qprob::herm::{generalized_inverse, geometric_mean, psd_sqrt, spectral_decompose, support_projection};
use qprob::measure::{induced_mu, random_commuting_povm, random_partition, random_povm, restrict, PovmOptions};
use qprob::qrv::{channel_apply, expectation, expectation_of_operators, fixed_points, law, pairing_oracle};
use qprob::random::{random_density, random_hermitian, random_psd, rng_from_seed};
use qprob::*;

fn tol() -> Tolerances {
    Tolerances::default()
}

fn povm(n: usize, d: usize, seed: u64) -> QuantumMeasure {
    random_povm(SampleSpace::indexed(n), d, seed, PovmOptions::default()).unwrap()
}

fn hermitian_qrv(n: usize, d: usize, seed: u64) -> QuantumRandomVariable {
    let mut rng = rng_from_seed(seed);
    QuantumRandomVariable::new(SampleSpace::indexed(n), (0..n).map(|_| random_hermitian(&mut rng, d)).collect())
        .unwrap()
}

fn psd_qrv(n: usize, d: usize, seed: u64) -> QuantumRandomVariable {
    let mut rng = rng_from_seed(seed);
    QuantumRandomVariable::new(SampleSpace::indexed(n), (0..n).map(|_| random_psd(&mut rng, d, 0.01)).collect())
        .unwrap()
}

/// PSD matrix with rank `r` out of `d`.
fn low_rank_psd(d: usize, r: usize, seed: u64) -> HermitianMatrix {
    let mut rng = rng_from_seed(seed);
    let full = random_psd(&mut rng, d, 0.0);
    let dec = spectral_decompose(&full).unwrap();
    let vals: Vec<f64> = (0..d).map(|k| if k < r { dec.eigenvalues[k] } else { 0.0 }).collect();
    dec.rebuild_with(&vals)
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 96, ..ProptestConfig::default() })]

    #[test]
    fn sqrt_squares_back(seed in any::<u64>(), d in 1usize..6, r in 0usize..6) {
        let a = low_rank_psd(d, r.min(d), seed);
        let s = psd_sqrt(&a, &tol()).unwrap();
        let back = qprob::herm::hermitize(&s.mul(&s)).unwrap();
        prop_assert!(back.dist(&a) <= 1e-10 * (1.0 + a.frobenius_norm()));
    }

    #[test]
    fn generalized_inverse_identities(seed in any::<u64>(), d in 1usize..6, r in 1usize..6) {
        let a = low_rank_psd(d, r.min(d), seed);
        let inv = generalized_inverse(&a, &tol()).unwrap();
        let q = support_projection(&a, &tol()).unwrap();
        prop_assert!(inv.mul(&a).dist(q.matrix()) <= 1e-8);
        let twice = generalized_inverse(&inv, &tol()).unwrap();
        prop_assert!(twice.dist(&a) <= 1e-8 * (1.0 + a.frobenius_norm()));
    }

    #[test]
    fn decomposition_is_unitary_and_reconstructs(seed in any::<u64>(), d in 1usize..7) {
        let a = random_hermitian(&mut rng_from_seed(seed), d);
        let dec = spectral_decompose(&a).unwrap();
        let v = &dec.eigenvectors;
        prop_assert!((&v.adjoint() * v).dist(&Matrix::identity(d)) <= 1e-12);
        prop_assert!(dec.reconstruct().dist(&a) <= 1e-12 * (1.0 + a.frobenius_norm()));
        prop_assert!(dec.eigenvalues.windows(2).all(|w| w[0] >= w[1]));
    }

    #[test]
    fn geometric_mean_is_symmetric(seed in any::<u64>(), d in 1usize..5) {
        let mut rng = rng_from_seed(seed);
        let a = random_psd(&mut rng, d, 0.05);
        let b = random_psd(&mut rng, d, 0.05);
        let ab = geometric_mean(&a, &b, &tol()).unwrap();
        let ba = geometric_mean(&b, &a, &tol()).unwrap();
        prop_assert!(ab.dist(&ba) <= 1e-8 * (1.0 + ab.frobenius_norm()));
    }

    #[test]
    fn geo2_identity(seed in any::<u64>(), d in 1usize..5) {
        let mut rng = rng_from_seed(seed);
        let a = random_psd(&mut rng, d, 0.05);
        let b = random_psd(&mut rng, d, 0.0);
        let ra = psd_sqrt(&a, &tol()).unwrap();
        let lhs = psd_sqrt(&b.sandwich(&ra), &tol()).unwrap();
        let inv = generalized_inverse(&a, &tol()).unwrap();
        let rhs = geometric_mean(&inv, &b, &tol()).unwrap().sandwich(&ra);
        prop_assert!(lhs.dist(&rhs) <= 1e-8 * (1.0 + lhs.frobenius_norm()));
    }

    #[test]
    fn povm_generator_is_valid(seed in any::<u64>(), n in 1usize..8, d in 1usize..6) {
        let nu = povm(n, d, seed);
        let report = nu.validate(&tol()).unwrap();
        prop_assert!(report.is_probability);
        prop_assert!(report.identity_deviation <= 1e-10);
    }

    #[test]
    fn restriction_laws(seed in any::<u64>(), n in 2usize..8, d in 1usize..4) {
        let nu = povm(n, d, seed);
        let trivial = restrict(&nu, &Partition::trivial(n), &tol()).unwrap();
        prop_assert!(trivial.atom(0).dist(&nu.total()) <= 1e-14);

        let blocks = 1 + (seed as usize) % n;
        let f = random_partition(n, seed, blocks).unwrap();
        let r = restrict(&nu, &f, &tol()).unwrap();
        let mu = induced_mu(&nu);
        let mu_r = induced_mu(&r);
        for (b, block) in f.blocks().iter().enumerate() {
            let s: f64 = block.iter().map(|&i| mu.weights[i]).sum();
            prop_assert!((mu_r.weights[b] - s).abs() <= 1e-12);
        }
    }

    #[test]
    fn finite_additivity(seed in any::<u64>(), n in 2usize..8) {
        let nu = povm(n, 3, seed);
        let split = 1 + (seed as usize) % (n - 1);
        let e: Vec<usize> = (0..split).collect();
        let f: Vec<usize> = (split..n).collect();
        let all: Vec<usize> = (0..n).collect();
        let lhs = nu.mass(&all).unwrap();
        let rhs = nu.mass(&e).unwrap().add(&nu.mass(&f).unwrap());
        prop_assert!(lhs.dist(&rhs) <= 1e-15);
    }

    #[test]
    fn expectation_is_monotone(seed in any::<u64>(), n in 1usize..6, d in 1usize..5) {
        let nu = povm(n, d, seed);
        let psi = psd_qrv(n, d, seed ^ 1);
        let e = expectation(&psi, &nu).unwrap();
        prop_assert!(e.min_eigenvalue().unwrap() >= -1e-10 * (1.0 + e.frobenius_norm()));
    }

    #[test]
    fn expectation_is_linear(seed in any::<u64>(), n in 1usize..6, d in 1usize..5, c1 in -3.0f64..3.0, c2 in -3.0f64..3.0) {
        let nu = povm(n, d, seed);
        let a = hermitian_qrv(n, d, seed ^ 2);
        let b = hermitian_qrv(n, d, seed ^ 3);
        let lhs = expectation(&a.linear_combination(c1, &b, c2).unwrap(), &nu).unwrap();
        let rhs = expectation(&a, &nu).unwrap().scale(c1).add(&expectation(&b, &nu).unwrap().scale(c2));
        prop_assert!(lhs.dist(&rhs) <= 1e-12 * (1.0 + lhs.frobenius_norm()));
    }

    #[test]
    fn commuting_operator_coefficients_pull_out(seed in any::<u64>(), n in 1usize..6, d in 1usize..5) {
        let nu = random_commuting_povm(SampleSpace::indexed(n), d, seed).unwrap();
        let h = nu.atom(0).matrix().clone();
        let id = Matrix::identity(d);
        let rho1 = &id.scale(C64::new(0.5, 1.0)) + &(&h * &h).scale(C64::new(-2.0, 0.3));
        let rho2 = &h.scale(C64::new(1.5, -0.7)) + &id;
        let a = hermitian_qrv(n, d, seed ^ 4);
        let b = hermitian_qrv(n, d, seed ^ 5);
        let mixed: Vec<Matrix> = (0..n)
            .map(|i| &(&rho1 * a.value(i).matrix()) + &(&rho2 * b.value(i).matrix()))
            .collect();
        let lhs = expectation_of_operators(&mixed, &nu).unwrap();
        let rhs = &(&rho1 * expectation(&a, &nu).unwrap().matrix())
            + &(&rho2 * expectation(&b, &nu).unwrap().matrix());
        prop_assert!(lhs.dist(&rhs) <= 1e-8);
    }

    #[test]
    fn pairing_matches_trace(seed in any::<u64>(), n in 1usize..6, d in 1usize..5) {
        let nu = povm(n, d, seed);
        let psi = hermitian_qrv(n, d, seed ^ 6);
        let rho = DensityMatrix::new(random_density(&mut rng_from_seed(seed ^ 7), d), &tol()).unwrap();
        let direct = rho.matrix().mul(&expectation(&psi, &nu).unwrap()).trace().re;
        prop_assert!((direct - pairing_oracle(&psi, &nu, &rho, &tol()).unwrap()).abs() <= 1e-8);
    }

    #[test]
    fn law_conserves_mass(seed in any::<u64>(), n in 1usize..7, d in 1usize..4) {
        let nu = povm(n, d, seed);
        let mut rng = rng_from_seed(seed ^ 8);
        let pool: Vec<HermitianMatrix> = (0..3).map(|_| random_hermitian(&mut rng, d)).collect();
        let values = (0..n).map(|i| pool[(seed as usize + i * 7) % 3].clone()).collect();
        let psi = QuantumRandomVariable::new(SampleSpace::indexed(n), values).unwrap();
        let m = law(&psi, &nu, 1e-9).unwrap();
        prop_assert!(m.total_mass().dist(&nu.total()) <= 1e-13);
    }

    #[test]
    fn injective_change_of_variables_is_exact(seed in any::<u64>(), n in 1usize..7, d in 1usize..4) {
        let nu = povm(n, d, seed);
        let psi = hermitian_qrv(n, d, seed ^ 9);
        let r = change_of_variables_residual(&psi, &nu, 1e-9, &tol()).unwrap();
        prop_assert!(r.injective);
        prop_assert!(r.residual <= 1e-12);
    }

    #[test]
    fn channel_maps_states_to_states(seed in any::<u64>(), n in 1usize..6, d in 1usize..5) {
        let nu = povm(n, d, seed);
        let rho = random_density(&mut rng_from_seed(seed ^ 10), d);
        let out = qprob::herm::hermitize(&channel_apply(&nu, rho.matrix()).unwrap()).unwrap();
        prop_assert!((out.trace() - 1.0).abs() <= 1e-8);
        prop_assert!(out.min_eigenvalue().unwrap() >= -1e-12);
    }

    #[test]
    fn fixed_points_form_an_algebra(seed in any::<u64>(), n in 1usize..5, d in 1usize..4, commuting in any::<bool>()) {
        let nu = if commuting {
            random_commuting_povm(SampleSpace::indexed(n), d, seed).unwrap()
        } else {
            povm(n, d, seed)
        };
        let basis = fixed_points(&nu, &tol()).unwrap();
        let project = |m: &Matrix| {
            let mut rest = m.clone();
            for b in &basis {
                let c = b.matrix().hs_inner(m);
                rest -= &b.matrix().scale(c);
            }
            rest.frobenius_norm()
        };
        for f in &basis {
            prop_assert!(project(&f.matrix().adjoint()) <= 1e-8);
            for g in &basis {
                prop_assert!(project(&f.mul(g)) <= 1e-8);
            }
        }
    }

    #[test]
    fn boxtimes_with_unit_derivative_is_identity(seed in any::<u64>(), n in 1usize..6, d in 1usize..5) {
        let nu = povm(n, d, seed);
        let psi = hermitian_qrv(n, d, seed ^ 11);
        let ones = QuantumRandomVariable::constant(nu.space().clone(), HermitianMatrix::identity(d));
        let out = boxtimes(&psi, &ones, &RNContext::new(nu, tol())).unwrap();
        for i in 0..n {
            prop_assert!(out.value(i).dist(psi.value(i)) <= 1e-8 * (1.0 + psi.value(i).frobenius_norm()));
        }
    }

    #[test]
    fn residuals_are_permutation_invariant(seed in any::<u64>(), n in 2usize..6, d in 1usize..4) {
        let nu1 = povm(n, d, seed);
        let nu2 = povm(n, d, seed ^ 12);
        let psi = hermitian_qrv(n, d, seed ^ 13);
        let perm: Vec<usize> = (0..n).map(|i| (i + 1 + seed as usize) % n).collect();
        let a = change_of_measure_residual(&psi, &nu2, &nu1, &tol()).unwrap();
        let b = change_of_measure_residual(
            &psi.permuted(&perm).unwrap(),
            &nu2.permuted(&perm, &tol()).unwrap(),
            &nu1.permuted(&perm, &tol()).unwrap(),
            &tol(),
        )
        .unwrap();
        prop_assert!(a <= 1e-8 && b <= 1e-8);
        let phi = rn_derivative(&nu2, &nu1, &tol()).unwrap();
        let phi_p = rn_derivative(&nu2.permuted(&perm, &tol()).unwrap(), &nu1.permuted(&perm, &tol()).unwrap(), &tol()).unwrap();
        for (k, &i) in perm.iter().enumerate() {
            prop_assert!(phi_p.value(k).dist(phi.value(i)) <= 1e-12);
        }
    }

    #[test]
    fn conditional_expectation_is_measurable_with_tower(seed in any::<u64>(), n in 2usize..7, d in 1usize..4) {
        let nu = povm(n, d, seed);
        let psi = psd_qrv(n, d, seed ^ 14);
        let f = random_partition(n, seed, 1 + (seed as usize) % n).unwrap();
        let r = cond_expectation(&psi, &nu, &f, &tol()).unwrap();
        prop_assert!(qprob::qrv::is_measurable(&r.phi, &f, &Tolerances::with_residual(0.0)).unwrap());
        prop_assert!(tower_residual(&r, &psi, &nu).unwrap() <= 1e-8);
    }
}
