use proptest::prelude::*;
use thermoqc_core::constitutive::{build_model, EnergyModel, ModelSpec};
use thermoqc_core::sampling::rng;
use thermoqc_core::symmetrizer::{check_symmetrizability, eigenvalues, flux_jacobian, sample_state, symmetrizer_matrix, SymmetrizerMode};

const CATALOGUE: [&str; 4] = ["quadratic", "powerlaw", "polyconvex", "rank1defective"];

fn model(i: usize) -> EnergyModel {
    build_model(&ModelSpec::new(CATALOGUE[i])).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn matrix_is_the_scaled_hessian(seed in 0u64..10_000, which in 0usize..4) {
        let m = model(which);
        let u = sample_state(&m, &mut rng(seed));
        let s = symmetrizer_matrix(&m, &u.f, u.eta).unwrap();
        let h = m.hessian(&u.f, u.eta).unwrap();
        let inv = 1.0 / m.temperature(&u.f, u.eta).unwrap();
        let d = m.dim();
        let k = d * d;
        prop_assert_eq!(s.size, k + d + 1);
        for i in 0..s.size {
            for j in 0..s.size {
                prop_assert!((s.at(i, j) - s.at(j, i)).abs() <= 1e-10);
                let expect = match (i < k, j < k, i >= k && i < k + d, j >= k && j < k + d) {
                    (true, true, _, _) => h.ff_at(i, j),
                    (_, _, true, true) => if i == j { 1.0 } else { 0.0 },
                    (_, _, true, _) | (_, _, _, true) => 0.0,
                    (true, false, _, _) => h.f_eta.as_slice()[i],
                    (false, true, _, _) => h.f_eta.as_slice()[j],
                    _ => h.eta_eta,
                } * inv;
                prop_assert_eq!(s.at(i, j), expect);
            }
        }
    }

    #[test]
    fn full_positivity_implies_cone_positivity(seed in 0u64..10_000, which in 0usize..4) {
        let m = model(which);
        let u = sample_state(&m, &mut rng(seed));
        let r = check_symmetrizability(&m, &u, SymmetrizerMode::WaveCone, 128, seed).unwrap();
        prop_assert!(r.min_quotient_cone >= r.min_eig_full - 1e-8);
    }

    #[test]
    fn symmetrizable_states_have_real_speeds(seed in 0u64..10_000, which in 0usize..3, ang in 0.0f64..6.3) {
        let m = model(which);
        let u = sample_state(&m, &mut rng(seed));
        let r = check_symmetrizability(&m, &u, SymmetrizerMode::Full, 64, seed).unwrap();
        prop_assume!(r.min_eig_full > 1e-6);
        let jac = flux_jacobian(&m, &u, &[ang.cos(), ang.sin()]).unwrap();
        for (_, im) in eigenvalues(&jac) {
            prop_assert!(im.abs() <= 1e-7);
        }
    }
}
