use proptest::prelude::*;
use thermoqc_core::constitutive::{build_model, EnergyModel, ModelSpec, PowerLawCoupled, Quadratic, State};
use thermoqc_core::sampling::rng;
use thermoqc_core::symmetrizer::sample_state;
use thermoqc_core::tensor::Mat;

const CATALOGUE: [&str; 4] = ["quadratic", "powerlaw", "polyconvex", "rank1defective"];

fn models() -> Vec<EnergyModel> {
    CATALOGUE.iter().map(|n| build_model(&ModelSpec::new(n)).unwrap()).collect()
}

fn random_state(m: &EnergyModel, seed: u64) -> State {
    sample_state(m, &mut rng(seed))
}

#[test]
fn derivatives_match_central_differences() {
    for m in models() {
        for seed in 0..100 {
            let u = random_state(&m, seed);
            let err = m.finite_difference_error(&u.f, u.eta, 1e-5).unwrap();
            assert!(err <= 1e-6, "{} seed {seed}: {err:e}", m.name());
        }
    }
}

#[test]
fn hessian_block_is_symmetric() {
    for m in models() {
        for seed in 0..50 {
            let u = random_state(&m, seed);
            let h = m.hessian(&u.f, u.eta).unwrap();
            let k = m.dim() * m.dim();
            for r in 0..k {
                for c in 0..k {
                    assert!((h.ff_at(r, c) - h.ff_at(c, r)).abs() <= 1e-10, "{}", m.name());
                }
            }
        }
    }
}

#[test]
fn temperature_is_positive_on_the_admissible_region() {
    for m in models() {
        let mut r = rng(7);
        use rand::Rng;
        let d = m.dim();
        let lo = if m.eta_min().is_finite() { m.eta_min() } else { -3.0 };
        let mut tested = 0;
        for _ in 0..2000 {
            let f = Mat::from_slice(d, &(0..d * d).map(|_| r.gen_range(-2.0..2.0)).collect::<Vec<_>>());
            let eta = lo + r.gen_range(1e-6..4.0);
            if m.is_admissible(&f, eta) {
                tested += 1;
                assert!(m.temperature(&f, eta).unwrap() > 0.0, "{} at eta {eta}", m.name());
            }
        }
        assert!(tested > 100, "{}", m.name());
    }
}

#[test]
fn catalogue_closed_forms() {
    let pl = PowerLawCoupled::model(2, 4.0, 3.0, 0.2, 1.0, 5.0).unwrap();
    let f = Mat::from_slice(2, &[1.1, 0.2, -0.3, 0.9]);
    let eta = 0.4;
    let expected = 0.25 * (1.0 + f.norm_sq()).powf(2.0) + (1.0f64 + eta * eta).powf(1.5) / 3.0 + 1.0 * eta + 0.2 * f.trace() * eta;
    assert!((pl.energy(&f, eta).unwrap() - expected).abs() <= 1e-12);
    let q = Quadratic::model(2, 1.0);
    assert!((q.energy(&f, eta).unwrap() - (0.5 * f.norm_sq() + 0.5 * eta * eta + eta)).abs() <= 1e-12);
    let r1 = build_model(&ModelSpec::new("rank1defective").with("beta", 2.0)).unwrap();
    let an = Mat::outer(&[1.0, 0.0], &[0.0, 1.0]);
    let qe = q.energy(&f, eta).unwrap() - f.dot(&an).powi(2);
    assert!((r1.energy(&f, eta).unwrap() - qe).abs() <= 1e-12);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn relative_quantities_vanish_on_the_diagonal(seed in 0u64..10_000, which in 0usize..4) {
        let m = &models()[which];
        let u = random_state(m, seed);
        prop_assert_eq!(m.relative_energy(&u.f, u.eta, &u.f, u.eta).unwrap(), 0.0);
        prop_assert_eq!(m.relative_temperature(&u.f, u.eta, &u.f, u.eta).unwrap(), 0.0);
        prop_assert!(m.relative_stress(&u.f, u.eta, &u.f, u.eta).unwrap().max_abs() == 0.0);
        prop_assert_eq!(m.relative_entropy_density(&u, &u).unwrap(), 0.0);
    }

    #[test]
    fn quadratic_relative_energy_is_the_squared_distance(a in prop::collection::vec(-3.0f64..3.0, 4), b in prop::collection::vec(-3.0f64..3.0, 4), e1 in -0.9f64..3.0, e2 in -0.9f64..3.0) {
        let q = Quadratic::model(2, 1.0);
        let (f, fb) = (Mat::from_slice(2, &a), Mat::from_slice(2, &b));
        let mut diff = f;
        for (x, y) in diff.as_mut_slice().iter_mut().zip(fb.as_slice()) {
            *x -= y;
        }
        let rel = q.relative_energy(&f, e1, &fb, e2).unwrap();
        prop_assert!(rel >= 0.0);
        prop_assert!((rel - 0.5 * diff.norm_sq() - 0.5 * (e1 - e2).powi(2)).abs() <= 1e-12);
    }

    #[test]
    fn relative_energy_is_second_order(seed in 0u64..10_000, which in 0usize..4, dir in prop::collection::vec(-1.0f64..1.0, 5)) {
        let m = &models()[which];
        let u = random_state(m, seed);
        let d = m.dim();
        let xi = Mat::from_slice(d, &dir[..d * d]);
        let s = dir[4];
        let h = m.hessian(&u.f, u.eta).unwrap();
        let half_l = 0.5 * h.quad(&xi, s);
        let scale = xi.norm_sq() + s * s;
        prop_assume!(half_l.abs() >= 0.05 * scale);
        for t in [1e-2, 1e-3] {
            let mut f = u.f;
            for (x, y) in f.as_mut_slice().iter_mut().zip(xi.as_slice()) {
                *x += t * y;
            }
            let q = m.relative_energy(&f, u.eta + t * s, &u.f, u.eta).unwrap() / (t * t);
            prop_assert!((q / half_l - 1.0).abs() <= 0.05, "{} t={t}: {q} vs {half_l}", m.name());
        }
    }
}
