use proptest::prelude::*;
use thermoqc_core::constitutive::{
    appendix_a_check, aux_energy, build_model, tilde_energy, AuditOptions, EnergyDensity, EnergyModel, HessianBlock, ModelSpec, Quadratic,
};
use thermoqc_core::fields::{make_grid, BoundaryMode, Grid, GridField, Rank, TestField};
use thermoqc_core::quasiconvexity::{
    delocalized_hessian_check, minimize_qc_quotient, qc_quotient, small_cube_radius_probe, BackgroundField, QcOptions, QcStatus,
};
use thermoqc_core::tensor::Mat;

fn smooth_field(grid: Grid, c: &[f64]) -> TestField {
    let tp = 2.0 * std::f64::consts::PI;
    let phi = GridField::from_fn(grid, Rank::Vector, |x, o| {
        o[0] = c[0] * (tp * x[0]).sin() + c[1] * (tp * (x[0] + x[1])).cos();
        o[1] = c[2] * (tp * 2.0 * x[1]).sin() + c[3] * (tp * (x[0] - x[1])).sin();
    });
    let psi = GridField::scalar_from_fn(grid, |x| c[4] * (tp * x[1]).cos() + c[5] * (tp * x[0]).sin());
    TestField::new(phi, psi, BoundaryMode::Periodic).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn quotient_ignores_constant_shifts_of_phi(c in prop::collection::vec(-0.2f64..0.2, 6), shift in -5.0f64..5.0, which in 0usize..4) {
        let names = ["quadratic", "powerlaw", "polyconvex", "rank1defective"];
        let m = build_model(&ModelSpec::new(names[which])).unwrap();
        let g = make_grid(2, 16).unwrap();
        let tf = smooth_field(g, &c);
        prop_assume!(!tf.is_zero());
        let base = Mat::identity(2);
        let q = qc_quotient(&m, &base, 0.5, &tf).unwrap();
        let mut moved = tf.clone();
        moved.phi.data_mut().iter_mut().for_each(|v| *v += shift);
        let q2 = qc_quotient(&m, &base, 0.5, &moved).unwrap();
        prop_assert!((q - q2).abs() <= 1e-12);
    }

    #[test]
    fn quadratic_quotient_is_even(c in prop::collection::vec(-1.0f64..1.0, 6)) {
        let q = Quadratic::model(2, 1.0);
        let g = make_grid(2, 16).unwrap();
        let tf = smooth_field(g, &c);
        prop_assume!(!tf.is_zero());
        let mut neg = tf.clone();
        neg.scale(-1.0);
        let a = qc_quotient(&q, &Mat::identity(2), 3.0, &tf).unwrap();
        let b = qc_quotient(&q, &Mat::identity(2), 3.0, &neg).unwrap();
        prop_assert!((a - b).abs() <= 1e-12);
    }
}

#[test]
fn trivial_field_is_rejected() {
    let q = Quadratic::model(2, 1.0);
    let g = make_grid(2, 8).unwrap();
    assert!(qc_quotient(&q, &Mat::identity(2), 0.5, &TestField::zeros(g, BoundaryMode::Periodic)).is_err());
}

#[test]
fn minimization_is_reproducible() {
    let m = build_model(&ModelSpec::new("rank1defective").with("beta", 0.8)).unwrap();
    let mut opts = QcOptions::new(make_grid(2, 32).unwrap());
    opts.seed = 5;
    opts.iters = 10;
    let a = minimize_qc_quotient(&m, &Mat::identity(2), 0.5, &opts).unwrap();
    let b = minimize_qc_quotient(&m, &Mat::identity(2), 0.5, &opts).unwrap();
    assert_eq!(a.status, b.status);
    assert_eq!(a.c0_estimate.to_bits(), b.c0_estimate.to_bits());
    assert_eq!(a.witness, b.witness);
    assert_eq!(a.replay(&m).unwrap().to_bits(), a.c0_estimate.to_bits());
}

#[test]
fn estimate_is_stable_under_refinement() {
    let q = Quadratic::model(2, 1.0);
    let mut est = Vec::new();
    for n in [64, 128] {
        let mut opts = QcOptions::new(make_grid(2, n).unwrap());
        opts.iters = 20;
        est.push(minimize_qc_quotient(&q, &Mat::identity(2), 0.5, &opts).unwrap().c0_estimate);
    }
    assert!((est[0] - est[1]).abs() <= 5e-3, "{est:?}");
}

#[test]
fn modified_energy_keeps_half_the_constant() {
    let q = Quadratic::model(2, 1.0);
    let c0 = 0.25;
    let growth = appendix_a_check(&aux_energy(2, 2.0, 2.0), &AuditOptions::default()).growth_bound.constant;
    let c = c0 / (2.0 * growth);
    let tilde = tilde_energy(&q, c, c).unwrap();
    let r = minimize_qc_quotient(&tilde, &Mat::identity(2), 0.5, &QcOptions::new(make_grid(2, 32).unwrap())).unwrap();
    assert!(r.c0_estimate >= c0 / 2.0 - 2e-2, "{} with c1=c2={c}", r.c0_estimate);
    assert_eq!(r.status, QcStatus::CertifiedPositive);
}

/// `½|F|² - (b(η)/2) F₁₂² + ½η² + αη` with `b = b0 + b1 η`: convex where
/// `b < 1`, softening in the `F₁₂` direction as `η` grows.
#[derive(Debug)]
struct Softening {
    b0: f64,
    b1: f64,
    alpha: f64,
}

impl EnergyDensity for Softening {
    fn name(&self) -> String {
        "softening".into()
    }
    fn dim(&self) -> usize {
        2
    }
    fn growth(&self) -> (f64, f64) {
        (2.0, 2.0)
    }
    fn energy(&self, f: &Mat, eta: f64) -> f64 {
        let s = f.get(0, 1);
        0.5 * f.norm_sq() - 0.5 * (self.b0 + self.b1 * eta) * s * s + 0.5 * eta * eta + self.alpha * eta
    }
    fn stress(&self, f: &Mat, eta: f64) -> Mat {
        let mut m = *f;
        m.set(0, 1, f.get(0, 1) * (1.0 - self.b0 - self.b1 * eta));
        m
    }
    fn temperature(&self, f: &Mat, eta: f64) -> f64 {
        let s = f.get(0, 1);
        eta + self.alpha - 0.5 * self.b1 * s * s
    }
    fn hessian(&self, f: &Mat, eta: f64) -> HessianBlock {
        let mut h = HessianBlock::zeros(2);
        for r in 0..4 {
            h.ff[r * 4 + r] = 1.0;
        }
        h.ff[4 + 1] = 1.0 - self.b0 - self.b1 * eta;
        h.f_eta.set(0, 1, -self.b1 * f.get(0, 1));
        h.eta_eta = 1.0;
        h
    }
}

#[test]
fn small_cubes_localize_the_constant() {
    let g = make_grid(2, 64).unwrap();
    let x0 = g.linear_index(&[32, 32]);
    let q = Quadratic::model(2, 1.0);
    let bg = BackgroundField::oscillatory(g, &Mat::identity(2), &Mat::identity(2), 0.5, 0.2, 1.0).unwrap();
    let r = small_cube_radius_probe(&q, &bg, x0, &[0.8, 0.4, 0.2], 8, 1, None).unwrap();
    assert_eq!(r.largest_ok, Some(0.8));

    // entropy is zero at x0 and reaches 3 away from it, where the F₁₂ stiffness turns negative
    let soft = EnergyModel::new(Softening { b0: 0.0, b1: 1.0, alpha: 5.0 });
    let eb = GridField::scalar_from_fn(g, |x| {
        let r2 = (x[0] - 0.5f64).powi(2) + (x[1] - 0.5f64).powi(2);
        3.0 * (r2 / 0.1).min(1.0)
    });
    let bg = BackgroundField::from_fields(GridField::zeros(g, Rank::Matrix), eb).unwrap();
    let r = small_cube_radius_probe(&soft, &bg, x0, &[0.8, 0.4, 0.2], 8, 1, None).unwrap();
    assert!(r.radii[0].violated, "{:?}", r.radii);
    assert!(!r.radii[2].violated, "{:?}", r.radii);
    assert_eq!(r.largest_ok, Some(0.2));
    assert!(r.witness.is_some());
}

#[test]
fn penalty_grows_with_background_oscillation() {
    let g = make_grid(2, 32).unwrap();
    let ladder: Vec<f64> = (0..=40).map(|i| if i == 0 { 0.0 } else { 1e-2 * 1.3f64.powi(i) }).collect();
    let pl = build_model(&ModelSpec::new("powerlaw")).unwrap();
    let pc = build_model(&ModelSpec::new("polyconvex").with("gamma", 3.0)).unwrap();
    let (mut weak, mut strict) = (Vec::new(), Vec::new());
    for k in [1.0, 2.0, 3.0] {
        let bg = BackgroundField::oscillatory(g, &Mat::identity(2), &Mat::identity(2), 0.5, 0.2, k).unwrap();
        weak.push(delocalized_hessian_check(&pl, &bg, &ladder, 16, 1).unwrap());
        let bg = BackgroundField::oscillatory(g, &Mat::zeros(2), &Mat::identity(2), 0.0, 0.6, k).unwrap();
        strict.push(delocalized_hessian_check(&pc, &bg, &ladder, 16, 1).unwrap());
    }
    assert!(weak.iter().all(|r| r.c_star == 0.0 && r.smallest_feasible == Some(0.0)));
    for w in strict.windows(2) {
        assert!(w[1].c_star > w[0].c_star, "{} {}", w[0].c_star, w[1].c_star);
        assert!(w[1].smallest_feasible.unwrap() >= w[0].smallest_feasible.unwrap());
    }
}
