use std::f64::consts::PI;

use thermoqc_core::constitutive::{build_model, EnergyModel, ModelSpec, Quadratic, State};
use thermoqc_core::fields::Grid;
use thermoqc_core::sampling::rng;
use thermoqc_core::solver::{
    manufactured_solution, recover_entropy, simulate, step, cfl_bound, FlowState, ManufacturedKind, SolverConfig,
};
use thermoqc_core::symmetrizer::sample_state;
use thermoqc_core::tensor::Mat;

fn max_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

fn wave_fixture(n: usize) -> (EnergyModel, FlowState) {
    let m = Quadratic::model(1, 1.0);
    let w = manufactured_solution(ManufacturedKind::LinearWave, &m, 0.1, 0.0).unwrap();
    let init = w.sample(Grid::new(1, n).unwrap(), 0.0).unwrap();
    (m, init)
}

fn shock_fixture(n: usize) -> (EnergyModel, FlowState) {
    let m = build_model(&ModelSpec::new("powerlaw").with("dim", 1)).unwrap();
    let g = Grid::new(1, n).unwrap();
    let init = FlowState::from_primitive(&m, g, |x| {
        State::new(Mat::from_slice(1, &[1.0 + 0.5 * (2.0 * PI * x[0]).sin()]), vec![0.0], 0.5)
    })
    .unwrap();
    (m, init)
}

#[test]
fn single_steps_conserve_cell_means() {
    for (m, init) in [wave_fixture(64), shock_fixture(64)] {
        let cfg = SolverConfig::new(init.grid, 1.0);
        let mut s = init;
        let mut t = 0.0;
        for _ in 0..20 {
            let dt = cfl_bound(&m, &s, cfg.cfl).unwrap();
            let next = step(&m, &s, t, dt, &cfg).unwrap();
            let drift = max_diff(&s.means(), &next.means());
            assert!(drift <= 1e-13, "{}: {drift:e}", m.name());
            s = next;
            t += dt;
        }
    }
}

#[test]
fn long_runs_conserve_cell_means() {
    let (m, init) = wave_fixture(128);
    let mut cfg = SolverConfig::new(init.grid, 4.0);
    cfg.record_every = 100;
    let traj = simulate(&m, &init, &cfg).unwrap();
    assert!(traj.steps >= 1000, "{} steps", traj.steps);
    let drift = max_diff(&traj.states[0].means(), &traj.last().means());
    assert!(drift <= 1e-10, "{drift:e}");
}

#[test]
fn entropy_recovery_inverts_the_energy() {
    for name in ["quadratic", "powerlaw", "polyconvex", "rank1defective"] {
        let m = build_model(&ModelSpec::new(name)).unwrap();
        let mut r = rng(7);
        for _ in 0..200 {
            let u = sample_state(&m, &mut r);
            let e = 0.5 * u.v.iter().map(|x| x * x).sum::<f64>() + m.energy(&u.f, u.eta).unwrap();
            let eta = recover_entropy(&m, &u.f, &u.v, e).unwrap();
            assert!((eta - u.eta).abs() <= 1e-12 * u.eta.abs().max(1.0), "{name}: {} vs {}", eta, u.eta);
        }
    }
}

#[test]
fn records_advance_and_temperature_stays_positive() {
    for (m, init) in [wave_fixture(128), shock_fixture(128)] {
        let cfg = SolverConfig::new(init.grid, 0.5);
        let traj = simulate(&m, &init, &cfg).unwrap();
        assert!(traj.times.windows(2).all(|w| w[1] > w[0]), "{}", m.name());
        assert_eq!(*traj.times.last().unwrap(), 0.5);
        assert!(traj.diagnostics.iter().all(|d| d.min_theta > 0.0), "{}", m.name());
    }
}

#[test]
fn gradient_structure_persists_in_two_dimensions() {
    let m = Quadratic::model(2, 1.0);
    let g = Grid::new(2, 32).unwrap();
    let a = 0.05 * 2.0 * PI;
    let init = FlowState::from_primitive(&m, g, |x| {
        let (p, q) = (2.0 * PI * x[0], 2.0 * PI * x[1]);
        let f = Mat::from_slice(2, &[1.0 + a * p.cos() * q.cos(), -a * p.sin() * q.sin(), 0.0, 1.0]);
        State::new(f, vec![0.1 * p.sin(), 0.0], 0.0)
    })
    .unwrap();
    let mut cfg = SolverConfig::new(g, 0.5);
    cfg.record_every = 10;
    let traj = simulate(&m, &init, &cfg).unwrap();
    let worst = traj.diagnostics.iter().map(|d| d.curl_residual).fold(0.0, f64::max);
    assert!(worst <= 1e-10, "{worst:e}");
}

#[test]
fn oversized_steps_are_rejected() {
    let (m, init) = wave_fixture(32);
    let cfg = SolverConfig::new(init.grid, 1.0);
    let dt = cfl_bound(&m, &init, cfg.cfl).unwrap();
    assert!(step(&m, &init, 0.0, 2.0 * dt, &cfg).is_err());
}
