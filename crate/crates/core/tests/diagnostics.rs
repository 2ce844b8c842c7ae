use thermoqc_core::constitutive::{build_model, EnergyModel, ModelSpec, Quadratic, State};
use thermoqc_core::diagnostics::{gronwall_fit, perturbed_run, relative_entropy_total, rhs_terms};
use thermoqc_core::fields::Grid;
use thermoqc_core::solver::{manufactured_solution, FlowState, ManufacturedKind, ManufacturedSolution, Reference, Trajectory};
use thermoqc_core::tensor::Mat;

/// `x ↦ reference(t, x - h e₁)`.
struct Shifted<'a> {
    inner: &'a dyn Reference,
    h: f64,
}

impl Reference for Shifted<'_> {
    fn dim(&self) -> usize {
        self.inner.dim()
    }

    fn state(&self, t: f64, x: &[f64]) -> State {
        let mut y = x.to_vec();
        y[0] = (y[0] - self.h).rem_euclid(1.0);
        self.inner.state(t, &y)
    }

    fn time_derivative(&self, t: f64, x: &[f64]) -> Option<(Mat, Vec<f64>, f64)> {
        let mut y = x.to_vec();
        y[0] = (y[0] - self.h).rem_euclid(1.0);
        self.inner.time_derivative(t, &y)
    }
}

fn shift_state(s: &FlowState) -> FlowState {
    let g = s.grid;
    let m = s.ncomp();
    let mut w = vec![0.0; s.w.len()];
    let mut eta = vec![0.0; s.eta.len()];
    for c in 0..g.cells() {
        let src = g.shift(c, 0, -1);
        w[c * m..(c + 1) * m].copy_from_slice(s.cell(src));
        eta[c] = s.eta[src];
    }
    FlowState { grid: g, w, eta }
}

fn fixtures() -> Vec<(EnergyModel, ManufacturedSolution)> {
    let q = Quadratic::model(1, 1.0);
    let wave = manufactured_solution(ManufacturedKind::LinearWave, &q, 0.1, 0.0).unwrap();
    let p = build_model(&ModelSpec::new("powerlaw").with("dim", 1)).unwrap();
    let mms = manufactured_solution(ManufacturedKind::Mms, &p, 0.1, 0.2).unwrap();
    vec![(q, wave), (p, mms)]
}

fn run(m: &EnergyModel, r: &ManufacturedSolution, n: usize, delta: f64, t_end: f64) -> Trajectory {
    perturbed_run(m, r, r.source_fn(), Grid::new(1, n).unwrap(), delta, t_end, 3).unwrap()
}

#[test]
fn relative_entropy_is_nonnegative_for_convex_models() {
    for (m, r) in fixtures() {
        for delta in [0.0, 1e-2, 1e-1] {
            let traj = run(&m, &r, 64, delta, 0.3);
            let s = relative_entropy_total(&m, &traj, &r).unwrap();
            let low = s.i_total.iter().cloned().fold(f64::INFINITY, f64::min);
            assert!(low >= -1e-10, "{} δ={delta}: {low:e}", m.name());
        }
    }
}

#[test]
fn relative_entropy_is_translation_invariant() {
    for (m, r) in fixtures() {
        let traj = run(&m, &r, 64, 5e-2, 0.2);
        let h = traj.states[0].grid.spacing();
        let shifted = Trajectory {
            times: traj.times.clone(),
            states: traj.states.iter().map(shift_state).collect(),
            diagnostics: traj.diagnostics.clone(),
            steps: traj.steps,
        };
        let sr = Shifted { inner: &r, h };
        let a = rhs_terms(&m, &traj, &r, None).unwrap();
        let b = rhs_terms(&m, &shifted, &sr, None).unwrap();
        for (name, x, y) in [
            ("i_total", &a.i_total, &b.i_total),
            ("distance", &a.distance, &b.distance),
            ("rhs_theta", &a.rhs_theta, &b.rhs_theta),
            ("rhs_sigma", &a.rhs_sigma, &b.rhs_sigma),
        ] {
            for (u, v) in x.iter().zip(y.iter()) {
                assert!((u - v).abs() <= 1e-12 * u.abs().max(1e-6), "{} {name}: {u:e} vs {v:e}", m.name());
            }
        }
    }
}

#[test]
fn gronwall_constant_grows_with_the_window() {
    for (m, r) in fixtures() {
        let traj = run(&m, &r, 64, 5e-2, 0.6);
        let s = relative_entropy_total(&m, &traj, &r).unwrap();
        let mut prev = 0.0;
        for t_max in [0.1, 0.2, 0.3, 0.4, 0.5, 0.6] {
            let fit = gronwall_fit(&s.truncated(t_max)).unwrap();
            assert!(fit.c >= prev, "{} t={t_max}: {} < {prev}", m.name(), fit.c);
            prev = fit.c;
        }
    }
}

#[test]
fn exact_reference_has_zero_relative_entropy() {
    for (m, r) in fixtures() {
        let g = Grid::new(1, 32).unwrap();
        let traj = thermoqc_core::diagnostics::reference_trajectory(&m, &r, g, &[0.0, 0.1, 0.2]).unwrap();
        let s = relative_entropy_total(&m, &traj, &r).unwrap();
        assert!(s.sup_i_total().abs() <= 1e-14, "{}: {:e}", m.name(), s.sup_i_total());
    }
}
