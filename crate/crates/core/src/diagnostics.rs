//! Relative-entropy functionals between a numerical trajectory and a
//! classical reference, the right-hand-side channels of the relative entropy
//! inequality, Grönwall fitting and the weak-strong experiment.
//!
//! The trajectory stands in for a measure-valued solution with Dirac Young
//! measure at the numerical state and no concentration.

use rayon::prelude::*;

use crate::constitutive::{EnergyModel, State};
use crate::error::{Error, Result};
use crate::fields::{recover_potential, v_aux_sq, Grid, GridField, Rank};
use crate::sampling::{random_unit, substream};
use crate::solver::{
    manufactured_solution, simulate, FlowState, ManufacturedKind, Reference, SolverConfig, SpaceTimeScalar, Trajectory,
};
use crate::tensor::Mat;

#[derive(Clone, Debug, Default, PartialEq)]
pub struct RelEntropySeries {
    pub times: Vec<f64>,
    /// `∫ ½|v - v̄|² + e(F, η | F̄, η̄)`.
    pub i_total: Vec<f64>,
    /// `∫ |V_p(y - ȳ)|²`.
    pub lower_order: Vec<f64>,
    /// `∫ |V_p(F - F̄)|² + |V_q(η - η̄)|²`.
    pub distance: Vec<f64>,
    /// `∫ ∂tη̄ θ(F, η | F̄, η̄)`.
    pub rhs_theta: Vec<f64>,
    /// `∫ ∂tF̄ : Σ(F, η | F̄, η̄)`.
    pub rhs_sigma: Vec<f64>,
    /// `∫ (θ - θ̄)(r/θ - r̄/θ̄)` with `r = r̄`.
    pub rhs_heat: Vec<f64>,
}

impl RelEntropySeries {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn sup_i_total(&self) -> f64 {
        self.i_total.iter().fold(f64::NEG_INFINITY, |m, &x| m.max(x))
    }

    /// Keep records with `t <= t_max`.
    pub fn truncated(&self, t_max: f64) -> RelEntropySeries {
        let k = self.times.iter().take_while(|&&t| t <= t_max).count();
        let cut = |v: &Vec<f64>| v.iter().take(k).copied().collect::<Vec<_>>();
        RelEntropySeries {
            times: cut(&self.times),
            i_total: cut(&self.i_total),
            lower_order: cut(&self.lower_order),
            distance: cut(&self.distance),
            rhs_theta: cut(&self.rhs_theta),
            rhs_sigma: cut(&self.rhs_sigma),
            rhs_heat: cut(&self.rhs_heat),
        }
    }
}

/// Sample a reference at the given times on `grid`, as a trajectory.
pub fn reference_trajectory(model: &EnergyModel, reference: &dyn Reference, grid: Grid, times: &[f64]) -> Result<Trajectory> {
    let states = times
        .iter()
        .map(|&t| FlowState::from_primitive(model, grid, |x| reference.state(t, x)))
        .collect::<Result<Vec<_>>>()?;
    Ok(Trajectory { times: times.to_vec(), states, diagnostics: Vec::new(), steps: 0 })
}

struct Slice {
    i_total: f64,
    lower: f64,
    distance: f64,
    theta: f64,
    sigma: f64,
    heat: f64,
}

fn evaluate(
    model: &EnergyModel,
    s: &FlowState,
    t: f64,
    reference: &dyn Reference,
    with_rhs: bool,
    r: Option<&SpaceTimeScalar>,
) -> Result<Slice> {
    let grid = s.grid;
    let d = grid.dim();
    if reference.dim() != d || model.dim() != d {
        return Err(Error::GridMismatch("trajectory, reference and model dimensions differ".into()));
    }
    let (p, q) = model.growth();
    let cells = grid.cells();
    let per_cell: Vec<Result<([f64; 6], Mat)>> = (0..cells)
        .into_par_iter()
        .map(|c| {
            let x = grid.center(c);
            let x = &x[..d];
            let u = s.state_at(c);
            let ub = reference.state(t, x);
            let rel = model.relative_entropy_density(&u, &ub)?;
            let df = u.f - ub.f;
            let dist = v_aux_sq(&df.as_slice()[..d * d], p) + v_aux_sq(&[u.eta - ub.eta], q);
            let mut out = [rel, dist, 0.0, 0.0, 0.0, 0.0];
            if with_rhs {
                let (dtf, _, dteta) = reference.time_derivative(t, x).ok_or_else(|| {
                    Error::InvalidParameter("reference lacks time derivatives".into())
                })?;
                out[2] = dteta * model.relative_temperature(&u.f, u.eta, &ub.f, ub.eta)?;
                out[3] = dtf.dot(&model.relative_stress(&u.f, u.eta, &ub.f, ub.eta)?);
                if let Some(r) = r {
                    let th = model.temperature(&u.f, u.eta)?;
                    let thb = model.temperature(&ub.f, ub.eta)?;
                    let rv = r(t, x);
                    out[4] = (th - thb) * (rv / th - rv / thb);
                }
            }
            Ok((out, df))
        })
        .collect();
    let mut acc = [0.0; 6];
    let mut diff = Vec::with_capacity(cells * d * d);
    for c in per_cell {
        let (v, df) = c?;
        for k in 0..6 {
            acc[k] += v[k];
        }
        diff.extend_from_slice(&df.as_slice()[..d * d]);
    }
    let n = cells as f64;
    let y = recover_potential(&GridField::from_data(grid, Rank::Matrix, diff)?)?;
    let lower = (0..cells).map(|c| v_aux_sq(y.cell(c), p)).sum::<f64>() / n;
    Ok(Slice {
        i_total: acc[0] / n,
        lower,
        distance: acc[1] / n,
        theta: acc[2] / n,
        sigma: acc[3] / n,
        heat: acc[4] / n,
    })
}

fn series(
    model: &EnergyModel,
    traj: &Trajectory,
    reference: &dyn Reference,
    with_rhs: bool,
    r: Option<&SpaceTimeScalar>,
) -> Result<RelEntropySeries> {
    let mut out = RelEntropySeries::default();
    for (s, &t) in traj.states.iter().zip(&traj.times) {
        let sl = evaluate(model, s, t, reference, with_rhs, r)?;
        out.times.push(t);
        out.i_total.push(sl.i_total);
        out.lower_order.push(sl.lower);
        out.distance.push(sl.distance);
        out.rhs_theta.push(sl.theta);
        out.rhs_sigma.push(sl.sigma);
        out.rhs_heat.push(sl.heat);
    }
    Ok(out)
}

/// `I_total`, the lower-order term and the V-weighted distance along `traj`.
pub fn relative_entropy_total(model: &EnergyModel, traj: &Trajectory, reference: &dyn Reference) -> Result<RelEntropySeries> {
    series(model, traj, reference, false, None)
}

/// As [`relative_entropy_total`] plus the three right-hand-side channels.
pub fn rhs_terms(model: &EnergyModel, traj: &Trajectory, reference: &dyn Reference, r: Option<&SpaceTimeScalar>) -> Result<RelEntropySeries> {
    series(model, traj, reference, true, r)
}

#[derive(Clone, Debug, PartialEq)]
pub struct GronwallFit {
    pub c: f64,
    pub feasible: bool,
    pub atol: f64,
}

/// Cap on the Grönwall constant; larger values are reported infeasible.
pub const GRONWALL_C_MAX: f64 = 1e6;

/// Smallest `C` with `I(t) + L(t) <= I(0) + L(0) + atol + C ∫₀ᵗ (D + L)`,
/// `atol = 1e-12 + floor`, checked at every record.
pub fn gronwall_fit(series: &RelEntropySeries) -> Result<GronwallFit> {
    gronwall_fit_with(series, 0.0, None)
}

/// As [`gronwall_fit`], with a discretization floor added to `atol` and the
/// inequality enforced only at records falling on multiples of `checkpoint`
/// (the integral still uses every record). The constraint is linear in `C`,
/// so the smallest feasible value is a maximum of ratios.
pub fn gronwall_fit_with(series: &RelEntropySeries, floor: f64, checkpoint: Option<f64>) -> Result<GronwallFit> {
    if series.is_empty() {
        return Err(Error::InvalidParameter("empty series".into()));
    }
    let atol = 1e-12 + floor.max(0.0);
    let base = series.i_total[0] + series.lower_order[0] + atol;
    let mut c = 0.0_f64;
    let mut feasible = true;
    let mut integral = 0.0;
    for k in 1..series.len() {
        let dt = series.times[k] - series.times[k - 1];
        let g0 = series.distance[k - 1] + series.lower_order[k - 1];
        let g1 = series.distance[k] + series.lower_order[k];
        integral += 0.5 * dt * (g0 + g1);
        if let Some(h) = checkpoint {
            let r = series.times[k] / h;
            if (r - r.round()).abs() > 1e-9 * r.max(1.0) {
                continue;
            }
        }
        let excess = series.i_total[k] + series.lower_order[k] - base;
        if excess > 0.0 {
            if integral > 0.0 {
                c = c.max(excess / integral);
            } else {
                feasible = false;
            }
        }
    }
    if c > GRONWALL_C_MAX {
        feasible = false;
    }
    Ok(GronwallFit { c, feasible, atol })
}

/// Spacing of the physical times at which the weak-strong experiment
/// enforces the Grönwall inequality.
pub const GRONWALL_CHECKPOINT: f64 = 0.05;

#[derive(Clone, Debug)]
pub struct WeakStrongRun {
    pub delta: f64,
    pub n: usize,
    pub series: RelEntropySeries,
    pub i0: f64,
    pub sup_i: f64,
    pub fit: GronwallFit,
}

#[derive(Clone, Debug)]
pub struct WeakStrongReport {
    pub runs: Vec<WeakStrongRun>,
    /// `sup_t I_total` for `δ = 0` per mesh, in mesh order.
    pub unperturbed_sup: Vec<(usize, f64)>,
    /// Log-log slope of `I_total(0)` against `δ` on the coarsest mesh.
    pub delta_exponent: Option<f64>,
    /// Growth rate `Ĉ` with `K = 1`, fitted per `δ > 0` on the coarsest mesh.
    pub growth_fit: Vec<(f64, f64)>,
    /// Worst ratio `I(t) / (e^{Ĉt} I(0))` on the finer meshes.
    pub validation_ratio: f64,
    /// Spread `max C / min C - 1` of the Grönwall constants across meshes,
    /// per `δ > 0`.
    pub c_spread: Vec<(f64, f64)>,
}

impl WeakStrongReport {
    pub fn uniqueness_holds(&self, tol: f64) -> bool {
        let finest = self.unperturbed_sup.last().map_or(f64::INFINITY, |x| x.1);
        let decreasing = self.unperturbed_sup.windows(2).all(|w| w[1].1 <= w[0].1);
        finest <= tol && decreasing
    }
}

/// Solver run of `reference` perturbed by a constant velocity of size
/// `delta` in a seeded direction.
pub fn perturbed_run(
    model: &EnergyModel,
    reference: &dyn Reference,
    source: Option<crate::solver::SpaceTimeSource>,
    grid: Grid,
    delta: f64,
    t_end: f64,
    seed: u64,
) -> Result<Trajectory> {
    let d = grid.dim();
    let dir = random_unit(&mut substream(seed, 0xDE17A), d);
    let init = FlowState::from_primitive(model, grid, |x| {
        let mut u: State = reference.state(0.0, x);
        for i in 0..d {
            u.v[i] += delta * dir[i];
        }
        u
    })?;
    let mut cfg = SolverConfig::new(grid, t_end);
    cfg.extra_source = source;
    cfg.record_interval = Some(GRONWALL_CHECKPOINT);
    simulate(model, &init, &cfg)
}

pub fn weak_strong_experiment(
    model: &EnergyModel,
    ref_kind: ManufacturedKind,
    delta_list: &[f64],
    mesh_list: &[usize],
    t_end: f64,
    seed: u64,
) -> Result<WeakStrongReport> {
    if delta_list.is_empty() || mesh_list.is_empty() {
        return Err(Error::InvalidParameter("empty delta or mesh list".into()));
    }
    let reference = manufactured_solution(ref_kind, model, 0.1, 0.1)?;
    let d = model.dim();
    let jobs: Vec<(f64, usize)> = delta_list.iter().flat_map(|&dl| mesh_list.iter().map(move |&n| (dl, n))).collect();
    let runs: Vec<WeakStrongRun> = jobs
        .par_iter()
        .map(|&(delta, n)| {
            let grid = Grid::new(d, n)?;
            let traj = perturbed_run(model, &reference, reference.source_fn(), grid, delta, t_end, seed)?;
            let series = relative_entropy_total(model, &traj, &reference)?;
            let fit = gronwall_fit_with(&series, 0.0, Some(GRONWALL_CHECKPOINT))?;
            Ok(WeakStrongRun { delta, n, i0: series.i_total[0], sup_i: series.sup_i_total(), fit, series })
        })
        .collect::<Result<Vec<_>>>()?;

    let unperturbed_sup: Vec<(usize, f64)> =
        runs.iter().filter(|r| r.delta == 0.0).map(|r| (r.n, r.sup_i)).collect();

    let coarse = mesh_list[0];
    let pts: Vec<(f64, f64)> = runs
        .iter()
        .filter(|r| r.n == coarse && r.delta > 0.0 && r.i0 > 0.0)
        .map(|r| (r.delta.ln(), r.i0.ln()))
        .collect();
    let delta_exponent = (pts.len() >= 2).then(|| least_squares_slope(&pts));

    let mut growth_fit = Vec::new();
    let mut validation_ratio = 0.0_f64;
    let mut c_spread = Vec::new();
    for &delta in delta_list.iter().filter(|&&x| x > 0.0) {
        let members: Vec<&WeakStrongRun> = runs.iter().filter(|r| r.delta == delta).collect();
        let Some(base) = members.iter().find(|r| r.n == coarse) else { continue };
        let s = &base.series;
        let mut rate = 0.0_f64;
        for k in 1..s.len() {
            if s.times[k] > 0.0 && s.i_total[k] > 0.0 && s.i_total[0] > 0.0 {
                rate = rate.max((s.i_total[k] / s.i_total[0]).ln() / s.times[k]);
            }
        }
        growth_fit.push((delta, rate));
        for m in members.iter().filter(|r| r.n != coarse) {
            let s = &m.series;
            for k in 0..s.len() {
                let bound = (rate * s.times[k]).exp() * s.i_total[0];
                if bound > 0.0 {
                    validation_ratio = validation_ratio.max(s.i_total[k] / bound);
                }
            }
        }
        let cs: Vec<f64> = members.iter().map(|r| r.fit.c).collect();
        let (lo, hi) = cs.iter().fold((f64::INFINITY, 0.0_f64), |(a, b), &c| (a.min(c), b.max(c)));
        c_spread.push((delta, if lo > 0.0 { hi / lo - 1.0 } else { f64::INFINITY }));
    }
    Ok(WeakStrongReport { runs, unperturbed_sup, delta_exponent, growth_fit, validation_ratio, c_spread })
}

/// Slope of the least-squares line through `pts`.
pub fn least_squares_slope(pts: &[(f64, f64)]) -> f64 {
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx) * (p.0 - mx)).sum();
    sxy / sxx
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::constitutive::Quadratic;

    #[test]
    fn reference_against_itself_is_zero() {
        let m = Quadratic::model(1, 1.0);
        let w = manufactured_solution(ManufacturedKind::LinearWave, &m, 0.1, 0.0).unwrap();
        let g = Grid::new(1, 32).unwrap();
        let tr = reference_trajectory(&m, &w, g, &[0.0, 0.1, 0.2]).unwrap();
        let s = rhs_terms(&m, &tr, &w, None).unwrap();
        for k in 0..3 {
            assert!(s.i_total[k].abs() < 1e-12 && s.rhs_theta[k].abs() < 1e-12 && s.rhs_sigma[k].abs() < 1e-12);
        }
        let fit = gronwall_fit(&s).unwrap();
        assert_eq!(fit.c, 0.0);
        assert!(fit.feasible);
    }
}
