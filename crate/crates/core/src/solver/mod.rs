//! Periodic finite-volume solver for the thermoelastic system in the
//! conservative variables `(F, v, E)`: local Lax-Friedrichs fluxes, SSP-RK2
//! time stepping, entropy recovered cellwise after every stage.

mod manufactured;
mod recovery;

use std::fmt;
use std::sync::Arc;

use rayon::prelude::*;

pub use manufactured::{manufactured_solution, ManufacturedKind, ManufacturedSolution, Reference};
pub use recovery::{recover_entropy, recover_entropy_from};

use crate::constitutive::{EnergyModel, State};
use crate::error::{Error, Result};
use crate::fields::{curl_residual as spectral_curl_residual, Grid, GridField, Rank};
use crate::symmetrizer::{acoustic_speed, WAVE_SPEED_SAFETY};
use crate::tensor::Mat;

/// Scalar field of `(t, x)`.
pub type SpaceTimeScalar = Arc<dyn Fn(f64, &[f64]) -> f64 + Send + Sync>;
/// Per-equation source `(t, x, out)`; `out` has one slot per conserved component.
pub type SpaceTimeSource = Arc<dyn Fn(f64, &[f64], &mut [f64]) + Send + Sync>;

#[derive(Clone)]
pub struct SolverConfig {
    pub grid: Grid,
    pub cfl: f64,
    pub t_end: f64,
    pub viscosity_eps: f64,
    /// Radiative supply `r(t, x)` entering the energy equation.
    pub source_r: Option<SpaceTimeScalar>,
    /// Verification-only source added to every equation.
    pub extra_source: Option<SpaceTimeSource>,
    /// Record every this many steps (the final time is always recorded).
    pub record_every: usize,
    /// If set, steps are shortened so that the multiples of this interval
    /// are hit exactly and recorded (in addition to `record_every`).
    pub record_interval: Option<f64>,
    /// Fixed step; must satisfy the CFL bound.
    pub dt: Option<f64>,
}

impl fmt::Debug for SolverConfig {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("SolverConfig")
            .field("grid", &self.grid)
            .field("cfl", &self.cfl)
            .field("t_end", &self.t_end)
            .field("viscosity_eps", &self.viscosity_eps)
            .field("source_r", &self.source_r.is_some())
            .field("extra_source", &self.extra_source.is_some())
            .field("record_every", &self.record_every)
            .field("record_interval", &self.record_interval)
            .field("dt", &self.dt)
            .finish()
    }
}

impl SolverConfig {
    pub fn new(grid: Grid, t_end: f64) -> Self {
        SolverConfig {
            grid,
            cfl: 0.45,
            t_end,
            viscosity_eps: 0.0,
            source_r: None,
            extra_source: None,
            record_every: 1,
            record_interval: None,
            dt: None,
        }
    }

    fn validate(&self) -> Result<()> {
        if !(self.cfl > 0.0 && self.cfl <= 1.0) {
            return Err(Error::InvalidParameter(format!("cfl {} outside (0, 1]", self.cfl)));
        }
        if !(self.t_end >= 0.0 && self.t_end.is_finite()) {
            return Err(Error::InvalidParameter("t_end must be finite and nonnegative".into()));
        }
        if !(self.viscosity_eps >= 0.0 && self.viscosity_eps.is_finite()) {
            return Err(Error::InvalidParameter("viscosity must be nonnegative".into()));
        }
        if self.record_every == 0 {
            return Err(Error::InvalidParameter("record_every must be positive".into()));
        }
        if let Some(h) = self.record_interval {
            if !(h > 0.0 && h.is_finite()) {
                return Err(Error::InvalidParameter("record_interval must be positive".into()));
            }
        }
        Ok(())
    }
}

/// Conservative state on a grid. `w` is cell-major with `d² + d + 1`
/// components per cell in the order `(F row-major, v, E)`; `eta` caches the
/// recovered entropy.
#[derive(Clone, Debug, PartialEq)]
pub struct FlowState {
    pub grid: Grid,
    pub w: Vec<f64>,
    pub eta: Vec<f64>,
}

impl FlowState {
    pub fn ncomp(&self) -> usize {
        let d = self.grid.dim();
        d * d + d + 1
    }

    /// Sample a primitive field at cell centers.
    pub fn from_primitive<P>(model: &EnergyModel, grid: Grid, prim: P) -> Result<Self>
    where
        P: Fn(&[f64]) -> State + Sync,
    {
        let d = grid.dim();
        if model.dim() != d {
            return Err(Error::InvalidParameter("model and grid dimensions differ".into()));
        }
        let m = d * d + d + 1;
        let cells: Vec<Result<(Vec<f64>, f64)>> = (0..grid.cells())
            .into_par_iter()
            .map(|c| {
                let x = grid.center(c);
                let u = prim(&x[..d]);
                model.temperature(&u.f, u.eta).map_err(|e| {
                    Error::InadmissibleState(format!("initial data at cell {c}: {e}"))
                })?;
                let mut w = Vec::with_capacity(m);
                w.extend_from_slice(&u.f.as_slice()[..d * d]);
                w.extend_from_slice(&u.v);
                w.push(0.5 * u.v.iter().map(|x| x * x).sum::<f64>() + model.energy(&u.f, u.eta)?);
                Ok((w, u.eta))
            })
            .collect();
        let mut w = Vec::with_capacity(grid.cells() * m);
        let mut eta = Vec::with_capacity(grid.cells());
        for c in cells {
            let (wc, e) = c?;
            w.extend(wc);
            eta.push(e);
        }
        Ok(FlowState { grid, w, eta })
    }

    /// Build from conservative data, recovering the entropy.
    pub fn from_conservative(model: &EnergyModel, grid: Grid, w: Vec<f64>) -> Result<Self> {
        let d = grid.dim();
        let m = d * d + d + 1;
        if w.len() != grid.cells() * m {
            return Err(Error::GridMismatch("conservative data length".into()));
        }
        let eta = recover_all(model, &grid, &w, None, 0.0)?;
        Ok(FlowState { grid, w, eta })
    }

    pub fn cell(&self, c: usize) -> &[f64] {
        let m = self.ncomp();
        &self.w[c * m..(c + 1) * m]
    }

    pub fn state_at(&self, c: usize) -> State {
        let d = self.grid.dim();
        let w = self.cell(c);
        State::new(Mat::from_slice(d, &w[..d * d]), w[d * d..d * d + d].to_vec(), self.eta[c])
    }

    fn extract(&self, from: usize, count: usize, rank: Rank) -> GridField {
        let m = self.ncomp();
        let mut data = Vec::with_capacity(self.grid.cells() * count);
        for c in 0..self.grid.cells() {
            data.extend_from_slice(&self.w[c * m + from..c * m + from + count]);
        }
        GridField::from_raw(self.grid, rank, data)
    }

    pub fn f_field(&self) -> GridField {
        let d = self.grid.dim();
        self.extract(0, d * d, Rank::Matrix)
    }

    pub fn v_field(&self) -> GridField {
        let d = self.grid.dim();
        self.extract(d * d, d, Rank::Vector)
    }

    pub fn energy_field(&self) -> GridField {
        let d = self.grid.dim();
        self.extract(d * d + d, 1, Rank::Scalar)
    }

    pub fn eta_field(&self) -> GridField {
        GridField::from_raw(self.grid, Rank::Scalar, self.eta.clone())
    }

    pub fn theta_field(&self, model: &EnergyModel) -> Result<GridField> {
        let data: Result<Vec<f64>> = (0..self.grid.cells())
            .into_par_iter()
            .map(|c| {
                let u = self.state_at(c);
                model.temperature(&u.f, u.eta)
            })
            .collect();
        Ok(GridField::from_raw(self.grid, Rank::Scalar, data?))
    }

    /// Mean of each conserved component.
    pub fn means(&self) -> Vec<f64> {
        let m = self.ncomp();
        let mut s = vec![0.0; m];
        for c in 0..self.grid.cells() {
            for k in 0..m {
                s[k] += self.w[c * m + k];
            }
        }
        let n = self.grid.cells() as f64;
        s.iter().map(|x| x / n).collect()
    }
}

fn recover_all(model: &EnergyModel, grid: &Grid, w: &[f64], guess: Option<&[f64]>, t: f64) -> Result<Vec<f64>> {
    let d = grid.dim();
    let m = d * d + d + 1;
    (0..grid.cells())
        .into_par_iter()
        .map(|c| {
            let wc = &w[c * m..(c + 1) * m];
            let f = Mat::from_slice(d, &wc[..d * d]);
            recover_entropy_from(model, &f, &wc[d * d..d * d + d], wc[m - 1], guess.map(|g| g[c])).map_err(|e| {
                Error::RecoveryFailure(format!("t = {t:.6e}, cell {c}: {e}"))
            })
        })
        .collect()
}

struct CellData {
    sigma: Mat,
    speed: f64,
}

fn cell_data(model: &EnergyModel, s: &FlowState) -> Result<Vec<CellData>> {
    let d = s.grid.dim();
    (0..s.grid.cells())
        .into_par_iter()
        .map(|c| {
            let w = s.cell(c);
            let f = Mat::from_slice(d, &w[..d * d]);
            let eta = s.eta[c];
            model.temperature(&f, eta)?;
            let h = model.hessian(&f, eta)?;
            Ok(CellData { sigma: model.stress(&f, eta)?, speed: WAVE_SPEED_SAFETY * acoustic_speed(&h, d) })
        })
        .collect()
}

/// Largest LLF speed over the cells.
pub fn max_speed(model: &EnergyModel, s: &FlowState) -> Result<f64> {
    Ok(cell_data(model, s)?.iter().fold(0.0_f64, |m, c| m.max(c.speed)))
}

/// `fα(W)` into `out` for the cell with conservative data `w`.
fn physical_flux(d: usize, w: &[f64], sigma: &Mat, alpha: usize, out: &mut [f64]) {
    let v = &w[d * d..d * d + d];
    out.iter_mut().for_each(|x| *x = 0.0);
    for i in 0..d {
        out[i * d + alpha] = -v[i];
        out[d * d + i] = -sigma.get(i, alpha);
    }
    out[d * d + d] = -(0..d).map(|i| sigma.get(i, alpha) * v[i]).sum::<f64>();
}

fn interface_flux(d: usize, wl: &[f64], dl: &CellData, wr: &[f64], dr: &CellData, alpha: usize, out: &mut [f64]) {
    let m = wl.len();
    let mut fl = [0.0; 13];
    let mut fr = [0.0; 13];
    physical_flux(d, wl, &dl.sigma, alpha, &mut fl[..m]);
    physical_flux(d, wr, &dr.sigma, alpha, &mut fr[..m]);
    let s = dl.speed.max(dr.speed);
    for k in 0..m {
        out[k] = 0.5 * (fl[k] + fr[k]) - 0.5 * s * (wr[k] - wl[k]);
    }
}

/// Semi-discrete right-hand side `dW/dt`.
fn rate(model: &EnergyModel, s: &FlowState, t: f64, cfg: &SolverConfig) -> Result<Vec<f64>> {
    let grid = s.grid;
    let d = grid.dim();
    let m = s.ncomp();
    let h = grid.spacing();
    let data = cell_data(model, s)?;
    let eps = cfg.viscosity_eps;
    let out: Vec<Vec<f64>> = (0..grid.cells())
        .into_par_iter()
        .map(|c| {
            let mut r = vec![0.0; m];
            let mut fp = [0.0; 13];
            let mut fm = [0.0; 13];
            let wc = s.cell(c);
            for a in 0..d {
                let cp = grid.shift(c, a, 1);
                let cm = grid.shift(c, a, -1);
                interface_flux(d, wc, &data[c], s.cell(cp), &data[cp], a, &mut fp[..m]);
                interface_flux(d, s.cell(cm), &data[cm], wc, &data[c], a, &mut fm[..m]);
                for k in 0..m {
                    r[k] -= (fp[k] - fm[k]) / h;
                }
                if eps > 0.0 {
                    let (wp, wm) = (s.cell(cp), s.cell(cm));
                    for k in 0..m {
                        r[k] += eps * (wp[k] - 2.0 * wc[k] + wm[k]) / (h * h);
                    }
                }
            }
            if cfg.source_r.is_some() || cfg.extra_source.is_some() {
                let x = grid.center(c);
                if let Some(src) = &cfg.source_r {
                    r[m - 1] += src(t, &x[..d]);
                }
                if let Some(src) = &cfg.extra_source {
                    let mut extra = [0.0; 13];
                    src(t, &x[..d], &mut extra[..m]);
                    for k in 0..m {
                        r[k] += extra[k];
                    }
                }
            }
            r
        })
        .collect();
    Ok(out.into_iter().flatten().collect())
}

/// Largest stable step `cfl·Δx / max speed`.
pub fn cfl_bound(model: &EnergyModel, s: &FlowState, cfl: f64) -> Result<f64> {
    let smax = max_speed(model, s)?;
    Ok(if smax > 0.0 { cfl * s.grid.spacing() / smax } else { f64::INFINITY })
}

fn stable_bound(model: &EnergyModel, s: &FlowState, cfg: &SolverConfig) -> Result<f64> {
    let mut bound = cfl_bound(model, s, cfg.cfl)?;
    if cfg.viscosity_eps > 0.0 {
        let h = s.grid.spacing();
        bound = bound.min(cfg.cfl * h * h / (2.0 * s.grid.dim() as f64 * cfg.viscosity_eps));
    }
    Ok(bound)
}

fn step_unchecked(model: &EnergyModel, s: &FlowState, t: f64, dt: f64, cfg: &SolverConfig) -> Result<FlowState> {
    let l0 = rate(model, s, t, cfg)?;
    let w1: Vec<f64> = s.w.iter().zip(&l0).map(|(w, l)| w + dt * l).collect();
    let eta1 = recover_all(model, &s.grid, &w1, Some(&s.eta), t + dt)?;
    let s1 = FlowState { grid: s.grid, w: w1, eta: eta1 };
    let l1 = rate(model, &s1, t + dt, cfg)?;
    let w2: Vec<f64> = s.w.iter().zip(s1.w.iter().zip(&l1)).map(|(w0, (w1, l))| 0.5 * w0 + 0.5 * (w1 + dt * l)).collect();
    let eta2 = recover_all(model, &s.grid, &w2, Some(&s1.eta), t + dt)?;
    Ok(FlowState { grid: s.grid, w: w2, eta: eta2 })
}

/// One SSP-RK2 step of size `dt` starting at time `t`.
pub fn step(model: &EnergyModel, s: &FlowState, t: f64, dt: f64, cfg: &SolverConfig) -> Result<FlowState> {
    cfg.validate()?;
    let bound = stable_bound(model, s, cfg)?;
    if !(dt > 0.0) || dt > bound * (1.0 + 1e-12) {
        return Err(Error::CflViolation { dt, bound });
    }
    step_unchecked(model, s, t, dt, cfg)
}

#[derive(Clone, Debug, PartialEq)]
pub struct Diagnostics {
    pub t: f64,
    pub total_energy: f64,
    pub total_entropy: f64,
    pub min_theta: f64,
    pub curl_residual: f64,
    /// Mean of `Dtη - r/θ` since the previous record (0 at the first one).
    pub cd_residual: f64,
}

#[derive(Clone, Debug)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub states: Vec<FlowState>,
    pub diagnostics: Vec<Diagnostics>,
    pub steps: usize,
}

impl Trajectory {
    pub fn last(&self) -> &FlowState {
        self.states.last().expect("trajectory has at least one record")
    }
}

/// `max |∂α F_iβ - ∂β F_iα|` via spectral derivatives; 0 in one dimension.
pub fn curl_residual(f: &GridField) -> Result<f64> {
    spectral_curl_residual(f)
}

fn diagnostics(model: &EnergyModel, s: &FlowState, t: f64, prev: Option<(&FlowState, f64)>, r: Option<&SpaceTimeScalar>) -> Result<Diagnostics> {
    let theta = s.theta_field(model)?;
    let n = s.grid.cells() as f64;
    let cd = match prev {
        Some((p, tp)) => cd_rates(model, p, tp, s, t, r)?.iter().sum::<f64>() / n,
        None => 0.0,
    };
    Ok(Diagnostics {
        t,
        total_energy: s.energy_field().data().iter().sum::<f64>() / n,
        total_entropy: s.eta.iter().sum::<f64>() / n,
        min_theta: theta.data().iter().fold(f64::INFINITY, |m, &x| m.min(x)),
        curl_residual: curl_residual(&s.f_field())?,
        cd_residual: cd,
    })
}

/// Cellwise `(η₁ - η₀)/(t₁ - t₀) - r(t₀)/θ₀`.
fn cd_rates(model: &EnergyModel, s0: &FlowState, t0: f64, s1: &FlowState, t1: f64, r: Option<&SpaceTimeScalar>) -> Result<Vec<f64>> {
    let dt = t1 - t0;
    let d = s0.grid.dim();
    (0..s0.grid.cells())
        .into_par_iter()
        .map(|c| {
            let rate = (s1.eta[c] - s0.eta[c]) / dt;
            Ok(match r {
                Some(r) => {
                    let u = s0.state_at(c);
                    let th = model.temperature(&u.f, u.eta)?;
                    rate - r(t0, &s0.grid.center(c)[..d]) / th
                }
                None => rate,
            })
        })
        .collect()
}

/// Integrate to `t_end`, recording states and diagnostics.
pub fn simulate(model: &EnergyModel, init: &FlowState, cfg: &SolverConfig) -> Result<Trajectory> {
    cfg.validate()?;
    if init.grid != cfg.grid {
        return Err(Error::GridMismatch("initial state grid differs from the solver grid".into()));
    }
    let r = cfg.source_r.as_ref();
    let mut s = init.clone();
    let mut t = 0.0;
    let mut traj = Trajectory { times: vec![0.0], states: vec![s.clone()], diagnostics: vec![diagnostics(model, &s, 0.0, None, r)?], steps: 0 };
    let tol = 1e-12 * cfg.t_end.max(1.0);
    let mut next_record = cfg.record_interval.unwrap_or(f64::INFINITY);
    let mut since = 0;
    while t < cfg.t_end - tol {
        let bound = stable_bound(model, &s, cfg)?;
        let mut dt = match cfg.dt {
            Some(dt) => {
                if dt > bound * (1.0 + 1e-12) {
                    return Err(Error::CflViolation { dt, bound });
                }
                dt
            }
            None => bound,
        };
        dt = dt.min(cfg.t_end - t);
        let mut hit_record = false;
        if cfg.record_interval.is_some() && t + dt >= next_record - tol {
            dt = next_record - t;
            hit_record = true;
        }
        let next = step_unchecked(model, &s, t, dt, cfg)?;
        t = if hit_record { next_record } else { t + dt };
        if (cfg.t_end - t).abs() <= tol {
            t = cfg.t_end;
        }
        traj.steps += 1;
        since += 1;
        let record = hit_record || since >= cfg.record_every || t >= cfg.t_end;
        if hit_record {
            next_record += cfg.record_interval.unwrap_or(0.0);
        }
        s = next;
        if record {
            since = 0;
            let prev = traj.states.last().unwrap();
            let tp = *traj.times.last().unwrap();
            let diag = diagnostics(model, &s, t, Some((prev, tp)), r)?;
            traj.times.push(t);
            traj.states.push(s.clone());
            traj.diagnostics.push(diag);
        }
    }
    Ok(traj)
}

/// Per-record Clausius-Duhem residuals `Dtη - r/θ` between consecutive
/// records: cellwise minimum and spatial mean.
#[derive(Clone, Debug, PartialEq)]
pub struct ClausiusDuhemReport {
    pub times: Vec<f64>,
    pub min: Vec<f64>,
    pub mean: Vec<f64>,
}

impl ClausiusDuhemReport {
    pub fn worst_mean(&self) -> f64 {
        self.mean.iter().fold(f64::INFINITY, |m, &x| m.min(x))
    }

    /// Time average of the mean residual.
    pub fn average_mean(&self) -> f64 {
        if self.mean.is_empty() {
            0.0
        } else {
            self.mean.iter().sum::<f64>() / self.mean.len() as f64
        }
    }
}

pub fn clausius_duhem_residual(model: &EnergyModel, traj: &Trajectory, r: Option<&SpaceTimeScalar>) -> Result<ClausiusDuhemReport> {
    let mut rep = ClausiusDuhemReport { times: Vec::new(), min: Vec::new(), mean: Vec::new() };
    for k in 1..traj.states.len() {
        let rates = cd_rates(model, &traj.states[k - 1], traj.times[k - 1], &traj.states[k], traj.times[k], r)?;
        rep.times.push(traj.times[k]);
        rep.min.push(rates.iter().fold(f64::INFINITY, |m, &x| m.min(x)));
        rep.mean.push(rates.iter().sum::<f64>() / rates.len() as f64);
    }
    Ok(rep)
}

/// Runs with viscosity `ε` for each entry of `eps_list` plus the uniform
/// energy bound `sup_ε sup_t ∫(½|v|² + e)`.
#[derive(Clone, Debug)]
pub struct ViscousFamily {
    pub eps: Vec<f64>,
    pub runs: Vec<Trajectory>,
    pub sup_energy: Vec<f64>,
    pub uniform_bound: f64,
}

pub fn viscous_family(model: &EnergyModel, init: &FlowState, eps_list: &[f64], cfg: &SolverConfig) -> Result<ViscousFamily> {
    if eps_list.windows(2).any(|w| w[1] > w[0]) {
        return Err(Error::InvalidParameter("eps_list must be descending".into()));
    }
    let runs: Vec<Trajectory> = eps_list
        .par_iter()
        .map(|&eps| {
            let mut c = cfg.clone();
            c.viscosity_eps = eps;
            simulate(model, init, &c)
        })
        .collect::<Result<Vec<_>>>()?;
    let sup_energy: Vec<f64> = runs
        .iter()
        .map(|t| t.diagnostics.iter().fold(f64::NEG_INFINITY, |m, d| m.max(d.total_energy)))
        .collect();
    let uniform_bound = sup_energy.iter().fold(f64::NEG_INFINITY, |m, &x| m.max(x));
    Ok(ViscousFamily { eps: eps_list.to_vec(), runs, sup_energy, uniform_bound })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::constitutive::Quadratic;

    #[test]
    fn constant_state_is_steady() {
        let m = Quadratic::model(2, 1.0);
        let g = Grid::new(2, 8).unwrap();
        let u = State::new(Mat::from_slice(2, &[1.0, 0.2, 0.0, 1.0]), vec![0.3, -0.1], 0.5);
        let s = FlowState::from_primitive(&m, g, |_| u.clone()).unwrap();
        let cfg = SolverConfig::new(g, 0.1);
        let dt = cfl_bound(&m, &s, 0.45).unwrap();
        let s1 = step(&m, &s, 0.0, dt, &cfg).unwrap();
        assert!(s1.w.iter().zip(&s.w).all(|(a, b)| (a - b).abs() < 1e-14));
        assert!(matches!(step(&m, &s, 0.0, 2.0 * dt, &cfg), Err(Error::CflViolation { .. })));
    }
}
