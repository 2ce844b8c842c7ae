use rayon::prelude::*;

use super::{empirical_young_measure, max_cell_wasserstein, max_weight_gap, EmpiricalYoungMeasure, Generator, SequenceSpec, Subspace};
use crate::error::{Error, Result};
use crate::fields::{curl_residual, helmholtz_curl_free, recover_potential, truncate_field, v_aux_sq, Grid, GridField, Rank};
use crate::tensor::Mat;

/// A sequence `(y_k, η_k)` queryable at space-time points.
pub trait SpaceTimeInput: Sync {
    fn dim(&self) -> usize;
    /// Time window `[a, b]` on which the members are defined.
    fn window(&self) -> (f64, f64);
    /// `∇y_k(t, x)`; `None` when the point cannot be queried.
    fn gradient(&self, k: usize, t: f64, x: &[f64]) -> Option<Mat>;
    fn entropy(&self, k: usize, t: f64, x: &[f64]) -> Option<f64>;
    /// Periodic part of the limit displacement `y(t, ·)`, if known.
    fn limit_displacement(&self, _t: f64, _x: &[f64]) -> Option<Vec<f64>> {
        None
    }
}

#[derive(Clone, Debug)]
pub struct LocalizeOptions {
    pub t0: f64,
    /// Length `T` of the rescaled window.
    pub horizon: f64,
    /// Truncation level of `τ_n`.
    pub n_trunc: f64,
    pub target: Grid,
    pub subgrid: usize,
    /// Rescaled time samples in `(0, T)`.
    pub time_samples: usize,
    /// Localization scale `ε_k` of member `k`, descending.
    pub scales: Vec<f64>,
    pub p: f64,
    pub q: f64,
}

impl LocalizeOptions {
    pub fn new(t0: f64, target: Grid, scales: Vec<f64>) -> Self {
        LocalizeOptions { t0, horizon: 1.0, n_trunc: f64::INFINITY, target, subgrid: 8, time_samples: 8, scales, p: 2.0, q: 2.0 }
    }
}

#[derive(Clone, Debug)]
pub struct LocalizeReport {
    /// Largest per-cell Wasserstein-1 distance between the localized measure
    /// of the last member and the slice measure at `t0`.
    pub w1_max: f64,
    /// Largest per-cell weight gap after assigning localized atoms to the
    /// nearest slice atom.
    pub weight_gap: f64,
    /// Space-time mean of `|V_p(F)|² + |V_q(η)|²` per member.
    pub v_integrals: Vec<f64>,
    /// Relative gap of `v_integrals` over the last two members.
    pub cauchy_gap: f64,
    /// Space-time `L^p` distance of `z_k` to the limit displacement, when the
    /// input provides one.
    pub lp_distances: Vec<f64>,
    pub lp_decreasing: bool,
    /// Largest spectral curl of a projected gradient.
    pub curl_max: f64,
    /// Cells where `τ_n` changed a value.
    pub truncated: usize,
}

#[derive(Clone, Debug)]
pub struct Localized {
    /// Tabulated sequence of the localized members, time samples as layers.
    pub spec: SequenceSpec,
    pub measure: EmpiricalYoungMeasure,
    pub slice: EmpiricalYoungMeasure,
    /// `(∇z_k, w_k)` of the last member at the first time sample.
    pub gradient: GridField,
    pub entropy_fluctuation: GridField,
    pub report: LocalizeReport,
}

struct Sample {
    points: Vec<f64>,
    z: GridField,
    dz: GridField,
    w: GridField,
    curl: f64,
    truncated: usize,
    v_int: f64,
}

fn query_fields(input: &dyn SpaceTimeInput, k: usize, t: f64, grid: Grid) -> Result<(GridField, GridField)> {
    let d = grid.dim();
    let mut g = GridField::zeros(grid, Rank::Matrix);
    let mut e = GridField::zeros(grid, Rank::Scalar);
    for c in 0..grid.cells() {
        let x = grid.center(c);
        let m = input
            .gradient(k, t, &x[..d])
            .ok_or_else(|| Error::InvalidParameter(format!("input not queryable at t={t}")))?;
        if m.dim() != d {
            return Err(Error::InvalidDimension(m.dim()));
        }
        g.cell_mut(c).copy_from_slice(&m.as_slice()[..d * d]);
        e.data_mut()[c] = input.entropy(k, t, &x[..d]).ok_or_else(|| Error::InvalidParameter(format!("input not queryable at t={t}")))?;
    }
    if !g.is_finite() || !e.is_finite() {
        return Err(Error::NonFinite("space-time input".into()));
    }
    Ok((g, e))
}

fn pack(f: &GridField, eta: &GridField) -> Vec<f64> {
    let dd = f.ncomp();
    let mut out = Vec::with_capacity(f.grid().cells() * (dd + 1));
    for c in 0..f.grid().cells() {
        out.extend_from_slice(f.cell(c));
        out.push(eta.data()[c]);
    }
    out
}

fn localize_sample(input: &dyn SpaceTimeInput, opts: &LocalizeOptions, fine: Grid, k: usize, t: f64) -> Result<Sample> {
    let (g, e) = query_fields(input, k, t, fine)?;
    let gt = truncate_field(&g, opts.n_trunc);
    let et = truncate_field(&e, opts.n_trunc);
    let changed = (0..fine.cells()).filter(|&c| gt.cell(c) != g.cell(c) || et.cell(c) != e.cell(c)).count();
    let mean = gt.mean();
    let mut fluct = gt.clone();
    fluct.subtract_mean();
    let dz = helmholtz_curl_free(&fluct)?;
    let z = recover_potential(&fluct)?;
    let curl = curl_residual(&dz)?;
    let mut w = et.clone();
    w.subtract_mean();
    let mut f = dz.clone();
    for c in 0..fine.cells() {
        for (x, m) in f.cell_mut(c).iter_mut().zip(&mean) {
            *x += m;
        }
    }
    let v_int = (0..fine.cells())
        .map(|c| v_aux_sq(f.cell(c), opts.p) + v_aux_sq(&[et.data()[c]], opts.q))
        .sum::<f64>()
        / fine.cells() as f64;
    Ok(Sample { points: pack(&f, &et), z, dz, w, curl, truncated: changed, v_int })
}

/// Rescale each member around `t0`, truncate, split off the mean and project
/// the fluctuation onto gradients.
pub fn time_localize(input: &dyn SpaceTimeInput, opts: &LocalizeOptions) -> Result<Localized> {
    let target = opts.target;
    let d = target.dim();
    if input.dim() != d {
        return Err(Error::InvalidDimension(input.dim()));
    }
    if opts.scales.len() < 2 || opts.scales.windows(2).any(|w| w[1] >= w[0]) || opts.scales.iter().any(|s| !(*s > 0.0)) {
        return Err(Error::InvalidParameter("need at least two positive descending scales".into()));
    }
    if opts.subgrid < 4 || opts.time_samples == 0 || !(opts.horizon > 0.0) || !(opts.n_trunc > 0.0) {
        return Err(Error::InvalidParameter("subgrid, time samples, horizon or truncation level out of range".into()));
    }
    let (a, b) = input.window();
    if !(opts.t0 > a && opts.t0 + opts.scales[0] < b) {
        return Err(Error::InvalidParameter(format!("t0={} is not interior to the window ({a}, {b})", opts.t0)));
    }
    let fine = Grid::new(d, target.n() * opts.subgrid)?;
    let layers = opts.time_samples;
    let mut tables = Vec::with_capacity(opts.scales.len());
    let mut v_integrals = Vec::new();
    let mut lp_distances = Vec::new();
    let mut curl_max = 0.0_f64;
    let mut truncated = 0;
    let mut last: Option<(GridField, GridField)> = None;
    let limit: Option<GridField> = {
        let mut y = GridField::zeros(fine, Rank::Vector);
        let mut ok = true;
        for c in 0..fine.cells() {
            let x = fine.center(c);
            match input.limit_displacement(opts.t0, &x[..d]) {
                Some(v) if v.len() == d => y.cell_mut(c).copy_from_slice(&v),
                _ => {
                    ok = false;
                    break;
                }
            }
        }
        if ok {
            y.subtract_mean();
            Some(y)
        } else {
            None
        }
    };
    for (k, &eps) in opts.scales.iter().enumerate() {
        let samples: Vec<Sample> = (0..layers)
            .into_par_iter()
            .map(|j| {
                let t = (j as f64 + 0.5) / layers as f64 * opts.horizon;
                localize_sample(input, opts, fine, k, opts.t0 + eps * t / opts.horizon)
            })
            .collect::<Result<_>>()?;
        let mut table = Vec::with_capacity(layers * fine.cells() * (d * d + 1));
        let mut vi = 0.0;
        let mut lp = 0.0;
        for s in &samples {
            table.extend_from_slice(&s.points);
            vi += s.v_int;
            curl_max = curl_max.max(s.curl);
            truncated += s.truncated;
            if let Some(y) = &limit {
                lp += (0..fine.cells())
                    .map(|c| {
                        let r: f64 = s.z.cell(c).iter().zip(y.cell(c)).map(|(a, b)| (a - b).powi(2)).sum();
                        r.sqrt().powf(opts.p)
                    })
                    .sum::<f64>()
                    / fine.cells() as f64;
            }
        }
        v_integrals.push(vi / layers as f64);
        if limit.is_some() {
            lp_distances.push((lp / layers as f64).powf(1.0 / opts.p));
        }
        tables.push(table);
        let first = &samples[0];
        last = Some((first.dz.clone(), first.w.clone()));
    }
    let spec = SequenceSpec {
        generator: Generator::Tabulated { grid: fine, layers, tables },
        scales: opts.scales.clone(),
        subgrid: opts.subgrid,
        subspace: Subspace::FEta,
    };
    let measure = empirical_young_measure(&spec, target)?;

    let kf = opts.scales.len() - 1;
    let (g0, e0) = query_fields(input, kf, opts.t0, fine)?;
    let slice_spec = SequenceSpec {
        generator: Generator::Tabulated { grid: fine, layers: 1, tables: vec![pack(&g0, &e0)] },
        scales: vec![opts.scales[kf]],
        subgrid: opts.subgrid,
        subspace: Subspace::FEta,
    };
    let slice = empirical_young_measure(&slice_spec, target)?;
    let w1_max = max_cell_wasserstein(&measure, &slice)?;
    let weight_gap = max_weight_gap(&measure, &slice)?;
    let n = v_integrals.len();
    let cauchy_gap = (v_integrals[n - 1] - v_integrals[n - 2]).abs() / v_integrals[n - 1].abs().max(v_integrals[n - 2].abs()).max(1e-300);
    let lp_decreasing = lp_distances.len() >= 2 && lp_distances.windows(2).all(|w| w[1] < w[0]);
    let (gradient, entropy_fluctuation) = last.expect("at least one member");
    Ok(Localized {
        spec,
        measure,
        slice,
        gradient,
        entropy_fluctuation,
        report: LocalizeReport { w1_max, weight_gap, v_integrals, cauchy_gap, lp_distances, lp_decreasing, curl_max, truncated },
    })
}
