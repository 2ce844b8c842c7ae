use std::f64::consts::PI;

use rayon::prelude::*;

use super::{barycenter, split, EmpiricalYoungMeasure, Subspace};
use crate::constitutive::EnergyModel;
use crate::error::{Error, Result};
use crate::fields::{curl_residual, GridField};
use crate::solver::SpaceTimeScalar;

/// Weak-form residuals of the measure-valued relations against a fixed
/// dictionary of space-time test functions.
#[derive(Clone, Debug)]
pub struct MvResidualReport {
    /// Space-time test functions used for each distributional row.
    pub tests: usize,
    /// `max |∫∫ ⟨F⟩ ∂tφ - ⟨v⟩ ∂αφ|`.
    pub kinematic: f64,
    /// `max |∫∫ ⟨v⟩ ∂tφ - ⟨Σ⟩ ∂αφ|`.
    pub momentum: f64,
    /// `max (∫∫ ⟨η⟩ ∂tφ + ⟨r/θ⟩ φ)⁺` over nonnegative tests.
    pub entropy_violation: f64,
    /// Smallest energy slack `φ(0)∫E₀ + ∫∫ φ'(⟨E⟩ + γ) + ∫∫ r φ`.
    pub energy_slack: f64,
    /// `max(0, -energy_slack)`.
    pub energy_violation: f64,
    /// `max |curl ⟨F⟩|` over the series.
    pub barycenter_curl: f64,
    /// `(row, test index, value)` for every evaluated functional.
    pub rows: Vec<(&'static str, usize, f64)>,
}

impl MvResidualReport {
    pub fn max_equality(&self) -> f64 {
        self.kinematic.max(self.momentum)
    }

    pub fn max_violation(&self) -> f64 {
        self.entropy_violation.max(self.energy_violation)
    }
}

struct Moments {
    f: Vec<f64>,
    v: Vec<f64>,
    stress: Vec<f64>,
    eta: Vec<f64>,
    inv_theta: Vec<f64>,
    energy: Vec<f64>,
}

fn moments(nu: &EmpiricalYoungMeasure, model: &EnergyModel) -> Result<Moments> {
    let d = nu.grid.dim();
    let dd = d * d;
    let rows: Vec<Vec<f64>> = nu
        .atoms
        .par_iter()
        .map(|cell| {
            let mut acc = vec![0.0; 2 * dd + d + 3];
            for a in cell {
                let s = split(&a.point, d, Subspace::Full);
                let v = s.v.unwrap();
                let sigma = model.stress(&s.f, s.eta)?;
                let theta = model.temperature(&s.f, s.eta)?;
                let e = 0.5 * v.iter().map(|x| x * x).sum::<f64>() + model.energy(&s.f, s.eta)?;
                let w = a.weight;
                for k in 0..dd {
                    acc[k] += w * s.f.as_slice()[k];
                    acc[dd + k] += w * sigma.as_slice()[k];
                }
                for i in 0..d {
                    acc[2 * dd + i] += w * v[i];
                }
                acc[2 * dd + d] += w * s.eta;
                acc[2 * dd + d + 1] += w / theta;
                acc[2 * dd + d + 2] += w * e;
            }
            Ok(acc)
        })
        .collect::<Result<_>>()?;
    let mut m = Moments { f: vec![], v: vec![], stress: vec![], eta: vec![], inv_theta: vec![], energy: vec![] };
    for r in rows {
        m.f.extend_from_slice(&r[..dd]);
        m.stress.extend_from_slice(&r[dd..2 * dd]);
        m.v.extend_from_slice(&r[2 * dd..2 * dd + d]);
        m.eta.push(r[2 * dd + d]);
        m.inv_theta.push(r[2 * dd + d + 1]);
        m.energy.push(r[2 * dd + d + 2]);
    }
    Ok(m)
}

/// Spatial factor `cos` or `sin` of `2π k·x`, or `1 + cos` for the
/// nonnegative family.
#[derive(Clone, Copy, Debug)]
enum Trig {
    Cos,
    Sin,
    OnePlusCos,
}

#[derive(Clone, Debug)]
struct SpaceMode {
    k: Vec<f64>,
    trig: Trig,
}

impl SpaceMode {
    /// `(w(x), ∇w(x))`.
    fn eval(&self, x: &[f64]) -> (f64, Vec<f64>) {
        let ph = 2.0 * PI * self.k.iter().zip(x).map(|(k, x)| k * x).sum::<f64>();
        let (w, dw) = match self.trig {
            Trig::Cos => (ph.cos(), -ph.sin()),
            Trig::Sin => (ph.sin(), ph.cos()),
            Trig::OnePlusCos => (1.0 + ph.cos(), -ph.sin()),
        };
        (w, self.k.iter().map(|k| 2.0 * PI * k * dw).collect())
    }
}

fn space_modes(d: usize, nonnegative: bool) -> Vec<SpaceMode> {
    let mut out = Vec::new();
    let side = 5usize;
    for j in 0..side.pow(d as u32) {
        let mut rem = j;
        let k: Vec<f64> = (0..d)
            .map(|_| {
                let v = (rem % side) as f64 - 2.0;
                rem /= side;
                v
            })
            .collect();
        // one representative of each ±k pair
        let first = k.iter().find(|x| **x != 0.0).copied().unwrap_or(0.0);
        if first < 0.0 {
            continue;
        }
        let zero = first == 0.0;
        if nonnegative {
            out.push(SpaceMode { k, trig: if zero { Trig::Cos } else { Trig::OnePlusCos } });
        } else {
            out.push(SpaceMode { k: k.clone(), trig: Trig::Cos });
            if !zero {
                out.push(SpaceMode { k, trig: Trig::Sin });
            }
        }
    }
    out.sort_by(|a, b| {
        let na: f64 = a.k.iter().map(|x| x.abs()).fold(0.0, f64::max);
        let nb: f64 = b.k.iter().map(|x| x.abs()).fold(0.0, f64::max);
        na.partial_cmp(&nb).unwrap()
    });
    out
}

/// `b(s) = sin²(jπs)` on the window, with its derivative weights.
fn bump(j: usize, times: &[f64]) -> (Vec<f64>, Vec<f64>) {
    let (t0, t1) = (times[0], times[times.len() - 1]);
    let b: Vec<f64> = times.iter().map(|t| (j as f64 * PI * (t - t0) / (t1 - t0)).sin().powi(2)).collect();
    let db = derivative_weights(&b);
    (b, db)
}

fn trapezoid(times: &[f64]) -> Vec<f64> {
    let n = times.len();
    let mut w = vec![0.0; n];
    for i in 0..n - 1 {
        let h = times[i + 1] - times[i];
        w[i] += 0.5 * h;
        w[i + 1] += 0.5 * h;
    }
    w
}

/// Weights `ω_n` with `Σ ω_n X_n = Σ (φ_{n+1} - φ_n)(X_n + X_{n+1})/2`, the
/// trapezoid rule for `∫ φ' X` that is exact on constants.
fn derivative_weights(phi: &[f64]) -> Vec<f64> {
    let n = phi.len();
    let mut w = vec![0.0; n];
    for i in 0..n - 1 {
        let dp = 0.5 * (phi[i + 1] - phi[i]);
        w[i] += dp;
        w[i + 1] += dp;
    }
    w
}

/// Dictionary of `(time bump index, space mode)` pairs, low frequencies first.
fn dictionary(modes: &[SpaceMode], budget: usize) -> Vec<(usize, usize)> {
    let mut out = Vec::new();
    for j in 1..=2 {
        for m in 0..modes.len() {
            out.push((j, m));
        }
    }
    out.sort_by_key(|&(j, m)| (m, j));
    out.truncate(budget.max(1));
    out
}

/// Weak-form residuals of a time series of Young measures.
///
/// `gamma`, when given, holds one concentration field per series entry. The
/// energy row uses the tests `φ(t) = (1 - s)^{j+1}` on the normalized window
/// `s ∈ [0, 1]`, which vanish at the final time.
pub fn mv_residuals(
    series: &[(f64, EmpiricalYoungMeasure)],
    gamma: Option<&[GridField]>,
    model: &EnergyModel,
    r: Option<&SpaceTimeScalar>,
    test_budget: usize,
) -> Result<MvResidualReport> {
    if series.len() < 3 {
        return Err(Error::InvalidParameter("need at least three time slices".into()));
    }
    let grid = series[0].1.grid;
    for (_, nu) in series {
        if nu.grid != grid {
            return Err(Error::GridMismatch("series on different grids".into()));
        }
        if nu.subspace != Subspace::Full {
            return Err(Error::InvalidParameter("residuals need the full (F, v, eta) subspace".into()));
        }
        nu.validate()?;
    }
    if series.windows(2).any(|w| w[1].0 <= w[0].0) {
        return Err(Error::InvalidParameter("series times must increase".into()));
    }
    if let Some(g) = gamma {
        if g.len() != series.len() || g.iter().any(|f| f.grid() != grid || f.ncomp() != 1) {
            return Err(Error::GridMismatch("concentration series does not match".into()));
        }
    }
    let d = grid.dim();
    let dd = d * d;
    let cells = grid.cells();
    let vol = grid.cell_volume();
    let times: Vec<f64> = series.iter().map(|s| s.0).collect();
    let (t0, t1) = (times[0], *times.last().unwrap());
    let tw = trapezoid(&times);

    let mut barycenter_curl = 0.0_f64;
    let mut mom = Vec::with_capacity(series.len());
    for (_, nu) in series {
        barycenter_curl = barycenter_curl.max(curl_residual(&barycenter(nu)?.f)?);
        mom.push(moments(nu, model)?);
    }
    let centers: Vec<Vec<f64>> = (0..cells).map(|c| grid.center(c)[..d].to_vec()).collect();
    let rvals: Vec<Vec<f64>> = times
        .iter()
        .map(|&t| centers.iter().map(|x| r.map_or(0.0, |f| f(t, x))).collect())
        .collect();

    let mut rows = Vec::new();
    let signed = space_modes(d, false);
    let dict = dictionary(&signed, test_budget);
    let mut kinematic = 0.0_f64;
    for (idx, &(j, m)) in dict.iter().enumerate() {
        let (b, db) = bump(j, &times);
        let wv: Vec<(f64, Vec<f64>)> = centers.iter().map(|x| signed[m].eval(x)).collect();
        for i in 0..d {
            for a in 0..d {
                let mut rk = 0.0;
                for n in 0..times.len() {
                    let mo = &mom[n];
                    let (mut sf, mut sv) = (0.0, 0.0);
                    for c in 0..cells {
                        let (w, ref dw) = wv[c];
                        sf += mo.f[c * dd + i * d + a] * w;
                        sv += mo.v[c * d + i] * dw[a];
                    }
                    rk += (db[n] * sf - tw[n] * b[n] * sv) * vol;
                }
                kinematic = kinematic.max(rk.abs());
                rows.push(("kinematic", idx, rk));
            }
        }
        for i in 0..d {
            let mut rm = 0.0;
            for n in 0..times.len() {
                let mo = &mom[n];
                let (mut sv, mut ss) = (0.0, 0.0);
                for c in 0..cells {
                    let (w, ref dw) = wv[c];
                    sv += mo.v[c * d + i] * w;
                    for a in 0..d {
                        ss += mo.stress[c * dd + i * d + a] * dw[a];
                    }
                }
                rm += (db[n] * sv - tw[n] * b[n] * ss) * vol;
            }
            rows.push(("momentum", idx, rm));
        }
    }
    let momentum = rows.iter().filter(|r| r.0 == "momentum").map(|r| r.2.abs()).fold(0.0, f64::max);

    let nonneg = space_modes(d, true);
    let ndict = dictionary(&nonneg, test_budget);
    let mut entropy_violation = 0.0_f64;
    for (idx, &(j, m)) in ndict.iter().enumerate() {
        let (b, db) = bump(j, &times);
        let wv: Vec<f64> = centers.iter().map(|x| nonneg[m].eval(x).0).collect();
        let mut re = 0.0;
        for n in 0..times.len() {
            let mo = &mom[n];
            let (mut se, mut sr) = (0.0, 0.0);
            for c in 0..cells {
                se += mo.eta[c] * wv[c];
                sr += rvals[n][c] * mo.inv_theta[c] * wv[c];
            }
            re += (db[n] * se + tw[n] * b[n] * sr) * vol;
        }
        entropy_violation = entropy_violation.max(re);
        rows.push(("entropy", idx, re));
    }

    let totals: Vec<f64> = (0..series.len())
        .map(|n| {
            let g = gamma.map_or(0.0, |g| g[n].data().iter().sum::<f64>());
            mom[n].energy.iter().sum::<f64>() * vol + g
        })
        .collect();
    let rints: Vec<f64> = rvals.iter().map(|r| r.iter().sum::<f64>() * vol).collect();
    let e0 = mom[0].energy.iter().sum::<f64>() * vol;
    let mut energy_slack = f64::INFINITY;
    for j in 1..=test_budget.clamp(1, 4) {
        let p = (j + 1) as i32;
        let phi: Vec<f64> = times.iter().map(|t| (1.0 - (t - t0) / (t1 - t0)).powi(p)).collect();
        let dphi = derivative_weights(&phi);
        let mut slack = phi[0] * e0;
        for n in 0..series.len() {
            slack += dphi[n] * totals[n] + tw[n] * phi[n] * rints[n];
        }
        energy_slack = energy_slack.min(slack);
        rows.push(("energy", j - 1, slack));
    }

    Ok(MvResidualReport {
        tests: dict.len(),
        kinematic,
        momentum,
        entropy_violation: entropy_violation.max(0.0),
        energy_slack,
        energy_violation: (-energy_slack).max(0.0),
        barycenter_curl,
        rows,
    })
}
