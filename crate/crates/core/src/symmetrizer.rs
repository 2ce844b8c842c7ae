//! Conservation-law structure `∂t A(U) + ∂α fα(U) = 0` of adiabatic
//! thermoelasticity, the entropy multiplier, the symmetrizer and wave speeds.
//!
//! Flattening order everywhere: `F` row-major, then `v`, then the scalar slot
//! (`η` for primitive vectors, `E` for conserved ones).

use nalgebra::{DMatrix, SymmetricEigen};
use rand::Rng;
use rayon::prelude::*;

use crate::constitutive::{EnergyModel, State};
use crate::error::{Error, Result};
use crate::sampling::{halton, sphere_point, substream};
use crate::solver::recover_entropy_from;
use crate::tensor::{vec_norm, Mat};

/// `A(U)` and `fα(U)` for one model.
#[derive(Clone, Debug)]
pub struct BalanceLawStructure {
    pub model: EnergyModel,
}

impl BalanceLawStructure {
    pub fn new(model: EnergyModel) -> Self {
        BalanceLawStructure { model }
    }

    pub fn state_dim(&self) -> usize {
        let d = self.model.dim();
        d * d + d + 1
    }

    /// `(F, v, ½|v|² + e)`.
    pub fn conserved(&self, u: &State) -> Result<Vec<f64>> {
        let d = self.model.dim();
        let mut w = Vec::with_capacity(self.state_dim());
        w.extend_from_slice(&u.f.as_slice()[..d * d]);
        w.extend_from_slice(&u.v);
        let kin: f64 = 0.5 * u.v.iter().map(|x| x * x).sum::<f64>();
        w.push(kin + self.model.energy(&u.f, u.eta)?);
        Ok(w)
    }

    /// Flux `Σα nα fα(U)` with `fα = -(vᵢδαβ, Σᵢα, Σᵢα vᵢ)`.
    pub fn directional_flux(&self, u: &State, n: &[f64]) -> Result<Vec<f64>> {
        let d = self.model.dim();
        let sig = self.model.stress(&u.f, u.eta)?;
        let mut out = vec![0.0; self.state_dim()];
        for i in 0..d {
            for b in 0..d {
                out[i * d + b] = -u.v[i] * n[b];
            }
        }
        let sn = sig.mul_vec(n);
        for i in 0..d {
            out[d * d + i] = -sn[i];
        }
        out[d * d + d] = -sn.iter().zip(&u.v).map(|(a, b)| a * b).sum::<f64>();
        Ok(out)
    }

    /// Flux in coordinate direction `alpha`.
    pub fn flux(&self, u: &State, alpha: usize) -> Result<Vec<f64>> {
        let mut n = vec![0.0; self.model.dim()];
        n[alpha] = 1.0;
        self.directional_flux(u, &n)
    }

    /// Invert `A`: recover `η` from the energy slot.
    pub fn primitive(&self, w: &[f64], guess: Option<f64>) -> Result<State> {
        let d = self.model.dim();
        if w.len() != self.state_dim() {
            return Err(Error::InvalidParameter(format!("conserved vector of length {}", w.len())));
        }
        let f = Mat::from_slice(d, &w[..d * d]);
        let v = w[d * d..d * d + d].to_vec();
        let eta = recover_entropy_from(&self.model, &f, &v, w[d * d + d], guess)?;
        Ok(State::new(f, v, eta))
    }
}

fn require_admissible(model: &EnergyModel, u: &State) -> Result<f64> {
    if u.dim() != model.dim() || u.v.len() != model.dim() {
        return Err(Error::InvalidParameter("state dimension does not match the model".into()));
    }
    if u.v.iter().any(|x| !x.is_finite()) {
        return Err(Error::NonFinite("velocity".into()));
    }
    model.temperature(&u.f, u.eta)
}

/// Entropy multiplier `G(U) = (1/θ)(e_F, v, -1)`.
pub fn multiplier_g(model: &EnergyModel, u: &State) -> Result<Vec<f64>> {
    let th = require_admissible(model, u)?;
    let d = model.dim();
    let sig = model.stress(&u.f, u.eta)?;
    let mut g: Vec<f64> = sig.as_slice()[..d * d].iter().map(|x| x / th).collect();
    g.extend(u.v.iter().map(|x| x / th));
    g.push(-1.0 / th);
    Ok(g)
}

/// Largest violation of `G·∇A = ∇(-η)` and `G·∇fα = 0` over sampled states.
#[derive(Clone, Debug)]
pub struct EntropyPairReport {
    pub samples: usize,
    pub max_residual: f64,
    pub worst_state: Option<State>,
}

/// Random admissible state with `|F_ij| ≤ 1`, normal velocity and `η` above
/// the admissible bound.
pub fn sample_state<R: Rng>(model: &EnergyModel, r: &mut R) -> State {
    let d = model.dim();
    let lo = if model.eta_min().is_finite() { model.eta_min().max(-1.5) + 0.1 } else { -1.0 };
    loop {
        let f = Mat::from_slice(d, &(0..d * d).map(|_| r.gen_range(-1.0..1.0)).collect::<Vec<_>>());
        let v: Vec<f64> = (0..d).map(|_| r.gen_range(-1.0..1.0)).collect();
        let eta = r.gen_range(lo..lo + 2.0);
        if model.is_admissible(&f, eta) && model.temperature(&f, eta).map_or(false, |t| t > 0.05) {
            return State::new(f, v, eta);
        }
    }
}

/// Centered finite-difference Jacobian of `map` with respect to the
/// primitive vector `(F, v, η)`; rows are output components.
fn primitive_jacobian<M>(u: &State, out_dim: usize, h: f64, map: M) -> Result<Vec<Vec<f64>>>
where
    M: Fn(&State) -> Result<Vec<f64>>,
{
    let d = u.dim();
    let x = u.to_vec();
    let mut jac = vec![vec![0.0; x.len()]; out_dim];
    for k in 0..x.len() {
        let step = h * x[k].abs().max(1.0);
        let mut xp = x.clone();
        let mut xm = x.clone();
        xp[k] += step;
        xm[k] -= step;
        let fp = map(&State::from_slice(d, &xp))?;
        let fm = map(&State::from_slice(d, &xm))?;
        for r in 0..out_dim {
            jac[r][k] = (fp[r] - fm[r]) / (2.0 * step);
        }
    }
    Ok(jac)
}

/// Residual of the entropy-pair identities at one state for a given
/// multiplier; `η̌ = -η`, `q̌α = 0`.
pub fn entropy_pair_residual_at(model: &EnergyModel, u: &State, g: &[f64]) -> Result<f64> {
    let s = BalanceLawStructure::new(model.clone());
    let m = s.state_dim();
    let h = 1e-5;
    let contract = |jac: &[Vec<f64>]| -> Vec<f64> {
        (0..m).map(|k| (0..m).map(|r| g[r] * jac[r][k]).sum()).collect()
    };
    let ja = primitive_jacobian(u, m, h, |z| s.conserved(z))?;
    let lhs = contract(&ja);
    let mut worst = 0.0_f64;
    for (k, val) in lhs.iter().enumerate() {
        let target = if k == m - 1 { -1.0 } else { 0.0 };
        worst = worst.max((val - target).abs());
    }
    for alpha in 0..model.dim() {
        let jf = primitive_jacobian(u, m, h, |z| s.flux(z, alpha))?;
        worst = worst.max(contract(&jf).iter().fold(0.0_f64, |a, v| a.max(v.abs())));
    }
    Ok(worst)
}

/// Check the entropy-pair identities with the multiplier of the theory.
pub fn entropy_pair_residual(model: &EnergyModel, n_samples: usize, seed: u64) -> Result<EntropyPairReport> {
    entropy_pair_residual_with(model, n_samples, seed, multiplier_g)
}

/// Same check with a caller-supplied multiplier (used for negative controls).
pub fn entropy_pair_residual_with<G>(model: &EnergyModel, n_samples: usize, seed: u64, g: G) -> Result<EntropyPairReport>
where
    G: Fn(&EnergyModel, &State) -> Result<Vec<f64>> + Sync,
{
    let mut r = substream(seed, 0xE17);
    let states: Vec<State> = (0..n_samples).map(|_| sample_state(model, &mut r)).collect();
    let res: Vec<f64> = states
        .par_iter()
        .map(|u| g(model, u).and_then(|gv| entropy_pair_residual_at(model, u, &gv)))
        .collect::<Result<Vec<_>>>()?;
    let mut worst = 0.0;
    let mut worst_state = None;
    for (u, v) in states.iter().zip(res) {
        if v > worst || worst_state.is_none() {
            worst = v;
            worst_state = Some(u.clone());
        }
    }
    Ok(EntropyPairReport { samples: n_samples, max_residual: worst, worst_state })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SymmetrizerMode {
    Full,
    WaveCone,
}

impl SymmetrizerMode {
    pub fn as_str(self) -> &'static str {
        match self {
            SymmetrizerMode::Full => "full",
            SymmetrizerMode::WaveCone => "wave_cone",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "full" => Some(SymmetrizerMode::Full),
            "wave_cone" | "wave-cone" | "cone" => Some(SymmetrizerMode::WaveCone),
            _ => None,
        }
    }
}

#[derive(Clone, Debug)]
pub struct SymmetrizerResult {
    pub size: usize,
    /// Row-major `size x size`.
    pub matrix: Vec<f64>,
    pub theta: f64,
    pub min_eig_full: f64,
    pub min_quotient_cone: f64,
    pub mode: SymmetrizerMode,
    /// Unit vector attaining the reported minimum for `mode`.
    pub witness: Vec<f64>,
}

impl SymmetrizerResult {
    pub fn at(&self, r: usize, c: usize) -> f64 {
        self.matrix[r * self.size + c]
    }

    /// `Xᵀ S X`.
    pub fn quadratic_form(&self, x: &[f64]) -> f64 {
        let m = self.size;
        (0..m).map(|r| x[r] * (0..m).map(|c| self.matrix[r * m + c] * x[c]).sum::<f64>()).sum()
    }

    /// The value of `mode`: smallest eigenvalue or cone minimum.
    pub fn value(&self) -> f64 {
        match self.mode {
            SymmetrizerMode::Full => self.min_eig_full,
            SymmetrizerMode::WaveCone => self.min_quotient_cone,
        }
    }

    pub fn asymmetry(&self) -> f64 {
        let m = self.size;
        let mut w = 0.0_f64;
        for r in 0..m {
            for c in 0..r {
                w = w.max((self.at(r, c) - self.at(c, r)).abs());
            }
        }
        w
    }

    fn dmatrix(&self) -> DMatrix<f64> {
        DMatrix::from_row_slice(self.size, self.size, &self.matrix)
    }
}

/// `(1/θ) [[e_FF, 0, e_Fη], [0, I, 0], [e_Fηᵀ, 0, e_ηη]]`.
pub fn symmetrizer_matrix(model: &EnergyModel, f: &Mat, eta: f64) -> Result<SymmetrizerResult> {
    let th = model.temperature(f, eta)?;
    let h = model.hessian(f, eta)?;
    let d = model.dim();
    let m2 = d * d;
    let size = m2 + d + 1;
    let mut s = vec![0.0; size * size];
    let inv = 1.0 / th;
    for r in 0..m2 {
        for c in 0..m2 {
            s[r * size + c] = inv * h.ff_at(r, c);
        }
        s[r * size + size - 1] = inv * h.f_eta.as_slice()[r];
        s[(size - 1) * size + r] = inv * h.f_eta.as_slice()[r];
    }
    for i in 0..d {
        s[(m2 + i) * size + m2 + i] = inv;
    }
    s[size * size - 1] = inv * h.eta_eta;
    Ok(SymmetrizerResult {
        size,
        matrix: s,
        theta: th,
        min_eig_full: f64::NAN,
        min_quotient_cone: f64::NAN,
        mode: SymmetrizerMode::Full,
        witness: Vec::new(),
    })
}

fn smallest_eigenpair(m: DMatrix<f64>) -> (f64, Vec<f64>) {
    let eig = SymmetricEigen::new(m);
    let mut k = 0;
    for i in 1..eig.eigenvalues.len() {
        if eig.eigenvalues[i] < eig.eigenvalues[k] {
            k = i;
        }
    }
    (eig.eigenvalues[k], eig.eigenvectors.column(k).iter().copied().collect())
}

/// Minimum of the form over unit vectors `(a⊗n, v, s)` for a fixed unit `n`.
/// The map `(a, v, s) ↦ (a⊗n, v, s)` is an isometry, so the minimum is the
/// smallest eigenvalue of the restricted `(2d+1)`-square matrix.
fn cone_minimum(sym: &SymmetrizerResult, d: usize, n: &[f64]) -> (f64, Vec<f64>) {
    let size = sym.size;
    let k = 2 * d + 1;
    let mut p = DMatrix::zeros(size, k);
    for i in 0..d {
        for b in 0..d {
            p[(i * d + b, i)] = n[b];
        }
        p[(d * d + i, d + i)] = 1.0;
    }
    p[(size - 1, k - 1)] = 1.0;
    let restricted = p.transpose() * sym.dmatrix() * &p;
    let (val, y) = smallest_eigenpair(restricted);
    let x = &p * DMatrix::from_column_slice(k, 1, &y);
    let mut x: Vec<f64> = x.iter().copied().collect();
    let nx = vec_norm(&x);
    x.iter_mut().for_each(|v| *v /= nx);
    (val, x)
}

const CONE_REFINE_STEPS: usize = 50;

/// Positivity of the symmetrizer at `u`: smallest eigenvalue, and minimum of
/// the form over the wave cone from `n_dirs` low-discrepancy normals followed
/// by coordinate descent on the worst one.
pub fn check_symmetrizability(
    model: &EnergyModel,
    u: &State,
    mode: SymmetrizerMode,
    n_dirs: usize,
    seed: u64,
) -> Result<SymmetrizerResult> {
    require_admissible(model, u)?;
    let mut res = symmetrizer_matrix(model, &u.f, u.eta)?;
    res.mode = mode;
    let (lmin, evec) = smallest_eigenpair(res.dmatrix());
    res.min_eig_full = lmin;
    let d = model.dim();

    let dirs: Vec<Vec<f64>> = if d == 1 {
        vec![vec![1.0]]
    } else {
        (0..n_dirs.max(1) as u64).map(|i| sphere_point(&halton(i + seed, d), d)).collect()
    };
    let vals: Vec<(f64, Vec<f64>)> = dirs.par_iter().map(|n| cone_minimum(&res, d, n)).collect();
    let mut best = 0;
    for i in 1..vals.len() {
        if vals[i].0 < vals[best].0 {
            best = i;
        }
    }
    let mut n = dirs[best].clone();
    let (mut val, mut wit) = vals[best].clone();
    if d > 1 {
        let mut step = 0.1;
        for _ in 0..CONE_REFINE_STEPS {
            let mut improved = false;
            for k in 0..d {
                for sgn in [1.0, -1.0] {
                    let mut trial = n.clone();
                    trial[k] += sgn * step;
                    let nn = vec_norm(&trial);
                    trial.iter_mut().for_each(|x| *x /= nn);
                    let (tv, tw) = cone_minimum(&res, d, &trial);
                    if tv < val {
                        val = tv;
                        wit = tw;
                        n = trial;
                        improved = true;
                    }
                }
            }
            if !improved {
                step *= 0.5;
            }
        }
    }
    res.min_quotient_cone = val;
    res.witness = match mode {
        SymmetrizerMode::Full => evec,
        SymmetrizerMode::WaveCone => wit,
    };
    Ok(res)
}

/// Finite-difference Jacobian of the directional flux with respect to the
/// conserved variables `(F, v, E)`, inverting `A` by entropy recovery.
pub fn flux_jacobian(model: &EnergyModel, u: &State, n: &[f64]) -> Result<DMatrix<f64>> {
    require_admissible(model, u)?;
    if n.len() != model.dim() {
        return Err(Error::InvalidParameter("direction has the wrong dimension".into()));
    }
    let s = BalanceLawStructure::new(model.clone());
    let w = s.conserved(u)?;
    let m = w.len();
    let mut jac = DMatrix::zeros(m, m);
    for k in 0..m {
        let step = 1e-6 * w[k].abs().max(1.0);
        let mut wp = w.clone();
        let mut wm = w.clone();
        wp[k] += step;
        wm[k] -= step;
        let fp = s.directional_flux(&s.primitive(&wp, Some(u.eta))?, n)?;
        let fm = s.directional_flux(&s.primitive(&wm, Some(u.eta))?, n)?;
        for r in 0..m {
            jac[(r, k)] = (fp[r] - fm[r]) / (2.0 * step);
        }
    }
    Ok(jac)
}

/// Eigenvalues `(re, im)` of a square matrix.
pub fn eigenvalues(m: &DMatrix<f64>) -> Vec<(f64, f64)> {
    m.complex_eigenvalues().iter().map(|z| (z.re, z.im)).collect()
}

/// Safety factor applied to wave-speed estimates.
pub const WAVE_SPEED_SAFETY: f64 = 1.1;

/// Upper estimate of the characteristic speeds at `u`: square roots of the
/// acoustic-tensor eigenvalues over the coordinate directions, times 1.1.
pub fn max_wave_speed(model: &EnergyModel, u: &State) -> Result<f64> {
    require_admissible(model, u)?;
    let h = model.hessian(&u.f, u.eta)?;
    Ok(WAVE_SPEED_SAFETY * acoustic_speed(&h, model.dim()))
}

/// `max_α sqrt(ρ(A(e_α)))` without the safety factor.
pub(crate) fn acoustic_speed(h: &crate::constitutive::HessianBlock, d: usize) -> f64 {
    let mut c2 = 0.0_f64;
    let mut n = vec![0.0; d];
    for a in 0..d {
        n.iter_mut().for_each(|x| *x = 0.0);
        n[a] = 1.0;
        let at = h.acoustic_tensor(&n);
        let rho = if d == 1 {
            at[0].abs()
        } else {
            let eig = SymmetricEigen::new(DMatrix::from_row_slice(d, d, &at));
            eig.eigenvalues.iter().fold(0.0_f64, |m, v| m.max(v.abs()))
        };
        c2 = c2.max(rho);
    }
    c2.sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::constitutive::{Quadratic, RankOneDefective};

    #[test]
    fn multiplier_examples() {
        let m = Quadratic::model(1, 1.0);
        let g = |f: f64, v: f64, eta: f64| multiplier_g(&m, &State::new(Mat::from_slice(1, &[f]), vec![v], eta)).unwrap();
        assert_eq!(g(0.0, 0.0, 0.0), vec![0.0, 0.0, -1.0]);
        assert_eq!(g(1.0, 2.0, 0.0), vec![1.0, 2.0, -1.0]);
        assert_eq!(g(0.0, 0.0, 1.0), vec![0.0, 0.0, -0.5]);
    }

    #[test]
    fn symmetrizer_is_scaled_identity_for_quadratic() {
        let m = Quadratic::model(2, 1.0);
        let s = symmetrizer_matrix(&m, &Mat::zeros(2), 1.0).unwrap();
        for r in 0..s.size {
            for c in 0..s.size {
                let e = if r == c { 0.5 } else { 0.0 };
                assert!((s.at(r, c) - e).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn wave_cone_detects_rank_one_defect() {
        let m = RankOneDefective::model(2, 2.0, &[1.0, 0.0], &[0.0, 1.0], 1.0).unwrap();
        let r = check_symmetrizability(&m, &State::rest(2), SymmetrizerMode::WaveCone, 256, 0).unwrap();
        assert!((r.min_quotient_cone + 1.0).abs() < 1e-8, "{}", r.min_quotient_cone);
        assert!((r.quadratic_form(&r.witness) - r.min_quotient_cone).abs() < 1e-10);
        assert!(r.witness[1].abs() > 1.0 - 1e-6);
    }

    #[test]
    fn linear_wave_speeds() {
        let m = Quadratic::model(1, 1.0);
        let j = flux_jacobian(&m, &State::rest(1), &[1.0]).unwrap();
        let mut ev: Vec<f64> = eigenvalues(&j).iter().map(|z| z.0).collect();
        ev.sort_by(|a, b| a.partial_cmp(b).unwrap());
        for (a, b) in ev.iter().zip([-1.0, 0.0, 1.0]) {
            assert!((a - b).abs() < 1e-6);
        }
        assert!((max_wave_speed(&m, &State::rest(1)).unwrap() - 1.1).abs() < 1e-12);
        let k4 = Quadratic::scaled(1, 1.0, 4.0);
        assert!((max_wave_speed(&k4, &State::rest(1)).unwrap() - 2.2).abs() < 1e-12);
    }
}
