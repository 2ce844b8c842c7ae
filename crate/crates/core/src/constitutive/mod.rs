//! Stored-energy models `e(F, η)` and the quantities derived from them:
//! stress `Σ = ∂e/∂F`, temperature `θ = ∂e/∂η`, the Hessian blocks, relative
//! quantities and the model audits.
//!
//! New models plug in through [`EnergyDensity`]; [`EnergyModel`] wraps any
//! implementation with input validation and admissibility checks.

mod audit;
mod catalogue;
mod tilde;

pub use audit::{
    appendix_a_check, check_growth_hypotheses, lemma41_bounds_report, AppendixAReport, AuditOptions,
    ConstantFit, GrowthReport, Lemma41Report,
};
pub use catalogue::{build_model, model_keys, ModelSpec, PolyconvexDet, PowerLawCoupled, Quadratic, RankOneDefective};
pub use tilde::{aux_energy, tilde_energy, AuxEnergy, TildeEnergy};

use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::tensor::Mat;

/// Second derivatives of `e` at one state. `ff` is the `d² x d²` block with
/// rows and columns indexed by the row-major flattening of `F`.
#[derive(Clone, Debug, PartialEq)]
pub struct HessianBlock {
    pub d: usize,
    pub ff: Vec<f64>,
    pub f_eta: Mat,
    pub eta_eta: f64,
}

impl HessianBlock {
    pub fn zeros(d: usize) -> Self {
        HessianBlock { d, ff: vec![0.0; d.pow(4)], f_eta: Mat::zeros(d), eta_eta: 0.0 }
    }

    #[inline]
    pub fn ff_at(&self, r: usize, c: usize) -> f64 {
        self.ff[r * self.d * self.d + c]
    }

    /// `e_FF ξ` as a matrix.
    pub fn apply_ff(&self, xi: &Mat) -> Mat {
        let m = self.d * self.d;
        let x = xi.as_slice();
        let mut out = Mat::zeros(self.d);
        for r in 0..m {
            out.as_mut_slice()[r] = (0..m).map(|c| self.ff[r * m + c] * x[c]).sum();
        }
        out
    }

    /// `L[ξ, ξ] = e_FF ξ₁:ξ₁ + 2 e_Fη:ξ₁ ξ₂ + e_ηη ξ₂²`.
    pub fn quad(&self, xi: &Mat, s: f64) -> f64 {
        self.apply_ff(xi).dot(xi) + 2.0 * self.f_eta.dot(xi) * s + self.eta_eta * s * s
    }

    /// Acoustic tensor `A_ij(n) = e_{F_iα F_jβ} n_α n_β`.
    pub fn acoustic_tensor(&self, n: &[f64]) -> Vec<f64> {
        let d = self.d;
        let mut a = vec![0.0; d * d];
        for i in 0..d {
            for j in 0..d {
                let mut s = 0.0;
                for al in 0..d {
                    for be in 0..d {
                        s += self.ff_at(i * d + al, j * d + be) * n[al] * n[be];
                    }
                }
                a[i * d + j] = s;
            }
        }
        a
    }

    /// Full `(d²+1) x (d²+1)` Hessian in `(F, η)`.
    pub fn to_dmatrix(&self) -> nalgebra::DMatrix<f64> {
        let m = self.d * self.d;
        let mut h = nalgebra::DMatrix::zeros(m + 1, m + 1);
        for r in 0..m {
            for c in 0..m {
                h[(r, c)] = self.ff[r * m + c];
            }
            h[(r, m)] = self.f_eta.as_slice()[r];
            h[(m, r)] = self.f_eta.as_slice()[r];
        }
        h[(m, m)] = self.eta_eta;
        h
    }

    pub fn sub_scaled(&mut self, other: &HessianBlock, s: f64) {
        for (a, b) in self.ff.iter_mut().zip(&other.ff) {
            *a -= s * b;
        }
        self.f_eta -= other.f_eta * s;
        self.eta_eta -= s * other.eta_eta;
    }
}

/// Extension interface for stored-energy densities. Implementations supply
/// raw values and derivatives; validation lives in [`EnergyModel`].
pub trait EnergyDensity: fmt::Debug + Send + Sync {
    fn name(&self) -> String;
    fn dim(&self) -> usize;
    /// Growth exponents `(p, q)` in `F` and `η`.
    fn growth(&self) -> (f64, f64);
    /// Open lower bound of the admissible entropy range.
    fn eta_min(&self) -> f64 {
        f64::NEG_INFINITY
    }
    /// Parameters that rebuild this model through [`build_model`], if it is
    /// part of the catalogue.
    fn spec(&self) -> Option<ModelSpec> {
        None
    }
    fn energy(&self, f: &Mat, eta: f64) -> f64;
    fn stress(&self, f: &Mat, eta: f64) -> Mat;
    fn temperature(&self, f: &Mat, eta: f64) -> f64;
    fn hessian(&self, f: &Mat, eta: f64) -> HessianBlock;
}

#[derive(Clone)]
pub struct EnergyModel {
    inner: Arc<dyn EnergyDensity>,
}

impl fmt::Debug for EnergyModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "EnergyModel({:?})", self.inner)
    }
}

/// A thermodynamic state `U = (F, v, η)`.
#[derive(Clone, Debug, PartialEq)]
pub struct State {
    pub f: Mat,
    pub v: Vec<f64>,
    pub eta: f64,
}

impl State {
    pub fn new(f: Mat, v: Vec<f64>, eta: f64) -> Self {
        assert_eq!(f.dim(), v.len());
        State { f, v, eta }
    }

    pub fn rest(d: usize) -> Self {
        State { f: Mat::zeros(d), v: vec![0.0; d], eta: 0.0 }
    }

    pub fn dim(&self) -> usize {
        self.f.dim()
    }

    /// Flatten as `(F row-major, v, η)`.
    pub fn to_vec(&self) -> Vec<f64> {
        let mut out = self.f.as_slice().to_vec();
        out.extend_from_slice(&self.v);
        out.push(self.eta);
        out
    }

    pub fn from_slice(d: usize, u: &[f64]) -> Self {
        assert_eq!(u.len(), d * d + d + 1);
        State { f: Mat::from_slice(d, &u[..d * d]), v: u[d * d..d * d + d].to_vec(), eta: u[d * d + d] }
    }

    pub fn is_finite(&self) -> bool {
        self.f.is_finite() && self.v.iter().all(|x| x.is_finite()) && self.eta.is_finite()
    }
}

impl EnergyModel {
    pub fn new<E: EnergyDensity + 'static>(e: E) -> Self {
        EnergyModel { inner: Arc::new(e) }
    }

    pub fn from_arc(inner: Arc<dyn EnergyDensity>) -> Self {
        EnergyModel { inner }
    }

    pub fn density(&self) -> &dyn EnergyDensity {
        self.inner.as_ref()
    }

    pub fn name(&self) -> String {
        self.inner.name()
    }

    pub fn dim(&self) -> usize {
        self.inner.dim()
    }

    pub fn growth(&self) -> (f64, f64) {
        self.inner.growth()
    }

    pub fn eta_min(&self) -> f64 {
        self.inner.eta_min()
    }

    pub fn spec(&self) -> Option<ModelSpec> {
        self.inner.spec()
    }

    fn check_input(&self, f: &Mat, eta: f64) -> Result<()> {
        if f.dim() != self.dim() {
            return Err(Error::InvalidParameter(format!(
                "state dimension {} does not match model dimension {}",
                f.dim(),
                self.dim()
            )));
        }
        if !f.is_finite() || !eta.is_finite() {
            return Err(Error::NonFinite("state".into()));
        }
        Ok(())
    }

    fn finite(x: f64, what: &str) -> Result<f64> {
        if x.is_finite() {
            Ok(x)
        } else {
            Err(Error::NonFinite(what.into()))
        }
    }

    /// Admissible states: finite, `η` above the model bound and `θ > 0`.
    pub fn is_admissible(&self, f: &Mat, eta: f64) -> bool {
        f.dim() == self.dim()
            && f.is_finite()
            && eta.is_finite()
            && eta > self.eta_min()
            && self.inner.temperature(f, eta) > 0.0
            && self.inner.energy(f, eta).is_finite()
    }

    pub fn energy(&self, f: &Mat, eta: f64) -> Result<f64> {
        self.check_input(f, eta)?;
        Self::finite(self.inner.energy(f, eta), "energy")
    }

    pub fn stress(&self, f: &Mat, eta: f64) -> Result<Mat> {
        self.check_input(f, eta)?;
        let s = self.inner.stress(f, eta);
        if s.is_finite() {
            Ok(s)
        } else {
            Err(Error::NonFinite("stress".into()))
        }
    }

    /// `θ = ∂e/∂η`; fails on states outside the admissible region.
    pub fn temperature(&self, f: &Mat, eta: f64) -> Result<f64> {
        self.check_input(f, eta)?;
        let th = Self::finite(self.inner.temperature(f, eta), "temperature")?;
        if th <= 0.0 || eta <= self.eta_min() {
            return Err(Error::InadmissibleState(format!("theta = {th} at eta = {eta}")));
        }
        Ok(th)
    }

    /// `∂e/∂η` without the admissibility requirement.
    pub fn e_eta(&self, f: &Mat, eta: f64) -> Result<f64> {
        self.check_input(f, eta)?;
        Self::finite(self.inner.temperature(f, eta), "e_eta")
    }

    pub fn hessian(&self, f: &Mat, eta: f64) -> Result<HessianBlock> {
        self.check_input(f, eta)?;
        let h = self.inner.hessian(f, eta);
        if h.ff.iter().all(|x| x.is_finite()) && h.f_eta.is_finite() && h.eta_eta.is_finite() {
            Ok(h)
        } else {
            Err(Error::NonFinite("hessian".into()))
        }
    }

    /// `e(z|z̄) = e(z) - e(z̄) - e_F(z̄):(F-F̄) - e_η(z̄)(η-η̄)`.
    pub fn relative_energy(&self, f: &Mat, eta: f64, fb: &Mat, etab: f64) -> Result<f64> {
        self.check_input(f, eta)?;
        self.check_input(fb, etab)?;
        let e = &self.inner;
        let r = e.energy(f, eta)
            - e.energy(fb, etab)
            - e.stress(fb, etab).dot(&(*f - *fb))
            - e.temperature(fb, etab) * (eta - etab);
        Self::finite(r, "relative energy")
    }

    /// `Σ(z|z̄) = Σ(z) - Σ(z̄) - e_FF(z̄)(F-F̄) - e_Fη(z̄)(η-η̄)`.
    pub fn relative_stress(&self, f: &Mat, eta: f64, fb: &Mat, etab: f64) -> Result<Mat> {
        self.check_input(f, eta)?;
        self.check_input(fb, etab)?;
        let e = &self.inner;
        let h = e.hessian(fb, etab);
        let r = e.stress(f, eta) - e.stress(fb, etab) - h.apply_ff(&(*f - *fb)) - h.f_eta * (eta - etab);
        if r.is_finite() {
            Ok(r)
        } else {
            Err(Error::NonFinite("relative stress".into()))
        }
    }

    /// `θ(z|z̄) = θ(z) - θ(z̄) - θ_F(z̄):(F-F̄) - θ_η(z̄)(η-η̄)` with
    /// `θ_F = e_Fη`, `θ_η = e_ηη`.
    pub fn relative_temperature(&self, f: &Mat, eta: f64, fb: &Mat, etab: f64) -> Result<f64> {
        self.check_input(f, eta)?;
        self.check_input(fb, etab)?;
        let e = &self.inner;
        let h = e.hessian(fb, etab);
        let r = e.temperature(f, eta)
            - e.temperature(fb, etab)
            - h.f_eta.dot(&(*f - *fb))
            - h.eta_eta * (eta - etab);
        Self::finite(r, "relative temperature")
    }

    /// `½|v - v̄|² + e(F, η | F̄, η̄)`.
    pub fn relative_entropy_density(&self, u: &State, ub: &State) -> Result<f64> {
        if u.v.len() != self.dim() || ub.v.len() != self.dim() {
            return Err(Error::InvalidParameter("velocity dimension mismatch".into()));
        }
        let kin: f64 = u.v.iter().zip(&ub.v).map(|(a, b)| 0.5 * (a - b) * (a - b)).sum();
        Ok(kin + self.relative_energy(&u.f, u.eta, &ub.f, ub.eta)?)
    }

    /// Largest relative discrepancy between the analytic first and second
    /// derivatives and centered differences with step `h` (scaled by the state
    /// magnitude). The error is `|analytic - fd| / max(1, |analytic|)`.
    pub fn finite_difference_error(&self, f: &Mat, eta: f64, h: f64) -> Result<f64> {
        self.check_input(f, eta)?;
        let e = &self.inner;
        let m = self.dim() * self.dim();
        let mut worst = 0.0_f64;
        let rel = |a: f64, b: f64| (a - b).abs() / a.abs().max(1.0);
        let sig = e.stress(f, eta);
        let th = e.temperature(f, eta);
        let hs = e.hessian(f, eta);
        for k in 0..m {
            let step = h * f.as_slice()[k].abs().max(1.0);
            let mut fp = *f;
            let mut fm = *f;
            fp.as_mut_slice()[k] += step;
            fm.as_mut_slice()[k] -= step;
            let fd = (e.energy(&fp, eta) - e.energy(&fm, eta)) / (2.0 * step);
            worst = worst.max(rel(sig.as_slice()[k], fd));
            let dsig = (e.stress(&fp, eta) - e.stress(&fm, eta)) * (0.5 / step);
            for r in 0..m {
                worst = worst.max(rel(hs.ff_at(r, k), dsig.as_slice()[r]));
            }
            let dth = (e.temperature(&fp, eta) - e.temperature(&fm, eta)) / (2.0 * step);
            worst = worst.max(rel(hs.f_eta.as_slice()[k], dth));
        }
        let step = h * eta.abs().max(1.0);
        let fd = (e.energy(f, eta + step) - e.energy(f, eta - step)) / (2.0 * step);
        worst = worst.max(rel(th, fd));
        let dth = (e.temperature(f, eta + step) - e.temperature(f, eta - step)) / (2.0 * step);
        worst = worst.max(rel(hs.eta_eta, dth));
        let dsig = (e.stress(f, eta + step) - e.stress(f, eta - step)) * (0.5 / step);
        for r in 0..m {
            worst = worst.max(rel(hs.f_eta.as_slice()[r], dsig.as_slice()[r]));
        }
        Ok(worst)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quadratic_values() {
        let m = Quadratic::model(2, 1.0);
        let f = Mat::identity(2);
        assert!((m.energy(&f, 0.0).unwrap() - 1.0).abs() < 1e-15);
        assert!((m.temperature(&f, 0.0).unwrap() - 1.0).abs() < 1e-15);
        assert!(matches!(m.temperature(&f, -1.0), Err(Error::InadmissibleState(_))));
        assert!(matches!(m.energy(&f, f64::NAN), Err(Error::NonFinite(_))));
    }

    #[test]
    fn relative_energy_vanishes_on_diagonal() {
        let m = PowerLawCoupled::model(2, 4.0, 3.0, 0.1, 1.0, 5.0).unwrap();
        let f = Mat::from_slice(2, &[0.3, -0.2, 0.5, 1.1]);
        assert!(m.relative_energy(&f, 0.7, &f, 0.7).unwrap().abs() < 1e-14);
        assert!(m.relative_stress(&f, 0.7, &f, 0.7).unwrap().max_abs() < 1e-14);
        assert!(m.relative_temperature(&f, 0.7, &f, 0.7).unwrap().abs() < 1e-14);
    }
}
