//! Modified energy `ẽ = e - c₁|V_p(F)|² - c₂|V_q(η)|²`.

use super::{EnergyDensity, EnergyModel, HessianBlock};
use crate::error::{Error, Result};
use crate::tensor::Mat;

#[derive(Clone, Debug)]
pub struct TildeEnergy {
    pub base: EnergyModel,
    pub c1: f64,
    pub c2: f64,
}

pub fn tilde_energy(model: &EnergyModel, c1: f64, c2: f64) -> Result<EnergyModel> {
    if !(c1.is_finite() && c2.is_finite()) || c1 < 0.0 || c2 < 0.0 {
        return Err(Error::InvalidParameter("c1 and c2 must be finite and nonnegative".into()));
    }
    Ok(EnergyModel::new(TildeEnergy { base: model.clone(), c1, c2 }))
}

/// Value, radial derivative factor and Hessian factors of `g(r) = r^s + r²`
/// viewed as a function of the vector `x` with `|x| = r`:
/// `∇g = a x`, `∇²g = a I + b x⊗x`.
fn power_parts(r: f64, s: f64) -> (f64, f64, f64) {
    let value = r.powf(s) + r * r;
    if r == 0.0 {
        let a = if s == 2.0 { 4.0 } else { 2.0 };
        return (value, a, 0.0);
    }
    let a = s * r.powf(s - 2.0) + 2.0;
    let b = s * (s - 2.0) * r.powf(s - 4.0);
    (value, a, b)
}

impl EnergyDensity for TildeEnergy {
    fn name(&self) -> String {
        format!("tilde({})", self.base.name())
    }
    fn dim(&self) -> usize {
        self.base.dim()
    }
    fn growth(&self) -> (f64, f64) {
        self.base.growth()
    }
    fn eta_min(&self) -> f64 {
        self.base.eta_min()
    }
    fn energy(&self, f: &Mat, eta: f64) -> f64 {
        let (p, q) = self.growth();
        let (gf, _, _) = power_parts(f.norm(), p);
        let (ge, _, _) = power_parts(eta.abs(), q);
        self.base.density().energy(f, eta) - self.c1 * gf - self.c2 * ge
    }
    fn stress(&self, f: &Mat, eta: f64) -> Mat {
        let (p, _) = self.growth();
        let (_, a, _) = power_parts(f.norm(), p);
        self.base.density().stress(f, eta) - *f * (self.c1 * a)
    }
    fn temperature(&self, f: &Mat, eta: f64) -> f64 {
        let (_, q) = self.growth();
        let (_, a, _) = power_parts(eta.abs(), q);
        self.base.density().temperature(f, eta) - self.c2 * a * eta
    }
    fn hessian(&self, f: &Mat, eta: f64) -> HessianBlock {
        let (p, q) = self.growth();
        let mut h = self.base.density().hessian(f, eta);
        let m = self.dim() * self.dim();
        let (_, a, b) = power_parts(f.norm(), p);
        let x = f.as_slice();
        for r in 0..m {
            for c in 0..m {
                h.ff[r * m + c] -= self.c1 * (b * x[r] * x[c] + if r == c { a } else { 0.0 });
            }
        }
        let (_, a, b) = power_parts(eta.abs(), q);
        h.eta_eta -= self.c2 * (a + b * eta * eta);
        h
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::constitutive::{PowerLawCoupled, Quadratic};

    #[test]
    fn quadratic_tilde_at_identity() {
        let m = tilde_energy(&Quadratic::model(2, 1.0), 0.1, 0.1).unwrap();
        assert!((m.energy(&Mat::identity(2), 0.0).unwrap() - 0.6).abs() < 1e-14);
    }

    #[test]
    fn tilde_derivatives_match_finite_differences() {
        let base = PowerLawCoupled::model(2, 4.0, 3.0, 0.2, 1.0, 5.0).unwrap();
        let m = tilde_energy(&base, 0.05, 0.07).unwrap();
        for k in 0..8 {
            let f = Mat::from_slice(2, &[0.3 * k as f64, -0.2, 0.1 * k as f64, 0.7]);
            let eta = -0.5 + 0.2 * k as f64;
            assert!(m.finite_difference_error(&f, eta, 1e-5).unwrap() < 1e-6);
        }
    }
}

/// `f(F, η) = |V_p(F)|² + |V_q(η)|²` as an energy density, used as the test
/// function of the growth lemma and as the correction inside `ẽ`.
#[derive(Clone, Debug)]
pub struct AuxEnergy {
    pub d: usize,
    pub p: f64,
    pub q: f64,
}

pub fn aux_energy(d: usize, p: f64, q: f64) -> EnergyModel {
    EnergyModel::new(AuxEnergy { d, p, q })
}

impl EnergyDensity for AuxEnergy {
    fn name(&self) -> String {
        format!("aux(p={}, q={})", self.p, self.q)
    }
    fn dim(&self) -> usize {
        self.d
    }
    fn growth(&self) -> (f64, f64) {
        (self.p, self.q)
    }
    fn energy(&self, f: &Mat, eta: f64) -> f64 {
        power_parts(f.norm(), self.p).0 + power_parts(eta.abs(), self.q).0
    }
    fn stress(&self, f: &Mat, _eta: f64) -> Mat {
        *f * power_parts(f.norm(), self.p).1
    }
    fn temperature(&self, _f: &Mat, eta: f64) -> f64 {
        power_parts(eta.abs(), self.q).1 * eta
    }
    fn hessian(&self, f: &Mat, eta: f64) -> HessianBlock {
        let m = self.d * self.d;
        let (_, a, b) = power_parts(f.norm(), self.p);
        let x = f.as_slice();
        let mut h = HessianBlock::zeros(self.d);
        for r in 0..m {
            for c in 0..m {
                h.ff[r * m + c] = b * x[r] * x[c] + if r == c { a } else { 0.0 };
            }
        }
        let (_, a, b) = power_parts(eta.abs(), self.q);
        h.eta_eta = a + b * eta * eta;
        h
    }
}
