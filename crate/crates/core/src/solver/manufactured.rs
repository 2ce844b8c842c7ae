use std::f64::consts::PI;
use std::sync::Arc;

use crate::constitutive::{EnergyModel, State};
use crate::error::{Error, Result};
use crate::fields::{spectral_derivative, Grid};
use crate::symmetrizer::BalanceLawStructure;
use crate::tensor::Mat;

use super::{FlowState, SpaceTimeSource};

/// A classical solution with accessible time derivatives.
pub trait Reference: Send + Sync {
    fn dim(&self) -> usize;
    fn state(&self, t: f64, x: &[f64]) -> State;
    /// `(∂tF̄, ∂tv̄, ∂tη̄)`, if known.
    fn time_derivative(&self, t: f64, x: &[f64]) -> Option<(Mat, Vec<f64>, f64)>;
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ManufacturedKind {
    /// Exact traveling wave of the quadratic model, no sources.
    LinearWave,
    /// Smooth periodic `(ȳ, η̄)` ansatz with the residual returned as sources.
    Mms,
}

impl ManufacturedKind {
    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "linear-wave" | "linear_wave" | "wave" => Some(ManufacturedKind::LinearWave),
            "mms" => Some(ManufacturedKind::Mms),
            _ => None,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            ManufacturedKind::LinearWave => "linear-wave",
            ManufacturedKind::Mms => "mms",
        }
    }
}

/// Linear wave: `F = I + A cos(2π(x₁ - ct)) e₁⊗e₁`, `v = -cA cos(2π(x₁ - ct)) e₁`,
/// `η = 0`, `c = √stiffness`.
///
/// MMS: `ȳ₁ = x₁ + (A/2π) sin(2πx₁) sin(2πt)`, `η̄ = B sin(2πx₁) e^{-t}`.
#[derive(Clone, Debug)]
pub struct ManufacturedSolution {
    pub kind: ManufacturedKind,
    pub model: EnergyModel,
    pub amplitude: f64,
    pub entropy_amplitude: f64,
    speed: f64,
}

pub fn manufactured_solution(kind: ManufacturedKind, model: &EnergyModel, amplitude: f64, entropy_amplitude: f64) -> Result<ManufacturedSolution> {
    if !amplitude.is_finite() || !entropy_amplitude.is_finite() {
        return Err(Error::InvalidParameter("non-finite amplitude".into()));
    }
    let mut speed = 0.0;
    if kind == ManufacturedKind::LinearWave {
        let spec = model.spec().filter(|s| s.name == "quadratic").ok_or_else(|| {
            Error::InvalidParameter("linear-wave requires the quadratic model".into())
        })?;
        let k: f64 = spec.get("stiffness").and_then(|v| v.parse().ok()).unwrap_or(1.0);
        speed = k.sqrt();
    }
    let m = ManufacturedSolution { kind, model: model.clone(), amplitude, entropy_amplitude, speed };
    let d = model.dim();
    for i in 0..16 {
        let x = vec![i as f64 / 16.0; d];
        let u = m.state(0.0, &x);
        model.temperature(&u.f, u.eta)?;
    }
    Ok(m)
}

impl ManufacturedSolution {
    fn e1(&self) -> Mat {
        let d = self.model.dim();
        let mut e = Mat::zeros(d);
        e.set(0, 0, 1.0);
        e
    }

    /// `(∂₁F̄, ∂₁η̄)`; the fields depend on `x₁` only.
    fn x1_derivative(&self, t: f64, x: &[f64]) -> (Mat, f64) {
        let a = self.amplitude;
        match self.kind {
            ManufacturedKind::LinearWave => {
                let ph = 2.0 * PI * (x[0] - self.speed * t);
                (self.e1() * (-2.0 * PI * a * ph.sin()), 0.0)
            }
            ManufacturedKind::Mms => {
                let ph = 2.0 * PI * x[0];
                let om = 2.0 * PI * t;
                let b = self.entropy_amplitude;
                (self.e1() * (-2.0 * PI * a * ph.sin() * om.sin()), 2.0 * PI * b * ph.cos() * (-t).exp())
            }
        }
    }

    /// Per-equation sources in conservative order; zero for the linear wave.
    pub fn sources(&self, t: f64, x: &[f64], out: &mut [f64]) {
        out.iter_mut().for_each(|v| *v = 0.0);
        if self.kind == ManufacturedKind::LinearWave {
            return;
        }
        let d = self.model.dim();
        let u = self.state(t, x);
        let (_, dv, deta) = self.time_derivative(t, x).expect("closed form");
        let h = self.model.density().hessian(&u.f, u.eta);
        let (df, deta1) = self.x1_derivative(t, x);
        let th = self.model.density().temperature(&u.f, u.eta);
        let mut sv = vec![0.0; d];
        for i in 0..d {
            // div Σ = ∂₁ Σ_{i1}
            let r = i * d;
            let mut div = h.f_eta.as_slice()[r] * deta1;
            for c in 0..d * d {
                div += h.ff_at(r, c) * df.as_slice()[c];
            }
            sv[i] = dv[i] - div;
            out[d * d + i] = sv[i];
        }
        out[d * d + d] = u.v.iter().zip(&sv).map(|(a, b)| a * b).sum::<f64>() + th * deta;
    }

    /// `θ̄ ∂tη̄`: the energy source net of the work of the momentum source.
    pub fn entropy_source(&self, t: f64, x: &[f64]) -> f64 {
        let u = self.state(t, x);
        let (_, _, deta) = self.time_derivative(t, x).expect("closed form");
        self.model.density().temperature(&u.f, u.eta) * deta
    }

    pub fn source_fn(&self) -> Option<SpaceTimeSource> {
        match self.kind {
            ManufacturedKind::LinearWave => None,
            ManufacturedKind::Mms => {
                let me = self.clone();
                Some(Arc::new(move |t, x, out| me.sources(t, x, out)))
            }
        }
    }

    pub fn sample(&self, grid: Grid, t: f64) -> Result<FlowState> {
        FlowState::from_primitive(&self.model, grid, |x| self.state(t, x))
    }

    /// Max over cells and equations of `∂tA(Ū) + ∂α fα(Ū) - S` at time `t`,
    /// with exact time derivatives and spectral space derivatives on `grid`.
    pub fn pointwise_residual(&self, grid: Grid, t: f64) -> Result<f64> {
        let d = self.model.dim();
        if grid.dim() != d {
            return Err(Error::GridMismatch("grid and model dimensions differ".into()));
        }
        let s = BalanceLawStructure::new(self.model.clone());
        let m = s.state_dim();
        let cells = grid.cells();
        let mut res = vec![0.0; cells * m];
        let mut flux = vec![vec![0.0; cells * m]; d];
        for c in 0..cells {
            let x = grid.center(c);
            let x = &x[..d];
            let u = self.state(t, x);
            let (df, dv, deta) = self.time_derivative(t, x).expect("closed form");
            let sig = self.model.stress(&u.f, u.eta)?;
            let th = self.model.temperature(&u.f, u.eta)?;
            let r = &mut res[c * m..(c + 1) * m];
            r[..d * d].copy_from_slice(&df.as_slice()[..d * d]);
            r[d * d..d * d + d].copy_from_slice(&dv);
            r[m - 1] = u.v.iter().zip(&dv).map(|(a, b)| a * b).sum::<f64>() + sig.dot(&df) + th * deta;
            let mut src = vec![0.0; m];
            self.sources(t, x, &mut src);
            for k in 0..m {
                r[k] -= src[k];
            }
            for a in 0..d {
                let f = s.flux(&u, a)?;
                flux[a][c * m..(c + 1) * m].copy_from_slice(&f);
            }
        }
        for a in 0..d {
            for k in 0..m {
                let comp: Vec<f64> = (0..cells).map(|c| flux[a][c * m + k]).collect();
                let der = spectral_derivative(grid, &comp, a)?;
                for c in 0..cells {
                    res[c * m + k] += der[c];
                }
            }
        }
        Ok(res.iter().fold(0.0_f64, |w, x| w.max(x.abs())))
    }
}

impl Reference for ManufacturedSolution {
    fn dim(&self) -> usize {
        self.model.dim()
    }

    fn state(&self, t: f64, x: &[f64]) -> State {
        let d = self.model.dim();
        let a = self.amplitude;
        let mut f = Mat::identity(d);
        let mut v = vec![0.0; d];
        let eta;
        match self.kind {
            ManufacturedKind::LinearWave => {
                let c = (2.0 * PI * (x[0] - self.speed * t)).cos();
                f.set(0, 0, 1.0 + a * c);
                v[0] = -self.speed * a * c;
                eta = 0.0;
            }
            ManufacturedKind::Mms => {
                let ph = 2.0 * PI * x[0];
                let om = 2.0 * PI * t;
                f.set(0, 0, 1.0 + a * ph.cos() * om.sin());
                v[0] = a * ph.sin() * om.cos();
                eta = self.entropy_amplitude * ph.sin() * (-t).exp();
            }
        }
        State::new(f, v, eta)
    }

    fn time_derivative(&self, t: f64, x: &[f64]) -> Option<(Mat, Vec<f64>, f64)> {
        let d = self.model.dim();
        let a = self.amplitude;
        let mut dv = vec![0.0; d];
        match self.kind {
            ManufacturedKind::LinearWave => {
                let c = self.speed;
                let s = (2.0 * PI * (x[0] - c * t)).sin();
                dv[0] = -2.0 * PI * c * c * a * s;
                Some((self.e1() * (2.0 * PI * c * a * s), dv, 0.0))
            }
            ManufacturedKind::Mms => {
                let ph = 2.0 * PI * x[0];
                let om = 2.0 * PI * t;
                dv[0] = -2.0 * PI * a * ph.sin() * om.sin();
                let deta = -self.entropy_amplitude * ph.sin() * (-t).exp();
                Some((self.e1() * (2.0 * PI * a * ph.cos() * om.cos()), dv, deta))
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::constitutive::{build_model, ModelSpec, Quadratic};

    #[test]
    fn linear_wave_satisfies_the_system() {
        let m = Quadratic::model(1, 1.0);
        let w = manufactured_solution(ManufacturedKind::LinearWave, &m, 0.1, 0.0).unwrap();
        let g = Grid::new(1, 256).unwrap();
        for t in [0.0, 0.3, 0.77] {
            assert!(w.pointwise_residual(g, t).unwrap() < 1e-10);
        }
        let pl = build_model(&ModelSpec::new("powerlaw")).unwrap();
        assert!(manufactured_solution(ManufacturedKind::LinearWave, &pl, 0.1, 0.0).is_err());
    }

    #[test]
    fn mms_sources_close_the_system() {
        for name in ["quadratic", "powerlaw", "polyconvex"] {
            let m = build_model(&ModelSpec::new(name)).unwrap();
            let w = manufactured_solution(ManufacturedKind::Mms, &m, 0.1, 0.1).unwrap();
            let g = Grid::new(2, 64).unwrap();
            assert!(w.pointwise_residual(g, 0.4).unwrap() < 1e-8, "{name}");
        }
    }
}
