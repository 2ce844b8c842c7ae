//! Built-in stored energies.

use super::{EnergyDensity, EnergyModel, HessianBlock};
use crate::error::{Error, Result};
use crate::tensor::{vec_norm, Mat};

/// Name plus textual parameters; enough to rebuild a catalogue model.
#[derive(Clone, Debug, PartialEq)]
pub struct ModelSpec {
    pub name: String,
    pub params: Vec<(String, String)>,
}

impl ModelSpec {
    pub fn new(name: &str) -> Self {
        ModelSpec { name: name.to_string(), params: Vec::new() }
    }

    pub fn with(mut self, key: &str, value: impl ToString) -> Self {
        self.params.retain(|(k, _)| k != key);
        self.params.push((key.to_string(), value.to_string()));
        self
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.params.iter().find(|(k, _)| k == key).map(|(_, v)| v.as_str())
    }

    fn f64_or(&self, key: &str, default: f64) -> Result<f64> {
        match self.get(key) {
            None => Ok(default),
            Some(s) => s
                .parse::<f64>()
                .ok()
                .filter(|v| v.is_finite())
                .ok_or_else(|| Error::InvalidParameter(format!("{key}={s}"))),
        }
    }

    fn vec_or(&self, key: &str, default: Vec<f64>) -> Result<Vec<f64>> {
        match self.get(key) {
            None => Ok(default),
            Some(s) => s
                .split(',')
                .map(|t| t.trim().parse::<f64>().map_err(|_| Error::InvalidParameter(format!("{key}={s}"))))
                .collect(),
        }
    }

    fn dim_or(&self, default: usize) -> Result<usize> {
        match self.get("dim") {
            None => Ok(default),
            Some(s) => {
                let d: usize = s.parse().map_err(|_| Error::InvalidParameter(format!("dim={s}")))?;
                if (1..=3).contains(&d) {
                    Ok(d)
                } else {
                    Err(Error::InvalidDimension(d))
                }
            }
        }
    }
}

/// Parameter keys accepted by each catalogue model.
pub fn model_keys(name: &str) -> Option<&'static [&'static str]> {
    match name {
        "quadratic" => Some(&["dim", "alpha", "stiffness"]),
        "powerlaw" => Some(&["dim", "p", "q", "kappa", "alpha", "k_adm"]),
        "polyconvex" => Some(&["dim", "gamma", "c4", "alpha"]),
        "rank1defective" => Some(&["dim", "beta", "a", "n", "alpha"]),
        _ => None,
    }
}

/// Build a catalogue model. Names: `quadratic`, `powerlaw`, `polyconvex`,
/// `rank1defective`.
pub fn build_model(spec: &ModelSpec) -> Result<EnergyModel> {
    let keys = model_keys(&spec.name).ok_or_else(|| Error::InvalidParameter(format!("unknown model {}", spec.name)))?;
    for (k, _) in &spec.params {
        if !keys.contains(&k.as_str()) {
            return Err(Error::InvalidParameter(format!("model {} has no parameter {k}", spec.name)));
        }
    }
    match spec.name.as_str() {
        "quadratic" => {
            let d = spec.dim_or(2)?;
            Ok(EnergyModel::new(Quadratic { d, alpha: spec.f64_or("alpha", 1.0)?, stiffness: spec.f64_or("stiffness", 1.0)? }))
        }
        "powerlaw" => PowerLawCoupled::model(
            spec.dim_or(2)?,
            spec.f64_or("p", 4.0)?,
            spec.f64_or("q", 3.0)?,
            spec.f64_or("kappa", 0.1)?,
            spec.f64_or("alpha", 1.0)?,
            spec.f64_or("k_adm", 5.0)?,
        ),
        "polyconvex" => {
            if spec.dim_or(2)? != 2 {
                return Err(Error::InvalidParameter("polyconvex model is defined for dim=2".into()));
            }
            PolyconvexDet::model(spec.f64_or("gamma", 0.5)?, spec.f64_or("c4", 0.05)?, spec.f64_or("alpha", 1.0)?)
        }
        "rank1defective" => {
            let d = spec.dim_or(2)?;
            let e1: Vec<f64> = (0..d).map(|i| if i == 0 { 1.0 } else { 0.0 }).collect();
            let el: Vec<f64> = (0..d).map(|i| if i == d - 1 { 1.0 } else { 0.0 }).collect();
            RankOneDefective::model(
                d,
                spec.f64_or("beta", 0.5)?,
                &spec.vec_or("a", e1)?,
                &spec.vec_or("n", el)?,
                spec.f64_or("alpha", 1.0)?,
            )
        }
        _ => unreachable!(),
    }
}

fn identity_ff(d: usize, s: f64) -> Vec<f64> {
    let m = d * d;
    let mut ff = vec![0.0; m * m];
    for r in 0..m {
        ff[r * m + r] = s;
    }
    ff
}

/// `e = (k/2)|F|² + ½η² + αη`.
#[derive(Clone, Debug, PartialEq)]
pub struct Quadratic {
    pub d: usize,
    pub alpha: f64,
    pub stiffness: f64,
}

impl Quadratic {
    pub fn model(d: usize, alpha: f64) -> EnergyModel {
        EnergyModel::new(Quadratic { d, alpha, stiffness: 1.0 })
    }

    pub fn scaled(d: usize, alpha: f64, stiffness: f64) -> EnergyModel {
        EnergyModel::new(Quadratic { d, alpha, stiffness })
    }
}

impl EnergyDensity for Quadratic {
    fn name(&self) -> String {
        "quadratic".into()
    }
    fn dim(&self) -> usize {
        self.d
    }
    fn growth(&self) -> (f64, f64) {
        (2.0, 2.0)
    }
    fn eta_min(&self) -> f64 {
        -self.alpha
    }
    fn spec(&self) -> Option<ModelSpec> {
        Some(ModelSpec::new("quadratic").with("dim", self.d).with("alpha", self.alpha).with("stiffness", self.stiffness))
    }
    fn energy(&self, f: &Mat, eta: f64) -> f64 {
        0.5 * self.stiffness * f.norm_sq() + 0.5 * eta * eta + self.alpha * eta
    }
    fn stress(&self, f: &Mat, _eta: f64) -> Mat {
        *f * self.stiffness
    }
    fn temperature(&self, _f: &Mat, eta: f64) -> f64 {
        eta + self.alpha
    }
    fn hessian(&self, _f: &Mat, _eta: f64) -> HessianBlock {
        HessianBlock { d: self.d, ff: identity_ff(self.d, self.stiffness), f_eta: Mat::zeros(self.d), eta_eta: 1.0 }
    }
}

/// `e = (1/p)(1+|F|²)^{p/2} + (1/q)(1+η²)^{q/2} + αη + κ tr(F) η`.
///
/// The admissible entropy bound is the root of `h'(η) = |κ| √d K_adm` with
/// `h(η) = (1/q)(1+η²)^{q/2} + αη`, so `θ > 0` whenever `|F| ≤ K_adm` and
/// `η > η_min`.
#[derive(Clone, Debug, PartialEq)]
pub struct PowerLawCoupled {
    pub d: usize,
    pub p: f64,
    pub q: f64,
    pub kappa: f64,
    pub alpha: f64,
    pub k_adm: f64,
    eta_min: f64,
}

impl PowerLawCoupled {
    pub fn model(d: usize, p: f64, q: f64, kappa: f64, alpha: f64, k_adm: f64) -> Result<EnergyModel> {
        Ok(EnergyModel::new(Self::new(d, p, q, kappa, alpha, k_adm)?))
    }

    pub fn new(d: usize, p: f64, q: f64, kappa: f64, alpha: f64, k_adm: f64) -> Result<Self> {
        if !(1..=3).contains(&d) {
            return Err(Error::InvalidDimension(d));
        }
        if !(p >= 2.0 && q >= 2.0 && p >= q) {
            return Err(Error::InvalidParameter(format!("need p >= q >= 2, got p={p}, q={q}")));
        }
        if k_adm <= 0.0 {
            return Err(Error::InvalidParameter("k_adm must be positive".into()));
        }
        let hp = |eta: f64| eta * (1.0 + eta * eta).powf(q / 2.0 - 1.0) + alpha;
        let target = kappa.abs() * (d as f64).sqrt() * k_adm;
        let (mut lo, mut hi) = (-1.0, 1.0);
        while hp(lo) > target {
            lo *= 2.0;
        }
        while hp(hi) < target {
            hi *= 2.0;
        }
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if hp(mid) < target {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        Ok(PowerLawCoupled { d, p, q, kappa, alpha, k_adm, eta_min: hi })
    }
}

impl EnergyDensity for PowerLawCoupled {
    fn name(&self) -> String {
        "powerlaw".into()
    }
    fn dim(&self) -> usize {
        self.d
    }
    fn growth(&self) -> (f64, f64) {
        (self.p, self.q)
    }
    fn eta_min(&self) -> f64 {
        self.eta_min
    }
    fn spec(&self) -> Option<ModelSpec> {
        Some(
            ModelSpec::new("powerlaw")
                .with("dim", self.d)
                .with("p", self.p)
                .with("q", self.q)
                .with("kappa", self.kappa)
                .with("alpha", self.alpha)
                .with("k_adm", self.k_adm),
        )
    }
    fn energy(&self, f: &Mat, eta: f64) -> f64 {
        (1.0 + f.norm_sq()).powf(self.p / 2.0) / self.p
            + (1.0 + eta * eta).powf(self.q / 2.0) / self.q
            + self.alpha * eta
            + self.kappa * f.trace() * eta
    }
    fn stress(&self, f: &Mat, eta: f64) -> Mat {
        *f * (1.0 + f.norm_sq()).powf(self.p / 2.0 - 1.0) + Mat::identity(self.d) * (self.kappa * eta)
    }
    fn temperature(&self, f: &Mat, eta: f64) -> f64 {
        eta * (1.0 + eta * eta).powf(self.q / 2.0 - 1.0) + self.alpha + self.kappa * f.trace()
    }
    fn hessian(&self, f: &Mat, eta: f64) -> HessianBlock {
        let d = self.d;
        let m = d * d;
        let s = 1.0 + f.norm_sq();
        let a = s.powf(self.p / 2.0 - 1.0);
        let b = (self.p - 2.0) * s.powf(self.p / 2.0 - 2.0);
        let x = f.as_slice();
        let mut ff = vec![0.0; m * m];
        for r in 0..m {
            for c in 0..m {
                ff[r * m + c] = b * x[r] * x[c] + if r == c { a } else { 0.0 };
            }
        }
        let t = 1.0 + eta * eta;
        let eta_eta = t.powf(self.q / 2.0 - 1.0) + (self.q - 2.0) * eta * eta * t.powf(self.q / 2.0 - 2.0);
        HessianBlock { d, ff, f_eta: Mat::identity(d) * self.kappa, eta_eta }
    }
}

/// `e = ½|F|² + (c₄/4)|F|⁴ + (γ/2)(det F - 1)² + ½η² + αη` in two dimensions.
#[derive(Clone, Debug, PartialEq)]
pub struct PolyconvexDet {
    pub gamma: f64,
    pub c4: f64,
    pub alpha: f64,
}

impl PolyconvexDet {
    pub fn model(gamma: f64, c4: f64, alpha: f64) -> Result<EnergyModel> {
        if gamma < 0.0 || c4 <= 0.0 {
            return Err(Error::InvalidParameter("need gamma >= 0 and c4 > 0".into()));
        }
        Ok(EnergyModel::new(PolyconvexDet { gamma, c4, alpha }))
    }
}

impl EnergyDensity for PolyconvexDet {
    fn name(&self) -> String {
        "polyconvex".into()
    }
    fn dim(&self) -> usize {
        2
    }
    fn growth(&self) -> (f64, f64) {
        (4.0, 2.0)
    }
    fn eta_min(&self) -> f64 {
        -self.alpha
    }
    fn spec(&self) -> Option<ModelSpec> {
        Some(ModelSpec::new("polyconvex").with("gamma", self.gamma).with("c4", self.c4).with("alpha", self.alpha))
    }
    fn energy(&self, f: &Mat, eta: f64) -> f64 {
        let n2 = f.norm_sq();
        let j = f.det() - 1.0;
        0.5 * n2 + 0.25 * self.c4 * n2 * n2 + 0.5 * self.gamma * j * j + 0.5 * eta * eta + self.alpha * eta
    }
    fn stress(&self, f: &Mat, _eta: f64) -> Mat {
        *f * (1.0 + self.c4 * f.norm_sq()) + f.cofactor() * (self.gamma * (f.det() - 1.0))
    }
    fn temperature(&self, _f: &Mat, eta: f64) -> f64 {
        eta + self.alpha
    }
    fn hessian(&self, f: &Mat, _eta: f64) -> HessianBlock {
        let x = f.as_slice();
        let cof = f.cofactor();
        let cf = cof.as_slice();
        let n2 = f.norm_sq();
        let j = f.det() - 1.0;
        let mut ff = vec![0.0; 16];
        for r in 0..4 {
            for c in 0..4 {
                let mut v = self.c4 * 2.0 * x[r] * x[c] + self.gamma * cf[r] * cf[c];
                if r == c {
                    v += 1.0 + self.c4 * n2;
                }
                ff[r * 4 + c] = v;
            }
        }
        // Second derivatives of det in 2D: entries (0,3), (3,0) are 1, (1,2), (2,1) are -1.
        ff[3] += self.gamma * j;
        ff[12] += self.gamma * j;
        ff[6] -= self.gamma * j;
        ff[9] -= self.gamma * j;
        HessianBlock { d: 2, ff, f_eta: Mat::zeros(2), eta_eta: 1.0 }
    }
}

/// Quadratic energy minus `(β/2)(F : a⊗n)²`; for `β > 1` the stored energy is
/// not rank-one convex along `a⊗n`.
#[derive(Clone, Debug, PartialEq)]
pub struct RankOneDefective {
    pub d: usize,
    pub beta: f64,
    pub a: Vec<f64>,
    pub n: Vec<f64>,
    pub alpha: f64,
    m: Mat,
}

impl RankOneDefective {
    pub fn model(d: usize, beta: f64, a: &[f64], n: &[f64], alpha: f64) -> Result<EnergyModel> {
        Ok(EnergyModel::new(Self::new(d, beta, a, n, alpha)?))
    }

    pub fn new(d: usize, beta: f64, a: &[f64], n: &[f64], alpha: f64) -> Result<Self> {
        if !(1..=3).contains(&d) {
            return Err(Error::InvalidDimension(d));
        }
        if a.len() != d || n.len() != d {
            return Err(Error::InvalidParameter("a and n must have length dim".into()));
        }
        let (na, nn) = (vec_norm(a), vec_norm(n));
        if na < 1e-12 || nn < 1e-12 {
            return Err(Error::InvalidParameter("a and n must be nonzero".into()));
        }
        let a: Vec<f64> = a.iter().map(|v| v / na).collect();
        let n: Vec<f64> = n.iter().map(|v| v / nn).collect();
        let m = Mat::outer(&a, &n);
        Ok(RankOneDefective { d, beta, a, n, alpha, m })
    }

    pub fn direction(&self) -> Mat {
        self.m
    }
}

impl EnergyDensity for RankOneDefective {
    fn name(&self) -> String {
        "rank1defective".into()
    }
    fn dim(&self) -> usize {
        self.d
    }
    fn growth(&self) -> (f64, f64) {
        (2.0, 2.0)
    }
    fn eta_min(&self) -> f64 {
        -self.alpha
    }
    fn spec(&self) -> Option<ModelSpec> {
        let join = |v: &[f64]| v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(",");
        Some(
            ModelSpec::new("rank1defective")
                .with("dim", self.d)
                .with("beta", self.beta)
                .with("a", join(&self.a))
                .with("n", join(&self.n))
                .with("alpha", self.alpha),
        )
    }
    fn energy(&self, f: &Mat, eta: f64) -> f64 {
        let s = f.dot(&self.m);
        0.5 * f.norm_sq() - 0.5 * self.beta * s * s + 0.5 * eta * eta + self.alpha * eta
    }
    fn stress(&self, f: &Mat, _eta: f64) -> Mat {
        *f - self.m * (self.beta * f.dot(&self.m))
    }
    fn temperature(&self, _f: &Mat, eta: f64) -> f64 {
        eta + self.alpha
    }
    fn hessian(&self, _f: &Mat, _eta: f64) -> HessianBlock {
        let m = self.d * self.d;
        let mut ff = identity_ff(self.d, 1.0);
        let x = self.m.as_slice();
        for r in 0..m {
            for c in 0..m {
                ff[r * m + c] -= self.beta * x[r] * x[c];
            }
        }
        HessianBlock { d: self.d, ff, f_eta: Mat::zeros(self.d), eta_eta: 1.0 }
    }
}
