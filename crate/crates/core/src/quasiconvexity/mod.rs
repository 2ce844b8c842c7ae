//! Strong quasiconvexity, Hessian coercivity and Gårding-type inequalities,
//! checked by evaluation and minimization over discretized test fields.

mod background;
mod descent;
mod garding;
mod hessian;

use rayon::prelude::*;

pub use background::BackgroundField;
pub use garding::{
    garding_batch, garding_check, garding_estimate_constants, small_cube_radius_probe, GardingEstimate, GardingOptions,
    GardingReport, RadiusResult, SmallCubeReport,
};
pub use hessian::{
    delocalized_hessian_check, hessian_coercivity_fixed_point, symbol_min, DelocalizedReport, HessianCoercivityReport,
    SymbolMin, DELOCALIZATION_DELTA,
};

use crate::constitutive::EnergyModel;
use crate::error::{Error, Result};
use crate::fields::{recover_potential, BoundaryMode, Grid, GridField, Rank, TestField};
use crate::sampling::{halton, sphere_point};
use crate::tensor::{vec_norm, Mat};
use descent::{evaluate, normalize, random_field, ratio, ratio_descent, CellTerms, Constraints, Integrand, VDenominator};

/// Classification threshold on the quotient.
pub const QC_THRESHOLD: f64 = 1e-6;

/// Amplitude ladder for the quotient search.
pub const DEFAULT_AMPLITUDES: [f64; 4] = [1e-2, 1e-1, 1.0, 3.0];

/// Relative energy `e(z̄ + (G, ψ) | z̄)` per cell, with the base state either
/// constant or a background field.
pub(crate) struct RelativeEnergy<'a> {
    model: &'a EnergyModel,
    f: Vec<Mat>,
    eta: Vec<f64>,
    e: Vec<f64>,
    s: Vec<Mat>,
    th: Vec<f64>,
}

impl<'a> RelativeEnergy<'a> {
    pub(crate) fn constant(model: &'a EnergyModel, f: &Mat, eta: f64) -> Result<Self> {
        let th = model.temperature(f, eta)?;
        Ok(RelativeEnergy { model, f: vec![*f], eta: vec![eta], e: vec![model.energy(f, eta)?], s: vec![model.stress(f, eta)?], th: vec![th] })
    }

    pub(crate) fn background(model: &'a EnergyModel, bg: &BackgroundField) -> Result<Self> {
        bg.validate(model)?;
        let n = bg.grid().cells();
        let mut out = RelativeEnergy { model, f: vec![], eta: vec![], e: vec![], s: vec![], th: vec![] };
        for c in 0..n {
            let (f, eta) = bg.state(c);
            out.e.push(model.energy(&f, eta)?);
            out.s.push(model.stress(&f, eta)?);
            out.th.push(model.temperature(&f, eta)?);
            out.f.push(f);
            out.eta.push(eta);
        }
        Ok(out)
    }

    #[inline]
    fn idx(&self, c: usize) -> usize {
        if self.f.len() == 1 {
            0
        } else {
            c
        }
    }
}

impl Integrand for RelativeEnergy<'_> {
    fn eval(&self, cell: usize, g: &[f64], _phi: &[f64], psi: f64) -> Option<CellTerms> {
        let i = self.idx(cell);
        let d = self.f[i].dim();
        let gm = Mat::from_slice(d, g);
        let f = self.f[i] + gm;
        let eta = self.eta[i] + psi;
        if !self.model.is_admissible(&f, eta) {
            return None;
        }
        let e = self.model.density();
        let value = e.energy(&f, eta) - self.e[i] - self.s[i].dot(&gm) - self.th[i] * psi;
        let ds = e.stress(&f, eta) - self.s[i];
        let mut t = CellTerms { value, d_psi: e.temperature(&f, eta) - self.th[i], ..Default::default() };
        t.d_g[..d * d].copy_from_slice(ds.as_slice());
        Some(t)
    }
}

/// `[∫ e(λ₁+∇φ, λ₂+ψ) - e(λ₁,λ₂) - e_η(λ₁,λ₂)ψ] / ∫ |V_p(∇φ)|² + |V_q(ψ)|²`.
pub fn qc_quotient(model: &EnergyModel, lambda1: &Mat, lambda2: f64, tf: &TestField) -> Result<f64> {
    check_dims(model, lambda1, tf.grid())?;
    if tf.is_zero() {
        return Err(Error::ZeroDenominator("trivial test field".into()));
    }
    let num = RelativeEnergy::constant(model, lambda1, lambda2)?;
    let (p, q) = model.growth();
    quotient_with(tf, &num, &VDenominator { p, q })
}

fn quotient_with(tf: &TestField, num: &dyn Integrand, den: &dyn Integrand) -> Result<f64> {
    let g = tf.grad_phi()?;
    let d = evaluate(tf, &g, den, false)?.ok_or_else(|| Error::NonFinite("denominator".into()))?;
    if !(d.value > 0.0) {
        return Err(Error::ZeroDenominator("test field has zero gradient and zero psi".into()));
    }
    let n = evaluate(tf, &g, num, false)?
        .ok_or_else(|| Error::InadmissibleState("test field leaves the admissible region".into()))?;
    Ok(n.value / d.value)
}

fn check_dims(model: &EnergyModel, lambda1: &Mat, grid: Grid) -> Result<()> {
    if lambda1.dim() != model.dim() || grid.dim() != model.dim() {
        return Err(Error::InvalidParameter("model, base point and grid dimensions differ".into()));
    }
    Ok(())
}

/// A laminate test field with the lattice direction actually used.
#[derive(Clone, Debug)]
pub struct Laminate {
    pub field: TestField,
    /// Integer layer normal `m`; layers are level sets of `m·x`.
    pub lattice: Vec<i64>,
    /// `m/|m|`.
    pub normal: Vec<f64>,
    /// `true` when the requested normal was not a lattice direction.
    pub snapped: bool,
}

const MAX_LATTICE: i64 = 4;

/// Nearest integer direction with entries bounded by `MAX_LATTICE`.
fn snap_direction(n: &[f64]) -> (Vec<i64>, bool) {
    let d = n.len();
    let side = (2 * MAX_LATTICE + 1) as usize;
    let mut best: Option<(f64, i64, Vec<i64>)> = None;
    for code in 0..side.pow(d as u32) {
        let mut rem = code;
        let m: Vec<i64> = (0..d)
            .map(|_| {
                let v = (rem % side) as i64 - MAX_LATTICE;
                rem /= side;
                v
            })
            .collect();
        let norm2: i64 = m.iter().map(|x| x * x).sum();
        if norm2 == 0 {
            continue;
        }
        let cos = m.iter().zip(n).map(|(a, b)| *a as f64 * b).sum::<f64>() / (norm2 as f64).sqrt();
        let better = match &best {
            None => true,
            Some((bc, bn, _)) => cos > bc + 1e-12 || ((cos - bc).abs() <= 1e-12 && norm2 < *bn),
        };
        if better {
            best = Some((cos, norm2, m));
        }
    }
    let (cos, _, m) = best.expect("nonempty lattice");
    (m, cos < 1.0 - 1e-12)
}

/// Laminate along `(a, n)` with volume fraction `fraction`: `∇φ` takes the
/// values `t(1-λ) a⊗n` and `-tλ a⊗n` on alternating layers, mollified over
/// `smoothing` cells. `ψ = 0`. The normal is snapped to a lattice direction so
/// that the layers are periodic.
pub fn laminate_field(a: &[f64], n: &[f64], fraction: f64, amplitude: f64, grid: Grid, smoothing: f64) -> Result<Laminate> {
    laminate_field_with_frequency(a, n, fraction, amplitude, grid, smoothing, 1)
}

/// [`laminate_field`] with `frequency` layer pairs per lattice period.
pub fn laminate_field_with_frequency(
    a: &[f64],
    n: &[f64],
    fraction: f64,
    amplitude: f64,
    grid: Grid,
    smoothing: f64,
    frequency: usize,
) -> Result<Laminate> {
    let d = grid.dim();
    if a.len() != d || n.len() != d {
        return Err(Error::InvalidParameter("a and n must have length dim".into()));
    }
    let (na, nn) = (vec_norm(a), vec_norm(n));
    if (na - 1.0).abs() > 1e-8 || (nn - 1.0).abs() > 1e-8 {
        return Err(Error::InvalidParameter("a and n must be unit vectors".into()));
    }
    if !(fraction > 0.0 && fraction < 1.0) {
        return Err(Error::InvalidParameter("fraction must lie in (0, 1)".into()));
    }
    if !amplitude.is_finite() || !(smoothing >= 0.0) || frequency == 0 {
        return Err(Error::InvalidParameter("bad amplitude, smoothing or frequency".into()));
    }
    let (m, snapped) = snap_direction(n);
    let mmax = m.iter().map(|x| x.abs()).max().unwrap_or(1) as usize;
    if grid.n() < 4 * mmax * frequency {
        return Err(Error::UnresolvableScale(format!("lattice direction {m:?} at frequency {frequency} on n={}", grid.n())));
    }
    let mnorm = (m.iter().map(|x| (x * x) as f64).sum::<f64>()).sqrt();
    let normal: Vec<f64> = m.iter().map(|x| *x as f64 / mnorm).collect();
    let k = frequency as f64;
    // width in units of the phase s = k m·x
    let w = smoothing * grid.spacing() * mnorm * k;
    let chi = |s: f64| -> f64 {
        let s = s.rem_euclid(1.0);
        if w == 0.0 {
            return if s < fraction { 1.0 } else { 0.0 };
        }
        (-1..=1)
            .map(|j| {
                let u = s + j as f64;
                0.5 * (((u) / w).tanh() - ((u - fraction) / w).tanh())
            })
            .sum()
    };
    let mut prof = GridField::scalar_from_fn(grid, |x| {
        let s: f64 = (0..d).map(|i| m[i] as f64 * x[i]).sum::<f64>() * k;
        chi(s)
    });
    prof.subtract_mean();
    let mut g = GridField::zeros(grid, Rank::Matrix);
    for c in 0..grid.cells() {
        let v = amplitude * prof.cell(c)[0];
        let cell = g.cell_mut(c);
        for i in 0..d {
            for b in 0..d {
                cell[i * d + b] = v * a[i] * normal[b];
            }
        }
    }
    let phi = recover_potential(&g)?;
    let field = TestField::new(phi, GridField::zeros(grid, Rank::Scalar), BoundaryMode::Periodic)?;
    Ok(Laminate { field, lattice: m, normal, snapped })
}

/// Search budget for [`minimize_qc_quotient`].
#[derive(Clone, Debug)]
pub struct QcOptions {
    pub grid: Grid,
    /// Low-discrepancy laminate candidates per amplitude, on top of the
    /// coordinate pairs.
    pub modes: usize,
    pub amplitudes: Vec<f64>,
    /// Descent iterations per start.
    pub iters: usize,
    pub seed: u64,
    pub mode: BoundaryMode,
    /// Mollification width of laminates, in cells.
    pub smoothing: f64,
}

impl QcOptions {
    pub fn new(grid: Grid) -> Self {
        QcOptions { grid, modes: 32, amplitudes: DEFAULT_AMPLITUDES.to_vec(), iters: 40, seed: 0, mode: BoundaryMode::Periodic, smoothing: 1.0 }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum QcStatus {
    CertifiedPositive,
    Counterexample,
    Inconclusive,
}

impl QcStatus {
    pub fn as_str(self) -> &'static str {
        match self {
            QcStatus::CertifiedPositive => "certified-positive",
            QcStatus::Counterexample => "counterexample",
            QcStatus::Inconclusive => "inconclusive",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "certified-positive" => Some(QcStatus::CertifiedPositive),
            "counterexample" => Some(QcStatus::Counterexample),
            "inconclusive" => Some(QcStatus::Inconclusive),
            _ => None,
        }
    }

    pub fn classify(q: f64) -> Self {
        if q < -QC_THRESHOLD {
            QcStatus::Counterexample
        } else if q >= QC_THRESHOLD {
            QcStatus::CertifiedPositive
        } else {
            QcStatus::Inconclusive
        }
    }
}

#[derive(Clone, Debug)]
pub struct QCReport {
    pub c0_estimate: f64,
    pub witness: TestField,
    pub status: QcStatus,
    pub evaluations: usize,
    pub lambda1: Mat,
    pub lambda2: f64,
    /// Smallest quotient per amplitude of the ladder (`NaN` if every
    /// candidate was inadmissible).
    pub by_amplitude: Vec<(f64, f64)>,
}

impl QCReport {
    /// Re-evaluate the stored witness.
    pub fn replay(&self, model: &EnergyModel) -> Result<f64> {
        qc_quotient(model, &self.lambda1, self.lambda2, &self.witness)
    }
}

pub(crate) fn laminate_directions(d: usize, modes: usize, seed: u64) -> Vec<(Vec<f64>, Vec<f64>, f64)> {
    let e = |i: usize| -> Vec<f64> { (0..d).map(|k| if k == i { 1.0 } else { 0.0 }).collect() };
    let mut out = Vec::new();
    for i in 0..d {
        for j in 0..d {
            out.push((e(i), e(j), 0.5));
        }
    }
    for k in 0..modes as u64 {
        let u = halton(k + 1 + seed, 2 * d.max(2) + 1);
        let a = if d == 1 { vec![1.0] } else { sphere_point(&u[..d], d) };
        let n = if d == 1 { vec![1.0] } else { sphere_point(&u[d..2 * d], d) };
        out.push((a, n, 0.2 + 0.6 * u[2 * d.max(2)]));
    }
    out
}

fn mask_collar(tf: &mut TestField) {
    if tf.mode == BoundaryMode::ZeroTrace {
        tf.apply_mask();
    }
}

/// Smallest quotient over a laminate sweep and projected descent from the
/// best laminate and from a random smooth field, at each amplitude of the
/// ladder (amplitude = `(∫|∇φ|² + ψ²)^{1/2}`).
pub fn minimize_qc_quotient(model: &EnergyModel, lambda1: &Mat, lambda2: f64, opts: &QcOptions) -> Result<QCReport> {
    check_dims(model, lambda1, opts.grid)?;
    model.temperature(lambda1, lambda2)?;
    if opts.amplitudes.is_empty() || opts.amplitudes.iter().any(|a| !(*a > 0.0) || !a.is_finite()) {
        return Err(Error::InvalidParameter("amplitudes must be positive".into()));
    }
    let num = RelativeEnergy::constant(model, lambda1, lambda2)?;
    let (p, q) = model.growth();
    let den = VDenominator { p, q };
    let cons = Constraints::zero_mean(false);
    let d = model.dim();
    let dirs = laminate_directions(d, opts.modes, opts.seed);
    let mut evaluations = 0;
    let mut best: Option<(f64, TestField)> = None;
    let mut by_amplitude = Vec::new();
    let consider = |best: &mut Option<(f64, TestField)>, q: f64, tf: &TestField| {
        if best.as_ref().map_or(true, |(b, _)| q < *b) {
            *best = Some((q, tf.clone()));
        }
    };

    for (ai, &amp) in opts.amplitudes.iter().enumerate() {
        let cands: Vec<Option<(f64, TestField)>> = dirs
            .par_iter()
            .map(|(a, n, frac)| -> Result<Option<(f64, TestField)>> {
                let lam = match laminate_field(a, n, *frac, 1.0, opts.grid, opts.smoothing) {
                    Ok(l) => l,
                    Err(Error::UnresolvableScale(_)) => return Ok(None),
                    Err(e) => return Err(e),
                };
                let mut tf = lam.field;
                tf.mode = opts.mode;
                mask_collar(&mut tf);
                if !normalize(&mut tf, amp)? {
                    return Ok(None);
                }
                Ok(ratio(&tf, &num, &den)?.map(|q| (q, tf)))
            })
            .collect::<Result<_>>()?;
        evaluations += cands.len();
        let mut local: Option<(f64, TestField)> = None;
        for (q, tf) in cands.into_iter().flatten() {
            consider(&mut local, q, &tf);
        }
        let mut starts: Vec<TestField> = local.iter().map(|(_, tf)| tf.clone()).collect();
        let rf = random_field(opts.grid, opts.mode, 2, amp, opts.seed, 0x9C00 + ai as u64, &cons)?;
        starts.push(rf);
        for start in starts {
            if let Some(r) = ratio_descent(start, &num, &den, amp, opts.iters, &cons)? {
                evaluations += r.evaluations;
                consider(&mut local, r.value, &r.field);
            }
        }
        by_amplitude.push((amp, local.as_ref().map_or(f64::NAN, |(q, _)| *q)));
        if let Some((q, tf)) = local {
            consider(&mut best, q, &tf);
        }
    }
    let (_, witness) = best.ok_or_else(|| Error::InadmissibleState("every candidate field left the admissible region".into()))?;
    let c0 = qc_quotient(model, lambda1, lambda2, &witness)?;
    Ok(QCReport {
        c0_estimate: c0,
        status: QcStatus::classify(c0),
        witness,
        evaluations,
        lambda1: *lambda1,
        lambda2,
        by_amplitude,
    })
}

/// `∫ e(λ + w) - e(λ)` over `∫ |V(w)|²` with `w = (∇φ, ψ - mean ψ)`: the
/// `(curl, 0)` form, which has no correction term.
struct CurlFormNumerator<'a> {
    model: &'a EnergyModel,
    f: Mat,
    eta: f64,
    e: f64,
}

impl Integrand for CurlFormNumerator<'_> {
    fn eval(&self, _cell: usize, g: &[f64], _phi: &[f64], psi: f64) -> Option<CellTerms> {
        let d = self.f.dim();
        let f = self.f + Mat::from_slice(d, g);
        let eta = self.eta + psi;
        if !self.model.is_admissible(&f, eta) {
            return None;
        }
        Some(CellTerms { value: self.model.density().energy(&f, eta) - self.e, ..Default::default() })
    }
}

#[derive(Clone, Debug)]
pub struct EquivalenceReport {
    pub fields: usize,
    /// Smallest quotient of the functional with the `e_η ψ` correction over
    /// all shared fields.
    pub c0_definition: f64,
    /// Smallest `(curl, 0)` quotient over the fields with a nonzero
    /// fluctuation.
    pub c0_curl_form: f64,
    /// Largest `|difference|` of the two quotients on zero-mean `ψ` fields.
    pub max_zero_mean_gap: f64,
    /// Fields whose `ψ` fluctuation and `∇φ` both vanish.
    pub inapplicable: usize,
    pub status_definition: QcStatus,
    pub status_curl_form: QcStatus,
}

impl EquivalenceReport {
    pub fn same_classification(&self) -> bool {
        self.status_definition == self.status_curl_form
    }
}

/// Evaluate both functionals on shared fields: laminates, random smooth
/// fields with zero-mean and with shifted `ψ`, and a constant-`ψ` field.
pub fn qc_equivalence_check(model: &EnergyModel, lambda1: &Mat, lambda2: f64, grid: Grid, budget: usize, seed: u64) -> Result<EquivalenceReport> {
    check_dims(model, lambda1, grid)?;
    model.temperature(lambda1, lambda2)?;
    let d = model.dim();
    let def_num = RelativeEnergy::constant(model, lambda1, lambda2)?;
    let curl_num = CurlFormNumerator { model, f: *lambda1, eta: lambda2, e: model.energy(lambda1, lambda2)? };
    let (p, q) = model.growth();
    let den = VDenominator { p, q };
    let mut fields: Vec<(TestField, bool)> = Vec::new();
    for (k, (a, n, frac)) in laminate_directions(d, budget / 2, seed).into_iter().enumerate() {
        if let Ok(l) = laminate_field(&a, &n, frac, 0.3, grid, 1.0) {
            let mut tf = l.field;
            tf.psi = GridField::scalar_from_fn(grid, |x| 0.2 * (2.0 * std::f64::consts::PI * (x[0] + k as f64 * 0.1)).sin());
            fields.push((tf, true));
        }
    }
    let cons = Constraints::zero_mean(true);
    for k in 0..budget.max(1) {
        let tf = random_field(grid, BoundaryMode::Periodic, 2, 0.3, seed, 0xE0 + k as u64, &cons)?;
        let mut shifted = tf.clone();
        shifted.psi.data_mut().iter_mut().for_each(|v| *v += 0.1);
        fields.push((tf, true));
        fields.push((shifted, false));
    }
    let mut constant = TestField::zeros(grid, BoundaryMode::Periodic);
    constant.psi.data_mut().iter_mut().for_each(|v| *v = 0.1);
    fields.push((constant, false));

    let results: Vec<Result<(f64, Option<f64>, bool)>> = fields
        .par_iter()
        .map(|(tf, zero_mean)| {
            let q_def = quotient_with(tf, &def_num, &den)?;
            let mut fluct = tf.clone();
            fluct.psi.subtract_mean();
            // a fluctuation at roundoff level means the field is a pure mean
            let negligible = descent::energy_norm(&fluct)? <= 1e-12 * descent::energy_norm(tf)?;
            let q_curl = if negligible {
                None
            } else {
                match quotient_with(&fluct, &curl_num, &den) {
                    Ok(v) => Some(v),
                    Err(Error::ZeroDenominator(_)) => None,
                    Err(e) => return Err(e),
                }
            };
            Ok((q_def, q_curl, *zero_mean))
        })
        .collect();
    let mut rep = EquivalenceReport {
        fields: fields.len(),
        c0_definition: f64::INFINITY,
        c0_curl_form: f64::INFINITY,
        max_zero_mean_gap: 0.0,
        inapplicable: 0,
        status_definition: QcStatus::Inconclusive,
        status_curl_form: QcStatus::Inconclusive,
    };
    for r in results {
        let (qd, qc, zm) = r?;
        rep.c0_definition = rep.c0_definition.min(qd);
        match qc {
            Some(qc) => {
                rep.c0_curl_form = rep.c0_curl_form.min(qc);
                if zm {
                    rep.max_zero_mean_gap = rep.max_zero_mean_gap.max((qd - qc).abs());
                }
            }
            None => rep.inapplicable += 1,
        }
    }
    rep.status_definition = QcStatus::classify(rep.c0_definition);
    rep.status_curl_form = QcStatus::classify(rep.c0_curl_form);
    Ok(rep)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::constitutive::{Quadratic, RankOneDefective};
    use crate::fields::make_grid;

    #[test]
    fn quadratic_quotient_is_a_quarter() {
        let g = make_grid(2, 64).unwrap();
        let m = Quadratic::model(2, 1.0);
        let tf = random_field(g, BoundaryMode::Periodic, 2, 0.5, 3, 1, &Constraints::zero_mean(false)).unwrap();
        let q = qc_quotient(&m, &Mat::identity(2), 0.0, &tf).unwrap();
        assert!((q - 0.25).abs() < 2e-3, "{q}");
        let z = TestField::zeros(g, BoundaryMode::Periodic);
        assert!(matches!(qc_quotient(&m, &Mat::identity(2), 0.0, &z), Err(Error::ZeroDenominator(_))));
    }

    #[test]
    fn laminate_on_defect_direction() {
        let g = make_grid(2, 64).unwrap();
        let m = RankOneDefective::model(2, 2.0, &[1.0, 0.0], &[0.0, 1.0], 1.0).unwrap();
        let l = laminate_field(&[1.0, 0.0], &[0.0, 1.0], 0.5, 1e-2, g, 1.0).unwrap();
        assert!(!l.snapped);
        let q = qc_quotient(&m, &Mat::zeros(2), 0.0, &l.field).unwrap();
        assert!((q + 0.25).abs() < 5e-2, "{q}");
    }

    #[test]
    fn laminate_gradient_has_zero_mean() {
        let g = make_grid(2, 32).unwrap();
        let s = std::f64::consts::FRAC_1_SQRT_2;
        let l = laminate_field(&[1.0, 0.0], &[s, s], 0.5, 1.0, g, 1.0).unwrap();
        assert_eq!(l.lattice, vec![1, 1]);
        let gp = l.field.grad_phi().unwrap();
        assert!(gp.mean().iter().all(|v| v.abs() < 1e-12));
        let back = recover_potential(&gp).unwrap();
        assert!(back.max_abs_diff(&l.field.phi).unwrap() < 1e-8);
    }

    #[test]
    fn snapping_reports_irrational_normals() {
        let (m, snapped) = snap_direction(&[0.6, 0.8]);
        assert_eq!(m, vec![3, 4]);
        assert!(!snapped);
        let (_, snapped) = snap_direction(&[1.0 / 3f64.sqrt(), (2.0f64 / 3.0).sqrt()]);
        assert!(snapped);
    }
}
