//! Empirical audits of a stored energy: the growth hypotheses, the bounds on
//! relative quantities used by the relative-entropy estimate, and the
//! constants of the growth lemma for relative functions.
//!
//! Every fitted constant is the empirical extremum over samples, polished by
//! pattern search, published with a multiplicative slack. Each fit is
//! repeated with twice the samples and validated on a fresh hold-out set.
//! These are numerical checks on samples, not proofs.

use rand::Rng;

use super::EnergyModel;
use crate::fields::v_aux_sq_from_norm;
use crate::sampling::{random_unit, SeededRng};
use crate::search::{maximize, sample_max, SearchOptions};
use crate::tensor::{vec_norm, Mat};

#[derive(Clone, Debug)]
pub struct AuditOptions {
    /// Radius `K` of the base-state ball.
    pub k: f64,
    pub samples: usize,
    pub seed: u64,
    /// Temperature lower bound `δ` assumed for both states.
    pub delta: f64,
    /// Constant heat supply `r = r̄` in the heat-exchange term.
    pub heat_supply: f64,
    /// Relative slack on published constants and the stability tolerance.
    pub slack: f64,
    pub starts: usize,
    pub sweeps: usize,
}

impl Default for AuditOptions {
    fn default() -> Self {
        AuditOptions { k: 5.0, samples: 2000, seed: 7, delta: 0.25, heat_supply: 1.0, slack: 0.05, starts: 6, sweeps: 80 }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ConstantFit {
    pub name: String,
    /// `true` for an infimum (lower-bound constant), `false` for a supremum.
    pub lower: bool,
    pub estimate: f64,
    pub estimate_doubled: f64,
    pub relative_change: f64,
    pub stable: bool,
    /// Published constant: the doubled-sample extremum widened by the slack.
    pub constant: f64,
    pub holdout_extreme: f64,
    pub holdout_ok: bool,
    pub witness: Vec<f64>,
}

impl ConstantFit {
    pub fn ok(&self) -> bool {
        self.stable && self.holdout_ok
    }
}

fn fit<S, F, P>(name: &str, opts: &AuditOptions, lower: bool, scale: &[f64], sampler: S, objective: F, project: P) -> ConstantFit
where
    S: Fn(&mut SeededRng) -> Vec<f64>,
    F: Fn(&[f64]) -> Option<f64> + Sync,
    P: Fn(&mut [f64]) + Sync,
{
    let sign = if lower { -1.0 } else { 1.0 };
    let signed = |x: &[f64]| objective(x).map(|v| sign * v);
    let base = SearchOptions { samples: opts.samples, seed: opts.seed, starts: opts.starts, sweeps: opts.sweeps };
    let r1 = maximize(&base, scale, &sampler, signed, &project);
    let doubled = SearchOptions { samples: 2 * opts.samples, ..base };
    let r2 = maximize(&doubled, scale, &sampler, signed, &project);
    let (e1, e2) = (sign * r1.value, sign * r2.value);
    let relative_change = (e2 - e1).abs() / e1.abs().max(e2.abs()).max(1e-6);
    let widen = opts.slack * e2.abs();
    let constant = if lower { e2 - widen } else { e2 + widen };
    let (h, _) = sample_max(opts.samples, opts.seed ^ 0x5EED_0F_F00D, &sampler, signed);
    let holdout_extreme = sign * h;
    let holdout_ok = if !holdout_extreme.is_finite() {
        false
    } else if lower {
        holdout_extreme >= constant
    } else {
        holdout_extreme <= constant
    };
    let finite = e1.is_finite() && e2.is_finite();
    ConstantFit {
        name: name.to_string(),
        lower,
        estimate: e1,
        estimate_doubled: e2,
        relative_change,
        stable: finite && relative_change <= opts.slack,
        constant,
        holdout_extreme,
        holdout_ok: finite && holdout_ok,
        witness: r2.argmax,
    }
}

/// Increments below this norm are excluded: the relative quantities are
/// differences of O(1) values and lose all precision there.
const MIN_INCREMENT: f64 = 1e-3;

fn ball(r: &mut SeededRng, m: usize, radius: f64) -> Vec<f64> {
    let dir = random_unit(r, m);
    let rho = radius * r.gen::<f64>().powf(1.0 / m as f64);
    dir.into_iter().map(|v| v * rho).collect()
}

fn clamp_norm(x: &mut [f64], radius: f64) {
    let n = vec_norm(x);
    if n > radius {
        x.iter_mut().for_each(|v| *v *= radius / n);
    }
}

fn log_uniform(r: &mut SeededRng, lo: f64, hi: f64) -> f64 {
    (lo.ln() + r.gen::<f64>() * (hi.ln() - lo.ln())).exp()
}

// ---------------------------------------------------------------------------
// Growth hypotheses

#[derive(Clone, Debug, PartialEq)]
pub struct GrowthReport {
    pub k: f64,
    pub p: f64,
    pub q: f64,
    pub samples: usize,
    /// Fitted `c_lo |F|^p + c_lo |η|^q - b_lo <= e`.
    pub lower_slope: f64,
    pub lower_offset: f64,
    /// Fitted `e <= c_hi (|F|^p + |η|^q) + b_hi`.
    pub upper_slope: f64,
    pub upper_offset: f64,
    /// Fitted constant of `|e_F| <= C (1 + |F|^{p-1} + |η|^{q(p-1)/p})`.
    pub stress_constant: f64,
    /// Fitted constant of `|e_η| <= C (1 + |F|^{p(q-1)/q} + |η|^{q-1})`.
    pub temperature_constant: f64,
    pub min_theta: f64,
    pub nonpositive_theta: usize,
    pub violations: Vec<String>,
}

impl GrowthReport {
    pub fn ok(&self) -> bool {
        self.violations.is_empty()
    }
}

struct GrowthSample {
    f: Mat,
    eta: f64,
    radius: f64,
    far: bool,
}

/// Check the two-sided growth of `e`, the derivative growth bounds and the
/// temperature lower bound on uniform samples with `|F|, |η| <= K` and a
/// log-spaced far-field shell out to `10 K`.
pub fn check_growth_hypotheses(model: &EnergyModel, opts: &AuditOptions) -> GrowthReport {
    let d = model.dim();
    let m = d * d;
    let (p, q) = model.growth();
    let k = opts.k;
    let eta_lo = model.eta_min().max(-k);
    let mut r = crate::sampling::rng(opts.seed);
    let mut pts = Vec::with_capacity(2 * opts.samples);
    for _ in 0..opts.samples {
        let f = Mat::from_slice(d, &ball(&mut r, m, k));
        let eta = eta_lo + (k - eta_lo) * r.gen::<f64>();
        if eta > model.eta_min() {
            pts.push(GrowthSample { f, eta, radius: 0.0, far: false });
        }
    }
    for _ in 0..opts.samples {
        let radius = log_uniform(&mut r, k, 10.0 * k);
        let dir = random_unit(&mut r, m + 1);
        let f = Mat::from_slice(d, &dir[..m].iter().map(|v| v * radius).collect::<Vec<_>>());
        let mut eta = dir[m] * radius;
        if eta <= model.eta_min() {
            eta = eta.abs();
        }
        pts.push(GrowthSample { f, eta, radius, far: true });
    }
    let dens = model.density();
    let s_of = |s: &GrowthSample| s.f.norm().powf(p) + s.eta.abs().powf(q);
    let mut violations = Vec::new();

    // Far-field ratios are binned by radius to detect super-growth.
    let bins = 4usize;
    let bin_of = |rad: f64| (((rad / k).log10()) * bins as f64).floor().clamp(0.0, (bins - 1) as f64) as usize;
    let mut upper_bins = vec![0.0_f64; bins];
    let mut stress_bins = vec![0.0_f64; bins];
    let mut temp_bins = vec![0.0_f64; bins];
    let mut far_min = f64::INFINITY;
    let mut far_max = 0.0_f64;
    let mut stress_c = 0.0_f64;
    let mut temp_c = 0.0_f64;
    let mut nonfinite = None;
    let stress_scale = |s: &GrowthSample| 1.0 + s.f.norm().powf(p - 1.0) + s.eta.abs().powf(q * (p - 1.0) / p);
    let temp_scale = |s: &GrowthSample| 1.0 + s.f.norm().powf(p * (q - 1.0) / q) + s.eta.abs().powf(q - 1.0);
    for s in &pts {
        let e = dens.energy(&s.f, s.eta);
        let sig = dens.stress(&s.f, s.eta).norm();
        let th = dens.temperature(&s.f, s.eta);
        if !(e.is_finite() && sig.is_finite() && th.is_finite()) {
            nonfinite.get_or_insert((s.f, s.eta));
            continue;
        }
        let rs = sig / stress_scale(s);
        let rt = th.abs() / temp_scale(s);
        stress_c = stress_c.max(rs);
        temp_c = temp_c.max(rt);
        if s.far {
            let ratio = e / s_of(s);
            far_min = far_min.min(ratio);
            far_max = far_max.max(ratio);
            let b = bin_of(s.radius);
            upper_bins[b] = upper_bins[b].max(ratio);
            stress_bins[b] = stress_bins[b].max(rs);
            temp_bins[b] = temp_bins[b].max(rt);
        }
    }
    if let Some((f, eta)) = nonfinite {
        violations.push(format!("non-finite energy or derivative at |F|={:.3e}, eta={:.3e}", f.norm(), eta));
    }
    let grows = |b: &[f64]| b[bins - 1] > 2.0 * b[0].max(1e-12) && b.windows(2).all(|w| w[1] >= w[0]);
    if nonfinite.is_some() || grows(&upper_bins) {
        violations.push("upper growth bound fails in the far field".into());
    }
    if grows(&stress_bins) {
        violations.push("stress growth bound fails in the far field".into());
    }
    if grows(&temp_bins) {
        violations.push("temperature growth bound fails in the far field".into());
    }
    let lower_slope = 0.5 * far_min;
    if !(lower_slope > 0.0) {
        violations.push(format!("lower growth bound fails: inf e/(|F|^p+|eta|^q) = {far_min:.3e} in the far field"));
    }
    let upper_slope = 2.0 * far_max;
    let mut lower_offset = 0.0_f64;
    let mut upper_offset = 0.0_f64;
    let mut min_theta = f64::INFINITY;
    let mut nonpositive_theta = 0;
    for s in &pts {
        let e = dens.energy(&s.f, s.eta);
        if !e.is_finite() {
            continue;
        }
        let sv = s_of(s);
        lower_offset = lower_offset.max(lower_slope * sv - e);
        upper_offset = upper_offset.max(e - upper_slope * sv);
        if !s.far {
            let th = dens.temperature(&s.f, s.eta);
            min_theta = min_theta.min(th);
            if th <= 0.0 {
                nonpositive_theta += 1;
            }
        }
    }
    if nonpositive_theta > 0 {
        violations.push(format!("temperature lower bound fails on {nonpositive_theta} samples (min theta {min_theta:.3e})"));
    }
    GrowthReport {
        k,
        p,
        q,
        samples: pts.len(),
        lower_slope,
        lower_offset,
        upper_slope,
        upper_offset,
        stress_constant: stress_c,
        temperature_constant: temp_c,
        min_theta,
        nonpositive_theta,
        violations,
    }
}

// ---------------------------------------------------------------------------
// Bounds on relative quantities

#[derive(Clone, Debug, PartialEq)]
pub struct Lemma41Report {
    /// `|I| <= C₁ (|v-v̄|² + |V_p(F-F̄)|² + |V_q(η-η̄)|²)`.
    pub c1: ConstantFit,
    /// `|θ(·|·)| <= C₂ (|V_p(F-F̄)|² + |V_q(η-η̄)|²)`.
    pub c2: ConstantFit,
    /// `|Σ(·|·)| <= C₃ (...)`.
    pub c3: ConstantFit,
    /// `|(θ-θ̄)(r/θ - r̄/θ̄)| <= C₄ (...)`.
    pub c4: ConstantFit,
}

impl Lemma41Report {
    pub fn constants(&self) -> [&ConstantFit; 4] {
        [&self.c1, &self.c2, &self.c3, &self.c4]
    }

    pub fn ok(&self) -> bool {
        self.constants().iter().all(|c| c.ok())
    }
}

struct PairLayout {
    d: usize,
    m: usize,
}

impl PairLayout {
    fn split<'a>(&self, x: &'a [f64]) -> ((Mat, &'a [f64], f64), (Mat, &'a [f64], f64)) {
        let (d, m, mm) = (self.d, self.d * self.d, self.m);
        let a = (Mat::from_slice(d, &x[..m]), &x[m..m + d], x[m + d]);
        let b = (Mat::from_slice(d, &x[mm..mm + m]), &x[mm + m..mm + m + d], x[mm + m + d]);
        (a, b)
    }
}

/// Sample-based constants for the four bounds on relative quantities over
/// `Ū ∈ Γ_K` (`|F̄|, |v̄|, |η̄| <= K`) and `U` up to `10 K`, both with `θ >= δ`.
pub fn lemma41_bounds_report(model: &EnergyModel, opts: &AuditOptions) -> Lemma41Report {
    let d = model.dim();
    let m2 = d * d;
    let m = m2 + d + 1;
    let lay = PairLayout { d, m };
    let k = opts.k;
    let big = 10.0 * k;
    let eta_lo_bar = model.eta_min().max(-k);
    let eta_lo = model.eta_min().max(-big);
    let dens = model.density();
    let delta = opts.delta;
    let sampler = |r: &mut SeededRng| -> Vec<f64> {
        let mut x = vec![0.0; 2 * m];
        for _ in 0..1000 {
            x[..m2].copy_from_slice(&ball(r, m2, k));
            x[m2..m2 + d].copy_from_slice(&ball(r, d, k));
            x[m - 1] = eta_lo_bar + (k - eta_lo_bar) * r.gen::<f64>();
            let fb = Mat::from_slice(d, &x[..m2]);
            if dens.temperature(&fb, x[m - 1]) >= delta {
                break;
            }
        }
        let rho = if r.gen::<bool>() { log_uniform(r, 1e-3 * k, big) } else { big * r.gen::<f64>() };
        let dir = random_unit(r, m);
        for i in 0..m {
            x[m + i] = x[i] + rho * dir[i];
        }
        x
    };
    let project = |x: &mut [f64]| {
        clamp_norm(&mut x[..m2], k);
        clamp_norm(&mut x[m2..m2 + d], k);
        x[m - 1] = x[m - 1].clamp(eta_lo_bar + 1e-9, k);
        clamp_norm(&mut x[m..m + m2], big);
        clamp_norm(&mut x[m + m2..m + m2 + d], big);
        x[2 * m - 1] = x[2 * m - 1].clamp(eta_lo + 1e-9, big);
    };
    let (p, q) = model.growth();
    // Shared evaluation: returns (kinetic, V-denominator, θ, θ̄) or None when excluded.
    let eval = |x: &[f64]| -> Option<(f64, f64, f64, f64, Mat, f64, Mat, f64)> {
        let ((fb, vb, eb), (f, v, e)) = lay.split(x);
        let thb = dens.temperature(&fb, eb);
        let th = dens.temperature(&f, e);
        if !(thb >= delta && th >= delta) || eb <= model.eta_min() || e <= model.eta_min() {
            return None;
        }
        let kin: f64 = v.iter().zip(vb).map(|(a, b)| (a - b) * (a - b)).sum();
        let den = v_aux_sq_from_norm((f - fb).norm(), p) + v_aux_sq_from_norm((e - eb).abs(), q);
        let dist = (kin + (f - fb).norm_sq() + (e - eb) * (e - eb)).sqrt();
        if dist < MIN_INCREMENT {
            return None;
        }
        Some((kin, den, th, thb, f, e, fb, eb))
    };
    // The V-denominators of C2..C4 ignore the velocity, so they need their own guard.
    let thermo_ok = |f: &Mat, e: f64, fb: &Mat, eb: f64| ((*f - *fb).norm_sq() + (e - eb) * (e - eb)).sqrt() >= MIN_INCREMENT;
    let mut scale = vec![k; 2 * m];
    scale[m..].iter_mut().for_each(|s| *s = big / 4.0);
    let c1 = fit("C1 relative entropy", opts, false, &scale, sampler, |x| {
        let (kin, den, _, _, f, e, fb, eb) = eval(x)?;
        let i = 0.5 * kin + model.relative_energy(&f, e, &fb, eb).ok()?;
        Some(i.abs() / (kin + den))
    }, project);
    let c2 = fit("C2 relative temperature", opts, false, &scale, sampler, |x| {
        let (_, den, _, _, f, e, fb, eb) = eval(x)?;
        if !thermo_ok(&f, e, &fb, eb) {
            return None;
        }
        Some(model.relative_temperature(&f, e, &fb, eb).ok()?.abs() / den)
    }, project);
    let c3 = fit("C3 relative stress", opts, false, &scale, sampler, |x| {
        let (_, den, _, _, f, e, fb, eb) = eval(x)?;
        if !thermo_ok(&f, e, &fb, eb) {
            return None;
        }
        Some(model.relative_stress(&f, e, &fb, eb).ok()?.norm() / den)
    }, project);
    let r = opts.heat_supply;
    let c4 = fit("C4 heat exchange", opts, false, &scale, sampler, |x| {
        let (_, den, th, thb, f, e, fb, eb) = eval(x)?;
        if !thermo_ok(&f, e, &fb, eb) {
            return None;
        }
        Some(((th - thb) * (r / th - r / thb)).abs() / den)
    }, project);
    Lemma41Report { c1, c2, c3, c4 }
}

// ---------------------------------------------------------------------------
// Growth lemma for relative functions

#[derive(Clone, Debug, PartialEq)]
pub struct AppendixAReport {
    /// `|f(λ+ξ|λ)| <= C (|V_p(ξ₁)|² + |V_q(ξ₂)|²)`.
    pub growth_bound: ConstantFit,
    /// Difference bound with the weights `A₁, A₂`.
    pub difference: ConstantFit,
    /// Base-point Lipschitz constant `L`: `|f(λ+ξ|λ) - f(μ+ξ|μ)| <= L |λ-μ| (|V_p|² + |V_q|²)`.
    pub continuity: ConstantFit,
    /// `(δ, R)` pairs with `R = δ / L`.
    pub radius_for_delta: Vec<(f64, f64)>,
    /// Coercivity `f(λ+ξ|λ) >= d₁ (|ξ₁|^p + |ξ₂|^q) - d₂ (|ξ₁|² + |ξ₂|²)`.
    pub d1: ConstantFit,
    pub d2: ConstantFit,
    pub violations: Vec<String>,
}

impl AppendixAReport {
    pub fn fits(&self) -> [&ConstantFit; 5] {
        [&self.growth_bound, &self.difference, &self.continuity, &self.d1, &self.d2]
    }

    pub fn ok(&self) -> bool {
        self.violations.is_empty() && self.fits().iter().all(|c| c.ok())
    }

    /// Whether `(d₁, d₂)` satisfies the coercivity inequality at a given pair.
    pub fn coercivity_holds(f: &EnergyModel, d1: f64, d2: f64, lam: (&Mat, f64), xi: (&Mat, f64)) -> bool {
        let (p, q) = f.growth();
        let rel = f.relative_energy(&(*lam.0 + *xi.0), lam.1 + xi.1, lam.0, lam.1);
        match rel {
            Ok(v) => {
                let (a, b) = (xi.0.norm(), xi.1.abs());
                v >= d1 * (a.powf(p) + b.powf(q)) - d2 * (a * a + b * b) - 1e-12 * (1.0 + v.abs())
            }
            Err(_) => false,
        }
    }
}

/// Constants of the growth lemma for `f` (any stored energy, e.g. the model
/// itself or [`crate::constitutive::aux_energy`]) with base points in
/// `B(0, K)` and increments up to `10 K`.
pub fn appendix_a_check(f: &EnergyModel, opts: &AuditOptions) -> AppendixAReport {
    let d = f.dim();
    let m2 = d * d;
    let m = m2 + 1;
    let k = opts.k;
    let big = 10.0 * k;
    let (p, q) = f.growth();
    let lam = |x: &[f64], o: usize| (Mat::from_slice(d, &x[o..o + m2]), x[o + m2]);
    let rel = |x: &[f64], lo: usize, xo: usize| -> Option<f64> {
        let (l1, l2) = lam(x, lo);
        let (x1, x2) = lam(x, xo);
        f.relative_energy(&(l1 + x1), l2 + x2, &l1, l2).ok()
    };
    let inc_ok = |x: &[f64], o: usize| vec_norm(&x[o..o + m]) >= MIN_INCREMENT;
    let vden = |x: &[f64], o: usize| {
        let (x1, x2) = lam(x, o);
        v_aux_sq_from_norm(x1.norm(), p) + v_aux_sq_from_norm(x2.abs(), q)
    };
    let increment = |r: &mut SeededRng| -> Vec<f64> {
        let rho = if r.gen::<bool>() { log_uniform(r, 1e-3, big) } else { big * r.gen::<f64>() };
        random_unit(r, m).into_iter().map(|v| v * rho).collect()
    };
    let project = |x: &mut [f64], balls: &[(usize, f64)]| {
        for &(o, rad) in balls {
            clamp_norm(&mut x[o..o + m], rad);
        }
    };

    // (a) growth bound: x = [λ, ξ].
    let mut scale = vec![k; 2 * m];
    scale[m..].iter_mut().for_each(|s| *s = big / 4.0);
    let growth_bound = fit(
        "growth bound",
        opts,
        false,
        &scale,
        |r| {
            let mut x = ball(r, m, k);
            x.extend(increment(r));
            x
        },
        |x| {
            if !inc_ok(x, m) {
                return None;
            }
            Some(rel(x, 0, m)?.abs() / vden(x, m))
        },
        |x| project(x, &[(0, k), (m, big)]),
    );

    // (a) difference bound: x = [λ, ξ, z].
    let mut scale3 = vec![k; 3 * m];
    scale3[m..].iter_mut().for_each(|s| *s = big / 4.0);
    let weights = |x: &[f64]| {
        let (x1, x2) = lam(x, m);
        let (z1, z2) = lam(x, 2 * m);
        let (a, b, c, e) = (x1.norm(), x2.abs(), z1.norm(), z2.abs());
        let base = a + b + c + e;
        let a1 = base + a.powf(p - 1.0) + c.powf(p - 1.0) + b.powf(q * (p - 1.0) / p);
        let a2 = base + b.powf(q - 1.0) + e.powf(q - 1.0) + c.powf(p * (q - 1.0) / q);
        a1 * (x1 - z1).norm() + a2 * (x2 - z2).abs()
    };
    let difference = fit(
        "difference bound",
        opts,
        false,
        &scale3,
        |r| {
            let mut x = ball(r, m, k);
            let xi = increment(r);
            let z: Vec<f64> = if r.gen::<bool>() {
                let eps = log_uniform(r, 1e-4, 1.0);
                let dz = random_unit(r, m);
                xi.iter().zip(dz).map(|(a, b)| a + eps * b).collect()
            } else {
                increment(r)
            };
            x.extend(xi);
            x.extend(z);
            x
        },
        |x| {
            let w = weights(x);
            let gap: f64 = (0..m).map(|i| (x[m + i] - x[2 * m + i]).powi(2)).sum::<f64>().sqrt();
            if gap < 1e-6 * (1.0 + vec_norm(&x[m..2 * m])) {
                return None;
            }
            Some((rel(x, 0, m)? - rel(x, 0, 2 * m)?).abs() / w)
        },
        |x| project(x, &[(0, k), (m, big), (2 * m, big)]),
    );

    // (b) base-point continuity: x = [λ, μ, ξ].
    let mut scale_b = vec![k; 3 * m];
    scale_b[2 * m..].iter_mut().for_each(|s| *s = big / 4.0);
    let continuity = fit(
        "base-point continuity",
        opts,
        false,
        &scale_b,
        |r| {
            let mut x = ball(r, m, k);
            let eps = log_uniform(r, 1e-4, k);
            let dz = random_unit(r, m);
            let mut mu: Vec<f64> = x.iter().zip(dz).map(|(a, b)| a + eps * b).collect();
            clamp_norm(&mut mu, k);
            x.extend(mu);
            x.extend(increment(r));
            x
        },
        |x| {
            let dist: f64 = (0..m).map(|i| (x[i] - x[m + i]).powi(2)).sum::<f64>().sqrt();
            let den = vden(x, 2 * m);
            if dist < 1e-6 || !inc_ok(x, 2 * m) {
                return None;
            }
            Some((rel(x, 0, 2 * m)? - rel(x, m, 2 * m)?).abs() / (dist * den))
        },
        |x| project(x, &[(0, k), (m, k), (2 * m, big)]),
    );
    let lip = continuity.constant;
    let radius_for_delta = [0.5, 0.1, 0.01].iter().map(|&dl| (dl, if lip > 0.0 { dl / lip } else { f64::INFINITY })).collect();

    // (c) coercivity: d₁ from the outer shell 5K <= |ξ| <= 10K, where the
    // p/q-growth dominates, then d₂ over all increments against the published d₁.
    let sp = |x: &[f64]| {
        let (x1, x2) = lam(x, m);
        x1.norm().powf(p) + x2.abs().powf(q)
    };
    let s2 = |x: &[f64]| {
        let (x1, x2) = lam(x, m);
        x1.norm_sq() + x2 * x2
    };
    let far = |r: &mut SeededRng| {
        let mut x = ball(r, m, k);
        let rho = log_uniform(r, 0.5 * big, big);
        x.extend(random_unit(r, m).into_iter().map(|v| v * rho));
        x
    };
    let project_far = |x: &mut [f64]| {
        clamp_norm(&mut x[..m], k);
        let n = vec_norm(&x[m..]);
        if n < 0.5 * big && n > 0.0 {
            x[m..].iter_mut().for_each(|v| *v *= 0.5 * big / n);
        }
        clamp_norm(&mut x[m..], big);
    };
    let d1 = fit("coercivity d1", opts, true, &scale, far, |x| Some(rel(x, 0, m)? / sp(x)), project_far);
    let d1v = d1.constant;
    let d2_opts = opts.clone();
    let mut d2 = fit(
        "coercivity d2",
        &d2_opts,
        false,
        &scale,
        |r| {
            let mut x = ball(r, m, k);
            x.extend(increment(r));
            x
        },
        |x| {
            if !inc_ok(x, m) {
                return None;
            }
            let den = s2(x);
            Some(((d1v * sp(x) - rel(x, 0, m)?) / den).max(0.0))
        },
        |x| project(x, &[(0, k), (m, big)]),
    );
    let mut violations = Vec::new();
    if !(d1.constant > 0.0) {
        violations.push(format!("no positive coercivity coefficient: inf f/(|xi1|^p+|xi2|^q) = {:.3e} on the outer shell", d1.estimate_doubled));
    }
    if d2.estimate_doubled == 0.0 {
        d2.constant = 0.0;
    }
    AppendixAReport { growth_bound, difference, continuity, radius_for_delta, d1, d2, violations }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::constitutive::Quadratic;

    fn quick() -> AuditOptions {
        AuditOptions { samples: 400, ..AuditOptions::default() }
    }

    #[test]
    fn quadratic_growth_hypotheses_hold() {
        let rep = check_growth_hypotheses(&Quadratic::model(2, 1.0), &quick());
        assert!(rep.ok(), "{:?}", rep.violations);
        assert!(rep.lower_slope > 0.0);
    }

    #[test]
    fn quadratic_coercivity_constants() {
        let rep = appendix_a_check(&Quadratic::model(2, 1.0), &quick());
        assert!((rep.d1.estimate_doubled - 0.5).abs() < 1e-9);
        assert!(rep.d2.estimate_doubled.abs() < 1e-6, "{:?}", rep.d2);
        assert!((rep.growth_bound.estimate_doubled - 0.25).abs() < 1e-6);
    }
}
