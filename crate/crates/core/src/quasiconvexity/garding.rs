//! Small-cube quasiconvexity and Gårding-type inequalities over a background
//! state.

use rayon::prelude::*;

use super::background::BackgroundField;
use super::descent::{evaluate, normalize, random_field, ratio, ratio_descent, v_sq_parts, CellTerms, Constraints, Integrand, VDenominator};
use super::hessian::symbol_min;
use super::{laminate_directions, laminate_field_with_frequency, RelativeEnergy};
use crate::constitutive::EnergyModel;
use crate::error::{Error, Result};
use crate::fields::{v_aux_sq, zero_trace_mask, BoundaryMode, Grid, TestField};

/// `C0 e(z̄+w|z̄) + C1 |V_p(φ)|²`.
struct MarginNumerator<'a> {
    rel: &'a RelativeEnergy<'a>,
    c0: f64,
    c1: f64,
    p: f64,
}

impl Integrand for MarginNumerator<'_> {
    fn eval(&self, cell: usize, g: &[f64], phi: &[f64], psi: f64) -> Option<CellTerms> {
        let mut t = self.rel.eval(cell, g, phi, psi)?;
        t.value *= self.c0;
        t.d_g.iter_mut().for_each(|v| *v *= self.c0);
        t.d_psi *= self.c0;
        let r = phi.iter().map(|x| x * x).sum::<f64>().sqrt();
        let (val, fac) = v_sq_parts(r, self.p);
        t.value += self.c1 * val;
        for (k, x) in phi.iter().enumerate() {
            t.d_phi[k] = self.c1 * fac * x;
        }
        Some(t)
    }
}

/// `(R, P, D) = (∫ e(z̄+w|z̄), ∫ |V_p(φ)|², ∫ |V_p(∇φ)|² + |V_q(ψ)|²)`;
/// `None` for inadmissible excursions.
fn margin_parts(tf: &TestField, rel: &RelativeEnergy, p: f64, q: f64) -> Result<Option<(f64, f64, f64)>> {
    let g = tf.grad_phi()?;
    let Some(r) = evaluate(tf, &g, rel, false)? else { return Ok(None) };
    let den = evaluate(tf, &g, &VDenominator { p, q }, false)?.map_or(0.0, |e| e.value);
    let n = tf.grid().cells() as f64;
    let pp: f64 = (0..tf.grid().cells()).map(|c| v_aux_sq(tf.phi.cell(c), p)).sum::<f64>() / n;
    Ok(Some((r.value, pp, den)))
}

#[derive(Clone, Debug)]
pub struct GardingReport {
    pub c0: f64,
    pub c1: f64,
    /// `M = C0 R + C1 P - D` per field.
    pub margins: Vec<f64>,
    pub min_margin: f64,
    pub violations: usize,
    pub worst_index: Option<usize>,
}

impl GardingReport {
    pub fn passed(&self) -> bool {
        self.violations == 0
    }
}

/// Violation threshold relative to `D`.
const MARGIN_TOL: f64 = 1e-10;

fn check_batch_shape(tf: &TestField) -> Result<()> {
    if tf.mode != BoundaryMode::ZeroTrace {
        return Err(Error::InvalidParameter("Gårding fields must be zero-trace".into()));
    }
    let mean = tf.psi.mean()[0];
    if mean.abs() > 1e-10 * (1.0 + tf.psi.max_abs()) {
        return Err(Error::InvalidParameter(format!("psi must have zero mean, got {mean:e}")));
    }
    Ok(())
}

/// Margins `C0 ∫e(F̄+∇φ, η̄+ψ | F̄, η̄) + C1 ∫|V_p(φ)|² - ∫|V_p(∇φ)|² + |V_q(ψ)|²`.
pub fn garding_check(model: &EnergyModel, bg: &BackgroundField, c0: f64, c1: f64, batch: &[TestField]) -> Result<GardingReport> {
    let rel = RelativeEnergy::background(model, bg)?;
    let (p, q) = model.growth();
    for tf in batch {
        check_batch_shape(tf)?;
        if tf.grid() != bg.grid() {
            return Err(Error::GridMismatch("test field and background".into()));
        }
    }
    let parts: Vec<(f64, f64, f64)> = batch
        .par_iter()
        .map(|tf| margin_parts(tf, &rel, p, q)?.ok_or_else(|| Error::InadmissibleState("test field leaves the admissible region".into())))
        .collect::<Result<_>>()?;
    Ok(report_from_parts(c0, c1, &parts))
}

fn report_from_parts(c0: f64, c1: f64, parts: &[(f64, f64, f64)]) -> GardingReport {
    let margins: Vec<f64> = parts.iter().map(|(r, p, d)| c0 * r + c1 * p - d).collect();
    let mut worst = None;
    let mut violations = 0;
    let mut min_margin = f64::INFINITY;
    for (i, (m, (_, _, d))) in margins.iter().zip(parts).enumerate() {
        if *m < -MARGIN_TOL * d.max(f64::MIN_POSITIVE) {
            violations += 1;
        }
        if *m < min_margin {
            min_margin = *m;
            worst = Some(i);
        }
    }
    if margins.is_empty() {
        min_margin = 0.0;
    }
    GardingReport { c0, c1, margins, min_margin, violations, worst_index: worst }
}

#[derive(Clone, Debug)]
pub struct GardingOptions {
    /// Size of the adversarial batch.
    pub budget: usize,
    pub seed: u64,
    /// Descent iterations per adversarial start.
    pub iters: usize,
    pub c0_ladder: Vec<f64>,
    pub c1_ladder: Vec<f64>,
    /// Size of the fresh validation batch.
    pub holdout: usize,
}

impl Default for GardingOptions {
    fn default() -> Self {
        GardingOptions {
            budget: 64,
            seed: 0,
            iters: 20,
            c0_ladder: (0..=60).map(|k| 1.1f64.powi(k)).collect(),
            c1_ladder: vec![0.0, 1e-2, 1e-1, 1.0, 10.0, 100.0],
            holdout: 200,
        }
    }
}

#[derive(Clone, Debug)]
pub struct GardingEstimate {
    pub c0: f64,
    pub c1: f64,
    /// A pair survived the adversarial loop and the hold-out batch.
    pub verified: bool,
    /// Smallest `M / D` over the adversarial batch at the returned pair.
    pub worst_margin: f64,
    /// Smallest margin over the hold-out batch (`NaN` if not reached).
    pub holdout_min_margin: f64,
    /// `(C0, C1, smallest M/D on the batch)` for every pair examined.
    pub evidence: Vec<(f64, f64, f64)>,
    pub batch_size: usize,
    /// Field with the most negative margin under `(c0, c1)` when unverified.
    pub witness: Option<TestField>,
}

/// Zero-trace fields with zero-mean `ψ`: random smooth fields at several
/// amplitudes, masked laminates up to the highest resolvable frequency (the
/// small-`‖φ‖` regime), and pure-`ψ` fields.
pub fn garding_batch(grid: Grid, count: usize, seed: u64) -> Result<Vec<TestField>> {
    let d = grid.dim();
    let cons = Constraints::zero_mean(true);
    let amps = [0.05, 0.5, 2.0];
    let n_random = count.div_ceil(3).max(1);
    let mut out: Vec<TestField> = (0..n_random)
        .into_par_iter()
        .map(|k| random_field(grid, BoundaryMode::ZeroTrace, 1 + k % 3, amps[k % 3], seed, 0x6A00 + k as u64, &cons))
        .collect::<Result<_>>()?;
    let n_lam = count.saturating_sub(2 * n_random).max(1);
    let dirs = laminate_directions(d, n_lam, seed);
    let mut freq = 1usize;
    let mut k = 0;
    while out.len() < n_random + n_lam {
        let (a, n, frac) = &dirs[k % dirs.len()];
        if let Ok(l) = laminate_field_with_frequency(a, n, *frac, 1.0, grid, 1.0, freq) {
            let mut tf = l.field;
            tf.mode = BoundaryMode::ZeroTrace;
            tf.apply_mask();
            if normalize(&mut tf, amps[k % 3])? {
                out.push(tf);
            }
        }
        k += 1;
        freq = if freq * 2 > grid.n() / 4 { 1 } else { freq * 2 };
        if k > 64 * (n_lam + dirs.len()) {
            break;
        }
    }
    for j in 0..n_random {
        let mut tf = random_field(grid, BoundaryMode::ZeroTrace, 1 + j % 3, amps[j % 3], seed, 0x6B00 + j as u64, &cons)?;
        tf.phi.scale(0.0);
        tf.psi.subtract_mean();
        if !tf.is_zero() {
            out.push(tf);
        }
    }
    Ok(out)
}

/// Adversarial search for `(C0, C1)`: walk the ladders in order, reject a
/// pair on any cached violation, otherwise attack it with descent on
/// `(C0 R + C1 P) / D` from the worst cached fields, and accept it once it
/// also passes a fresh hold-out batch.
pub fn garding_estimate_constants(model: &EnergyModel, bg: &BackgroundField, opts: &GardingOptions) -> Result<GardingEstimate> {
    let grid = bg.grid();
    if model.dim() != grid.dim() {
        return Err(Error::InvalidParameter("model and background dimensions differ".into()));
    }
    let rel = RelativeEnergy::background(model, bg)?;
    let (p, q) = model.growth();
    let den = VDenominator { p, q };
    let cons = Constraints::zero_mean(true);
    let mut batch = Vec::new();
    let mut parts = Vec::new();
    for tf in garding_batch(grid, opts.budget, opts.seed)? {
        if let Some(pt) = margin_parts(&tf, &rel, p, q)? {
            if pt.2 > 0.0 {
                batch.push(tf);
                parts.push(pt);
            }
        }
    }
    let holdout: Vec<TestField> = garding_batch(grid, opts.holdout, opts.seed ^ 0x5A5A_5A5A)?;
    let holdout_parts: Vec<Option<(f64, f64, f64)>> =
        holdout.par_iter().map(|tf| margin_parts(tf, &rel, p, q)).collect::<Result<_>>()?;
    let (holdout, holdout_parts): (Vec<TestField>, Vec<(f64, f64, f64)>) = holdout
        .into_iter()
        .zip(holdout_parts)
        .filter_map(|(tf, pt)| pt.filter(|x| x.2 > 0.0).map(|x| (tf, x)))
        .unzip();

    let worst_ratio = |parts: &[(f64, f64, f64)], c0: f64, c1: f64| -> (f64, usize) {
        let mut w = (f64::INFINITY, 0);
        for (i, (r, pp, d)) in parts.iter().enumerate() {
            let m = (c0 * r + c1 * pp - d) / d;
            if m < w.0 {
                w = (m, i);
            }
        }
        w
    };
    let mut evidence = Vec::new();
    let mut best: Option<(f64, f64, f64)> = None;
    for &c0 in &opts.c0_ladder {
        for &c1 in &opts.c1_ladder {
            let (w, _) = worst_ratio(&parts, c0, c1);
            evidence.push((c0, c1, w));
            if best.map_or(true, |b| w > b.2) {
                best = Some((c0, c1, w));
            }
            if w < -MARGIN_TOL {
                continue;
            }
            // attack from the two worst fields
            let mut order: Vec<usize> = (0..parts.len()).collect();
            let key = |i: usize| {
                let (r, pp, d) = parts[i];
                (c0 * r + c1 * pp - d) / d
            };
            order.sort_by(|a, b| key(*a).partial_cmp(&key(*b)).unwrap());
            let num = MarginNumerator { rel: &rel, c0, c1, p };
            let mut found = false;
            for &i in order.iter().take(2) {
                let start = batch[i].clone();
                let amp = super::descent::energy_norm(&start)?;
                if let Some(res) = ratio_descent(start, &num, &den, amp, opts.iters, &cons)? {
                    if res.value < 1.0 - MARGIN_TOL {
                        if let Some(pt) = margin_parts(&res.field, &rel, p, q)? {
                            batch.push(res.field);
                            parts.push(pt);
                            found = true;
                        }
                    }
                }
            }
            if found {
                continue;
            }
            let (hw, _) = worst_ratio(&holdout_parts, c0, c1);
            if hw < -MARGIN_TOL {
                for (tf, &(r, pp, d)) in holdout.iter().zip(&holdout_parts) {
                    if c0 * r + c1 * pp - d < -MARGIN_TOL * d {
                        batch.push(tf.clone());
                        parts.push((r, pp, d));
                    }
                }
                continue;
            }
            let rep = report_from_parts(c0, c1, &holdout_parts);
            return Ok(GardingEstimate {
                c0,
                c1,
                verified: true,
                worst_margin: worst_ratio(&parts, c0, c1).0,
                holdout_min_margin: rep.min_margin,
                evidence,
                batch_size: parts.len(),
                witness: None,
            });
        }
    }
    let (c0, c1, _) = best.unwrap_or((f64::NAN, f64::NAN, f64::NAN));
    // re-rank with the fields added by the attacks
    let (w, i) = worst_ratio(&parts, c0, c1);
    let witness = (w < -MARGIN_TOL).then(|| batch[i].clone());
    Ok(GardingEstimate { c0, c1, verified: false, worst_margin: w, holdout_min_margin: f64::NAN, evidence, batch_size: parts.len(), witness })
}

#[derive(Clone, Debug)]
pub struct RadiusResult {
    pub radius: f64,
    pub min_quotient: f64,
    pub violated: bool,
}

#[derive(Clone, Debug)]
pub struct SmallCubeReport {
    pub x0: usize,
    pub c0: f64,
    /// `c0 / 4`.
    pub threshold: f64,
    pub radii: Vec<RadiusResult>,
    /// Largest tested radius such that it and every smaller tested radius
    /// show no violation.
    pub largest_ok: Option<f64>,
    pub witness: Option<TestField>,
}

/// Product of cosine ramps over five cells inside the cube of side `r`
/// centered at cell `x0`.
fn cube_mask(grid: Grid, x0: usize, r: f64) -> Result<Vec<f64>> {
    let n = grid.n() as f64;
    let half = 0.5 * r * n;
    if half < 6.0 {
        return Err(Error::UnresolvableScale(format!("cube of side {r} spans fewer than 12 cells")));
    }
    let i0 = grid.multi_index(x0);
    for a in 0..grid.dim() {
        let lo = i0[a] as f64 + 0.5 - half;
        let hi = i0[a] as f64 + 0.5 + half;
        if lo < 1.0 || hi > n - 1.0 {
            return Err(Error::InvalidParameter(format!("cube of side {r} around cell {x0} exceeds the domain")));
        }
    }
    let ramp = |t: f64| {
        if t <= 0.0 {
            0.0
        } else if t >= 5.0 {
            1.0
        } else {
            0.5 * (1.0 - (std::f64::consts::PI * t / 5.0).cos())
        }
    };
    Ok((0..grid.cells())
        .map(|c| {
            let m = grid.multi_index(c);
            (0..grid.dim()).map(|a| ramp(half - (m[a] as f64 - i0[a] as f64).abs())).product()
        })
        .collect())
}

/// For each radius (descending), the smallest of `∫ e(z̄+w|z̄) / ∫ |V(w)|²`
/// over fields supported in the cube of side `r` around `x0`, compared with
/// `c0/4`. `model` is the energy under test (typically `ẽ`); `c0` defaults to
/// a quarter of the Hessian symbol minimum at `x0`.
pub fn small_cube_radius_probe(
    model: &EnergyModel,
    bg: &BackgroundField,
    x0: usize,
    radii: &[f64],
    n_fields: usize,
    seed: u64,
    c0: Option<f64>,
) -> Result<SmallCubeReport> {
    let grid = bg.grid();
    if x0 >= grid.cells() || model.dim() != grid.dim() {
        return Err(Error::InvalidParameter("x0 outside the grid or dimension mismatch".into()));
    }
    if radii.windows(2).any(|w| w[1] > w[0]) || radii.iter().any(|r| !(*r > 0.0)) {
        return Err(Error::InvalidParameter("radii must be positive and descending".into()));
    }
    if radii.iter().any(|r| *r > 1.0) {
        return Err(Error::InvalidParameter("cube exceeds the domain".into()));
    }
    let rel = RelativeEnergy::background(model, bg)?;
    let c0 = match c0 {
        Some(c) => c,
        None => {
            let (f, eta) = bg.state(x0);
            symbol_min(&model.hessian(&f, eta)?, 128).value / 4.0
        }
    };
    let threshold = c0 / 4.0;
    let (p, q) = model.growth();
    let den = VDenominator { p, q };
    let d = grid.dim();
    let global = zero_trace_mask(grid);
    let mut results = Vec::new();
    let mut witness: Option<(f64, TestField)> = None;
    for &r in radii {
        let mask = cube_mask(grid, x0, r)?;
        let cons = Constraints { zero_mean_psi: false, support: Some(mask.clone()), psi_in_support: true };
        let kmax = ((1.0 / r).round() as usize).clamp(1, 4);
        let mut fields: Vec<TestField> = (0..n_fields.max(1))
            .into_par_iter()
            .map(|k| random_field(grid, BoundaryMode::ZeroTrace, kmax + k % 2, [0.01, 0.1, 1.0][k % 3], seed, 0x5C00 + k as u64, &cons))
            .collect::<Result<_>>()?;
        let base = ((1.0 / r).ceil() as usize).max(1);
        for (a, n, frac) in laminate_directions(d, n_fields.min(8), seed) {
            for freq in [base, 2 * base, 4 * base] {
                let Ok(l) = laminate_field_with_frequency(&a, &n, frac, 1.0, grid, 1.0, freq) else { continue };
                for amp in [0.01, 0.1, 1.0] {
                    let mut tf = l.field.clone();
                    tf.mode = BoundaryMode::ZeroTrace;
                    for (c, w) in mask.iter().enumerate() {
                        tf.phi.cell_mut(c).iter_mut().for_each(|v| *v *= w * global[c]);
                    }
                    if normalize(&mut tf, amp)? {
                        fields.push(tf);
                    }
                }
            }
        }
        let vals: Vec<Option<f64>> = fields.par_iter().map(|tf| ratio(tf, &rel, &den)).collect::<Result<_>>()?;
        let mut local: Option<(f64, usize)> = None;
        for (i, v) in vals.iter().enumerate() {
            if let Some(v) = v {
                if local.map_or(true, |(b, _)| *v < b) {
                    local = Some((*v, i));
                }
            }
        }
        let mut min_q = f64::INFINITY;
        let mut wit = None;
        if let Some((v, i)) = local {
            min_q = v;
            let start = fields[i].clone();
            wit = Some(start.clone());
            let amp = super::descent::energy_norm(&start)?;
            if let Some(res) = ratio_descent(start, &rel, &den, amp, 20, &cons)? {
                if res.value < min_q {
                    min_q = res.value;
                    wit = Some(res.field);
                }
            }
        }
        let violated = min_q < threshold;
        if violated {
            if let Some(w) = wit {
                if witness.as_ref().map_or(true, |(b, _)| min_q < *b) {
                    witness = Some((min_q, w));
                }
            }
        }
        results.push(RadiusResult { radius: r, min_quotient: min_q, violated });
    }
    let mut largest_ok = None;
    for res in results.iter().rev() {
        if res.violated {
            break;
        }
        largest_ok = Some(res.radius);
    }
    Ok(SmallCubeReport { x0, c0, threshold, radii: results, largest_ok, witness: witness.map(|(_, w)| w) })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::constitutive::Quadratic;
    use crate::fields::make_grid;
    use crate::tensor::Mat;

    #[test]
    fn quadratic_margin_is_zero_at_four() {
        let g = make_grid(2, 32).unwrap();
        let m = Quadratic::model(2, 1.0);
        let bg = BackgroundField::constant(g, &Mat::identity(2), 0.5).unwrap();
        let batch = garding_batch(g, 12, 3).unwrap();
        let r = garding_check(&m, &bg, 4.0, 0.0, &batch).unwrap();
        assert!(r.passed() && r.min_margin > -1e-12);
        let r = garding_check(&m, &bg, 3.9, 0.0, &batch).unwrap();
        assert_eq!(r.violations, batch.len());
        let z = vec![TestField::zeros(g, BoundaryMode::ZeroTrace)];
        assert_eq!(garding_check(&m, &bg, 4.0, 0.0, &z).unwrap().min_margin, 0.0);
    }

    #[test]
    fn cube_mask_rejects_large_cubes() {
        let g = make_grid(2, 64).unwrap();
        let x0 = g.linear_index(&[32, 32]);
        assert!(cube_mask(g, x0, 0.5).is_ok());
        assert!(cube_mask(g, x0, 0.99).is_err());
        assert!(matches!(cube_mask(g, x0, 0.1), Err(Error::UnresolvableScale(_))));
    }
}
