//! Integral functionals of `(∇φ, φ, ψ)` with cellwise integrands, their
//! L² gradients, and a projected descent on ratios of two such functionals.

use rand::Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::fields::{divergence_with_mode, zero_trace_mask, BoundaryMode, Grid, GridField, Rank, TestField};
use crate::sampling::{standard_normal, substream};

/// Value and partial derivatives of an integrand at one cell.
#[derive(Clone, Copy, Debug, Default)]
pub(crate) struct CellTerms {
    pub value: f64,
    pub d_g: [f64; 9],
    pub d_phi: [f64; 3],
    pub d_psi: f64,
}

/// Cellwise integrand `f(x_c, ∇φ, φ, ψ)`; `None` marks an inadmissible value.
pub(crate) trait Integrand: Sync {
    fn eval(&self, cell: usize, g: &[f64], phi: &[f64], psi: f64) -> Option<CellTerms>;
}

pub(crate) struct Evaluated {
    pub value: f64,
    pub grad_phi: GridField,
    pub grad_psi: GridField,
}

/// Mean of the integrand over the grid. With `grad`, also the L² gradient
/// `(-div ∂f/∂G + ∂f/∂φ, ∂f/∂ψ)` in the mean inner product.
pub(crate) fn evaluate(tf: &TestField, gphi: &GridField, f: &dyn Integrand, grad: bool) -> Result<Option<Evaluated>> {
    let grid = tf.grid();
    let d = grid.dim();
    let cells: Vec<Option<CellTerms>> = (0..grid.cells())
        .into_par_iter()
        .map(|c| f.eval(c, gphi.cell(c), tf.phi.cell(c), tf.psi.cell(c)[0]))
        .collect();
    if cells.iter().any(|c| c.is_none()) {
        return Ok(None);
    }
    let cells: Vec<CellTerms> = cells.into_iter().map(|c| c.unwrap()).collect();
    let n = grid.cells() as f64;
    let value = cells.iter().map(|c| c.value).sum::<f64>() / n;
    if !value.is_finite() {
        return Ok(None);
    }
    if !grad {
        return Ok(Some(Evaluated {
            value,
            grad_phi: GridField::zeros(grid, Rank::Vector),
            grad_psi: GridField::zeros(grid, Rank::Scalar),
        }));
    }
    let mut dg = GridField::zeros(grid, Rank::Matrix);
    let mut dphi = GridField::zeros(grid, Rank::Vector);
    let mut dpsi = GridField::zeros(grid, Rank::Scalar);
    for (c, t) in cells.iter().enumerate() {
        dg.cell_mut(c).copy_from_slice(&t.d_g[..d * d]);
        dphi.cell_mut(c).copy_from_slice(&t.d_phi[..d]);
        dpsi.cell_mut(c)[0] = t.d_psi;
    }
    let div = divergence_with_mode(&dg, tf.mode)?;
    dphi.axpy(-1.0, &div)?;
    Ok(Some(Evaluated { value, grad_phi: dphi, grad_psi: dpsi }))
}

/// `|V_p(∇φ)|² + |V_q(ψ)|²`.
pub(crate) struct VDenominator {
    pub p: f64,
    pub q: f64,
}

/// `(r^s + r², (s r^{s-2} + 2))`: value and the radial factor of its gradient.
#[inline]
pub(crate) fn v_sq_parts(r: f64, s: f64) -> (f64, f64) {
    let fac = if r > 0.0 { s * r.powf(s - 2.0) + 2.0 } else if s == 2.0 { 4.0 } else { 2.0 };
    (r.powf(s) + r * r, fac)
}

impl Integrand for VDenominator {
    fn eval(&self, _cell: usize, g: &[f64], _phi: &[f64], psi: f64) -> Option<CellTerms> {
        let mut t = CellTerms::default();
        let r = g.iter().map(|x| x * x).sum::<f64>().sqrt();
        let (vg, fg) = v_sq_parts(r, self.p);
        let (vp, fp) = v_sq_parts(psi.abs(), self.q);
        t.value = vg + vp;
        for (k, x) in g.iter().enumerate() {
            t.d_g[k] = fg * x;
        }
        t.d_psi = fp * psi;
        Some(t)
    }
}

/// `|∇φ|² + ψ²`.
pub(crate) struct L2Denominator;

impl Integrand for L2Denominator {
    fn eval(&self, _cell: usize, g: &[f64], _phi: &[f64], psi: f64) -> Option<CellTerms> {
        let mut t = CellTerms { value: g.iter().map(|x| x * x).sum::<f64>() + psi * psi, ..Default::default() };
        for (k, x) in g.iter().enumerate() {
            t.d_g[k] = 2.0 * x;
        }
        t.d_psi = 2.0 * psi;
        Some(t)
    }
}

/// Constraints kept by the descent. `support` fixes `φ` (and `ψ` when
/// `psi_in_support`) to zero on cells where it vanishes; zero-trace fields
/// default to the collar mask.
#[derive(Clone, Debug, Default)]
pub(crate) struct Constraints {
    pub zero_mean_psi: bool,
    pub support: Option<Vec<f64>>,
    pub psi_in_support: bool,
}

impl Constraints {
    pub fn zero_mean(zero_mean_psi: bool) -> Self {
        Constraints { zero_mean_psi, ..Default::default() }
    }
}

pub(crate) fn energy_norm(tf: &TestField) -> Result<f64> {
    let g = tf.grad_phi()?;
    Ok((g.l2_sq() + tf.psi.l2_sq()).sqrt())
}

/// Rescale so that `(∫|∇φ|² + ψ²)^{1/2} = amplitude`.
pub(crate) fn normalize(tf: &mut TestField, amplitude: f64) -> Result<bool> {
    let nrm = energy_norm(tf)?;
    if !(nrm > 0.0) || !nrm.is_finite() {
        return Ok(false);
    }
    tf.scale(amplitude / nrm);
    Ok(true)
}

fn project(tf: &mut TestField, mask: Option<&[f64]>, cons: &Constraints) {
    if let Some(mask) = mask {
        let d = tf.grid().dim();
        for (c, m) in mask.iter().enumerate() {
            if *m == 0.0 {
                for k in 0..d {
                    tf.phi.cell_mut(c)[k] = 0.0;
                }
                if cons.psi_in_support {
                    tf.psi.cell_mut(c)[0] = 0.0;
                }
            }
        }
    }
    if cons.zero_mean_psi {
        tf.psi.subtract_mean();
    }
}

/// Random low-frequency field with modes `|k|∞ ≤ kmax`, masked in zero-trace
/// mode, `ψ` zero-mean when required, scaled to `amplitude`.
pub(crate) fn random_field(grid: Grid, mode: BoundaryMode, kmax: usize, amplitude: f64, seed: u64, label: u64, cons: &Constraints) -> Result<TestField> {
    let d = grid.dim();
    let mut r = substream(seed, label);
    let side = 2 * kmax + 1;
    let nmodes = side.pow(d as u32);
    let mut coef = Vec::with_capacity(nmodes * (d + 1) * 2);
    for _ in 0..nmodes * (d + 1) * 2 {
        coef.push(standard_normal(&mut r));
    }
    let phase_shift: f64 = r.gen_range(0.0..1.0);
    let wave = |x: &[f64], comp: usize| -> f64 {
        let mut s = 0.0;
        for m in 0..nmodes {
            let mut rem = m;
            let mut kx = 0.0;
            let mut k2 = 0.0;
            for a in 0..d {
                let k = (rem % side) as f64 - kmax as f64;
                rem /= side;
                kx += k * x[a];
                k2 += k * k;
            }
            let w = 1.0 / (1.0 + k2);
            let arg = 2.0 * std::f64::consts::PI * (kx + phase_shift);
            let base = (m * (d + 1) + comp) * 2;
            s += w * (coef[base] * arg.cos() + coef[base + 1] * arg.sin());
        }
        s
    };
    let phi = GridField::from_fn(grid, Rank::Vector, |x, out| {
        for (i, o) in out.iter_mut().enumerate() {
            *o = wave(x, i);
        }
    });
    let psi = GridField::scalar_from_fn(grid, |x| wave(x, d));
    let mut tf = TestField { phi, psi, mode };
    tf.apply_mask();
    if let Some(m) = &cons.support {
        for (c, w) in m.iter().enumerate() {
            for v in tf.phi.cell_mut(c) {
                *v *= w;
            }
            if cons.psi_in_support {
                tf.psi.cell_mut(c)[0] *= w;
            }
        }
    }
    if mode == BoundaryMode::Periodic {
        tf.phi.subtract_mean();
    }
    if cons.zero_mean_psi {
        tf.psi.subtract_mean();
    }
    if !normalize(&mut tf, amplitude)? {
        return Err(Error::ZeroDenominator("random field vanished".into()));
    }
    Ok(tf)
}

/// Ratio `N/D` at a field; `None` when inadmissible or `D = 0`.
pub(crate) fn ratio(tf: &TestField, num: &dyn Integrand, den: &dyn Integrand) -> Result<Option<f64>> {
    let g = tf.grad_phi()?;
    let (Some(n), Some(d)) = (evaluate(tf, &g, num, false)?, evaluate(tf, &g, den, false)?) else {
        return Ok(None);
    };
    if !(d.value > 0.0) {
        return Ok(None);
    }
    Ok(Some(n.value / d.value))
}

pub(crate) struct DescentResult {
    pub field: TestField,
    pub value: f64,
    pub evaluations: usize,
}

/// Projected gradient descent on `N/D` with the energy norm held at
/// `amplitude`; adaptive step with backtracking.
pub(crate) fn ratio_descent(
    start: TestField,
    num: &dyn Integrand,
    den: &dyn Integrand,
    amplitude: f64,
    iters: usize,
    cons: &Constraints,
) -> Result<Option<DescentResult>> {
    let mask = match &cons.support {
        Some(m) => Some(m.clone()),
        None => (start.mode == BoundaryMode::ZeroTrace).then(|| zero_trace_mask(start.grid())),
    };
    let mut tf = start;
    project(&mut tf, mask.as_deref(), cons);
    if !normalize(&mut tf, amplitude)? {
        return Ok(None);
    }
    let mut evals = 0;
    let Some(mut q) = ratio(&tf, num, den)? else { return Ok(None) };
    evals += 1;
    let mut step = 0.0;
    for _ in 0..iters {
        let g = tf.grad_phi()?;
        let (Some(n), Some(d)) = (evaluate(&tf, &g, num, true)?, evaluate(&tf, &g, den, true)?) else { break };
        evals += 1;
        // ∇(N/D) = (∇N - Q ∇D) / D
        let mut gp = n.grad_phi;
        gp.axpy(-q, &d.grad_phi)?;
        gp.scale(1.0 / d.value);
        let mut gs = n.grad_psi;
        gs.axpy(-q, &d.grad_psi)?;
        gs.scale(1.0 / d.value);
        let mut dir = TestField { phi: gp, psi: gs, mode: tf.mode };
        project(&mut dir, mask.as_deref(), cons);
        let gnorm = (dir.phi.l2_sq() + dir.psi.l2_sq()).sqrt();
        if !(gnorm > 0.0) || !gnorm.is_finite() {
            break;
        }
        let fnorm = (tf.phi.l2_sq() + tf.psi.l2_sq()).sqrt().max(1e-300);
        if step == 0.0 {
            step = 0.05 * fnorm / gnorm;
        }
        let mut accepted = false;
        for _ in 0..20 {
            let mut trial = tf.clone();
            trial.phi.axpy(-step, &dir.phi)?;
            trial.psi.axpy(-step, &dir.psi)?;
            project(&mut trial, mask.as_deref(), cons);
            if normalize(&mut trial, amplitude)? {
                evals += 1;
                if let Some(qt) = ratio(&trial, num, den)? {
                    if qt < q {
                        tf = trial;
                        q = qt;
                        accepted = true;
                        step *= 1.5;
                        break;
                    }
                }
            }
            step *= 0.5;
        }
        if !accepted {
            break;
        }
    }
    Ok(Some(DescentResult { field: tf, value: q, evaluations: evals }))
}
