//! Frozen-coefficient Hessian coercivity and its delocalized form with a
//! lower-order penalty.

use std::f64::consts::PI;

use nalgebra::{DMatrix, SymmetricEigen};
use rayon::prelude::*;

use super::background::BackgroundField;
use super::descent::{random_field, ratio_descent, CellTerms, Constraints, Integrand, L2Denominator};
use super::laminate_directions;
use crate::constitutive::{EnergyModel, HessianBlock};
use crate::error::{Error, Result};
use crate::fields::{BoundaryMode, TestField};
use crate::sampling::{halton, sphere_point};
use crate::tensor::vec_norm;

/// `δ` of the delocalized inequality.
pub const DELOCALIZATION_DELTA: f64 = 0.1;

#[derive(Clone, Debug, PartialEq)]
pub struct SymbolMin {
    pub value: f64,
    pub direction: Vec<f64>,
}

fn symbol_at(h: &HessianBlock, n: &[f64]) -> f64 {
    let d = h.d;
    let a = h.acoustic_tensor(n);
    let mut m = DMatrix::zeros(d + 1, d + 1);
    for i in 0..d {
        for j in 0..d {
            m[(i, j)] = a[i * d + j];
        }
        let b: f64 = (0..d).map(|al| h.f_eta.get(i, al) * n[al]).sum();
        m[(i, d)] = b;
        m[(d, i)] = b;
    }
    m[(d, d)] = h.eta_eta;
    SymmetricEigen::new(m).eigenvalues.min()
}

/// `min_{|n|=1} λ_min [[A(n), b(n)], [b(n)ᵀ, e_ηη]]` with `b_i = e_{F_iα η} n_α`:
/// the infimum of `∫ L[(∇φ,ψ),(∇φ,ψ)] / ∫ |∇φ|² + ψ²` over periodic fields
/// for constant coefficients.
pub fn symbol_min(h: &HessianBlock, n_dirs: usize) -> SymbolMin {
    let d = h.d;
    if d == 1 {
        return SymbolMin { value: symbol_at(h, &[1.0]), direction: vec![1.0] };
    }
    let mut best = (f64::INFINITY, vec![1.0; d]);
    for i in 0..n_dirs.max(d) as u64 {
        let n = if (i as usize) < d {
            (0..d).map(|k| if k == i as usize { 1.0 } else { 0.0 }).collect()
        } else {
            sphere_point(&halton(i, d), d)
        };
        let v = symbol_at(h, &n);
        if v < best.0 {
            best = (v, n);
        }
    }
    let (mut val, mut n) = best;
    let mut step = 0.1;
    for _ in 0..40 {
        let mut improved = false;
        for k in 0..d {
            for sgn in [1.0, -1.0] {
                let mut t = n.clone();
                t[k] += sgn * step;
                let nn = vec_norm(&t);
                t.iter_mut().for_each(|x| *x /= nn);
                let v = symbol_at(h, &t);
                if v < val {
                    val = v;
                    n = t;
                    improved = true;
                }
            }
        }
        if !improved {
            step *= 0.5;
        }
    }
    SymbolMin { value: val, direction: n }
}

/// `∫ L(x)[(∇φ,ψ),(∇φ,ψ)] - shift ∫(|∇φ|² + ψ²) + penalty ∫|φ|²` per cell.
pub(crate) struct HessianForm<'a> {
    pub h: &'a [HessianBlock],
    pub shift: f64,
    pub penalty: f64,
}

impl Integrand for HessianForm<'_> {
    fn eval(&self, cell: usize, g: &[f64], phi: &[f64], psi: f64) -> Option<CellTerms> {
        let h = &self.h[if self.h.len() == 1 { 0 } else { cell }];
        let d = h.d;
        let m = d * d;
        let mut t = CellTerms::default();
        let mut v = 0.0;
        for r in 0..m {
            let row: f64 = (0..m).map(|c| h.ff[r * m + c] * g[c]).sum();
            let fe = h.f_eta.as_slice()[r];
            v += row * g[r] + 2.0 * fe * g[r] * psi;
            t.d_g[r] = 2.0 * (row + fe * psi) - 2.0 * self.shift * g[r];
        }
        let g2: f64 = g.iter().map(|x| x * x).sum();
        v += h.eta_eta * psi * psi - self.shift * (g2 + psi * psi);
        let fe_g: f64 = (0..m).map(|r| h.f_eta.as_slice()[r] * g[r]).sum();
        t.d_psi = 2.0 * (fe_g + h.eta_eta * psi) - 2.0 * self.shift * psi;
        let p2: f64 = phi.iter().map(|x| x * x).sum();
        v += self.penalty * p2;
        for (k, x) in phi.iter().enumerate() {
            t.d_phi[k] = 2.0 * self.penalty * x;
        }
        t.value = v;
        Some(t)
    }
}

/// `(∫ Q, ∫ |∇φ|² + ψ², ∫ |φ|²)` for a field.
fn form_parts(tf: &TestField, h: &[HessianBlock], shift: f64) -> Result<(f64, f64, f64)> {
    let g = tf.grad_phi()?;
    let n = tf.grid().cells() as f64;
    let form = HessianForm { h, shift, penalty: 0.0 };
    let mut q = 0.0;
    let mut den = 0.0;
    for c in 0..tf.grid().cells() {
        let gc = g.cell(c);
        let psi = tf.psi.cell(c)[0];
        q += form.eval(c, gc, tf.phi.cell(c), psi).map(|t| t.value).unwrap_or(f64::NAN);
        den += gc.iter().map(|x| x * x).sum::<f64>() + psi * psi;
    }
    let p = tf.phi.l2_sq();
    Ok((q / n, den / n, p))
}

/// Random smooth fields and laminates (masked in zero-trace mode), with
/// laminates along `extra` normals added to the sweep.
fn sample_fields(grid: crate::fields::Grid, mode: BoundaryMode, n_fields: usize, seed: u64, extra: &[Vec<f64>]) -> Result<Vec<TestField>> {
    let d = grid.dim();
    let cons = Constraints::zero_mean(false);
    let mut out: Vec<TestField> = (0..n_fields)
        .into_par_iter()
        .map(|k| random_field(grid, mode, 1 + k % 3, 1.0, seed, 0x4E55 + k as u64, &cons))
        .collect::<Result<_>>()?;
    let mut dirs = laminate_directions(d, n_fields.min(16), seed);
    for n in extra {
        for i in 0..d {
            let a: Vec<f64> = (0..d).map(|k| if k == i { 1.0 } else { 0.0 }).collect();
            dirs.push((a, n.clone(), 0.5));
        }
    }
    for (a, n, frac) in dirs {
        for freq in [1usize, 2, 4] {
            let Ok(l) = super::laminate_field_with_frequency(&a, &n, frac, 1.0, grid, 1.0, freq) else { continue };
            let mut tf = l.field;
            tf.mode = mode;
            tf.apply_mask();
            if !tf.is_zero() {
                out.push(tf);
            }
        }
    }
    Ok(out)
}

#[derive(Clone, Debug)]
pub struct HessianCoercivityReport {
    pub x0: usize,
    /// Exact constant-coefficient infimum.
    pub symbol: SymbolMin,
    /// Smallest sampled ratio over zero-trace fields, after descent.
    pub sampled_min: f64,
    /// Smallest ratio over the laminate samples alone.
    pub laminate_min: f64,
    pub witness: TestField,
    /// Implied coercivity constant `min(symbol, sampled)`.
    pub c0: f64,
}

/// Frozen-coefficient coercivity at `x0`: the Hessian of `model` (pass a
/// modified energy to test `ẽ`) at `(F̄(x0), η̄(x0))`, minimized over sampled
/// zero-trace fields.
pub fn hessian_coercivity_fixed_point(
    model: &EnergyModel,
    bg: &BackgroundField,
    x0: usize,
    n_fields: usize,
    seed: u64,
) -> Result<HessianCoercivityReport> {
    let grid = bg.grid();
    if x0 >= grid.cells() || model.dim() != grid.dim() {
        return Err(Error::InvalidParameter(format!("cell {x0} outside the grid or dimension mismatch")));
    }
    let (f, eta) = bg.state(x0);
    model.temperature(&f, eta).map_err(|e| Error::InadmissibleState(format!("x0: {e}")))?;
    let h = vec![model.hessian(&f, eta)?];
    let symbol = symbol_min(&h[0], 1024);
    let mut fields = sample_fields(grid, BoundaryMode::ZeroTrace, n_fields.max(1), seed, std::slice::from_ref(&symbol.direction))?;
    let n_random = n_fields.max(1);
    let ratios: Vec<f64> = fields
        .par_iter()
        .map(|tf| form_parts(tf, &h, 0.0).map(|(q, d, _)| q / d))
        .collect::<Result<_>>()?;
    let laminate_min = ratios[n_random..].iter().copied().fold(f64::INFINITY, f64::min);
    let mut best = 0;
    for i in 1..ratios.len() {
        if ratios[i] < ratios[best] {
            best = i;
        }
    }
    let form = HessianForm { h: &h, shift: 0.0, penalty: 0.0 };
    let start = fields.swap_remove(best);
    let mut witness = start.clone();
    let mut sampled_min = ratios[best];
    if let Some(r) = ratio_descent(start, &form, &L2Denominator, 1.0, 30, &Constraints::default())? {
        if r.value < sampled_min {
            sampled_min = r.value;
            witness = r.field;
        }
    }
    Ok(HessianCoercivityReport { x0, c0: sampled_min.min(symbol.value), symbol, sampled_min, laminate_min, witness })
}

#[derive(Clone, Debug)]
pub struct DelocalizedReport {
    pub delta: f64,
    /// `min_x` of the frozen-coefficient symbol over the background.
    pub c: f64,
    /// `c(1-δ)²`.
    pub c_prime: f64,
    /// Smallest penalty making the inequality hold on the truncated Fourier
    /// space, with `ψ` eliminated pointwise.
    pub c_star: f64,
    pub fourier_modes: usize,
    /// `(C_pen, min over sampled fields of margin / ∫(|∇φ|²+ψ²), violations)`.
    pub candidates: Vec<(f64, f64, usize)>,
    pub smallest_feasible: Option<f64>,
    /// Worst normalized margin at the smallest feasible candidate (or the
    /// largest candidate if none is feasible).
    pub worst_margin: f64,
}

/// Fourier cutoff for the exact penalty.
const FOURIER_CUTOFF: i64 = 6;

/// Scalar real Fourier basis with `|k|∞ ≤ K`, orthonormal in the mean inner
/// product on the grid: values and gradients at cell centers.
fn fourier_basis(grid: crate::fields::Grid, cutoff: i64) -> Vec<(Vec<f64>, Vec<Vec<f64>>)> {
    let d = grid.dim();
    let side = 2 * cutoff + 1;
    let mut ks: Vec<Vec<i64>> = Vec::new();
    for code in 0..side.pow(d as u32) {
        let mut rem = code;
        let k: Vec<i64> = (0..d)
            .map(|_| {
                let v = rem % side - cutoff;
                rem /= side;
                v
            })
            .collect();
        // one representative of ±k
        if k.iter().find(|v| **v != 0).map_or(false, |v| *v > 0) {
            ks.push(k);
        }
    }
    let cells = grid.cells();
    let mut out = Vec::with_capacity(2 * ks.len());
    for k in &ks {
        for kind in 0..2 {
            let mut val = vec![0.0; cells];
            let mut grad = vec![vec![0.0; d]; cells];
            for c in 0..cells {
                let x = grid.center(c);
                let arg = 2.0 * PI * (0..d).map(|a| k[a] as f64 * x[a]).sum::<f64>();
                let (s, co) = arg.sin_cos();
                let sq2 = std::f64::consts::SQRT_2;
                let (v, dv) = if kind == 0 { (sq2 * co, -sq2 * s) } else { (sq2 * s, sq2 * co) };
                val[c] = v;
                for a in 0..d {
                    grad[c][a] = 2.0 * PI * k[a] as f64 * dv;
                }
            }
            out.push((val, grad));
        }
    }
    out
}

/// Smallest `C ≥ 0` with `∫ ∇φ : M(x) ∇φ + C ∫|φ|² ≥ 0` on the truncated
/// basis, `M = e_FF - c'I - e_Fη⊗e_Fη / (e_ηη - c')`.
fn exact_penalty(h: &[HessianBlock], grid: crate::fields::Grid, c_prime: f64, cutoff: i64) -> (f64, usize) {
    let d = grid.dim();
    let m = d * d;
    if h.iter().any(|b| b.eta_eta - c_prime <= 0.0) {
        return (f64::INFINITY, 0);
    }
    let basis = fourier_basis(grid, cutoff);
    let nf = basis.len();
    let nb = d * nf;
    let cells = grid.cells();
    // rows (cell, iα), columns (i, j): ∂_α g_j on row block i
    let mut b = DMatrix::<f64>::zeros(cells * m, nb);
    let mut mb = DMatrix::<f64>::zeros(cells * m, nb);
    for c in 0..cells {
        let hc = &h[c];
        let denom = hc.eta_eta - c_prime;
        let mut mc = vec![0.0; m * m];
        for r in 0..m {
            for s in 0..m {
                mc[r * m + s] = hc.ff[r * m + s] - hc.f_eta.as_slice()[r] * hc.f_eta.as_slice()[s] / denom
                    - if r == s { c_prime } else { 0.0 };
            }
        }
        for i in 0..d {
            for (j, (_, grad)) in basis.iter().enumerate() {
                let col = i * nf + j;
                for al in 0..d {
                    b[(c * m + i * d + al, col)] = grad[c][al];
                }
                for r in 0..m {
                    let v: f64 = (0..d).map(|al| mc[r * m + i * d + al] * grad[c][al]).sum();
                    mb[(c * m + r, col)] = v;
                }
            }
        }
    }
    let mut k = b.transpose() * mb;
    k /= cells as f64;
    let k = (&k + k.transpose()) * 0.5;
    let lmin = SymmetricEigen::new(k).eigenvalues.min();
    ((-lmin).max(0.0), nb)
}

/// For each `C_pen`, checks `∫ L(x)[w,w] ≥ c(1-δ)² ∫|w|² - C_pen ∫|φ|²`,
/// `w = (∇φ, ψ)`, over sampled periodic fields; also computes the exact
/// penalty on a truncated Fourier space.
pub fn delocalized_hessian_check(
    model: &EnergyModel,
    bg: &BackgroundField,
    c_pen_grid: &[f64],
    n_fields: usize,
    seed: u64,
) -> Result<DelocalizedReport> {
    bg.validate(model)?;
    if c_pen_grid.is_empty() || c_pen_grid.iter().any(|c| !(*c >= 0.0)) {
        return Err(Error::InvalidParameter("penalty grid must be nonempty and nonnegative".into()));
    }
    let mut grid_vals = c_pen_grid.to_vec();
    grid_vals.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let grid = bg.grid();
    let h: Vec<HessianBlock> = (0..grid.cells())
        .map(|c| {
            let (f, eta) = bg.state(c);
            model.hessian(&f, eta)
        })
        .collect::<Result<_>>()?;
    let symbols: Vec<SymbolMin> = h.par_iter().map(|b| symbol_min(b, 256)).collect();
    let mut worst_cell = 0;
    for (i, s) in symbols.iter().enumerate() {
        if s.value < symbols[worst_cell].value {
            worst_cell = i;
        }
    }
    let c = symbols[worst_cell].value;
    let delta = DELOCALIZATION_DELTA;
    let c_prime = c * (1.0 - delta) * (1.0 - delta);
    let (c_star, fourier_modes) = if c > 0.0 { exact_penalty(&h, grid, c_prime, FOURIER_CUTOFF) } else { (f64::INFINITY, 0) };

    let fields = sample_fields(grid, BoundaryMode::Periodic, n_fields.max(1), seed, std::slice::from_ref(&symbols[worst_cell].direction))?;
    let parts: Vec<(f64, f64, f64)> = fields.par_iter().map(|tf| form_parts(tf, &h, c_prime)).collect::<Result<_>>()?;
    let mut candidates = Vec::new();
    let mut smallest = None;
    for &cp in &grid_vals {
        let mut worst = f64::INFINITY;
        let mut viol = 0;
        for (a, den, p) in &parts {
            let r = (a + cp * p) / den;
            worst = worst.min(r);
            if r < -1e-10 {
                viol += 1;
            }
        }
        candidates.push((cp, worst, viol));
        if smallest.is_none() && viol == 0 && cp >= c_star * (1.0 - 1e-9) {
            smallest = Some(cp);
        }
    }
    let worst_margin = match smallest {
        Some(cp) => candidates.iter().find(|x| x.0 == cp).unwrap().1,
        None => candidates.last().unwrap().1,
    };
    Ok(DelocalizedReport { delta, c, c_prime, c_star, fourier_modes, candidates, smallest_feasible: smallest, worst_margin })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::constitutive::{tilde_energy, Quadratic, RankOneDefective};
    use crate::fields::make_grid;
    use crate::tensor::Mat;

    #[test]
    fn symbol_of_identity_hessian_is_one() {
        let h = Quadratic::model(2, 1.0).hessian(&Mat::zeros(2), 0.0).unwrap();
        assert!((symbol_min(&h, 64).value - 1.0).abs() < 1e-12);
    }

    #[test]
    fn tilde_quadratic_fixed_point() {
        let g = make_grid(2, 32).unwrap();
        let m = tilde_energy(&Quadratic::model(2, 1.0), 0.1, 0.1).unwrap();
        let bg = BackgroundField::constant(g, &Mat::zeros(2), 0.0).unwrap();
        let r = hessian_coercivity_fixed_point(&m, &bg, 0, 4, 1).unwrap();
        assert!((r.sampled_min - 0.6).abs() < 1e-2, "{}", r.sampled_min);
        assert!((r.symbol.value - 0.6).abs() < 1e-12);
    }

    #[test]
    fn defect_gives_negative_laminates() {
        let g = make_grid(2, 32).unwrap();
        let m = RankOneDefective::model(2, 2.0, &[1.0, 0.0], &[0.0, 1.0], 1.0).unwrap();
        let bg = BackgroundField::constant(g, &Mat::zeros(2), 0.0).unwrap();
        let r = hessian_coercivity_fixed_point(&m, &bg, 0, 4, 1).unwrap();
        assert!(r.laminate_min < 0.0 && r.symbol.value < 0.0);
    }

    #[test]
    fn constant_coefficients_need_no_penalty() {
        let g = make_grid(2, 16).unwrap();
        let m = Quadratic::model(2, 1.0);
        let bg = BackgroundField::constant(g, &Mat::zeros(2), 0.0).unwrap();
        let r = delocalized_hessian_check(&m, &bg, &[0.0, 1.0], 4, 2).unwrap();
        assert_eq!(r.smallest_feasible, Some(0.0));
        assert!(r.c_star < 1e-10);
    }
}
