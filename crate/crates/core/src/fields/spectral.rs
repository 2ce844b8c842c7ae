//! FFT-based derivatives, Helmholtz projection and potential recovery.
//!
//! The Nyquist wavenumber is treated as zero in every differential operator so
//! that derivatives of real fields stay real and the gradient, the divergence
//! and the curl-free projector all share one effective wavevector.

use std::cell::RefCell;
use std::f64::consts::PI;

use rustfft::num_complex::Complex64;
use rustfft::FftPlanner;

use super::{Grid, GridField, Rank};
use crate::error::{Error, Result};

thread_local! {
    static PLANNER: RefCell<FftPlanner<f64>> = RefCell::new(FftPlanner::new());
}

fn fft_nd(grid: Grid, buf: &mut [Complex64], inverse: bool) {
    let n = grid.n();
    let cells = grid.cells();
    let fft = PLANNER.with(|p| {
        let mut p = p.borrow_mut();
        if inverse {
            p.plan_fft_inverse(n)
        } else {
            p.plan_fft_forward(n)
        }
    });
    let mut lines = vec![Complex64::new(0.0, 0.0); cells];
    let mut scratch = vec![Complex64::new(0.0, 0.0); fft.get_inplace_scratch_len()];
    for axis in 0..grid.dim() {
        let stride = n.pow(axis as u32);
        // Gather every line along `axis` into a contiguous block.
        let mut k = 0;
        for c in 0..cells {
            if (c / stride) % n == 0 {
                for j in 0..n {
                    lines[k] = buf[c + j * stride];
                    k += 1;
                }
            }
        }
        fft.process_with_scratch(&mut lines, &mut scratch);
        let mut k = 0;
        for c in 0..cells {
            if (c / stride) % n == 0 {
                for j in 0..n {
                    buf[c + j * stride] = lines[k];
                    k += 1;
                }
            }
        }
    }
    if inverse {
        let s = 1.0 / cells as f64;
        buf.iter_mut().for_each(|z| *z *= s);
    }
}

/// Effective integer wavenumber of FFT index `j`; zero at the Nyquist index.
#[inline]
pub(crate) fn wavenumber(j: usize, n: usize) -> f64 {
    if 2 * j == n {
        0.0
    } else if j < n / 2 {
        j as f64
    } else {
        j as f64 - n as f64
    }
}

fn wavevector(grid: Grid, c: usize) -> [f64; 3] {
    let m = grid.multi_index(c);
    let mut k = [0.0; 3];
    for a in 0..grid.dim() {
        k[a] = wavenumber(m[a], grid.n());
    }
    k
}

fn forward(grid: Grid, values: impl Iterator<Item = f64>) -> Vec<Complex64> {
    let mut buf: Vec<Complex64> = values.map(|v| Complex64::new(v, 0.0)).collect();
    fft_nd(grid, &mut buf, false);
    buf
}

fn inverse_real(grid: Grid, mut buf: Vec<Complex64>) -> Vec<f64> {
    fft_nd(grid, &mut buf, true);
    buf.into_iter().map(|z| z.re).collect()
}

fn component_hat(u: &GridField, k: usize) -> Vec<Complex64> {
    let nc = u.ncomp();
    forward(u.grid(), u.data().iter().skip(k).step_by(nc).copied())
}

/// Spectral derivative of one scalar component along `axis`.
pub fn spectral_derivative(grid: Grid, values: &[f64], axis: usize) -> Result<Vec<f64>> {
    if values.len() != grid.cells() {
        return Err(Error::GridMismatch("component length differs from cell count".into()));
    }
    if axis >= grid.dim() {
        return Err(Error::InvalidParameter(format!("axis {axis} out of range")));
    }
    let mut hat = forward(grid, values.iter().copied());
    for (c, z) in hat.iter_mut().enumerate() {
        let k = wavevector(grid, c)[axis];
        *z *= Complex64::new(0.0, 2.0 * PI * k);
    }
    Ok(inverse_real(grid, hat))
}

/// Gradient of a scalar (giving a vector) or of a vector (giving the matrix
/// `G_{iα} = ∂_α u_i`).
pub fn spectral_gradient(u: &GridField) -> Result<GridField> {
    let grid = u.grid();
    let d = grid.dim();
    if !u.is_finite() {
        return Err(Error::NonFinite("spectral_gradient input".into()));
    }
    let (rows, rank) = match u.rank() {
        Rank::Scalar => (1, Rank::Vector),
        Rank::Vector => (d, Rank::Matrix),
        Rank::Matrix => return Err(Error::RankMismatch("gradient of a matrix field is not supported".into())),
    };
    let mut out = GridField::zeros(grid, rank);
    for i in 0..rows {
        let hat = component_hat(u, i);
        for a in 0..d {
            let mut h = hat.clone();
            for (c, z) in h.iter_mut().enumerate() {
                let k = wavevector(grid, c)[a];
                *z *= Complex64::new(0.0, 2.0 * PI * k);
            }
            out.set_component(i * d + a, &inverse_real(grid, h));
        }
    }
    Ok(out)
}

/// Divergence of a vector (giving a scalar) or row-wise divergence of a
/// matrix, `(div M)_i = ∂_α M_{iα}`. Minus the adjoint of `spectral_gradient`.
pub fn divergence(u: &GridField) -> Result<GridField> {
    let grid = u.grid();
    let d = grid.dim();
    let (rows, rank) = match u.rank() {
        Rank::Vector => (1, Rank::Scalar),
        Rank::Matrix => (d, Rank::Vector),
        Rank::Scalar => return Err(Error::RankMismatch("divergence of a scalar field".into())),
    };
    let mut out = GridField::zeros(grid, rank);
    for i in 0..rows {
        let mut acc = vec![Complex64::new(0.0, 0.0); grid.cells()];
        for a in 0..d {
            let hat = component_hat(u, i * d + a);
            for (c, z) in hat.iter().enumerate() {
                let k = wavevector(grid, c)[a];
                acc[c] += z * Complex64::new(0.0, 2.0 * PI * k);
            }
        }
        out.set_component(i, &inverse_real(grid, acc));
    }
    Ok(out)
}

fn rows_of(u: &GridField) -> Result<usize> {
    match u.rank() {
        Rank::Matrix => Ok(u.grid().dim()),
        Rank::Vector => Ok(1),
        Rank::Scalar => Err(Error::RankMismatch("expected a vector or matrix field".into())),
    }
}

/// Row-wise L2-orthogonal projection onto gradients, keeping the mean.
pub fn helmholtz_curl_free(v: &GridField) -> Result<GridField> {
    let grid = v.grid();
    let d = grid.dim();
    let rows = rows_of(v)?;
    if !v.is_finite() {
        return Err(Error::NonFinite("helmholtz_curl_free input".into()));
    }
    let mut out = GridField::zeros(grid, v.rank());
    for i in 0..rows {
        let hats: Vec<Vec<Complex64>> = (0..d).map(|a| component_hat(v, i * d + a)).collect();
        let mut proj: Vec<Vec<Complex64>> = hats.clone();
        for c in 0..grid.cells() {
            if c == 0 {
                continue;
            }
            let k = wavevector(grid, c);
            let k2: f64 = k[..d].iter().map(|x| x * x).sum();
            if k2 == 0.0 {
                for p in proj.iter_mut() {
                    p[c] = Complex64::new(0.0, 0.0);
                }
                continue;
            }
            let mut kv = Complex64::new(0.0, 0.0);
            for a in 0..d {
                kv += hats[a][c] * k[a];
            }
            for a in 0..d {
                proj[a][c] = kv * (k[a] / k2);
            }
        }
        for (a, p) in proj.into_iter().enumerate() {
            out.set_component(i * d + a, &inverse_real(grid, p));
        }
    }
    Ok(out)
}

/// Zero-mean potential `y` with `∇y = P_curl(F - mean F)`, row by row.
pub fn recover_potential(f: &GridField) -> Result<GridField> {
    let grid = f.grid();
    let d = grid.dim();
    let rows = rows_of(f)?;
    if !f.is_finite() {
        return Err(Error::NonFinite("recover_potential input".into()));
    }
    let rank = if f.rank() == Rank::Matrix { Rank::Vector } else { Rank::Scalar };
    let mut out = GridField::zeros(grid, rank);
    for i in 0..rows {
        let hats: Vec<Vec<Complex64>> = (0..d).map(|a| component_hat(f, i * d + a)).collect();
        let mut y = vec![Complex64::new(0.0, 0.0); grid.cells()];
        for (c, yc) in y.iter_mut().enumerate().skip(1) {
            let k = wavevector(grid, c);
            let k2: f64 = k[..d].iter().map(|x| x * x).sum();
            if k2 == 0.0 {
                continue;
            }
            let mut kv = Complex64::new(0.0, 0.0);
            for a in 0..d {
                kv += hats[a][c] * k[a];
            }
            // ŷ = (k·F̂) / (2πi |k|^2)
            *yc = kv * Complex64::new(0.0, -1.0 / (2.0 * PI * k2));
        }
        out.set_component(i, &inverse_real(grid, y));
    }
    Ok(out)
}

/// Max-norm of the spectral curl `∂_α F_{iβ} - ∂_β F_{iα}` over rows and axis pairs.
pub fn curl_residual(f: &GridField) -> Result<f64> {
    let grid = f.grid();
    let d = grid.dim();
    let rows = rows_of(f)?;
    let mut worst = 0.0_f64;
    for i in 0..rows {
        for a in 0..d {
            for b in (a + 1)..d {
                let dab = spectral_derivative(grid, &f.component(i * d + b), a)?;
                let dba = spectral_derivative(grid, &f.component(i * d + a), b)?;
                for (x, y) in dab.iter().zip(&dba) {
                    worst = worst.max((x - y).abs());
                }
            }
        }
    }
    Ok(worst)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fields::make_grid;

    #[test]
    fn derivative_of_sine_is_exact() {
        let g = make_grid(1, 8).unwrap();
        let u = GridField::scalar_from_fn(g, |x| (2.0 * PI * x[0]).sin());
        let du = spectral_gradient(&u).unwrap();
        for c in 0..g.cells() {
            let x = g.center(c)[0];
            assert!((du.cell(c)[0] - 2.0 * PI * (2.0 * PI * x).cos()).abs() < 1e-12);
        }
    }

    #[test]
    fn constant_has_zero_gradient() {
        let g = make_grid(2, 8).unwrap();
        let u = GridField::scalar_from_fn(g, |_| 3.5);
        assert!(spectral_gradient(&u).unwrap().max_abs() < 1e-13);
    }

    #[test]
    fn potential_of_cosine_profile() {
        let g = make_grid(1, 32).unwrap();
        let f = GridField::from_fn(g, Rank::Matrix, |x, o| o[0] = 1.0 + (2.0 * PI * x[0]).cos());
        let y = recover_potential(&f).unwrap();
        for c in 0..g.cells() {
            let x = g.center(c)[0];
            assert!((y.cell(c)[0] - (2.0 * PI * x).sin() / (2.0 * PI)).abs() < 1e-12);
        }
    }

    #[test]
    fn projection_keeps_mean_and_kills_rotation() {
        let g = make_grid(2, 16).unwrap();
        // Row 0 is a rotation field (divergence free), row 1 a constant.
        let v = GridField::from_fn(g, Rank::Matrix, |x, o| {
            let s = (2.0 * PI * x[0]).sin() * (2.0 * PI * x[1]).sin();
            let cxs = (2.0 * PI * x[0]).cos() * (2.0 * PI * x[1]).sin();
            let sxc = (2.0 * PI * x[0]).sin() * (2.0 * PI * x[1]).cos();
            let _ = s;
            o[0] = sxc;
            o[1] = -cxs;
            o[2] = 2.0;
            o[3] = -1.0;
        });
        let p = helmholtz_curl_free(&v).unwrap();
        for c in 0..g.cells() {
            let z = p.cell(c);
            assert!(z[0].abs() < 1e-12 && z[1].abs() < 1e-12);
            assert!((z[2] - 2.0).abs() < 1e-12 && (z[3] + 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn divergence_is_minus_adjoint_of_gradient() {
        let g = make_grid(2, 8).unwrap();
        let u = GridField::scalar_from_fn(g, |x| (2.0 * PI * x[0]).cos() + x[1] * (1.0 - x[1]));
        let w = GridField::from_fn(g, Rank::Vector, |x, o| {
            o[0] = (x[0] * 7.0).sin();
            o[1] = (x[1] * 3.0 + x[0]).cos();
        });
        let lhs = spectral_gradient(&u).unwrap().inner(&w).unwrap();
        let rhs = -u.inner(&divergence(&w).unwrap()).unwrap();
        assert!((lhs - rhs).abs() < 1e-12);
    }
}
